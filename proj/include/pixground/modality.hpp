#pragma once

// Text-guided optical/SAR relevance scoring and per-token modality fusion.

#include <string_view>
#include <vector>

#include "pixground/grid.hpp"

namespace pixground {

enum class Modality : std::uint8_t { optical, sar };

std::string_view modality_name(Modality m);
/// Accepts "optical"/"opt" and "sar". Throws Error{schema} otherwise.
Modality parse_modality(std::string_view name);

struct RelevanceField {
  Modality modality = Modality::optical;
  std::vector<double> beta;  // one score per visual token, sums to 1
};

/// beta_j = mean over text tokens l of softmax_j(<v_j, q_l> / sqrt(D)).
/// The softmax runs over visual tokens for each text token.
RelevanceField relevance_scores(const TokenFeatures& visual, const TextEmbeddings& text,
                                Modality modality);

struct ModalityAssignment {
  TokenSelection selection;
  std::vector<Modality> choice;  // parallel to selection.indices
};

/// Optical wins only on a strictly higher score; ties fall to SAR.
ModalityAssignment select_modality(const RelevanceField& optical, const RelevanceField& sar,
                                   const TokenSelection& sel);

FeatureSequence fuse_features(const ModalityAssignment& assign, const TokenFeatures& optical,
                              const TokenFeatures& sar, const TokenSelection& sel);

}  // namespace pixground
