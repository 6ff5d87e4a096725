#include "pixground/modality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pixground/error.hpp"

namespace pixground {

std::string_view modality_name(Modality m) { return m == Modality::optical ? "optical" : "sar"; }

Modality parse_modality(std::string_view name) {
  if (name == "optical" || name == "opt") return Modality::optical;
  if (name == "sar" || name == "SAR") return Modality::sar;
  throw Error(ErrorCode::schema, "unknown modality '" + std::string(name) + "'");
}

RelevanceField relevance_scores(const TokenFeatures& visual, const TextEmbeddings& text,
                                Modality modality) {
  if (visual.cols != text.cols) {
    throw Error(ErrorCode::dimension_mismatch,
                "visual dim " + std::to_string(visual.cols) + " != text dim " + std::to_string(text.cols));
  }
  if (visual.rows < 1 || text.rows < 1 || visual.cols < 1) {
    throw Error(ErrorCode::invalid_argument, "relevance_scores needs N, L, D >= 1");
  }
  const int n = visual.rows;
  const int l_count = text.rows;
  const double scale = 1.0 / std::sqrt(static_cast<double>(visual.cols));

  // logits stored column-major (one column per text token) so each softmax
  // runs over a contiguous block.
  std::vector<double> logits(std::size_t(n) * l_count);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    const auto v = visual.row(j);
    for (int l = 0; l < l_count; ++l) {
      const auto q = text.row(l);
      double dot = 0.0;
      for (std::size_t d = 0; d < v.size(); ++d) dot += v[d] * q[d];
      logits[std::size_t(l) * n + j] = dot * scale;
    }
  }

#pragma omp parallel for schedule(static)
  for (int l = 0; l < l_count; ++l) {
    double* col = logits.data() + std::size_t(l) * n;
    const double peak = *std::max_element(col, col + n);
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      col[j] = std::exp(col[j] - peak);
      total += col[j];
    }
    for (int j = 0; j < n; ++j) col[j] /= total;
  }

  RelevanceField field{modality, std::vector<double>(std::size_t(n), 0.0)};
#pragma omp parallel for schedule(static)
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int l = 0; l < l_count; ++l) acc += logits[std::size_t(l) * n + j];
    field.beta[std::size_t(j)] = acc / l_count;
  }
  return field;
}

ModalityAssignment select_modality(const RelevanceField& optical, const RelevanceField& sar,
                                   const TokenSelection& sel) {
  if (optical.beta.size() != sar.beta.size()) {
    throw Error(ErrorCode::dimension_mismatch, "optical and SAR relevance fields differ in token count");
  }
  ModalityAssignment out{sel, {}};
  out.choice.reserve(sel.size());
  for (int j : sel.indices) {
    if (j < 0 || static_cast<std::size_t>(j) >= optical.beta.size()) {
      throw Error(ErrorCode::out_of_range, "selected token " + std::to_string(j) + " has no relevance score");
    }
    const auto k = static_cast<std::size_t>(j);
    out.choice.push_back(optical.beta[k] > sar.beta[k] ? Modality::optical : Modality::sar);
  }
  return out;
}

FeatureSequence fuse_features(const ModalityAssignment& assign, const TokenFeatures& optical,
                              const TokenFeatures& sar, const TokenSelection& sel) {
  if (optical.rows != sar.rows || optical.cols != sar.cols) {
    throw Error(ErrorCode::dimension_mismatch, "optical and SAR feature shapes differ");
  }
  if (assign.selection != sel || assign.choice.size() != sel.size()) {
    throw Error(ErrorCode::dimension_mismatch, "modality assignment is not defined on this selection");
  }
  FeatureSequence seq(static_cast<int>(sel.size()), optical.cols);
  for (std::size_t i = 0; i < sel.size(); ++i) {
    const int j = sel.indices[i];
    if (j < 0 || j >= optical.rows) {
      throw Error(ErrorCode::out_of_range, "token index " + std::to_string(j) + " out of range");
    }
    const auto src = (assign.choice[i] == Modality::optical ? optical : sar).row(j);
    std::copy(src.begin(), src.end(), seq.row(static_cast<int>(i)).begin());
  }
  return seq;
}

}  // namespace pixground
