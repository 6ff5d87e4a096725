#pragma once

// The interleaved inference loop: autoregressive text generation where every
// [SEG] token triggers mask decoding, token selection and injection of the
// masked visual features back into the generation context.
//
// Model components are interfaces. Images are numbered from 1, matching the
// "Image: t<k>" temporal indicators; a [SEG] with no preceding indicator goes
// to image 1.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pixground/grid.hpp"
#include "pixground/modality.hpp"
#include "pixground/raster.hpp"

namespace pixground {

/// Opaque prompt handed from the generator to the mask decoder; stands in for
/// the hidden state of the [SEG] token.
struct SegPromptState {
  std::string value;
  friend bool operator==(const SegPromptState&, const SegPromptState&) = default;
};

struct GeneratedToken {
  std::string token;
  std::optional<SegPromptState> seg_state;
};

struct InjectedBlock {
  int step = 0;
  FeatureSequence rows;
};

using ContextItem = std::variant<std::string, InjectedBlock>;

struct GenerationContext {
  std::string prompt;
  std::vector<ContextItem> items;
};

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual GeneratedToken step(const GenerationContext& context) = 0;
  virtual std::string_view end_token() const = 0;
  /// Text encoder: one embedding row per question token.
  virtual TextEmbeddings embed(std::string_view text) const = 0;
};

class MaskDecoder {
 public:
  virtual ~MaskDecoder() = default;
  virtual BinaryMask decode(const SegPromptState& state, int image_index) = 0;
};

class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual int image_count() const = 0;
  virtual PatchLayout layout(int image_index) const = 0;
  virtual bool has_modality(int image_index, Modality modality) const = 0;
  virtual const TokenFeatures& features(int image_index, Modality modality) const = 0;
};

struct GenerationConfig {
  int max_tokens = 512;
  int token_cap = kDefaultTokenCap;
  std::string seg_token = "[SEG]";
  std::string think_open = "<think>";
  std::string think_close = "</think>";
  std::string answer_open = "<answer>";
  std::string answer_close = "</answer>";
};

struct TextEvent {
  std::string token;
};

struct SegEvent {
  int step = 0;
  int image_index = 1;
  RleMask mask;
  TokenSelection selection;
  std::optional<std::vector<Modality>> modality;  // only when both modalities exist
};

struct InjectEvent {
  int step = 0;
  FeatureSequence rows;
};

using TraceEvent = std::variant<TextEvent, SegEvent, InjectEvent>;

struct ReasoningTrace {
  std::string id;
  std::vector<TraceEvent> events;
  std::string answer;
  bool truncated = false;      // max_tokens reached before the end token
  bool seg_in_answer = false;  // a [SEG] appeared inside the answer tags

  /// Generated text tokens joined by single spaces.
  std::string text() const;
  std::vector<const SegEvent*> seg_events() const;
};

nlohmann::json to_json(const ReasoningTrace& trace);
ReasoningTrace trace_from_json(const nlohmann::json& j);
/// Compact single-line JSON; byte-stable for identical traces.
std::string serialize_trace(const ReasoningTrace& trace);

/// Structural violations of the trace contract: Seg immediately followed by
/// exactly one Inject, consecutive steps from 1, injections within the cap,
/// no [SEG] inside the answer tags.
/// An empty result means the trace is well formed.
std::vector<std::string> check_trace(const ReasoningTrace& trace, int token_cap);

/// The last "Image: t<k>" (k >= 1) in `recent_text`, if any.
std::optional<int> parse_temporal_indicator(std::string_view recent_text);

/// System preamble followed by the user question. Throws on an empty question.
std::string assemble_prompt(std::string_view question);
extern const std::string_view kSystemPrompt;

/// Text between the first answer_open and the following answer_close, trimmed.
std::string extract_answer(std::string_view text, const GenerationConfig& cfg = {});

/// Relevance fields computed once before generation for every image that
/// carries both modalities.
struct RelevancePair {
  RelevanceField optical;
  RelevanceField sar;
};
struct PrefillScores {
  std::vector<std::optional<RelevancePair>> per_image;  // index 0 is image 1
};
PrefillScores prefill_relevance(const FeatureProvider& features, const TextEmbeddings& question);

/// What the loop injects for `mask` on `image_index`: coverage selection,
/// capped sampling and, for optical+SAR images, per-token fusion.
struct Injection {
  TokenSelection selection;
  std::optional<ModalityAssignment> assignment;
  FeatureSequence rows;
};
Injection compute_injection(const BinaryMask& mask, int image_index, const FeatureProvider& features,
                            const PrefillScores& scores, int token_cap);

ReasoningTrace run_inference(TextGenerator& generator, MaskDecoder& decoder,
                             const FeatureProvider& features, std::string_view question,
                             const GenerationConfig& cfg = {});

// Scripted stand-ins for the model components.

struct ScriptEntry {
  std::string token;
  std::optional<SegPromptState> state;
};

/// Replays a fixed token script; emits the end token once the script runs out.
/// The script position is the number of text tokens already in the context,
/// so the output depends on the context alone.
class ScriptedGenerator final : public TextGenerator {
 public:
  ScriptedGenerator(std::vector<ScriptEntry> script, int embedding_dim, std::uint64_t seed = 0);

  GeneratedToken step(const GenerationContext& context) override;
  std::string_view end_token() const override { return "<eos>"; }
  /// Deterministic per-word embeddings seeded by a hash of the word.
  TextEmbeddings embed(std::string_view text) const override;

  /// Context sizes observed by each step() call, in call order.
  const std::vector<std::size_t>& observed_context_sizes() const { return observed_; }

 private:
  std::vector<ScriptEntry> script_;
  int dim_;
  std::uint64_t seed_;
  std::vector<std::size_t> observed_;
};

/// Looks masks up by (prompt state, image index).
class ScriptedMaskDecoder final : public MaskDecoder {
 public:
  struct Entry {
    std::string state;
    int image_index = 1;
    BinaryMask mask;
  };
  explicit ScriptedMaskDecoder(std::vector<Entry> entries) : entries_(std::move(entries)) {}
  BinaryMask decode(const SegPromptState& state, int image_index) override;

 private:
  std::vector<Entry> entries_;
};

/// Fixed per-image layouts and per-modality feature matrices.
class StaticFeatureProvider final : public FeatureProvider {
 public:
  struct Image {
    PatchLayout layout;
    std::optional<TokenFeatures> optical;
    std::optional<TokenFeatures> sar;
  };
  explicit StaticFeatureProvider(std::vector<Image> images);

  int image_count() const override { return static_cast<int>(images_.size()); }
  PatchLayout layout(int image_index) const override;
  bool has_modality(int image_index, Modality modality) const override;
  const TokenFeatures& features(int image_index, Modality modality) const override;

 private:
  const Image& image(int image_index) const;
  std::vector<Image> images_;
};

/// Pseudo-random features in [-1, 1) that depend only on (seed, image,
/// modality, shape).
TokenFeatures synthetic_features(int tokens, int dim, std::uint64_t seed, int image_index,
                                 Modality modality);

std::uint64_t fnv1a(std::string_view text) noexcept;

}  // namespace pixground
