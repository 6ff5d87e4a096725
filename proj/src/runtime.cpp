#include "pixground/runtime.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <regex>
#include <sstream>

#include "pixground/error.hpp"

namespace pixground {

const std::string_view kSystemPrompt =
    "A conversation between User and Assistant. The user asks a question, and the Assistant "
    "solves it. The Assistant first thinks about the reasoning process in their mind, generating "
    "segmentation masks when needed using [SEG] tokens, and then provides the user a concise final "
    "answer in a short word or phrase. The reasoning process and answer are enclosed within "
    "<think> </think> and <answer> </answer> tags, respectively, i.e., <think> reasoning process "
    "with [SEG] for segmentation </think><answer> answer here </answer>.";

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

// Maps the top 53 bits of an engine draw to [-1, 1). Only the engine output
// sequence is pinned by the standard, so the conversion is done by hand to
// keep features identical across standard libraries.
double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

std::string trim(std::string_view s) {
  auto b = s.begin();
  auto e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return std::string(b, e);
}

}  // namespace

std::string ReasoningTrace::text() const {
  std::string out;
  for (const auto& ev : events) {
    if (const auto* t = std::get_if<TextEvent>(&ev)) {
      if (!out.empty()) out += ' ';
      out += t->token;
    }
  }
  return out;
}

std::vector<const SegEvent*> ReasoningTrace::seg_events() const {
  std::vector<const SegEvent*> out;
  for (const auto& ev : events) {
    if (const auto* s = std::get_if<SegEvent>(&ev)) out.push_back(s);
  }
  return out;
}

nlohmann::json to_json(const ReasoningTrace& trace) {
  using nlohmann::json;
  json events = json::array();
  json masks = json::array();
  for (const auto& ev : trace.events) {
    if (const auto* t = std::get_if<TextEvent>(&ev)) {
      events.push_back({{"type", "text"}, {"token", t->token}});
    } else if (const auto* s = std::get_if<SegEvent>(&ev)) {
      json e{{"type", "seg"},
             {"step", s->step},
             {"image_index", s->image_index},
             {"mask", s->mask},
             {"selection", s->selection}};
      if (s->modality) {
        json flags = json::array();
        for (auto m : *s->modality) flags.push_back(modality_name(m));
        e["modality"] = std::move(flags);
      }
      events.push_back(std::move(e));
      json m = s->mask;
      m["image_index"] = s->image_index;
      masks.push_back(std::move(m));
    } else {
      const auto& inj = std::get<InjectEvent>(ev);
      json rows = json::array();
      for (int i = 0; i < inj.rows.rows; ++i) {
        const auto r = inj.rows.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
      }
      events.push_back({{"type", "inject"}, {"step", inj.step}, {"count", inj.rows.rows}, {"rows", rows}});
    }
  }
  json j{{"events", std::move(events)},
         {"answer", trace.answer},
         {"masks", std::move(masks)},
         {"truncated", trace.truncated},
         {"seg_in_answer", trace.seg_in_answer}};
  if (!trace.id.empty()) j["id"] = trace.id;
  return j;
}

ReasoningTrace trace_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("events") || !j.at("events").is_array()) {
    throw Error(ErrorCode::schema, "trace record needs an events array");
  }
  ReasoningTrace trace;
  trace.id = j.value("id", std::string{});
  trace.answer = j.value("answer", std::string{});
  trace.truncated = j.value("truncated", false);
  trace.seg_in_answer = j.value("seg_in_answer", false);
  for (const auto& e : j.at("events")) {
    const auto type = e.at("type").get<std::string>();
    if (type == "text") {
      trace.events.emplace_back(TextEvent{e.at("token").get<std::string>()});
    } else if (type == "seg") {
      SegEvent s;
      s.step = e.at("step").get<int>();
      s.image_index = e.value("image_index", 1);
      s.mask = e.at("mask").get<RleMask>();
      s.selection = e.at("selection").get<TokenSelection>();
      if (e.contains("modality")) {
        std::vector<Modality> flags;
        for (const auto& f : e.at("modality")) flags.push_back(parse_modality(f.get<std::string>()));
        s.modality = std::move(flags);
      }
      trace.events.emplace_back(std::move(s));
    } else if (type == "inject") {
      InjectEvent inj;
      inj.step = e.at("step").get<int>();
      const auto& rows = e.at("rows");
      const int n = static_cast<int>(rows.size());
      const int d = n > 0 ? static_cast<int>(rows.at(0).size()) : 0;
      inj.rows = FeatureSequence(n, d);
      for (int i = 0; i < n; ++i) {
        const auto r = rows.at(i).get<std::vector<double>>();
        if (static_cast<int>(r.size()) != d) throw Error(ErrorCode::schema, "ragged inject rows");
        std::copy(r.begin(), r.end(), inj.rows.row(i).begin());
      }
      trace.events.emplace_back(std::move(inj));
    } else {
      throw Error(ErrorCode::schema, "unknown trace event type '" + type + "'");
    }
  }
  return trace;
}

std::string serialize_trace(const ReasoningTrace& trace) { return to_json(trace).dump(); }

std::vector<std::string> check_trace(const ReasoningTrace& trace, int token_cap) {
  std::vector<std::string> problems;
  if (trace.seg_in_answer) problems.push_back("[SEG] inside the answer tags");
  int expected_step = 1;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& ev = trace.events[i];
    if (const auto* s = std::get_if<SegEvent>(&ev)) {
      if (s->step != expected_step) {
        problems.push_back("seg event " + std::to_string(i) + " has step " + std::to_string(s->step) +
                           ", expected " + std::to_string(expected_step));
      }
      expected_step = s->step + 1;
      if (!std::is_sorted(s->selection.indices.begin(), s->selection.indices.end()) ||
          std::adjacent_find(s->selection.indices.begin(), s->selection.indices.end()) !=
              s->selection.indices.end()) {
        problems.push_back("seg event " + std::to_string(i) + " selection is not strictly increasing");
      }
      if (s->modality && s->modality->size() != s->selection.size()) {
        problems.push_back("seg event " + std::to_string(i) + " modality flags do not match selection");
      }
      const auto* next = i + 1 < trace.events.size() ? std::get_if<InjectEvent>(&trace.events[i + 1]) : nullptr;
      if (next == nullptr) {
        problems.push_back("seg event " + std::to_string(i) + " is not followed by an inject event");
      } else {
        if (next->step != s->step) problems.push_back("inject after seg " + std::to_string(i) + " has wrong step");
        if (static_cast<std::size_t>(next->rows.rows) != s->selection.size()) {
          problems.push_back("inject after seg " + std::to_string(i) + " row count differs from selection");
        }
      }
    } else if (const auto* inj = std::get_if<InjectEvent>(&ev)) {
      if (i == 0 || !std::holds_alternative<SegEvent>(trace.events[i - 1])) {
        problems.push_back("inject event " + std::to_string(i) + " does not follow a seg event");
      }
      if (inj->rows.rows > token_cap) {
        problems.push_back("inject event " + std::to_string(i) + " exceeds the token cap");
      }
    }
  }
  return problems;
}

std::optional<int> parse_temporal_indicator(std::string_view recent_text) {
  static const std::regex pattern(R"(Image:\s*t(\d+))");
  std::optional<int> found;
  const std::string text(recent_text);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), pattern); it != std::sregex_iterator(); ++it) {
    const auto& digits = (*it)[1].str();
    if (digits.size() > 9) continue;
    const int k = std::stoi(digits);
    if (k >= 1) found = k;
  }
  return found;
}

std::string assemble_prompt(std::string_view question) {
  const auto q = trim(question);
  if (q.empty()) throw Error(ErrorCode::invalid_argument, "question must not be empty");
  return std::string(kSystemPrompt) + "\nUser: " + q + "\nAssistant:";
}

std::string extract_answer(std::string_view text, const GenerationConfig& cfg) {
  const auto open = text.find(cfg.answer_open);
  if (open == std::string_view::npos) return {};
  const auto start = open + cfg.answer_open.size();
  const auto close = text.find(cfg.answer_close, start);
  if (close == std::string_view::npos) return {};
  return trim(text.substr(start, close - start));
}

PrefillScores prefill_relevance(const FeatureProvider& features, const TextEmbeddings& question) {
  PrefillScores scores;
  for (int i = 1; i <= features.image_count(); ++i) {
    if (features.has_modality(i, Modality::optical) && features.has_modality(i, Modality::sar)) {
      scores.per_image.emplace_back(
          RelevancePair{relevance_scores(features.features(i, Modality::optical), question, Modality::optical),
                        relevance_scores(features.features(i, Modality::sar), question, Modality::sar)});
    } else {
      scores.per_image.emplace_back(std::nullopt);
    }
  }
  return scores;
}

Injection compute_injection(const BinaryMask& mask, int image_index, const FeatureProvider& features,
                            const PrefillScores& scores, int token_cap) {
  if (image_index < 1 || image_index > features.image_count()) {
    throw Error(ErrorCode::out_of_range, "image " + std::to_string(image_index) + " out of range 1.." +
                                             std::to_string(features.image_count()));
  }
  const PatchLayout layout = features.layout(image_index);
  const TokenMask tok = downsample_mask(mask, layout);
  Injection inj;
  inj.selection = spatial_uniform_sample(tok, token_cap);
  const bool has_opt = features.has_modality(image_index, Modality::optical);
  const bool has_sar = features.has_modality(image_index, Modality::sar);
  if (has_opt && has_sar) {
    const auto idx = static_cast<std::size_t>(image_index - 1);
    if (idx >= scores.per_image.size() || !scores.per_image[idx]) {
      throw Error(ErrorCode::invalid_argument, "no prefill relevance for optical+SAR image " +
                                                   std::to_string(image_index));
    }
    const auto& pair = *scores.per_image[idx];
    inj.assignment = select_modality(pair.optical, pair.sar, inj.selection);
    inj.rows = fuse_features(*inj.assignment, features.features(image_index, Modality::optical),
                             features.features(image_index, Modality::sar), inj.selection);
  } else {
    const Modality m = has_opt ? Modality::optical : Modality::sar;
    inj.rows = extract_features(features.features(image_index, m), inj.selection);
  }
  return inj;
}

ReasoningTrace run_inference(TextGenerator& generator, MaskDecoder& decoder, const FeatureProvider& features,
                             std::string_view question, const GenerationConfig& cfg) {
  if (features.image_count() < 1) throw Error(ErrorCode::invalid_argument, "inference needs at least one image");
  if (cfg.max_tokens < 1 || cfg.token_cap < 1) {
    throw Error(ErrorCode::invalid_argument, "max_tokens and token_cap must be >= 1");
  }

  GenerationContext context;
  context.prompt = assemble_prompt(question);
  const PrefillScores scores = prefill_relevance(features, generator.embed(question));

  ReasoningTrace trace;
  std::string text;
  int generated = 0;
  int step = 0;
  bool finished = false;
  while (generated < cfg.max_tokens) {
    GeneratedToken next = generator.step(context);
    if (next.token == generator.end_token()) {
      finished = true;
      break;
    }
    ++generated;
    if (!text.empty()) text += ' ';
    text += next.token;
    trace.events.emplace_back(TextEvent{next.token});
    context.items.emplace_back(next.token);

    if (next.token != cfg.seg_token) continue;

    ++step;
    const int image_index = parse_temporal_indicator(text).value_or(1);
    if (image_index > features.image_count()) {
      throw Error(ErrorCode::out_of_range, "temporal indicator t" + std::to_string(image_index) +
                                               " exceeds the " + std::to_string(features.image_count()) +
                                               " available images");
    }
    const BinaryMask mask = decoder.decode(next.seg_state.value_or(SegPromptState{}), image_index);
    const PatchLayout layout = features.layout(image_index);
    if (mask.width() != layout.image_width || mask.height() != layout.image_height) {
      throw Error(ErrorCode::dimension_mismatch, "decoded mask does not match image " + std::to_string(image_index));
    }
    Injection inj = compute_injection(mask, image_index, features, scores, cfg.token_cap);

    SegEvent seg{step, image_index, rle_encode(mask), inj.selection, std::nullopt};
    if (inj.assignment) seg.modality = inj.assignment->choice;
    trace.events.emplace_back(std::move(seg));
    trace.events.emplace_back(InjectEvent{step, inj.rows});
    context.items.emplace_back(InjectedBlock{step, std::move(inj.rows)});
  }
  trace.truncated = !finished;

  trace.answer = extract_answer(text, cfg);
  const auto open = text.find(cfg.answer_open);
  if (open != std::string::npos) {
    const auto close = text.find(cfg.answer_close, open);
    const auto inside = std::string_view(text).substr(open, close == std::string::npos ? std::string::npos : close - open);
    trace.seg_in_answer = inside.find(cfg.seg_token) != std::string_view::npos;
  }
  return trace;
}

ScriptedGenerator::ScriptedGenerator(std::vector<ScriptEntry> script, int embedding_dim, std::uint64_t seed)
    : script_(std::move(script)), dim_(embedding_dim), seed_(seed) {
  if (dim_ < 1) throw Error(ErrorCode::invalid_argument, "embedding dim must be >= 1");
}

GeneratedToken ScriptedGenerator::step(const GenerationContext& context) {
  observed_.push_back(context.items.size());
  const auto position = static_cast<std::size_t>(std::count_if(
      context.items.begin(), context.items.end(),
      [](const ContextItem& item) { return std::holds_alternative<std::string>(item); }));
  if (position >= script_.size()) return {std::string(end_token()), std::nullopt};
  return {script_[position].token, script_[position].state};
}

TextEmbeddings ScriptedGenerator::embed(std::string_view text) const {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) words.push_back(w);
  if (words.empty()) words.emplace_back();
  TextEmbeddings q(static_cast<int>(words.size()), dim_);
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::mt19937_64 rng(seed_ ^ fnv1a(words[i]));
    for (auto& v : q.row(static_cast<int>(i))) v = unit_interval(rng);
  }
  return q;
}

BinaryMask ScriptedMaskDecoder::decode(const SegPromptState& state, int image_index) {
  for (const auto& e : entries_) {
    if (e.state == state.value && e.image_index == image_index) return e.mask;
  }
  throw Error(ErrorCode::decoder, "no scripted mask for prompt '" + state.value + "' on image " +
                                      std::to_string(image_index));
}

StaticFeatureProvider::StaticFeatureProvider(std::vector<Image> images) : images_(std::move(images)) {
  int dim = -1;
  for (std::size_t i = 0; i < images_.size(); ++i) {
    const auto& img = images_[i];
    validate(img.layout);
    if (!img.optical && !img.sar) {
      throw Error(ErrorCode::invalid_argument, "image " + std::to_string(i + 1) + " has no modality");
    }
    for (const auto* f : {img.optical ? &*img.optical : nullptr, img.sar ? &*img.sar : nullptr}) {
      if (f == nullptr) continue;
      if (f->rows != img.layout.token_count()) {
        throw Error(ErrorCode::dimension_mismatch, "image " + std::to_string(i + 1) + " has " +
                                                       std::to_string(f->rows) + " feature rows, layout needs " +
                                                       std::to_string(img.layout.token_count()));
      }
      if (dim >= 0 && f->cols != dim) throw Error(ErrorCode::dimension_mismatch, "feature dims differ across images");
      dim = f->cols;
    }
    if (img.optical && img.sar && img.optical->rows != img.sar->rows) {
      throw Error(ErrorCode::dimension_mismatch, "optical and SAR layouts differ");
    }
  }
}

const StaticFeatureProvider::Image& StaticFeatureProvider::image(int image_index) const {
  if (image_index < 1 || image_index > image_count()) {
    throw Error(ErrorCode::out_of_range, "image " + std::to_string(image_index) + " out of range");
  }
  return images_[static_cast<std::size_t>(image_index - 1)];
}

PatchLayout StaticFeatureProvider::layout(int image_index) const { return image(image_index).layout; }

bool StaticFeatureProvider::has_modality(int image_index, Modality modality) const {
  const auto& img = image(image_index);
  return modality == Modality::optical ? img.optical.has_value() : img.sar.has_value();
}

const TokenFeatures& StaticFeatureProvider::features(int image_index, Modality modality) const {
  const auto& img = image(image_index);
  const auto& f = modality == Modality::optical ? img.optical : img.sar;
  if (!f) {
    throw Error(ErrorCode::invalid_argument, "image " + std::to_string(image_index) + " has no " +
                                                 std::string(modality_name(modality)) + " features");
  }
  return *f;
}

TokenFeatures synthetic_features(int tokens, int dim, std::uint64_t seed, int image_index, Modality modality) {
  TokenFeatures f(tokens, dim);
  std::mt19937_64 rng(seed ^ (static_cast<std::uint64_t>(image_index) * 0x9E3779B97F4A7C15ULL) ^
                      ((modality == Modality::optical ? 1ULL : 2ULL) * 0xC2B2AE3D27D4EB4FULL));
  for (auto& v : f.data) v = unit_interval(rng);
  return f;
}

}  // namespace pixground
