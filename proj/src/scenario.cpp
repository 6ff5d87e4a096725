#include "pixground/scenario.hpp"

#include <fstream>
#include <sstream>

#include "pixground/error.hpp"

namespace pixground {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::schema, "scenario: " + what); }

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad(where + " is missing \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad(where + " has an invalid \"" + key + "\"");
  }
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) bad("top level must be an object");
  Scenario sc;
  sc.id = j.value("id", std::string("scenario"));
  sc.seed = j.value("seed", std::uint64_t{0});
  sc.feature_dim = j.value("feature_dim", 8);
  sc.max_tokens = j.value("max_tokens", 512);
  sc.question = field<std::string>(j, "question", "scenario");
  if (sc.feature_dim < 1) bad("feature_dim must be >= 1");

  if (!j.contains("images") || !j.at("images").is_array() || j.at("images").empty()) {
    bad("\"images\" must be a nonempty array");
  }
  for (std::size_t i = 0; i < j.at("images").size(); ++i) {
    const auto& im = j.at("images")[i];
    const std::string where = "images[" + std::to_string(i) + "]";
    ScenarioImage img;
    img.width = field<int>(im, "width", where);
    img.height = field<int>(im, "height", where);
    img.tile_size = im.value("tile_size", kDefaultTileSize);
    img.max_tiles = im.value("max_tiles", kDefaultMaxTiles);
    img.tokens_per_side = im.value("tokens_per_side", kDefaultTokensPerSide);
    img.timestamp = im.value("timestamp", "t" + std::to_string(i + 1));
    const auto mods = im.value("modalities", std::vector<std::string>{"optical"});
    img.optical = false;
    for (const auto& m : mods) {
      (parse_modality(m) == Modality::optical ? img.optical : img.sar) = true;
    }
    if (!img.optical && !img.sar) bad(where + " declares no modality");
    sc.images.push_back(img);
  }

  if (j.contains("masks")) {
    for (std::size_t i = 0; i < j.at("masks").size(); ++i) {
      const auto& m = j.at("masks")[i];
      const std::string where = "masks[" + std::to_string(i) + "]";
      const int image = m.value("image", 1);
      if (image < 1 || image > static_cast<int>(sc.images.size())) bad(where + " refers to a missing image");
      BinaryMask mask = rle_decode(field<RleMask>(m, "mask", where));
      const auto& img = sc.images[std::size_t(image - 1)];
      if (mask.width() != img.width || mask.height() != img.height) bad(where + " does not match its image size");
      sc.masks.push_back({field<std::string>(m, "state", where), image, std::move(mask)});
    }
  }

  if (!j.contains("script")) bad("missing \"script\"");
  const auto& script = j.at("script");
  if (script.is_string()) {
    const auto states = j.value("seg_states", std::vector<std::string>{});
    std::size_t next_state = 0;
    std::istringstream in(script.get<std::string>());
    for (std::string tok; in >> tok;) {
      ScriptEntry e{tok, std::nullopt};
      if (tok == "[SEG]" && next_state < states.size()) e.state = SegPromptState{states[next_state++]};
      sc.script.push_back(std::move(e));
    }
  } else if (script.is_array()) {
    for (std::size_t i = 0; i < script.size(); ++i) {
      const auto& s = script[i];
      if (s.is_string()) {
        sc.script.push_back({s.get<std::string>(), std::nullopt});
      } else if (s.is_object()) {
        const std::string where = "script[" + std::to_string(i) + "]";
        ScriptEntry e{field<std::string>(s, "token", where), std::nullopt};
        if (s.contains("state")) e.state = SegPromptState{s.at("state").get<std::string>()};
        sc.script.push_back(std::move(e));
      } else {
        bad("script[" + std::to_string(i) + "] must be a string or an object");
      }
    }
  } else {
    bad("\"script\" must be a string or an array");
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open scenario " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, "scenario " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

StaticFeatureProvider make_feature_provider(const Scenario& scenario) {
  std::vector<StaticFeatureProvider::Image> images;
  for (std::size_t i = 0; i < scenario.images.size(); ++i) {
    const auto& s = scenario.images[i];
    StaticFeatureProvider::Image img;
    img.layout = plan_patches(s.width, s.height, s.tile_size, s.max_tiles, s.tokens_per_side);
    const int idx = static_cast<int>(i + 1);
    if (s.optical) {
      img.optical = synthetic_features(img.layout.token_count(), scenario.feature_dim, scenario.seed, idx,
                                       Modality::optical);
    }
    if (s.sar) {
      img.sar = synthetic_features(img.layout.token_count(), scenario.feature_dim, scenario.seed, idx,
                                   Modality::sar);
    }
    images.push_back(std::move(img));
  }
  return StaticFeatureProvider(std::move(images));
}

ReasoningTrace run_scenario(const Scenario& scenario, int token_cap) {
  const StaticFeatureProvider features = make_feature_provider(scenario);
  ScriptedGenerator generator(scenario.script, scenario.feature_dim, scenario.seed);
  ScriptedMaskDecoder decoder(scenario.masks);
  GenerationConfig cfg;
  cfg.max_tokens = scenario.max_tokens;
  cfg.token_cap = token_cap;
  ReasoningTrace trace = run_inference(generator, decoder, features, scenario.question, cfg);
  trace.id = scenario.id;
  return trace;
}

}  // namespace pixground
