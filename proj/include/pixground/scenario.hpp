#pragma once

// Scenario files drive a complete inference run with scripted components:
// image layouts and modalities, synthetic features, the generator's token
// script and the masks the decoder returns for each prompt.
//
//   {
//     "id": "single-image", "seed": 7, "feature_dim": 8, "max_tokens": 256,
//     "question": "What percentage of the image is covered by water?",
//     "images": [{"width": 64, "height": 64, "tile_size": 64,
//                 "modalities": ["optical", "sar"], "timestamp": "t1"}],
//     "masks": [{"state": "water", "image": 1, "mask": {RLE}}],
//     "script": ["<think>", {"token": "[SEG]", "state": "water"}, ...]
//   }
//
// "script" may also be a single whitespace-separated string, in which case
// the prompts for its [SEG] tokens come from "seg_states" in order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pixground/runtime.hpp"

namespace pixground {

struct ScenarioImage {
  int width = 0;
  int height = 0;
  int tile_size = kDefaultTileSize;
  int max_tiles = kDefaultMaxTiles;
  int tokens_per_side = kDefaultTokensPerSide;
  bool optical = true;
  bool sar = false;
  std::string timestamp;
};

struct Scenario {
  std::string id;
  std::uint64_t seed = 0;
  int feature_dim = 8;
  int max_tokens = 512;
  std::string question;
  std::vector<ScenarioImage> images;
  std::vector<ScriptedMaskDecoder::Entry> masks;
  std::vector<ScriptEntry> script;
};

/// Throws Error{schema} naming the offending field.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

StaticFeatureProvider make_feature_provider(const Scenario& scenario);

/// Runs the scenario with `token_cap`; max_tokens comes from the scenario.
ReasoningTrace run_scenario(const Scenario& scenario, int token_cap = kDefaultTokenCap);

}  // namespace pixground
