#pragma once

// The pipelines behind the command-line tool. Each command returns a process
// exit status, prints results to `out` and diagnostics to `err`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pixground/benchforge.hpp"
#include "pixground/evalharness.hpp"
#include "pixground/grid.hpp"
#include "pixground/losses.hpp"
#include "pixground/runtime.hpp"

namespace pixground {

struct RunConfig {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::optional<std::filesystem::path> out;
  int token_cap = kDefaultTokenCap;
  double lambda_seg = kDefaultLambdaSeg;
  std::set<Task> tasks;  // empty means all

  /// Throws Error{invalid_argument} for a non-positive cap or negative weight.
  void validate() const;
};

/// Raster and footprint files of a fixture directory, sorted by name:
/// *.pgm and *.json grids are rasters, *.buildings.json are building sets,
/// *.meta.json sidecars are skipped.
struct SourceFiles {
  std::vector<std::filesystem::path> rasters;
  std::vector<std::filesystem::path> buildings;
};
SourceFiles list_sources(const std::filesystem::path& dir);

/// Candidates from every source, matched to the reference task proportions.
/// An empty task filter means the six benchmark tasks.
std::vector<BenchSample> build_benchmark(const std::filesystem::path& raster_dir, const RunConfig& cfg);

/// Re-verifies every sample against its source file in `raster_dir`;
/// returns "<id>: <problem>" lines.
std::vector<std::string> verify_benchmark(const std::vector<BenchSample>& bench,
                                          const std::filesystem::path& raster_dir);

/// A response that picks the correct letter, optionally carrying the gt masks.
nlohmann::json oracle_response(const BenchSample& sample, bool with_masks);
/// The same answer produced by a scripted inference run that segments every
/// gt mask on its image before answering.
ReasoningTrace oracle_trace(const BenchSample& sample, std::uint64_t seed, int token_cap);

int cmd_synth(const std::filesystem::path& dir, int rasters, int building_sets, const RunConfig& cfg,
              std::ostream& out, std::ostream& err);
int cmd_build_bench(const std::filesystem::path& raster_dir, const RunConfig& cfg, std::ostream& out,
                    std::ostream& err);
int cmd_verify(const std::filesystem::path& bench_file, const std::filesystem::path& raster_dir, std::ostream& out,
               std::ostream& err);
int cmd_oracle(const std::filesystem::path& bench_file, const std::string& format, bool with_masks,
               const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_evaluate(const std::filesystem::path& bench_file, const std::filesystem::path& responses_file,
                 const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_simulate(const std::filesystem::path& scenario_file, const RunConfig& cfg, std::ostream& out,
                 std::ostream& err);

/// Spot checks on masks: area, dilate, erode, open, components4,
/// components8 and distance take --mask; dice, ce and loss take --pred
/// (probability plane JSON) and --gt.
struct MaskOpsArgs {
  std::string op;
  std::optional<std::filesystem::path> mask;
  std::optional<std::filesystem::path> pred;
  std::optional<std::filesystem::path> gt;
  double lm = 0.0;
};
int cmd_mask_ops(const MaskOpsArgs& args, const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace pixground
