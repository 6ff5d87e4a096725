#pragma once

// Multiple-choice benchmark synthesis: templated questions over geoquery
// answers, deterministic numeric distractors, seeded option order and a
// JSON-lines file format.
//
// Seeds only move option order and distractor draws. Which samples exist, and
// their correct answers, depend on the input rasters alone.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pixground/geoquery.hpp"
#include "pixground/raster.hpp"

namespace pixground {

enum class Task {
  coverage,
  area,
  distance,
  ranking,
  adjacency,
  building_change,
  existence,
  counting,
  localization,
};

std::string_view task_name(Task task);
Task parse_task(std::string_view name);
/// Comma-separated task names; throws Error{invalid_argument} on unknown names.
std::set<Task> parse_task_list(std::string_view list);

/// The six benchmark tasks, in reporting order.
inline constexpr std::array<Task, 6> kBenchTasks = {Task::coverage,  Task::area,      Task::distance,
                                                    Task::ranking,   Task::adjacency, Task::building_change};
/// Reference sample counts per benchmark task; used as proportion targets.
const std::map<Task, int>& reference_task_counts();

/// Yes/No tasks get two options, the rest four.
bool is_binary(Task task);

struct QuestionTemplate {
  Task task = Task::coverage;
  std::string pattern;  // {class}, or {class1} and {class2}

  /// Number of class slots (0, 1 or 2).
  int arity() const;
  std::string fill(const std::vector<std::string>& class_names) const;
};

/// One phrasing per task.
std::vector<QuestionTemplate> default_templates();

struct GtMask {
  std::string role;
  int image_index = 1;
  RleMask mask;
};

struct ImageRef {
  std::string path;
  std::string modality = "optical";
  std::string timestamp = "t1";
};

struct BenchSample {
  std::string id;
  Task task = Task::coverage;
  std::string question;
  std::vector<std::string> options;  // options[k] carries letter 'A' + k
  char answer = 'A';
  std::vector<GtMask> gt_masks;
  std::vector<ImageRef> images;
  SpatialAnswer source;
  std::vector<int> classes;
  std::string source_path;

  const std::string& correct_option() const { return options.at(std::size_t(answer - 'A')); }
};

void to_json(nlohmann::json& j, const BenchSample& s);
void from_json(const nlohmann::json& j, BenchSample& s);

/// Question text followed by lettered options and the option guidance line.
std::string format_prompt(const BenchSample& sample);

/// Canonical text of a valid answer: percentages to one decimal, areas to
/// three significant figures, distances to the nearest 10 m, counts as
/// integers, booleans as Yes/No.
std::string render_answer(const SpatialAnswer& answer);

struct OptionSet {
  std::vector<std::string> options;
  char answer = 'A';
};

/// Distractors multiply the true value by factors from {0.5, 0.75, 1.5, 2.0}
/// in seeded order, falling back to further factors when renderings collide
/// or leave the valid range. Throws Error{invalid_argument} for an invalid
/// answer.
OptionSet make_options(const SpatialAnswer& answer, std::uint64_t seed);

struct GenerateOptions {
  std::set<Task> tasks;              // empty means every raster task
  int per_task_limit = 3;            // candidates kept per task per raster; 0 keeps all
  bool random_task_subset = false;   // draw 2-4 task types per raster from the seed
  std::string source_path;           // recorded in image refs and sample ids
  std::vector<QuestionTemplate> templates = default_templates();
};

/// Candidates for every raster task (all but building_change). Invalid
/// answers are dropped.
std::vector<BenchSample> generate_l1(const SemanticRaster& raster, std::uint64_t seed,
                                     const GenerateOptions& options = {});

/// Zero or one damage-rate sample for a pre/post building pair.
std::vector<BenchSample> generate_building(const BuildingSet& buildings, std::uint64_t seed,
                                           const GenerateOptions& options = {});

/// Largest subset whose per-task counts follow `weights` (largest-remainder
/// quotas); tasks without a weight pass through whole. Members are chosen by
/// a hash of the sample id, so the subset does not depend on any seed. The
/// result is sorted by id.
std::vector<BenchSample> match_distribution(std::vector<BenchSample> candidates,
                                            const std::map<Task, int>& weights);

struct BenchStats {
  std::map<std::string, int> per_task;
  std::map<int, int> option_histogram;  // option count -> samples
  int total = 0;
};

nlohmann::json to_json(const BenchStats& stats);
BenchStats bench_stats(const std::vector<BenchSample>& samples);

/// Writes one sample per line. Throws Error{empty_input} for no samples and
/// Error{io} when the file cannot be written.
BenchStats assemble_benchmark(const std::vector<BenchSample>& samples, const std::filesystem::path& out_path);
/// Throws Error{schema} naming the 1-based line that fails to parse.
std::vector<BenchSample> read_benchmark(const std::filesystem::path& path);

/// Recomputes the sample's answer and masks from its source. Returns the
/// reasons it fails; empty means verified.
std::vector<std::string> verify_sample(const BenchSample& sample, const SemanticRaster& raster);
std::vector<std::string> verify_sample(const BenchSample& sample, const BuildingSet& buildings);

}  // namespace pixground
