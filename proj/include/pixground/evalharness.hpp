#pragma once

// Dual-metric scoring of multiple-choice responses: option-letter accuracy
// per task and macro-averaged, grounding IoU against ground-truth masks, and
// the point-biserial correlation between the two.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pixground/benchforge.hpp"
#include "pixground/raster.hpp"

namespace pixground {

/// First standalone capital A-D, i.e. the first match of \b[A-D]\b.
std::optional<char> extract_option(std::string_view response);

struct IndexedMask {
  int image_index = 1;
  RleMask mask;
};

/// Greedy matching within each image index: repeatedly pair the remaining
/// (pred, gt) with the highest IoU. Unmatched gt masks score 0 and the mean
/// is taken over gt masks. Ties break by gt position, then by the predicted
/// mask's content, so the result ignores prediction order. Throws
/// Error{dimension_mismatch} when two masks on one image disagree in size and
/// Error{empty_input} when there are no gt masks.
double grounding_iou(const std::vector<IndexedMask>& pred, const std::vector<IndexedMask>& gt);
/// Single-image convenience form.
double grounding_iou(const std::vector<RleMask>& pred, const std::vector<RleMask>& gt);

struct EvalRecord {
  std::string id;
  Task task = Task::coverage;
  std::optional<char> predicted;
  bool correct = false;
  std::optional<double> mean_iou;  // present iff the response carried a mask
};

struct CorrelationResult {
  double mean_iou_correct = 0.0;
  double mean_iou_incorrect = 0.0;
  double r = 0.0;
  int n = 0;
};

/// Pearson r between correctness (0/1) and mean IoU over records that carry
/// an IoU. Throws Error{undefined_correlation} with fewer than two such
/// records or when either column is constant.
CorrelationResult iou_correlation(const std::vector<EvalRecord>& records);

struct TaskScore {
  int total = 0;
  int correct = 0;
  double accuracy = 0.0;  // percent
};

struct EvalReport {
  std::map<std::string, TaskScore> per_task;
  double macro_accuracy = 0.0;  // percent, unweighted over represented tasks
  int samples = 0;
  int with_masks = 0;
  std::optional<double> mean_iou;
  std::optional<double> mean_iou_correct;
  std::optional<double> mean_iou_incorrect;
  std::optional<double> pearson_r;
  std::vector<EvalRecord> records;  // sorted by id
};

/// Accuracy part of the report. Throws Error{empty_input} for no records.
EvalReport score_answers(std::vector<EvalRecord> records);

/// One parsed line of a responses file: {"id", "response"} with optional
/// "masks", or a full reasoning trace carrying "id".
struct Response {
  std::string id;
  std::string text;
  std::vector<IndexedMask> masks;
};

Response response_from_json(const nlohmann::json& j);
/// Throws Error{schema} naming the 1-based line that fails.
std::vector<Response> read_responses(const std::filesystem::path& path);

/// Scores every sample; samples without a response count as incorrect.
/// Throws Error{schema} for responses whose id is not in the benchmark or
/// that repeat an id.
EvalReport evaluate(const std::vector<BenchSample>& bench, const std::vector<Response>& responses);

nlohmann::json to_json(const EvalReport& report);
std::string format_table(const EvalReport& report);

}  // namespace pixground
