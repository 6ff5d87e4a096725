#include "pixground/benchforge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "pixground/error.hpp"
#include "pixground/runtime.hpp"

namespace pixground {

namespace {

constexpr std::array<Task, 9> kAllTasks = {Task::coverage,  Task::area,      Task::distance,
                                           Task::ranking,   Task::adjacency, Task::building_change,
                                           Task::existence, Task::counting,  Task::localization};

bool is_pair_task(Task t) { return t == Task::distance || t == Task::ranking || t == Task::adjacency; }

std::string join_ids(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? "-" : "") + std::to_string(ids[i]);
  return out;
}

std::string sample_id(const std::string& source, Task task, const std::vector<int>& classes) {
  std::string id = (source.empty() ? std::string("raster") : source) + "#" + std::string(task_name(task));
  if (!classes.empty()) id += "/" + join_ids(classes);
  return id;
}

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[draw(rng, i)]);
}

const QuestionTemplate& template_for(const std::vector<QuestionTemplate>& templates, Task task) {
  for (const auto& t : templates) {
    if (t.task == task) return t;
  }
  throw Error(ErrorCode::invalid_argument, "no template for task " + std::string(task_name(task)));
}

SpatialAnswer compute_answer(Task task, const SemanticRaster& raster, const std::vector<int>& c) {
  switch (task) {
    case Task::coverage: return coverage_percentage(raster, c.at(0));
    case Task::area: return area(raster, c.at(0));
    case Task::distance: return min_distance(raster, c.at(0), c.at(1));
    case Task::ranking: return compare_pair(raster, c.at(0), c.at(1));
    case Task::adjacency: return adjacency(raster, c.at(0), c.at(1));
    case Task::existence: return existence(raster, c.at(0));
    case Task::counting: return count_regions(raster, c.at(0));
    case Task::localization: return localize(raster, c.at(0));
    case Task::building_change: break;
  }
  throw Error(ErrorCode::invalid_argument, "building_change needs a building set");
}

std::vector<GtMask> expected_masks(Task task, const SemanticRaster& raster, const std::vector<int>& classes) {
  std::vector<GtMask> out;
  for (int c : classes) {
    BinaryMask m = class_mask(raster, c);
    if (task == Task::existence && m.none()) continue;
    out.push_back({raster.class_names.at(c), 1, rle_encode(m)});
  }
  return out;
}

BenchSample finish_sample(BenchSample s, std::uint64_t seed) {
  OptionSet opts = make_options(s.source, seed ^ fnv1a(s.id));
  s.options = std::move(opts.options);
  s.answer = opts.answer;
  return s;
}

// Value after the task's display rounding.
double rounded(AnswerKind kind, double v) {
  switch (kind) {
    case AnswerKind::coverage:
    case AnswerKind::building_change: return std::round(v * 10.0) / 10.0;
    case AnswerKind::distance: return std::round(v / 10.0) * 10.0;
    case AnswerKind::counting: return std::round(v);
    case AnswerKind::area: {
      if (v == 0.0) return 0.0;
      const double scale = std::pow(10.0, std::floor(std::log10(std::abs(v))) - 2.0);
      return std::round(v / scale) * scale;
    }
    default: return v;
  }
}

std::string format_number(AnswerKind kind, double v) {
  const double r = rounded(kind, v);
  char buf[64];
  switch (kind) {
    case AnswerKind::coverage:
    case AnswerKind::building_change: std::snprintf(buf, sizeof buf, "%.1f%%", r); break;
    case AnswerKind::distance: std::snprintf(buf, sizeof buf, "%.0f meters", r); break;
    case AnswerKind::counting: std::snprintf(buf, sizeof buf, "%.0f regions", r); break;
    case AnswerKind::area: {
      const int digits = r == 0.0 ? 0 : static_cast<int>(std::floor(std::log10(std::abs(r))));
      std::snprintf(buf, sizeof buf, "%.*f square meters", std::max(0, 2 - digits), r);
      break;
    }
    default: std::snprintf(buf, sizeof buf, "%g", r); break;
  }
  return buf;
}

bool distractor_in_range(AnswerKind kind, double v) {
  const double r = rounded(kind, v);
  if (r <= 0.0) return false;
  if ((kind == AnswerKind::coverage || kind == AnswerKind::building_change) && r > 100.0) return false;
  return true;
}

}  // namespace

std::string_view task_name(Task task) {
  switch (task) {
    case Task::coverage: return "coverage";
    case Task::area: return "area";
    case Task::distance: return "distance";
    case Task::ranking: return "ranking";
    case Task::adjacency: return "adjacency";
    case Task::building_change: return "building_change";
    case Task::existence: return "existence";
    case Task::counting: return "counting";
    case Task::localization: return "localization";
  }
  return "coverage";
}

Task parse_task(std::string_view name) {
  for (Task t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  throw Error(ErrorCode::invalid_argument, "unknown task '" + std::string(name) + "'");
}

std::set<Task> parse_task_list(std::string_view list) {
  std::set<Task> out;
  std::stringstream in{std::string(list)};
  for (std::string item; std::getline(in, item, ',');) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.insert(parse_task(item));
  }
  return out;
}

const std::map<Task, int>& reference_task_counts() {
  static const std::map<Task, int> counts = {{Task::coverage, 855}, {Task::area, 855},
                                             {Task::distance, 129}, {Task::ranking, 855},
                                             {Task::adjacency, 855}, {Task::building_change, 288}};
  return counts;
}

bool is_binary(Task task) {
  return task == Task::ranking || task == Task::adjacency || task == Task::existence;
}

int QuestionTemplate::arity() const {
  if (pattern.find("{class2}") != std::string::npos) return 2;
  if (pattern.find("{class}") != std::string::npos || pattern.find("{class1}") != std::string::npos) return 1;
  return 0;
}

std::string QuestionTemplate::fill(const std::vector<std::string>& class_names) const {
  if (static_cast<int>(class_names.size()) != arity()) {
    throw Error(ErrorCode::invalid_argument, "template for " + std::string(task_name(task)) + " takes " +
                                                 std::to_string(arity()) + " classes");
  }
  std::string out = pattern;
  auto replace = [&out](const std::string& slot, const std::string& value) {
    for (auto pos = out.find(slot); pos != std::string::npos; pos = out.find(slot, pos + value.size())) {
      out.replace(pos, slot.size(), value);
    }
  };
  if (arity() == 2) {
    replace("{class1}", class_names[0]);
    replace("{class2}", class_names[1]);
  } else if (arity() == 1) {
    replace("{class}", class_names[0]);
    replace("{class1}", class_names[0]);
  }
  return out;
}

std::vector<QuestionTemplate> default_templates() {
  return {
      {Task::coverage, "What percentage of the image is covered by {class}?"},
      {Task::area, "What is the area of {class}?"},
      {Task::distance, "What is the distance between {class1} and {class2}?"},
      {Task::ranking, "Is {class1} larger than {class2}?"},
      {Task::adjacency, "Does {class1} border {class2}?"},
      {Task::building_change, "What percentage of buildings were destroyed?"},
      {Task::existence, "Is there any {class} in the image?"},
      {Task::counting, "How many separate {class} regions are there in the image?"},
      {Task::localization, "Where is the {class} located in the image?"},
  };
}

void to_json(nlohmann::json& j, const BenchSample& s) {
  nlohmann::json options = nlohmann::json::object();
  for (std::size_t k = 0; k < s.options.size(); ++k) options[std::string(1, char('A' + k))] = s.options[k];
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& m : s.gt_masks) masks.push_back({{"role", m.role}, {"image_index", m.image_index}, {"mask", m.mask}});
  nlohmann::json images = nlohmann::json::array();
  for (const auto& im : s.images) {
    images.push_back({{"path", im.path}, {"modality", im.modality}, {"timestamp", im.timestamp}});
  }
  j = {{"id", s.id},
       {"task", task_name(s.task)},
       {"question", s.question},
       {"options", options},
       {"answer", std::string(1, s.answer)},
       {"gt_masks", masks},
       {"images", images},
       {"source", s.source},
       {"classes", s.classes},
       {"source_path", s.source_path}};
}

void from_json(const nlohmann::json& j, BenchSample& s) {
  s.id = j.at("id").get<std::string>();
  s.task = parse_task(j.at("task").get<std::string>());
  s.question = j.at("question").get<std::string>();
  const auto& options = j.at("options");
  if (!options.is_object() || (options.size() != 2 && options.size() != 4)) {
    throw Error(ErrorCode::schema, "sample " + s.id + ": options must hold 2 or 4 entries");
  }
  s.options.clear();
  for (std::size_t k = 0; k < options.size(); ++k) {
    const std::string letter(1, char('A' + k));
    if (!options.contains(letter)) throw Error(ErrorCode::schema, "sample " + s.id + ": missing option " + letter);
    s.options.push_back(options.at(letter).get<std::string>());
  }
  const auto answer = j.at("answer").get<std::string>();
  if (answer.size() != 1 || answer[0] < 'A' || answer[0] >= char('A' + s.options.size())) {
    throw Error(ErrorCode::schema, "sample " + s.id + ": answer '" + answer + "' is not an option letter");
  }
  s.answer = answer[0];
  s.gt_masks.clear();
  for (const auto& m : j.value("gt_masks", nlohmann::json::array())) {
    s.gt_masks.push_back({m.value("role", std::string{}), m.value("image_index", 1), m.at("mask").get<RleMask>()});
  }
  s.images.clear();
  for (const auto& im : j.value("images", nlohmann::json::array())) {
    s.images.push_back({im.at("path").get<std::string>(), im.value("modality", std::string("optical")),
                        im.value("timestamp", std::string("t1"))});
  }
  s.source = j.at("source").get<SpatialAnswer>();
  s.classes = j.value("classes", std::vector<int>{});
  s.source_path = j.value("source_path", std::string{});
}

std::string format_prompt(const BenchSample& sample) {
  std::string out = sample.question + "\n";
  for (std::size_t k = 0; k < sample.options.size(); ++k) {
    out += std::string(1, char('A' + k)) + ". " + sample.options[k] + "\n";
  }
  out += "Reply with the letter of the correct option only.";
  return out;
}

std::string render_answer(const SpatialAnswer& answer) {
  if (const auto* b = std::get_if<bool>(&answer.value)) return *b ? "Yes" : "No";
  if (const auto* s = std::get_if<std::string>(&answer.value)) return *s;
  if (const auto* d = std::get_if<double>(&answer.value)) return format_number(answer.kind, *d);
  throw Error(ErrorCode::invalid_argument, "ordering answers have no single-option rendering");
}

OptionSet make_options(const SpatialAnswer& answer, std::uint64_t seed) {
  if (!answer.valid) {
    throw Error(ErrorCode::invalid_argument,
                "cannot build options for an invalid answer (" + answer.reject_reason.value_or("no reason") + ")");
  }
  std::mt19937_64 rng(seed);
  const std::string truth = render_answer(answer);
  std::vector<std::string> options{truth};

  if (std::holds_alternative<bool>(answer.value)) {
    options.push_back(truth == "Yes" ? "No" : "Yes");
  } else if (std::holds_alternative<std::string>(answer.value)) {
    std::vector<std::string> others;
    for (auto p : kCompassPositions) {
      if (p != truth) others.emplace_back(p);
    }
    seeded_shuffle(others, rng);
    options.insert(options.end(), others.begin(), others.begin() + 3);
  } else if (const auto* v = std::get_if<double>(&answer.value)) {
    std::vector<double> factors{0.5, 0.75, 1.5, 2.0};
    seeded_shuffle(factors, rng);
    for (double f : {0.25, 1.25, 0.6, 0.9, 1.1, 3.0}) factors.push_back(f);
    for (int f = 4; f <= 20; ++f) factors.push_back(f);
    for (double f : factors) {
      if (options.size() == 4) break;
      const double candidate = *v * f;
      if (!distractor_in_range(answer.kind, candidate)) continue;
      std::string text = format_number(answer.kind, candidate);
      if (std::find(options.begin(), options.end(), text) == options.end()) options.push_back(std::move(text));
    }
    if (options.size() != 4) throw Error(ErrorCode::invalid_argument, "no distinct distractors for " + truth);
  } else {
    throw Error(ErrorCode::invalid_argument, "ordering answers cannot be posed as options");
  }

  seeded_shuffle(options, rng);
  OptionSet out;
  out.answer = static_cast<char>('A' + (std::find(options.begin(), options.end(), truth) - options.begin()));
  out.options = std::move(options);
  return out;
}

std::vector<BenchSample> generate_l1(const SemanticRaster& raster, std::uint64_t seed, const GenerateOptions& options) {
  raster.validate();
  std::vector<Task> tasks;
  for (Task t : kAllTasks) {
    if (t == Task::building_change) continue;
    if (options.tasks.empty() || options.tasks.contains(t)) tasks.push_back(t);
  }
  if (options.random_task_subset && tasks.size() > 2) {
    std::mt19937_64 rng(seed ^ fnv1a(options.source_path));
    const std::size_t k = std::min(tasks.size(), 2 + draw(rng, 3));
    seeded_shuffle(tasks, rng);
    tasks.resize(k);
    std::sort(tasks.begin(), tasks.end());
  }

  std::vector<int> present;
  for (const auto& [id, n] : raster.class_counts()) present.push_back(id);
  std::vector<int> named;
  for (const auto& [id, name] : raster.class_names) {
    if (id != 0) named.push_back(id);
  }

  std::vector<BenchSample> out;
  for (Task task : tasks) {
    std::vector<std::vector<int>> groups;
    if (is_pair_task(task)) {
      for (std::size_t a = 0; a < present.size(); ++a) {
        for (std::size_t b = a + 1; b < present.size(); ++b) {
          std::vector<int> pair{present[a], present[b]};
          // Alternate which class is asked about first so Yes and No both occur.
          if (task == Task::ranking && (fnv1a(sample_id(options.source_path, task, pair)) & 1U)) {
            std::swap(pair[0], pair[1]);
          }
          groups.push_back(pair);
        }
      }
    } else {
      for (int c : task == Task::existence ? named : present) groups.push_back({c});
    }

    std::vector<BenchSample> candidates;
    for (const auto& classes : groups) {
      SpatialAnswer answer = compute_answer(task, raster, classes);
      if (!answer.valid) continue;
      BenchSample s;
      s.task = task;
      s.classes = classes;
      s.id = sample_id(options.source_path, task, classes);
      std::vector<std::string> names;
      for (int c : classes) names.push_back(raster.class_names.at(c));
      s.question = template_for(options.templates, task).fill(names);
      s.source = std::move(answer);
      s.gt_masks = expected_masks(task, raster, classes);
      s.images = {{options.source_path, "optical", "t1"}};
      s.source_path = options.source_path;
      candidates.push_back(std::move(s));
    }
    if (options.per_task_limit > 0 && static_cast<int>(candidates.size()) > options.per_task_limit) {
      std::sort(candidates.begin(), candidates.end(), [](const BenchSample& a, const BenchSample& b) {
        const auto ha = fnv1a(a.id), hb = fnv1a(b.id);
        return ha != hb ? ha < hb : a.id < b.id;
      });
      candidates.resize(std::size_t(options.per_task_limit));
    }
    for (auto& s : candidates) out.push_back(finish_sample(std::move(s), seed));
  }
  return out;
}

std::vector<BenchSample> generate_building(const BuildingSet& buildings, std::uint64_t seed,
                                           const GenerateOptions& options) {
  if (!options.tasks.empty() && !options.tasks.contains(Task::building_change)) return {};
  const BuildingChange change = building_change(buildings);
  if (!change.rate.valid) return {};
  BenchSample s;
  s.task = Task::building_change;
  s.id = sample_id(options.source_path, Task::building_change, {});
  s.question = template_for(options.templates, Task::building_change).fill({});
  s.source = change.rate;
  s.gt_masks = {{"destroyed buildings", 2, rle_encode(change.destroyed_mask)}};
  s.images = {{options.source_path, "optical", "t1"}, {options.source_path, "optical", "t2"}};
  s.source_path = options.source_path;
  return {finish_sample(std::move(s), seed)};
}

std::vector<BenchSample> match_distribution(std::vector<BenchSample> candidates, const std::map<Task, int>& weights) {
  std::map<Task, std::vector<BenchSample>> by_task;
  for (auto& s : candidates) by_task[s.task].push_back(std::move(s));

  std::map<Task, std::int64_t> active;
  for (const auto& [task, w] : weights) {
    if (w > 0 && by_task.contains(task)) active[task] = w;
  }
  std::int64_t total_weight = 0;
  for (const auto& [task, w] : active) total_weight += w;

  std::map<Task, std::int64_t> quota;
  if (!active.empty()) {
    std::int64_t n = std::numeric_limits<std::int64_t>::max();
    for (const auto& [task, w] : active) {
      n = std::min(n, static_cast<std::int64_t>(by_task[task].size()) * total_weight / w);
    }
    for (;; --n) {
      std::int64_t assigned = 0;
      std::vector<std::pair<std::int64_t, Task>> remainders;
      for (const auto& [task, w] : active) {
        quota[task] = n * w / total_weight;
        assigned += quota[task];
        remainders.emplace_back(n * w % total_weight, task);
      }
      std::stable_sort(remainders.begin(), remainders.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::int64_t k = 0; k < n - assigned; ++k) ++quota[remainders[std::size_t(k)].second];
      const bool fits = std::all_of(active.begin(), active.end(), [&](const auto& kv) {
        return quota[kv.first] <= static_cast<std::int64_t>(by_task[kv.first].size());
      });
      if (fits) break;
    }
  }

  std::vector<BenchSample> out;
  for (auto& [task, samples] : by_task) {
    if (active.contains(task)) {
      std::sort(samples.begin(), samples.end(), [](const BenchSample& a, const BenchSample& b) {
        const auto ha = fnv1a(a.id), hb = fnv1a(b.id);
        return ha != hb ? ha < hb : a.id < b.id;
      });
      samples.resize(std::size_t(quota[task]));
    } else if (weights.contains(task)) {
      continue;
    }
    for (auto& s : samples) out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const BenchSample& a, const BenchSample& b) { return a.id < b.id; });
  return out;
}

nlohmann::json to_json(const BenchStats& stats) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, n] : stats.option_histogram) hist[std::to_string(k)] = n;
  return {{"total", stats.total}, {"per_task", stats.per_task}, {"option_histogram", hist}};
}

BenchStats bench_stats(const std::vector<BenchSample>& samples) {
  BenchStats stats;
  for (const auto& s : samples) {
    ++stats.per_task[std::string(task_name(s.task))];
    ++stats.option_histogram[static_cast<int>(s.options.size())];
    ++stats.total;
  }
  return stats;
}

BenchStats assemble_benchmark(const std::vector<BenchSample>& samples, const std::filesystem::path& out_path) {
  if (samples.empty()) throw Error(ErrorCode::empty_input, "no samples to write");
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + out_path.string());
  for (const auto& s : samples) out << nlohmann::json(s).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::io, "failed writing " + out_path.string());
  return bench_stats(samples);
}

std::vector<BenchSample> read_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<BenchSample> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<BenchSample>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::schema, path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::schema, path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

void check_options(const BenchSample& sample, const std::string& expected, std::vector<std::string>& problems) {
  const std::size_t want = is_binary(sample.task) ? 2 : 4;
  if (sample.options.size() != want) problems.push_back("expected " + std::to_string(want) + " options");
  std::vector<std::string> sorted = sample.options;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) problems.push_back("duplicate options");
  if (sample.answer < 'A' || std::size_t(sample.answer - 'A') >= sample.options.size()) {
    problems.push_back("answer letter out of range");
  } else if (sample.correct_option() != expected) {
    problems.push_back("answer " + sample.correct_option() + " but recomputed " + expected);
  }
}

void check_masks(const std::vector<GtMask>& got, const std::vector<GtMask>& want, std::vector<std::string>& problems) {
  if (got.size() != want.size()) {
    problems.push_back("expected " + std::to_string(want.size()) + " gt masks");
    return;
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].mask != want[i].mask || got[i].image_index != want[i].image_index) {
      problems.push_back("gt mask " + std::to_string(i) + " differs from recomputation");
    }
  }
}

}  // namespace

std::vector<std::string> verify_sample(const BenchSample& sample, const SemanticRaster& raster) {
  std::vector<std::string> problems;
  if (sample.task == Task::building_change) return {"building_change samples verify against a building set"};
  const SpatialAnswer fresh = compute_answer(sample.task, raster, sample.classes);
  if (!fresh.valid) problems.push_back("recomputed answer is invalid: " + fresh.reject_reason.value_or(""));
  check_options(sample, render_answer(fresh), problems);
  check_masks(sample.gt_masks, expected_masks(sample.task, raster, sample.classes), problems);
  return problems;
}

std::vector<std::string> verify_sample(const BenchSample& sample, const BuildingSet& buildings) {
  std::vector<std::string> problems;
  if (sample.task != Task::building_change) return {"only building_change samples verify against a building set"};
  const BuildingChange fresh = building_change(buildings);
  if (!fresh.rate.valid) problems.push_back("recomputed rate is invalid: " + fresh.rate.reject_reason.value_or(""));
  check_options(sample, render_answer(fresh.rate), problems);
  check_masks(sample.gt_masks, {{"destroyed buildings", 2, rle_encode(fresh.destroyed_mask)}}, problems);
  return problems;
}

}  // namespace pixground
