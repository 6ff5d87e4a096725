#include "pixground/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <regex>
#include <set>
#include <tuple>
#include <unordered_map>

#include "pixground/error.hpp"
#include "pixground/runtime.hpp"

namespace pixground {

std::optional<char> extract_option(std::string_view response) {
  static const std::regex pattern(R"(\b[A-D]\b)");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(response.begin(), response.end(), m, pattern)) return m.str(0)[0];
  return std::nullopt;
}

namespace {

std::string mask_key(const RleMask& m) {
  std::string key = std::to_string(m.width) + "x" + std::to_string(m.height);
  for (auto c : m.counts) key += "," + std::to_string(c);
  return key;
}

}  // namespace

double grounding_iou(const std::vector<IndexedMask>& pred, const std::vector<IndexedMask>& gt) {
  if (gt.empty()) throw Error(ErrorCode::empty_input, "grounding IoU needs at least one gt mask");
  std::set<int> images;
  for (const auto& g : gt) images.insert(g.image_index);

  double sum = 0.0;
  for (int image : images) {
    std::vector<BinaryMask> gts, preds;
    std::vector<std::string> pred_keys;
    for (const auto& g : gt) {
      if (g.image_index == image) gts.push_back(rle_decode(g.mask));
    }
    for (const auto& p : pred) {
      if (p.image_index != image) continue;
      preds.push_back(rle_decode(p.mask));
      pred_keys.push_back(mask_key(p.mask));
    }
    for (const auto& m : gts) {
      if (!m.same_shape(gts.front())) throw Error(ErrorCode::dimension_mismatch, "gt masks differ in size");
    }
    for (const auto& m : preds) {
      if (!m.same_shape(gts.front())) {
        throw Error(ErrorCode::dimension_mismatch,
                    "predicted mask on image " + std::to_string(image) + " does not match the gt size");
      }
    }

    // (iou, gt index, pred key, pred index); best first.
    std::vector<std::tuple<double, std::size_t, std::string, std::size_t>> pairs;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      for (std::size_t p = 0; p < preds.size(); ++p) pairs.emplace_back(iou(preds[p], gts[g]), g, pred_keys[p], p);
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
      return std::get<2>(a) < std::get<2>(b);
    });
    std::vector<bool> gt_used(gts.size(), false), pred_used(preds.size(), false);
    for (const auto& [score, g, key, p] : pairs) {
      if (gt_used[g] || pred_used[p]) continue;
      gt_used[g] = pred_used[p] = true;
      sum += score;
    }
  }
  return sum / static_cast<double>(gt.size());
}

double grounding_iou(const std::vector<RleMask>& pred, const std::vector<RleMask>& gt) {
  std::vector<IndexedMask> p, g;
  for (const auto& m : pred) p.push_back({1, m});
  for (const auto& m : gt) g.push_back({1, m});
  return grounding_iou(p, g);
}

CorrelationResult iou_correlation(const std::vector<EvalRecord>& records) {
  std::vector<double> x, y;
  for (const auto& r : records) {
    if (!r.mean_iou) continue;
    x.push_back(r.correct ? 1.0 : 0.0);
    y.push_back(*r.mean_iou);
  }
  if (x.size() < 2) throw Error(ErrorCode::undefined_correlation, "correlation needs at least two records with IoU");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::undefined_correlation, "correctness is constant");
  if (syy == 0.0) throw Error(ErrorCode::undefined_correlation, "IoU is constant");

  CorrelationResult out;
  out.n = static_cast<int>(x.size());
  out.r = sxy / std::sqrt(sxx * syy);
  double sum_c = 0.0, sum_i = 0.0;
  int n_c = 0, n_i = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 1.0) {
      sum_c += y[i];
      ++n_c;
    } else {
      sum_i += y[i];
      ++n_i;
    }
  }
  out.mean_iou_correct = sum_c / n_c;
  out.mean_iou_incorrect = sum_i / n_i;
  return out;
}

EvalReport score_answers(std::vector<EvalRecord> records) {
  if (records.empty()) throw Error(ErrorCode::empty_input, "no records to score");
  std::sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) { return a.id < b.id; });
  EvalReport report;
  report.samples = static_cast<int>(records.size());

  std::map<Task, TaskScore> by_task;
  double iou_sum = 0.0, iou_c = 0.0, iou_i = 0.0;
  int n_c = 0, n_i = 0;
  for (const auto& r : records) {
    auto& t = by_task[r.task];
    ++t.total;
    if (r.correct) ++t.correct;
    if (!r.mean_iou) continue;
    ++report.with_masks;
    iou_sum += *r.mean_iou;
    (r.correct ? iou_c : iou_i) += *r.mean_iou;
    ++(r.correct ? n_c : n_i);
  }
  double macro = 0.0;
  for (auto& [task, t] : by_task) {
    t.accuracy = 100.0 * t.correct / t.total;
    macro += t.accuracy;
    report.per_task[std::string(task_name(task))] = t;
  }
  report.macro_accuracy = macro / static_cast<double>(by_task.size());
  if (report.with_masks > 0) report.mean_iou = iou_sum / report.with_masks;
  if (n_c > 0) report.mean_iou_correct = iou_c / n_c;
  if (n_i > 0) report.mean_iou_incorrect = iou_i / n_i;
  try {
    report.pearson_r = iou_correlation(records).r;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::undefined_correlation) throw;
  }
  report.records = std::move(records);
  return report;
}

Response response_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("id")) throw Error(ErrorCode::schema, "response needs an \"id\"");
  Response r;
  r.id = j.at("id").get<std::string>();
  if (j.contains("events")) {
    const ReasoningTrace trace = trace_from_json(j);
    r.text = trace.answer.empty() ? trace.text() : trace.answer;
    for (const auto* s : trace.seg_events()) r.masks.push_back({s->image_index, s->mask});
    return r;
  }
  if (!j.contains("response") || !j.at("response").is_string()) {
    throw Error(ErrorCode::schema, "response " + r.id + " needs a \"response\" string or trace events");
  }
  r.text = j.at("response").get<std::string>();
  for (const auto& m : j.value("masks", nlohmann::json::array())) {
    r.masks.push_back({m.value("image_index", 1), m.get<RleMask>()});
  }
  return r;
}

std::vector<Response> read_responses(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::vector<Response> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(response_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::schema, path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::schema, path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

EvalReport evaluate(const std::vector<BenchSample>& bench, const std::vector<Response>& responses) {
  std::unordered_map<std::string, const Response*> by_id;
  std::unordered_map<std::string, const BenchSample*> samples;
  for (const auto& s : bench) samples[s.id] = &s;
  for (const auto& r : responses) {
    if (!samples.contains(r.id)) throw Error(ErrorCode::schema, "response for unknown sample " + r.id);
    if (!by_id.emplace(r.id, &r).second) throw Error(ErrorCode::schema, "duplicate response for " + r.id);
  }

  std::vector<EvalRecord> records(bench.size());
  std::vector<std::exception_ptr> failures(bench.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < bench.size(); ++i) {
    const BenchSample& s = bench[i];
    EvalRecord& rec = records[i];
    rec.id = s.id;
    rec.task = s.task;
    const auto it = by_id.find(s.id);
    if (it == by_id.end()) continue;
    const Response& resp = *it->second;
    rec.predicted = extract_option(resp.text);
    rec.correct = rec.predicted == s.answer;
    if (resp.masks.empty()) continue;
    if (s.gt_masks.empty()) {
      rec.mean_iou = 0.0;
      continue;
    }
    std::vector<IndexedMask> gt;
    for (const auto& g : s.gt_masks) gt.push_back({g.image_index, g.mask});
    try {
      rec.mean_iou = grounding_iou(resp.masks, gt);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return score_answers(std::move(records));
}

nlohmann::json to_json(const EvalReport& report) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json per_task = nlohmann::json::object();
  for (const auto& [task, t] : report.per_task) {
    per_task[task] = {{"total", t.total}, {"correct", t.correct}, {"accuracy", t.accuracy}};
  }
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) {
    records.push_back({{"id", r.id},
                       {"task", task_name(r.task)},
                       {"predicted", r.predicted ? nlohmann::json(std::string(1, *r.predicted)) : nlohmann::json(nullptr)},
                       {"correct", r.correct},
                       {"mean_iou", opt(r.mean_iou)}});
  }
  nlohmann::json j{{"samples", report.samples},
                   {"macro_accuracy", report.macro_accuracy},
                   {"per_task", per_task},
                   {"with_masks", report.with_masks},
                   {"records", records}};
  // Undefined statistics are omitted rather than written as null.
  if (report.mean_iou) j["mean_iou"] = *report.mean_iou;
  if (report.mean_iou_correct) j["mean_iou_correct"] = *report.mean_iou_correct;
  if (report.mean_iou_incorrect) j["mean_iou_incorrect"] = *report.mean_iou_incorrect;
  if (report.pearson_r) j["pearson_r"] = *report.pearson_r;
  return j;
}

std::string format_table(const EvalReport& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %7s %8s %9s\n", "task", "samples", "correct", "accuracy");
  out += buf;
  for (const auto& [task, t] : report.per_task) {
    std::snprintf(buf, sizeof buf, "%-18s %7d %8d %8.2f%%\n", task.c_str(), t.total, t.correct, t.accuracy);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-18s %7d %8s %8.2f%%\n", "macro", report.samples, "", report.macro_accuracy);
  out += buf;
  auto line = [&](const char* label, const std::optional<double>& v) {
    if (v) {
      std::snprintf(buf, sizeof buf, "%-18s %.4f\n", label, *v);
    } else {
      std::snprintf(buf, sizeof buf, "%-18s n/a\n", label);
    }
    out += buf;
  };
  line("mean IoU", report.mean_iou);
  line("IoU | correct", report.mean_iou_correct);
  line("IoU | incorrect", report.mean_iou_incorrect);
  line("pearson r", report.pearson_r);
  return out;
}

}  // namespace pixground
