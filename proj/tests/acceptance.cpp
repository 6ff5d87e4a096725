// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances and trial counts are pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pixground/benchforge.hpp"
#include "pixground/commands.hpp"
#include "pixground/error.hpp"
#include "pixground/evalharness.hpp"
#include "pixground/fixtures.hpp"
#include "pixground/geoquery.hpp"
#include "pixground/grid.hpp"
#include "pixground/losses.hpp"
#include "pixground/modality.hpp"
#include "pixground/raster.hpp"
#include "pixground/runtime.hpp"
#include "pixground/scenario.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace pixground;
using pixground::testing::random_int;
using pixground::testing::random_mask;
namespace fs = std::filesystem;

namespace {

constexpr double kEdtTol = 1e-9;
constexpr double kEdtBudgetSeconds = 30.0;
constexpr int kEdtTrials = 200;
constexpr int kMorphTrials = 200;
constexpr int kDownsampleTrials = 100;
constexpr int kSamplerTrials = 20;
constexpr int kSamplerReruns = 10;
constexpr int kRelevanceTrials = 50;
constexpr double kRelevanceRelTol = 1e-9;
constexpr double kSumTol = 1e-9;
constexpr double kCoverageSumTol = 1e-9;
constexpr double kProportionRelTol = 0.10;
constexpr double kPearsonTol = 1e-9;
constexpr double kGroupMeanTol = 1e-12;
constexpr int kGradientTrials = 50;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kLnTwoTol = 1e-9;
constexpr double kSuiteBudgetSeconds = 300.0;

const fs::path kData = PIXGROUND_DATA_DIR;

// Failure count and first message of one criterion.
struct Check {
  int failures = 0;
  std::string first;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures == 0) first = what;
    ++failures;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

SemanticRaster blank(int w, int h, int fill) {
  SemanticRaster r;
  r.width = w;
  r.height = h;
  r.labels.assign(std::size_t(w) * h, fill);
  r.class_names = {{1, "forest"}, {2, "water"}, {3, "cropland"}};
  return r;
}

void paint(SemanticRaster& r, int x0, int y0, int x1, int y1, int cls) {
  for (int y = std::max(0, y0); y < std::min(r.height, y1); ++y) {
    for (int x = std::max(0, x0); x < std::min(r.width, x1); ++x) r.labels[std::size_t(y) * r.width + x] = cls;
  }
}

// 10x10 raster: the first `a` pixels are class 1, the next `b` class 2, the rest class 3.
SemanticRaster counts_raster(int a, int b) {
  SemanticRaster r = blank(10, 10, 3);
  for (int i = 0; i < a; ++i) r.labels[std::size_t(i)] = 1;
  for (int i = a; i < a + b; ++i) r.labels[std::size_t(i)] = 2;
  return r;
}

SemanticRaster two_blocks(int gap) {
  SemanticRaster r = blank(gap + 8, 5, 3);
  paint(r, 0, 1, 3, 4, 1);
  paint(r, 2 + gap, 1, 5 + gap, 4, 2);
  return r;
}

SemanticRaster squares_raster(int k) {
  SemanticRaster r = blank(20, 20, 1);
  for (int i = 0; i < k; ++i) paint(r, 1 + 3 * (i % 6), 1 + 3 * (i / 6), 3 + 3 * (i % 6), 3 + 3 * (i / 6), 2);
  return r;
}

BuildingSet square_buildings(int total, int destroyed) {
  BuildingSet b{64, 64, {}, {}};
  for (int i = 0; i < total; ++i) {
    const double x = 2 + 6 * (i % 10), y = 2 + 6 * (i / 10);
    b.polygons.push_back({{x, y}, {x + 3, y}, {x + 3, y + 3}, {x, y + 3}});
    b.labels.push_back(i < destroyed ? DamageLabel::destroyed : DamageLabel::other);
  }
  return b;
}

FeatureMatrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  FeatureMatrix m(rows, cols);
  for (auto& v : m.data) v = n(rng);
  return m;
}

Check edt_oracle() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  for (int trial = 0; trial < kEdtTrials; ++trial) {
    const int w = random_int(rng, 1, 64), h = random_int(rng, 1, 64);
    BinaryMask m = random_mask(rng, w, h, 0.002 + 0.1 * (trial % 7) / 6.0);
    if (m.none()) m.set(random_int(rng, 0, w - 1), random_int(rng, 0, h - 1));
    const DistanceField got = distance_transform(m);
    const auto want = oracle::brute_force_distance(m);
    for (std::size_t i = 0; i < want.size(); ++i) {
      c.expect(std::abs(got.values[i] - want[i]) <= kEdtTol,
               fmt("edt trial %g pixel %g", trial, double(i)));
    }
  }
  // Validity gate on random two-class rasters built from blocks.
  int valid = 0, invalid = 0;
  for (int trial = 0; trial < kEdtTrials; ++trial) {
    const int w = random_int(rng, 16, 64), h = random_int(rng, 16, 64);
    SemanticRaster r = blank(w, h, 3);
    for (int cls = 1; cls <= 2; ++cls) {
      const int blocks = random_int(rng, 1, 3);
      for (int b = 0; b < blocks; ++b) {
        const int x = random_int(rng, 0, w - 3), y = random_int(rng, 0, h - 3);
        paint(r, x, y, x + random_int(rng, 3, 10), y + random_int(rng, 3, 10), cls);
      }
    }
    const auto counts = r.class_counts();
    if (!counts.contains(1) || !counts.contains(2)) continue;
    const BinaryMask a = open(class_mask(r, 1)), b = open(class_mask(r, 2));
    const SpatialAnswer ans = min_distance(r, 1, 2);
    if (a.none() || b.none()) {
      c.expect(!ans.valid && ans.reject_reason == std::string(reject::empty_after_opening),
               fmt("gate trial %g: emptied mask not rejected", trial));
      continue;
    }
    const double d = oracle::brute_force_pair_distance(a, b);
    c.expect(ans.valid == (d > 10.0), fmt("gate trial %g: d=%g", trial, d));
    c.expect(std::abs(ans.number() - d * r.resolution) <= kEdtTol, fmt("gate trial %g distance %g", trial, d));
    (d > 10.0 ? valid : invalid)++;
  }
  c.expect(valid > 0 && invalid > 0, "gate fixtures did not straddle 10 px");
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < kEdtBudgetSeconds, fmt("took %.1f s", elapsed));
  return c;
}

Check morphology_oracle() {
  Check c;
  std::mt19937_64 rng(1002);
  for (int trial = 0; trial < kMorphTrials; ++trial) {
    const BinaryMask m = random_mask(rng, 32, 32, 0.1 + 0.8 * (trial % 9) / 8.0);
    c.expect(dilate(m) == oracle::naive_dilate(m), fmt("dilate trial %g", trial));
    const BinaryMask o = open(m);
    c.expect(o == oracle::naive_open(m), fmt("open trial %g", trial));
    c.expect(open(o) == o, fmt("open not idempotent, trial %g", trial));
  }
  return c;
}

Check token_pipeline() {
  Check c;
  std::mt19937_64 rng(1003);
  for (int trial = 0; trial < kDownsampleTrials; ++trial) {
    const int w = random_int(rng, 8, 200), h = random_int(rng, 8, 200);
    const PatchLayout layout =
        plan_patches(w, h, random_int(rng, 16, 96), random_int(rng, 1, 12), random_int(rng, 1, 16));
    const BinaryMask m = random_mask(rng, w, h, 0.2 + 0.6 * (trial % 5) / 4.0);
    const TokenMask tok = downsample_mask(m, layout);
    const oracle::CellCounts cc = oracle::cell_counts(m, layout);
    bool same = tok.selected.size() == cc.fg.size();
    for (std::size_t j = 0; same && j < cc.fg.size(); ++j) {
      same = tok.selected[j] == (2 * cc.fg[j] > cc.total[j] ? 1 : 0) &&
             tok.coverage[j] == (cc.total[j] > 0 ? double(cc.fg[j]) / double(cc.total[j]) : 0.0);
    }
    c.expect(same, fmt("downsample trial %g (%gpx wide)", trial, w));
  }
  const PatchLayout big = plan_patches(896, 896);
  c.expect(big.token_count() == 1280, fmt("896x896 gives %g tokens", big.token_count()));
  for (int trial = 0; trial < kSamplerTrials; ++trial) {
    const BinaryMask m = random_mask(rng, 896, 896, 0.3 + 0.6 * trial / kSamplerTrials);
    const TokenMask tok = downsample_mask(m, big);
    const TokenSelection all = selected_tokens(tok);
    const TokenSelection s = spatial_uniform_sample(tok, kDefaultTokenCap);
    c.expect(s.size() <= std::size_t(kDefaultTokenCap), fmt("trial %g selected %g", trial, double(s.size())));
    const std::set<int> pool(all.indices.begin(), all.indices.end());
    for (int j : s.indices) c.expect(pool.contains(j), fmt("trial %g picked unselected %g", trial, j));
    const std::string first = nlohmann::json(s).dump();
    for (int rerun = 0; rerun < kSamplerReruns; ++rerun) {
      c.expect(nlohmann::json(spatial_uniform_sample(tok, kDefaultTokenCap)).dump() == first,
               fmt("trial %g rerun %g differs", trial, rerun));
    }
  }
  return c;
}

Check modality_math() {
  Check c;
  std::mt19937_64 rng(1004);
  for (int trial = 0; trial < kRelevanceTrials; ++trial) {
    const int n = random_int(rng, 1, 256), l = random_int(rng, 1, 16), d = random_int(rng, 1, 64);
    const FeatureMatrix v = random_matrix(rng, n, d, 1.0 + trial % 4);
    const FeatureMatrix q = random_matrix(rng, l, d, 1.0);
    const RelevanceField f = relevance_scores(v, q, Modality::optical);
    const auto want = oracle::naive_beta(v, q);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const double scale = std::max(std::abs(want[std::size_t(j)]), 1e-300);
      c.expect(std::abs(f.beta[std::size_t(j)] - want[std::size_t(j)]) / scale <= kRelevanceRelTol,
               fmt("trial %g token %g", trial, j));
      sum += f.beta[std::size_t(j)];
    }
    c.expect(std::abs(sum - 1.0) <= kSumTol, fmt("trial %g sum off by %g", trial, sum - 1.0));
  }
  const FeatureMatrix v = random_matrix(rng, 64, 8, 1.0), q = random_matrix(rng, 3, 8, 1.0);
  const RelevanceField opt = relevance_scores(v, q, Modality::optical);
  const RelevanceField sar = relevance_scores(v, q, Modality::sar);
  TokenSelection sel;
  for (int j = 0; j < 64; ++j) sel.indices.push_back(j);
  const ModalityAssignment a = select_modality(opt, sar, sel);
  for (Modality m : a.choice) c.expect(m == Modality::sar, "a tied token chose optical");
  return c;
}

Check runtime_conformance() {
  Check c;
  for (const char* name : {"single_image.json", "bi_temporal.json", "optical_sar.json"}) {
    const Scenario sc = load_scenario(kData / "scenarios" / name);
    const ReasoningTrace trace = run_scenario(sc);
    for (const auto& v : check_trace(trace, kDefaultTokenCap)) c.expect(false, std::string(name) + ": " + v);
    c.expect(!trace.truncated, std::string(name) + ": truncated");
    const StaticFeatureProvider features = make_feature_provider(sc);
    const ScriptedGenerator gen(sc.script, sc.feature_dim, sc.seed);
    const TextEmbeddings question = gen.embed(sc.question);
    std::string text;
    int segs = 0;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
      if (const auto* t = std::get_if<TextEvent>(&trace.events[i])) {
        if (!text.empty()) text += ' ';
        text += t->token;
        continue;
      }
      const auto* seg = std::get_if<SegEvent>(&trace.events[i]);
      if (seg == nullptr) continue;
      ++segs;
      const int routed = parse_temporal_indicator(text).value_or(1);
      c.expect(seg->image_index == routed, std::string(name) + ": seg routed to the wrong image");
      const auto* inj = i + 1 < trace.events.size() ? std::get_if<InjectEvent>(&trace.events[i + 1]) : nullptr;
      c.expect(inj != nullptr && inj->rows == oracle::expected_injection(*seg, features, question, kDefaultTokenCap),
               std::string(name) + ": injected rows differ from the recomputation");
    }
    c.expect(segs > 0, std::string(name) + ": no seg events");
    if (std::string(name) == "bi_temporal.json") {
      bool second = false;
      for (const SegEvent* s : trace.seg_events()) second = second || s->image_index == 2;
      c.expect(second, "bi-temporal trace never reached image 2");
    }
    c.expect(serialize_trace(run_scenario(sc)) == serialize_trace(trace), std::string(name) + ": replay differs");
  }
  return c;
}

Check geoquery_thresholds() {
  Check c;
  auto decision = [&](const SpatialAnswer& a, bool valid, std::string_view reason, const std::string& what) {
    c.expect(a.valid == valid, what + ": wrong validity");
    if (!valid) c.expect(a.reject_reason.value_or("") == reason, what + ": wrong reason");
  };
  decision(coverage_percentage(counts_raster(5, 0), 1), true, "", "coverage 5%");
  decision(coverage_percentage(counts_raster(4, 0), 1), false, reject::below_significance, "coverage 4%");
  decision(compare_pair(counts_raster(50, 44), 1, 2), true, "", "compare 50/44");
  decision(compare_pair(counts_raster(50, 45), 1, 2), false, reject::ambiguous_sizes, "compare 50/45");
  decision(compare_pair(counts_raster(50, 4), 1, 2), false, reject::below_significance, "compare 50/4");
  decision(min_distance(two_blocks(11), 1, 2), true, "", "distance 11 px");
  decision(min_distance(two_blocks(10), 1, 2), false, reject::trivially_adjacent, "distance 10 px");
  decision(adjacency(counts_raster(50, 3), 1, 2), true, "", "adjacency 3%");
  decision(adjacency(counts_raster(50, 2), 1, 2), false, reject::too_small, "adjacency 2%");
  decision(adjacency(squares_raster(5), 1, 2), true, "", "adjacency 5 components");
  decision(adjacency(squares_raster(6), 1, 2), false, reject::fragmented, "adjacency 6 components");
  decision(building_change(square_buildings(10, 3)).rate, true, "", "buildings 10/3");
  decision(building_change(square_buildings(9, 5)).rate, false, reject::too_few_buildings, "buildings 9/5");
  decision(building_change(square_buildings(12, 2)).rate, false, reject::too_few_destroyed, "buildings 12/2");
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    double sum = 0.0;
    for (const auto& [id, p] : coverage_table(fixtures::synthetic_raster(seed))) sum += p;
    c.expect(std::abs(sum - 100.0) <= kCoverageSumTol, fmt("raster %g coverage sums to %.12f", double(seed), sum));
  }
  return c;
}

Check benchmark_round_trip() {
  Check c;
  const fs::path dir = kData / "rasters";
  const std::vector<BenchSample> bench = build_benchmark(dir, RunConfig{});
  c.expect(!bench.empty(), "empty benchmark");
  for (const auto& p : verify_benchmark(bench, dir)) c.expect(false, p);
  std::vector<Response> responses;
  for (const auto& s : bench) responses.push_back(response_from_json(oracle_response(s, true)));
  const EvalReport r = evaluate(bench, responses);
  c.expect(r.macro_accuracy == 100.0, fmt("macro accuracy %.4f", r.macro_accuracy));
  c.expect(r.mean_iou.has_value() && *r.mean_iou == 1.0, fmt("mean IoU %.6f", r.mean_iou.value_or(-1.0)));
  std::map<Task, int> got;
  for (const auto& s : bench) ++got[s.task];
  double ref_total = 0.0;
  for (const auto& [task, n] : reference_task_counts()) ref_total += n;
  for (const auto& [task, n] : reference_task_counts()) {
    const double want = n / ref_total, share = double(got[task]) / double(bench.size());
    c.expect(std::abs(share - want) <= kProportionRelTol * want,
             std::string(task_name(task)) + fmt(": share %.4f vs %.4f", share, want));
  }
  return c;
}

Check evaluation_metrics() {
  Check c;
  c.expect(extract_option("B") == 'B', "direct letter");
  c.expect(extract_option("The answer is C, not A.") == 'C', "first occurrence");
  c.expect(!extract_option("I cannot tell.").has_value(), "no letter");
  auto rows = [](int x0) {
    BinaryMask m(4, 2);
    for (int y = 0; y < 2; ++y) {
      for (int x = x0; x < x0 + 2; ++x) m.set(x, y);
    }
    return rle_encode(m);
  };
  c.expect(grounding_iou({rows(0)}, {rows(0)}) == 1.0, "identical IoU");
  c.expect(grounding_iou({rows(0)}, {rows(2)}) == 0.0, "disjoint IoU");
  c.expect(grounding_iou({rows(0)}, {rows(1)}) == 1.0 / 3.0, "half-overlap IoU");

  auto rec = [](int i, bool correct, double iou) {
    return EvalRecord{"s" + std::to_string(i), Task::area, correct ? std::optional<char>('A') : std::optional<char>('B'),
                      correct, iou};
  };
  std::mt19937_64 rng(1008);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalRecord> records;
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
      const bool correct = i % 2 == 0 || u(rng) < 0.3;
      const double iou = std::clamp(u(rng) * 0.6 + (correct ? 0.3 : 0.0), 0.0, 1.0);
      records.push_back(rec(i, correct, iou));
      x.push_back(correct ? 1.0 : 0.0);
      y.push_back(iou);
    }
    const double want = oracle::covariance_pearson(x, y), got = iou_correlation(records).r;
    c.expect(std::abs(got - want) <= kPearsonTol, fmt("pearson %.12f vs %.12f", got, want));
  }
  std::vector<EvalRecord> sep;
  for (int i = 0; i < 10; ++i) sep.push_back(rec(i, i < 6, i < 6 ? 0.9 : 0.1));
  c.expect(std::abs(iou_correlation(sep).r - 1.0) <= kPearsonTol, "perfect separation");
  std::vector<EvalRecord> groups;
  int i = 0;
  for (double v : {0.528, 0.728, 0.600, 0.656, 0.628}) groups.push_back(rec(i++, true, v));
  for (double v : {0.343, 0.543, 0.400, 0.486}) groups.push_back(rec(i++, false, v));
  const CorrelationResult g = iou_correlation(groups);
  c.expect(std::abs(g.mean_iou_correct - 0.628) <= kGroupMeanTol, fmt("correct mean %.15f", g.mean_iou_correct));
  c.expect(std::abs(g.mean_iou_incorrect - 0.443) <= kGroupMeanTol, fmt("incorrect mean %.15f", g.mean_iou_incorrect));
  return c;
}

Check loss_gradients() {
  Check c;
  std::mt19937_64 rng(1009);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  auto worst_error = [](const ProbMask& pred, const std::vector<double>& grad,
                        const std::function<double(const ProbMask&)>& loss) {
    double worst = 0.0;
    for (std::size_t i = 0; i < pred.probs.size(); ++i) {
      ProbMask up = pred, down = pred;
      up.probs[i] += kFdStep;
      down.probs[i] -= kFdStep;
      const double fd = (loss(up) - loss(down)) / (2 * kFdStep);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-12}));
    }
    return worst;
  };
  for (int trial = 0; trial < kGradientTrials; ++trial) {
    std::vector<double> p(256);
    for (auto& v : p) v = u(rng);
    const ProbMask pred = ProbMask::clamped(16, 16, std::move(p));
    const BinaryMask gt = random_mask(rng, 16, 16, 0.1 + 0.8 * (trial % 5) / 4.0);
    const double ed = worst_error(pred, dice_loss(pred, gt).grad, [&](const ProbMask& q) { return dice_loss(q, gt).loss; });
    const double ec = worst_error(pred, pixel_ce(pred, gt).grad, [&](const ProbMask& q) { return pixel_ce(q, gt).loss; });
    c.expect(ed <= kFdRelTol, fmt("dice trial %g rel err %g", trial, ed));
    c.expect(ec <= kFdRelTol, fmt("ce trial %g rel err %g", trial, ec));
  }
  const ProbMask half = ProbMask::clamped(16, 16, std::vector<double>(256, 0.5));
  const double ce = pixel_ce(half, random_mask(rng, 16, 16, 0.5)).loss;
  c.expect(std::abs(ce - std::log(2.0)) <= kLnTwoTol, fmt("uniform CE %.12f", ce));
  const LossBreakdown b = total_loss(1.0, 0.2, 0.4);
  c.expect(b.lambda_seg == 0.5 && std::abs(b.total - 1.3) <= 1e-15, fmt("total %.15f with lambda %g", b.total, b.lambda_seg));
  return c;
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria{
      {"distance transform oracle", edt_oracle},
      {"morphology oracles", morphology_oracle},
      {"token pipeline", token_pipeline},
      {"modality math", modality_math},
      {"runtime conformance", runtime_conformance},
      {"geoquery thresholds", geoquery_thresholds},
      {"benchmark round trip", benchmark_round_trip},
      {"evaluation metrics", evaluation_metrics},
      {"loss gradients", loss_gradients},
  };
  int failed = 0, number = 0;
  for (const auto& [name, run] : criteria) {
    ++number;
    const auto t = std::chrono::steady_clock::now();
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t);
    if (c.failures == 0) {
      std::printf("PASS %2d %-28s (%.2f s)\n", number, name, secs);
    } else {
      ++failed;
      std::printf("FAIL %2d %-28s (%.2f s) %d failure(s), first: %s\n", number, name, secs, c.failures,
                  c.first.c_str());
    }
    std::fflush(stdout);
  }
  const double total = seconds_since(t0);
  const bool in_budget = total < kSuiteBudgetSeconds;
  failed += in_budget ? 0 : 1;
  std::printf("%s %2d %-28s (%.2f s, budget %.0f s)\n", in_budget ? "PASS" : "FAIL", ++number, "full-suite runtime", total,
              kSuiteBudgetSeconds);
  return failed == 0 ? 0 : 1;
}
