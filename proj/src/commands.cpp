#include "pixground/commands.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <ostream>

#include "pixground/error.hpp"
#include "pixground/fixtures.hpp"
#include "pixground/scenario.hpp"

namespace pixground {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema, path.string() + ": " + e.what());
  }
}

// Runs `body`, mapping library errors to exit status 1 with a message.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error (" << error_code_name(e.code()) << "): " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

void emit(const std::string& text, const RunConfig& cfg, std::ostream& out) {
  if (!cfg.out) {
    out << text;
    return;
  }
  std::ofstream file(*cfg.out, std::ios::binary);
  if (!file) throw Error(ErrorCode::io, "cannot write " + cfg.out->string());
  file << text;
}

}  // namespace

void RunConfig::validate() const {
  if (token_cap < 1) throw Error(ErrorCode::invalid_argument, "--token-cap must be >= 1");
  if (!(lambda_seg >= 0.0)) throw Error(ErrorCode::invalid_argument, "--lambda-seg must be >= 0");
}

SourceFiles list_sources(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::io, dir.string() + " is not a readable directory");
  SourceFiles files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (ends_with(name, ".buildings.json")) {
      files.buildings.push_back(entry.path());
    } else if (ends_with(name, ".meta.json")) {
      continue;
    } else if (ends_with(name, ".pgm") || ends_with(name, ".json")) {
      files.rasters.push_back(entry.path());
    }
  }
  std::sort(files.rasters.begin(), files.rasters.end());
  std::sort(files.buildings.begin(), files.buildings.end());
  return files;
}

std::vector<BenchSample> build_benchmark(const std::filesystem::path& raster_dir, const RunConfig& cfg) {
  const SourceFiles files = list_sources(raster_dir);
  if (files.rasters.empty() && files.buildings.empty()) {
    throw Error(ErrorCode::empty_input, "no rasters or building files in " + raster_dir.string());
  }
  const std::set<Task> tasks = cfg.tasks.empty() ? std::set<Task>(kBenchTasks.begin(), kBenchTasks.end()) : cfg.tasks;
  const std::size_t n = files.rasters.size() + files.buildings.size();
  std::vector<std::vector<BenchSample>> per_file(n);
  std::vector<std::exception_ptr> failures(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      GenerateOptions opts;
      opts.tasks = tasks;
      if (i < files.rasters.size()) {
        opts.source_path = files.rasters[i].filename().string();
        per_file[i] = generate_l1(load_raster(files.rasters[i]), cfg.seed, opts);
      } else {
        const auto& path = files.buildings[i - files.rasters.size()];
        opts.source_path = path.filename().string();
        per_file[i] = generate_building(load_buildings(path), cfg.seed, opts);
      }
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::vector<BenchSample> candidates;
  for (auto& v : per_file) {
    for (auto& s : v) candidates.push_back(std::move(s));
  }
  std::map<Task, int> weights;
  for (const auto& [task, w] : reference_task_counts()) {
    if (tasks.contains(task)) weights[task] = w;
  }
  return match_distribution(std::move(candidates), weights);
}

std::vector<std::string> verify_benchmark(const std::vector<BenchSample>& bench, const std::filesystem::path& raster_dir) {
  std::vector<std::string> problems;
  for (const auto& s : bench) {
    const auto path = raster_dir / s.source_path;
    std::vector<std::string> found;
    try {
      found = s.task == Task::building_change ? verify_sample(s, load_buildings(path))
                                              : verify_sample(s, load_raster(path));
    } catch (const Error& e) {
      found = {e.what()};
    }
    for (const auto& p : found) problems.push_back(s.id + ": " + p);
  }
  return problems;
}

nlohmann::json oracle_response(const BenchSample& sample, bool with_masks) {
  nlohmann::json j{{"id", sample.id}, {"response", "The answer is " + std::string(1, sample.answer) + "."}};
  if (with_masks) {
    nlohmann::json masks = nlohmann::json::array();
    for (const auto& g : sample.gt_masks) {
      nlohmann::json m = g.mask;
      m["image_index"] = g.image_index;
      masks.push_back(std::move(m));
    }
    j["masks"] = std::move(masks);
  }
  return j;
}

ReasoningTrace oracle_trace(const BenchSample& sample, std::uint64_t seed, int token_cap) {
  constexpr int kDim = 8;
  int images = 1;
  int width = 64, height = 64;
  for (const auto& g : sample.gt_masks) {
    images = std::max(images, g.image_index);
    width = g.mask.width;
    height = g.mask.height;
  }
  std::vector<StaticFeatureProvider::Image> imgs;
  for (int i = 1; i <= images; ++i) {
    StaticFeatureProvider::Image img;
    img.layout = plan_patches(width, height);
    img.optical = synthetic_features(img.layout.token_count(), kDim, seed, i, Modality::optical);
    imgs.push_back(std::move(img));
  }
  const StaticFeatureProvider features(std::move(imgs));

  std::vector<ScriptEntry> script{{"<think>", std::nullopt}};
  std::vector<ScriptedMaskDecoder::Entry> entries;
  for (std::size_t k = 0; k < sample.gt_masks.size(); ++k) {
    const auto& g = sample.gt_masks[k];
    const std::string state = "gt" + std::to_string(k);
    script.push_back({"Image:", std::nullopt});
    script.push_back({"t" + std::to_string(g.image_index), std::nullopt});
    script.push_back({"[SEG]", SegPromptState{state}});
    entries.push_back({state, g.image_index, rle_decode(g.mask)});
  }
  for (const char* tok : {"</think>", "<answer>"}) script.push_back({tok, std::nullopt});
  script.push_back({std::string(1, sample.answer), std::nullopt});
  script.push_back({"</answer>", std::nullopt});

  ScriptedGenerator generator(std::move(script), kDim, seed ^ fnv1a(sample.id));
  ScriptedMaskDecoder decoder(std::move(entries));
  GenerationConfig cfg;
  cfg.token_cap = token_cap;
  ReasoningTrace trace = run_inference(generator, decoder, features, format_prompt(sample), cfg);
  trace.id = sample.id;
  return trace;
}

int cmd_synth(const std::filesystem::path& dir, int rasters, int building_sets, const RunConfig& cfg,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (rasters < 0 || building_sets < 0) throw Error(ErrorCode::invalid_argument, "counts must be >= 0");
    const auto counts = fixtures::write_fixture_set(dir, rasters, building_sets, cfg.seed);
    out << nlohmann::json{{"pgm_rasters", counts.pgm_rasters},
                          {"json_rasters", counts.json_rasters},
                          {"building_sets", counts.building_sets}}
               .dump()
        << '\n';
    return 0;
  });
}

int cmd_build_bench(const std::filesystem::path& raster_dir, const RunConfig& cfg, std::ostream& out,
                    std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    const auto bench = build_benchmark(raster_dir, cfg);
    const std::filesystem::path path = cfg.out.value_or("bench.jsonl");
    const BenchStats stats = assemble_benchmark(bench, path);
    nlohmann::json report = to_json(stats);
    report["path"] = path.string();
    out << report.dump(2) << '\n';
    return 0;
  });
}

int cmd_verify(const std::filesystem::path& bench_file, const std::filesystem::path& raster_dir, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const auto bench = read_benchmark(bench_file);
    const auto problems = verify_benchmark(bench, raster_dir);
    for (const auto& p : problems) err << p << '\n';
    out << bench.size() - std::min(bench.size(), problems.size()) << "/" << bench.size() << " samples verified\n";
    return problems.empty() ? 0 : 1;
  });
}

int cmd_oracle(const std::filesystem::path& bench_file, const std::string& format, bool with_masks,
               const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    if (format != "text" && format != "trace") {
      throw Error(ErrorCode::invalid_argument, "--format must be text or trace");
    }
    std::string text;
    for (const auto& s : read_benchmark(bench_file)) {
      const nlohmann::json line = format == "text" ? oracle_response(s, with_masks)
                                                   : to_json(oracle_trace(s, cfg.seed, cfg.token_cap));
      text += line.dump() + "\n";
    }
    emit(text, cfg, out);
    return 0;
  });
}

int cmd_evaluate(const std::filesystem::path& bench_file, const std::filesystem::path& responses_file,
                 const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto bench = read_benchmark(bench_file);
    const auto responses = read_responses(responses_file);
    const EvalReport report = evaluate(bench, responses);
    out << format_table(report);
    const std::string json = to_json(report).dump(2) + "\n";
    if (cfg.out) {
      emit(json, cfg, out);
    } else {
      out << json;
    }
    return 0;
  });
}

int cmd_simulate(const std::filesystem::path& scenario_file, const RunConfig& cfg, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    Scenario scenario = load_scenario(scenario_file);
    if (cfg.seed_given) scenario.seed = cfg.seed;
    const ReasoningTrace trace = run_scenario(scenario, cfg.token_cap);
    const auto violations = check_trace(trace, cfg.token_cap);
    for (const auto& v : violations) err << "trace violation: " << v << '\n';
    emit(serialize_trace(trace) + "\n", cfg, out);
    if (trace.truncated) err << "warning: generation hit max_tokens before the end token\n";
    return violations.empty() ? 0 : 1;
  });
}

int cmd_mask_ops(const MaskOpsArgs& args, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    auto load_mask = [](const std::optional<std::filesystem::path>& p, const char* flag) {
      if (!p) throw Error(ErrorCode::invalid_argument, std::string("this op needs ") + flag);
      return rle_decode(read_json_file(*p).get<RleMask>());
    };
    nlohmann::json result{{"op", args.op}};
    const std::string& op = args.op;
    if (op == "area" || op == "dilate" || op == "erode" || op == "open" || op == "components4" ||
        op == "components8" || op == "distance") {
      const BinaryMask m = load_mask(args.mask, "--mask");
      if (op == "area") {
        result["area"] = m.count();
      } else if (op == "dilate" || op == "erode" || op == "open") {
        const BinaryMask r = op == "dilate" ? dilate(m) : op == "erode" ? erode(m) : open(m);
        result["mask"] = rle_encode(r);
        result["area"] = r.count();
      } else if (op == "components4" || op == "components8") {
        result["count"] = connected_components(m, op == "components4" ? Connectivity::four : Connectivity::eight).count;
      } else {
        const DistanceField d = distance_transform(m);
        result["max_distance"] = *std::max_element(d.values.begin(), d.values.end());
      }
    } else if (op == "dice" || op == "ce" || op == "loss") {
      if (!args.pred) throw Error(ErrorCode::invalid_argument, "this op needs --pred");
      const auto pj = read_json_file(*args.pred);
      const ProbMask pred = ProbMask::clamped(pj.at("width").get<int>(), pj.at("height").get<int>(),
                                              pj.at("probs").get<std::vector<double>>());
      const BinaryMask gt = load_mask(args.gt, "--gt");
      const double dice = dice_loss(pred, gt).loss;
      const double ce = pixel_ce(pred, gt).loss;
      if (op == "dice") {
        result["dice"] = dice;
      } else if (op == "ce") {
        result["ce"] = ce;
      } else {
        const LossBreakdown b = total_loss(args.lm, dice, ce, cfg.lambda_seg);
        result.update({{"lm", b.lm}, {"dice", b.dice}, {"ce", b.ce}, {"lambda_seg", b.lambda_seg}, {"total", b.total}});
      }
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown op '" + op + "'");
    }
    emit(result.dump() + "\n", cfg, out);
    return 0;
  });
}

}  // namespace pixground
