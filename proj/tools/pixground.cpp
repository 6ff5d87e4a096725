#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pixground/commands.hpp"
#include "pixground/error.hpp"

int main(int argc, char** argv) {
  using namespace pixground;

  CLI::App app{"pixground: pixel-grounded reasoning, benchmark synthesis and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string out_path;
  std::string tasks;
  app.add_option("--seed", cfg.seed, "Seed for option order and distractors (default 0)");
  app.add_option("--token-cap", cfg.token_cap, "Maximum injected tokens per [SEG]")->capture_default_str();
  app.add_option("--lambda-seg", cfg.lambda_seg, "Weight of the segmentation loss")->capture_default_str();
  app.add_option("--tasks", tasks, "Comma-separated task filter");
  app.add_option("--out", out_path, "Output path");

  std::string dir, bench, responses, scenario, format = "text";
  int rasters = 40, building_sets = 48;
  bool with_masks = false;
  MaskOpsArgs mask_args;
  std::string mask, pred, gt;

  auto* synth = app.add_subcommand("synth", "Write the synthetic raster and footprint fixtures");
  synth->add_option("dir", dir, "Output directory")->required();
  synth->add_option("--rasters", rasters, "Number of land-cover rasters")->capture_default_str();
  synth->add_option("--buildings", building_sets, "Number of building footprint sets")->capture_default_str();

  auto* build = app.add_subcommand("build-bench", "Build a multiple-choice benchmark from a raster directory");
  build->add_option("raster_dir", dir, "Directory of rasters and footprint files")->required();

  auto* verify = app.add_subcommand("verify", "Re-verify benchmark answers against their sources");
  verify->add_option("bench", bench, "Benchmark JSON-lines file")->required();
  verify->add_option("raster_dir", dir, "Directory the benchmark was built from")->required();

  auto* oracle = app.add_subcommand("oracle", "Write ground-truth responses for a benchmark");
  oracle->add_option("bench", bench, "Benchmark JSON-lines file")->required();
  oracle->add_option("--format", format, "text or trace")->capture_default_str();
  oracle->add_flag("--with-masks", with_masks, "Attach gt masks to text responses");

  auto* eval = app.add_subcommand("evaluate", "Score responses against a benchmark");
  eval->add_option("bench", bench, "Benchmark JSON-lines file")->required();
  eval->add_option("responses", responses, "Responses JSON-lines file")->required();

  auto* sim = app.add_subcommand("simulate", "Run a scripted inference scenario");
  sim->add_option("scenario", scenario, "Scenario JSON file")->required();

  auto* ops = app.add_subcommand("mask-ops", "Spot checks on masks and losses");
  ops->add_option("op", mask_args.op, "area|dilate|erode|open|components4|components8|distance|dice|ce|loss")
      ->required();
  ops->add_option("--mask", mask, "RLE mask JSON");
  ops->add_option("--pred", pred, "Probability plane JSON {width,height,probs}");
  ops->add_option("--gt", gt, "RLE gt mask JSON");
  ops->add_option("--lm", mask_args.lm, "Language-model loss for op=loss");

  CLI11_PARSE(app, argc, argv);

  cfg.seed_given = app.count("--seed") > 0;
  if (!out_path.empty()) cfg.out = out_path;
  try {
    cfg.tasks = parse_task_list(tasks);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  if (*synth) return cmd_synth(dir, rasters, building_sets, cfg, std::cout, std::cerr);
  if (*build) return cmd_build_bench(dir, cfg, std::cout, std::cerr);
  if (*verify) return cmd_verify(bench, dir, std::cout, std::cerr);
  if (*oracle) return cmd_oracle(bench, format, with_masks, cfg, std::cout, std::cerr);
  if (*eval) return cmd_evaluate(bench, responses, cfg, std::cout, std::cerr);
  if (*sim) return cmd_simulate(scenario, cfg, std::cout, std::cerr);
  if (*ops) {
    if (!mask.empty()) mask_args.mask = mask;
    if (!pred.empty()) mask_args.pred = pred;
    if (!gt.empty()) mask_args.gt = gt;
    return cmd_mask_ops(mask_args, cfg, std::cout, std::cerr);
  }
  return 1;
}
