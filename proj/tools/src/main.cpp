// mvda: synthetic multi-view damage assessment runs end to end —
// dataset generation, two-stage training, evaluation, and the
// multi-view-vs-single-view ablation.

#include <array>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvda/cli.hpp"

namespace {

std::array<double, 5> parse_mix(const std::vector<double>& values,
                                const std::array<double, 5>& fallback) {
  if (values.empty()) return fallback;
  if (values.size() != 5)
    throw CLI::ValidationError("--class-mix expects 5 comma-separated fractions");
  std::array<double, 5> out{};
  std::copy(values.begin(), values.end(), out.begin());
  return out;
}

std::array<double, 3> parse_split(const std::vector<double>& values,
                                  const std::array<double, 3>& fallback) {
  if (values.empty()) return fallback;
  if (values.size() != 3)
    throw CLI::ValidationError("--split expects 3 comma-separated fractions");
  std::array<double, 3> out{};
  std::copy(values.begin(), values.end(), out.begin());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view post-disaster damage assessment runs"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "render a synthetic multi-view dataset");
  mvda::cli::GenerateOptions gen_opts;
  std::vector<double> gen_mix, gen_split;
  gen->add_option("--buildings", gen_opts.buildings, "number of buildings (>= 5)");
  gen->add_option("--class-mix", gen_mix, "five damage-state fractions summing to 1")
      ->delimiter(',');
  gen->add_option("--directional-fraction", gen_opts.directional_fraction,
                  "fraction of damaged buildings visible from exactly one ground view");
  gen->add_option("--seed", gen_opts.seed, "generator seed");
  gen->add_option("--out", gen_opts.out, "output dataset directory")->required();
  gen->add_option("--split", gen_split, "train/val/test fractions")->delimiter(',');
  gen->add_option("--image-size", gen_opts.image_size, "square image size in pixels");

  // train
  auto* train = app.add_subcommand("train", "train the localization and classification models");
  std::string train_config_path, train_stage = "all", train_data, train_out;
  std::uint64_t train_seed = 0;
  bool train_seed_set = false, shared_backbone = false;
  std::string fusion_name;
  train->add_option("--config", train_config_path, "run config JSON (flags override it)");
  train->add_option("--stage", train_stage, "loc | cls | all")
      ->check(CLI::IsMember({"loc", "cls", "all"}));
  train->add_option("--data", train_data, "dataset directory");
  train->add_option("--out", train_out, "output directory for checkpoints and logs");
  train->add_option("--seed", train_seed, "run seed")->each([&](const std::string&) {
    train_seed_set = true;
  });
  train->add_flag("--shared-backbone", shared_backbone,
                  "share one backbone across all views of Model-C");
  train->add_option("--fusion", fusion_name, "early-concat | view-max")
      ->check(CLI::IsMember({"early-concat", "view-max"}));

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints and write a metrics report");
  mvda::cli::EvalOptions eval_opts;
  eval->add_option("--data", eval_opts.dataset, "dataset directory")->required();
  eval->add_option("--model-l", eval_opts.model_l_path, "Model-L checkpoint");
  eval->add_option("--model-c", eval_opts.model_c_path, "Model-C checkpoint")->required();
  eval->add_option("--split", eval_opts.split, "train | val | test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_flag("--oracle-masks", eval_opts.oracle_masks,
                 "use ground-truth masks instead of Model-L");
  eval->add_option("--out", eval_opts.out_dir, "directory for report.json and pr_curve.csv");
  eval->add_flag("--eleven-point-ap", eval_opts.eleven_point_ap,
                 "use the legacy 11-point AP interpolation");

  // ablate
  auto* ablate = app.add_subcommand(
      "ablate", "train per-view single-view classifiers and the fused model, compare accuracy");
  mvda::cli::AblateOptions ablate_opts = mvda::cli::default_ablate_options();
  ablate->add_option("--data", ablate_opts.dataset, "dataset directory")->required();
  ablate->add_option("--seeds", ablate_opts.seeds, "seeds to average over")->delimiter(',');
  ablate->add_option("--out", ablate_opts.out_dir, "directory for ablate_report.json");
  ablate->add_option("--phase1-epochs", ablate_opts.phase1.max_epochs, "frozen-phase epochs");
  ablate->add_option("--phase2-epochs", ablate_opts.phase2.max_epochs, "fine-tune epochs");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    gen_opts.class_mix = parse_mix(gen_mix, gen_opts.class_mix);
    gen_opts.split_fractions = parse_split(gen_split, gen_opts.split_fractions);
    return mvda::cli::cmd_generate(gen_opts, std::cout, std::cerr);
  }

  if (train->parsed()) {
    mvda::cli::TrainOptions opts;
    try {
      opts.config = train_config_path.empty() ? mvda::cli::default_run_config()
                                              : mvda::cli::load_run_config(train_config_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
    if (!train_data.empty()) opts.config.dataset = train_data;
    if (!train_out.empty()) opts.config.out_dir = train_out;
    if (train_seed_set) opts.config.seed = train_seed;
    if (shared_backbone) opts.config.model_c.shared_backbone = true;
    if (!fusion_name.empty())
      opts.config.model_c.fusion = mvda::fusion_mode_from_name(fusion_name);
    opts.stage = train_stage;
    return mvda::cli::cmd_train(opts, std::cout, std::cerr);
  }

  if (eval->parsed()) return mvda::cli::cmd_eval(eval_opts, std::cout, std::cerr);
  if (ablate->parsed()) return mvda::cli::cmd_ablate(ablate_opts, std::cout, std::cerr);
  return 0;
}
