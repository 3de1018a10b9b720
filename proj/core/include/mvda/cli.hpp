#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mvda/models.hpp"
#include "mvda/training.hpp"

namespace mvda::cli {

// Everything one run needs: dataset location, model hyperparameters, both
// training schedules, and the seed. Serialized as a JSON document; the exact
// config is archived beside a run's outputs.
struct RunConfig {
  std::string dataset;
  std::string out_dir;
  std::uint64_t seed = 0;
  ModelLConfig model_l;
  ModelCConfig model_c;
  TrainConfig train_l;
  TrainConfig train_c_phase1;
  TrainConfig train_c_phase2;
};

RunConfig default_run_config();
RunConfig run_config_from_json(const std::string& text);
std::string run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& config, const std::string& path);

// MVDA_OUTPUT_ROOT, or "." when unset.
std::string default_output_root();

struct GenerateOptions {
  int buildings = 40;
  std::array<double, 5> class_mix{0.2, 0.2, 0.2, 0.2, 0.2};
  double directional_fraction = 0.3;
  std::uint64_t seed = 0;
  std::string out;
  std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
  int image_size = 64;
};

int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err);

struct TrainOptions {
  RunConfig config;
  std::string stage = "all";  // loc | cls | all
};

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);

struct EvalOptions {
  std::string dataset;
  std::string model_l_path;  // optional in oracle mode
  std::string model_c_path;
  std::string split = "test";
  bool oracle_masks = false;
  std::string out_dir;
  bool eleven_point_ap = false;
};

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

struct AblateOptions {
  std::string dataset;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out_dir;
  ModelCConfig model;          // fused model; single-view variants derive from it
  TrainConfig phase1;
  TrainConfig phase2;
};

AblateOptions default_ablate_options();

struct AblateSeedResult {
  std::uint64_t seed = 0;
  std::array<double, kNumViews> single_view_accuracy{};
  double best_single = 0;
  double fused = 0;
};

struct AblateReport {
  std::vector<AblateSeedResult> per_seed;
  double mean_fused = 0;
  double mean_best_single = 0;
  double mean_gap = 0;  // mean over seeds of (fused - best single)
};

int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err,
               AblateReport* report_out = nullptr);

}  // namespace mvda::cli
