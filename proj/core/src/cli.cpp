#include "mvda/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <json.hpp>

#include "mvda/checkpoint.hpp"
#include "mvda/evaluation.hpp"
#include "mvda/samples.hpp"
#include "mvda/synthetic.hpp"
#include "mvda/util.hpp"

namespace mvda::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json backbone_to_json(const BackboneConfig& b) {
  json blocks = json::array();
  for (const auto& blk : b.blocks) blocks.push_back({blk.out_channels, blk.stride});
  return json{{"in_channels", b.in_channels},
              {"stem_channels", b.stem_channels},
              {"stem_stride", b.stem_stride},
              {"stem_pool", b.stem_pool},
              {"blocks", blocks}};
}

void backbone_from_json(const json& j, BackboneConfig& b) {
  b.in_channels = j.value("in_channels", b.in_channels);
  b.stem_channels = j.value("stem_channels", b.stem_channels);
  b.stem_stride = j.value("stem_stride", b.stem_stride);
  b.stem_pool = j.value("stem_pool", b.stem_pool);
  if (j.contains("blocks")) {
    b.blocks.clear();
    for (const auto& blk : j.at("blocks"))
      b.blocks.push_back({blk.at(0).get<int>(), blk.at(1).get<int>()});
  }
}

json train_to_json(const TrainConfig& t) {
  return json{{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
              {"max_epochs", t.max_epochs},       {"patience", t.patience},
              {"loss", loss_kind_name(t.loss)},   {"gamma", t.gamma},
              {"alpha", t.alpha},                 {"augment", t.augment}};
}

void train_from_json(const json& j, TrainConfig& t) {
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.patience = j.value("patience", t.patience);
  if (j.contains("loss")) t.loss = loss_kind_from_name(j.at("loss").get<std::string>());
  t.gamma = j.value("gamma", t.gamma);
  if (j.contains("alpha")) t.alpha = j.at("alpha").get<std::vector<float>>();
  t.augment = j.value("augment", t.augment);
}

int fail(std::ostream& err, const std::string& message) {
  err << "error: " << message << "\n";
  return 1;
}

double checked_accuracy(const ModelC<float>& model, const std::vector<ClsSample>& samples) {
  return model_c_accuracy(model, samples);
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.out_dir = (fs::path(default_output_root()) / "run").string();

  c.train_l.learning_rate = 1e-4;
  c.train_l.batch_size = 1;
  c.train_l.max_epochs = 50;
  c.train_l.patience = 3;
  c.train_l.loss = LossKind::kFocal;
  c.train_l.gamma = 2.0;
  c.train_l.augment = true;

  c.train_c_phase1.learning_rate = 1e-3;
  c.train_c_phase1.batch_size = 4;
  c.train_c_phase1.max_epochs = 25;
  c.train_c_phase1.patience = 25;
  c.train_c_phase1.loss = LossKind::kCrossEntropy;
  c.train_c_phase1.augment = true;

  c.train_c_phase2 = c.train_c_phase1;
  c.train_c_phase2.learning_rate = 1e-4;
  c.train_c_phase2.max_epochs = 15;
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json doc{
      {"dataset", c.dataset},
      {"out_dir", c.out_dir},
      {"seed", c.seed},
      {"model_l",
       {{"input_size", c.model_l.input_size},
        {"bins", c.model_l.bins},
        {"backbone", backbone_to_json(c.model_l.backbone)}}},
      {"model_c",
       {{"input_size", c.model_c.input_size},
        {"num_views", c.model_c.num_views},
        {"num_classes", c.model_c.num_classes},
        {"head_hidden", c.model_c.head_hidden},
        {"fusion", fusion_mode_name(c.model_c.fusion)},
        {"shared_backbone", c.model_c.shared_backbone},
        {"backbone", backbone_to_json(c.model_c.backbone)}}},
      {"train_l", train_to_json(c.train_l)},
      {"train_c_phase1", train_to_json(c.train_c_phase1)},
      {"train_c_phase2", train_to_json(c.train_c_phase2)},
  };
  return doc.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw std::runtime_error("run config: invalid JSON");
  RunConfig c = default_run_config();
  c.dataset = doc.value("dataset", c.dataset);
  c.out_dir = doc.value("out_dir", c.out_dir);
  c.seed = doc.value("seed", c.seed);
  if (doc.contains("model_l")) {
    const json& m = doc.at("model_l");
    c.model_l.input_size = m.value("input_size", c.model_l.input_size);
    if (m.contains("bins")) c.model_l.bins = m.at("bins").get<std::vector<int>>();
    if (m.contains("backbone")) backbone_from_json(m.at("backbone"), c.model_l.backbone);
  }
  if (doc.contains("model_c")) {
    const json& m = doc.at("model_c");
    c.model_c.input_size = m.value("input_size", c.model_c.input_size);
    c.model_c.num_views = m.value("num_views", c.model_c.num_views);
    c.model_c.num_classes = m.value("num_classes", c.model_c.num_classes);
    c.model_c.head_hidden = m.value("head_hidden", c.model_c.head_hidden);
    if (m.contains("fusion"))
      c.model_c.fusion = fusion_mode_from_name(m.at("fusion").get<std::string>());
    c.model_c.shared_backbone = m.value("shared_backbone", c.model_c.shared_backbone);
    if (m.contains("backbone")) backbone_from_json(m.at("backbone"), c.model_c.backbone);
  }
  if (doc.contains("train_l")) train_from_json(doc.at("train_l"), c.train_l);
  if (doc.contains("train_c_phase1")) train_from_json(doc.at("train_c_phase1"), c.train_c_phase1);
  if (doc.contains("train_c_phase2")) train_from_json(doc.at("train_c_phase2"), c.train_c_phase2);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("run config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return run_config_from_json(text);
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("run config: cannot write " + path);
  f << run_config_to_json(config);
  if (!f) throw std::runtime_error("run config: write failed " + path);
}

std::string default_output_root() {
  const char* env = std::getenv("MVDA_OUTPUT_ROOT");
  return env && *env ? env : ".";
}

int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    GeneratorConfig gen;
    gen.n_buildings = options.buildings;
    gen.class_mix = options.class_mix;
    gen.directional_fraction = options.directional_fraction;
    gen.seed = options.seed;
    gen.image_size = options.image_size;
    if (options.out.empty()) return fail(err, "generate: --out is required");

    DatasetManifest manifest = generate_synthetic_dataset(gen, options.out);
    split_dataset(manifest, options.split_fractions, options.seed);
    const std::string manifest_path = (fs::path(options.out) / "manifest.json").string();
    save_manifest(manifest, manifest_path);

    int train = 0, val = 0, test = 0;
    for (const auto& [id, split] : manifest.splits) {
      if (split == SplitKind::kTrain) ++train;
      else if (split == SplitKind::kVal) ++val;
      else ++test;
    }
    out << "generated " << manifest.samples.size() << " buildings ("
        << manifest.samples.size() * kNumViews << " images, "
        << manifest.samples.size() * kNumViews << " masks) under " << options.out << "\n";
    out << "split: " << train << " train / " << val << " val / " << test << " test\n";
    out << "manifest digest: " << hex64(fnv1a64_file(manifest_path)) << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e.what());
  }
}

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig& config = options.config;
    if (options.stage != "loc" && options.stage != "cls" && options.stage != "all")
      return fail(err, "train: stage must be loc, cls, or all");
    if (config.dataset.empty()) return fail(err, "train: no dataset configured");

    const DatasetManifest manifest =
        load_manifest((fs::path(config.dataset) / "manifest.json").string());

    fs::create_directories(config.out_dir);
    save_run_config(config, (fs::path(config.out_dir) / "config.json").string());

    if (options.stage == "loc" || options.stage == "all") {
      std::vector<SegSample> train_split = segmentation_samples(manifest, SplitKind::kTrain);
      std::vector<SegSample> val_split = segmentation_samples(manifest, SplitKind::kVal);
      ModelL<float> model = ModelL<float>::create(config.model_l, config.seed);
      TrainConfig tc = config.train_l;
      tc.seed = config.seed;
      const TrainLog log = train_model_l(model, train_split, val_split, tc);
      const std::string ckpt = (fs::path(config.out_dir) / "model_l.ckpt").string();
      save_checkpoint(model, ckpt);
      log.write_csv((fs::path(config.out_dir) / "model_l_log.csv").string());
      out << "model_l: " << log.epochs.size() << " epochs (" << log.stop_reason
          << "), best val loss " << log.epochs.back().val_loss << ", checkpoint " << ckpt
          << "\n";
    }

    if (options.stage == "cls" || options.stage == "all") {
      std::vector<ClsSample> train_split = classification_samples(manifest, SplitKind::kTrain);
      std::vector<ClsSample> val_split = classification_samples(manifest, SplitKind::kVal);
      ModelC<float> model = ModelC<float>::create(config.model_c, config.seed);
      TrainConfig p1 = config.train_c_phase1;
      TrainConfig p2 = config.train_c_phase2;
      p1.seed = config.seed;
      p2.seed = config.seed;
      const TrainLog log = train_model_c(model, train_split, val_split, p1, p2);
      const std::string ckpt = (fs::path(config.out_dir) / "model_c.ckpt").string();
      save_checkpoint(model, ckpt);
      log.write_csv((fs::path(config.out_dir) / "model_c_log.csv").string());
      out << "model_c: " << log.epochs.size() << " epochs, final val accuracy "
          << log.epochs.back().val_metric << ", checkpoint " << ckpt << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e.what());
  }
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
  try {
    if (options.dataset.empty()) return fail(err, "eval: --data is required");
    if (options.model_c_path.empty()) return fail(err, "eval: --model-c is required");
    if (!options.oracle_masks && options.model_l_path.empty())
      return fail(err, "eval: --model-l is required unless --oracle-masks is set");

    const DatasetManifest manifest =
        load_manifest((fs::path(options.dataset) / "manifest.json").string());
    const SplitKind split = split_from_name(options.split);

    ModelC<float> model_c = load_model_c_checkpoint(options.model_c_path);
    std::optional<ModelL<float>> model_l;
    if (!options.oracle_masks) model_l.emplace(load_model_l_checkpoint(options.model_l_path));

    MetricsReport report;
    report.oracle_masks = options.oracle_masks;
    if (model_l)
      report.model_l = evaluate_model_l(*model_l, manifest, split, options.eleven_point_ap);
    report.model_c =
        evaluate_model_c(model_l ? &*model_l : nullptr, model_c, manifest, split,
                         options.oracle_masks);

    const std::string out_dir = options.out_dir.empty() ? "." : options.out_dir;
    fs::create_directories(out_dir);
    const std::string report_path = (fs::path(out_dir) / "report.json").string();
    save_metrics_report(report, report_path);
    if (report.model_l)
      save_pr_curve_csv(report.model_l->pr_curve, (fs::path(out_dir) / "pr_curve.csv").string());

    if (report.model_l) {
      out << "model_l: mean_iou " << report.model_l->mean_iou << ", mean_f1 "
          << report.model_l->mean_f1 << ", mean_precision " << report.model_l->mean_precision
          << ", mean_recall " << report.model_l->mean_recall << ", map " << report.model_l->map
          << "\n";
    } else {
      out << "model_l: skipped (oracle masks)\n";
    }
    out << "model_c: accuracy_fine " << report.model_c->accuracy_fine << ", accuracy_coarse "
        << report.model_c->accuracy_coarse << "\n";
    out << "report: " << report_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e.what());
  }
}

AblateOptions default_ablate_options() {
  AblateOptions o;
  const RunConfig defaults = default_run_config();
  o.model = defaults.model_c;
  o.phase1 = defaults.train_c_phase1;
  o.phase2 = defaults.train_c_phase2;
  o.phase1.max_epochs = 15;
  o.phase2.max_epochs = 10;
  return o;
}

int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err,
               AblateReport* report_out) {
  try {
    if (options.dataset.empty()) return fail(err, "ablate: --data is required");
    if (options.seeds.empty()) return fail(err, "ablate: need at least one seed");
    const DatasetManifest manifest =
        load_manifest((fs::path(options.dataset) / "manifest.json").string());

    const std::vector<ClsSample> fused_train =
        classification_samples(manifest, SplitKind::kTrain);
    const std::vector<ClsSample> fused_val = classification_samples(manifest, SplitKind::kVal);
    const std::vector<ClsSample> fused_test = classification_samples(manifest, SplitKind::kTest);

    std::vector<std::vector<ClsSample>> single_train, single_val, single_test;
    for (int v = 0; v < kNumViews; ++v) {
      const ViewRole role = static_cast<ViewRole>(v);
      single_train.push_back(single_view_samples(manifest, SplitKind::kTrain, role));
      single_val.push_back(single_view_samples(manifest, SplitKind::kVal, role));
      single_test.push_back(single_view_samples(manifest, SplitKind::kTest, role));
    }

    AblateReport report;
    for (std::uint64_t seed : options.seeds) {
      AblateSeedResult row;
      row.seed = seed;

      for (int v = 0; v < kNumViews; ++v) {
        ModelCConfig single_cfg = options.model;
        single_cfg.num_views = 1;
        ModelC<float> model = ModelC<float>::create(
            single_cfg, Rng::derive(seed, "ablate.single", static_cast<std::uint64_t>(v)));
        TrainConfig p1 = options.phase1, p2 = options.phase2;
        p1.seed = Rng::derive(seed, "ablate.single.train", static_cast<std::uint64_t>(v));
        p2.seed = p1.seed;
        train_model_c(model, single_train[static_cast<std::size_t>(v)],
                      single_val[static_cast<std::size_t>(v)], p1, p2);
        row.single_view_accuracy[static_cast<std::size_t>(v)] =
            checked_accuracy(model, single_test[static_cast<std::size_t>(v)]);
      }
      row.best_single = *std::max_element(row.single_view_accuracy.begin(),
                                          row.single_view_accuracy.end());

      ModelC<float> fused = ModelC<float>::create(options.model, Rng::derive(seed, "ablate.fused"));
      TrainConfig p1 = options.phase1, p2 = options.phase2;
      p1.seed = Rng::derive(seed, "ablate.fused.train");
      p2.seed = p1.seed;
      train_model_c(fused, fused_train, fused_val, p1, p2);
      row.fused = checked_accuracy(fused, fused_test);

      report.per_seed.push_back(row);
      out << "seed " << seed << ": fused " << row.fused << ", best single " << row.best_single;
      out << " (views";
      for (double a : row.single_view_accuracy) out << " " << a;
      out << ")\n";
    }

    for (const AblateSeedResult& r : report.per_seed) {
      report.mean_fused += r.fused;
      report.mean_best_single += r.best_single;
      report.mean_gap += r.fused - r.best_single;
    }
    const double n = static_cast<double>(report.per_seed.size());
    report.mean_fused /= n;
    report.mean_best_single /= n;
    report.mean_gap /= n;

    out << "mean fused accuracy: " << report.mean_fused << "\n";
    out << "mean best single-view accuracy: " << report.mean_best_single << "\n";
    out << "mean multi-view advantage: " << report.mean_gap * 100 << " points\n";

    if (!options.out_dir.empty()) {
      fs::create_directories(options.out_dir);
      json rows = json::array();
      for (const AblateSeedResult& r : report.per_seed)
        rows.push_back({{"seed", r.seed},
                        {"single_view_accuracy", r.single_view_accuracy},
                        {"best_single", r.best_single},
                        {"fused", r.fused}});
      const json doc{{"per_seed", rows},
                     {"mean_fused", report.mean_fused},
                     {"mean_best_single", report.mean_best_single},
                     {"mean_gap", report.mean_gap}};
      std::ofstream f(fs::path(options.out_dir) / "ablate_report.json", std::ios::trunc);
      if (!f) return fail(err, "ablate: cannot write report");
      f << doc.dump(2) << "\n";
    }
    if (report_out) *report_out = report;
    return 0;
  } catch (const std::exception& e) {
    return fail(err, e.what());
  }
}

}  // namespace mvda::cli
