// Command-line front end for the mlcam library: dataset generation/import,
// staged pipeline execution, reporting and the four-configuration ablation
// grid. Every run-config field can come from a JSON file (--config) and be
// overridden by an individual flag.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlcam/io/voc.hpp"
#include "mlcam/pipeline/report.hpp"
#include "mlcam/pipeline/run.hpp"

namespace fs = std::filesystem;
using mlcam::RunConfig;
using mlcam::StageGate;

namespace {

int exit_code(mlcam::ErrorKind kind) {
  switch (kind) {
    case mlcam::ErrorKind::Config: return 2;
    case mlcam::ErrorKind::Contract: return 3;
    case mlcam::ErrorKind::Io: return 4;
    case mlcam::ErrorKind::Format: return 5;
    case mlcam::ErrorKind::Lookup: return 6;
    case mlcam::ErrorKind::State: return 7;
    case mlcam::ErrorKind::Training: return 8;
    case mlcam::ErrorKind::Eval: return 9;
  }
  return 1;
}

// Binds the full run-config schema to flags on one subcommand. Flags that the
// user actually passed are applied on top of the config file (or defaults).
class ConfigBinder {
 public:
  void attach(CLI::App* cmd, bool seed_required = false) {
    cmd->add_option("--config", config_path_, "run config JSON file")
        ->check(CLI::ExistingFile);

    add(cmd->add_option("--data-kind", v_.data_kind, "data source: synthetic|voc"),
        [this](RunConfig& c) { c.data.kind = v_.data_kind; });
    add(cmd->add_option("--categories", v_.categories, "synthetic: number of categories"),
        [this](RunConfig& c) { c.data.synthetic.n_categories = v_.categories; });
    add(cmd->add_option("--samples-per-category", v_.samples,
                        "synthetic: training images per category"),
        [this](RunConfig& c) { c.data.synthetic.samples_per_category = v_.samples; });
    add(cmd->add_option("--eval-samples-per-category", v_.eval_samples,
                        "synthetic: eval images per category"),
        [this](RunConfig& c) { c.data.eval_samples_per_category = v_.eval_samples; });
    add(cmd->add_option("--image-size", v_.image_size, "synthetic: square image size"),
        [this](RunConfig& c) { c.data.synthetic.image_size = v_.image_size; });
    add(cmd->add_option("--min-objects", v_.min_objects, "synthetic: min objects per image"),
        [this](RunConfig& c) { c.data.synthetic.objects_per_image_range.first = v_.min_objects; });
    add(cmd->add_option("--max-objects", v_.max_objects, "synthetic: max objects per image"),
        [this](RunConfig& c) { c.data.synthetic.objects_per_image_range.second = v_.max_objects; });
    add(cmd->add_option("--voc-root", v_.voc_root, "voc: dataset root directory"),
        [this](RunConfig& c) { c.data.voc_root = v_.voc_root; });
    add(cmd->add_option("--train-split", v_.train_split, "voc: split tag used for training"),
        [this](RunConfig& c) { c.data.train_split = v_.train_split; });
    add(cmd->add_option("--eval-split", v_.eval_split, "voc: split tag used for evaluation"),
        [this](RunConfig& c) { c.data.eval_split = v_.eval_split; });

    add(cmd->add_option("--target-short-side", v_.short_side, "resize short side before crop"),
        [this](RunConfig& c) { c.normalization.target_short_side = v_.short_side; });
    add(cmd->add_option("--crop-size", v_.crop_size, "center-crop size fed to the network"),
        [this](RunConfig& c) { c.normalization.crop_size = v_.crop_size; });

    add(cmd->add_option("--architecture", v_.architecture, "backbone architecture name"),
        [this](RunConfig& c) { c.backbone.architecture = v_.architecture; });
    add(cmd->add_option("--conv-channels", v_.conv_channels, "backbone conv channels per block"),
        [this](RunConfig& c) { c.backbone.conv_channels = v_.conv_channels; });
    add(cmd->add_option("--input-size", v_.input_size, "backbone input size"),
        [this](RunConfig& c) { c.backbone.input_size = v_.input_size; });

    add(cmd->add_option("--lr", v_.lr, "initial learning rate"),
        [this](RunConfig& c) { c.train.initial_lr = v_.lr; });
    add(cmd->add_option("--batch-size", v_.batch_size, "minibatch size"),
        [this](RunConfig& c) { c.train.batch_size = v_.batch_size; });
    add(cmd->add_option("--epochs", v_.epochs, "training epochs"),
        [this](RunConfig& c) { c.train.max_epochs = v_.epochs; });
    add(cmd->add_option("--plateau-window", v_.plateau_window,
                        "epochs between plateau checks"),
        [this](RunConfig& c) { c.train.plateau_window = v_.plateau_window; });
    add(cmd->add_option("--plateau-threshold", v_.plateau_threshold,
                        "relative loss improvement below which lr decays"),
        [this](RunConfig& c) { c.train.plateau_threshold = v_.plateau_threshold; });
    add(cmd->add_option("--lr-decay-ratio", v_.lr_decay, "lr multiplier on plateau (1 = flat)"),
        [this](RunConfig& c) { c.train.lr_decay_ratio = v_.lr_decay; });
    add(cmd->add_option("--lambda", v_.lambda_orth, "orthogonal loss weight"),
        [this](RunConfig& c) { c.train.lambda_orth = v_.lambda_orth; });
    add(cmd->add_option("--momentum", v_.momentum, "SGD momentum"),
        [this](RunConfig& c) { c.train.momentum = v_.momentum; });

    add(cmd->add_option("--levels", v_.levels, "hierarchy level sizes, e.g. 12,6,3"),
        [this](RunConfig& c) { c.level_sizes = v_.levels; });
    add(cmd->add_option("--threshold", v_.threshold, "CAM binarization threshold"),
        [this](RunConfig& c) { c.eval.threshold = v_.threshold; });
    add(cmd->add_flag("--use-clustering,!--no-clustering", v_.use_clustering,
                      "enable the category hierarchy"),
        [this](RunConfig& c) { c.use_clustering = v_.use_clustering; });
    add(cmd->add_flag("--use-orthogonal,!--no-orthogonal", v_.use_orthogonal,
                      "enable the two-branch orthogonal loss"),
        [this](RunConfig& c) { c.use_orthogonal = v_.use_orthogonal; });
    add(cmd->add_option("--presence-threshold", v_.presence,
                        "predicted-presence probability cutoff"),
        [this](RunConfig& c) { c.presence_threshold = v_.presence; });
    add(cmd->add_flag("--eval-train-split,!--no-eval-train-split", v_.eval_train,
                      "also evaluate on the training split"),
        [this](RunConfig& c) { c.evaluate_train_split = v_.eval_train; });
    add(cmd->add_option("--panel-images", v_.panel_images, "heatmap panels to render"),
        [this](RunConfig& c) { c.panel_images = v_.panel_images; });
    add(cmd->add_option("--out", v_.out_dir, "run output directory"),
        [this](RunConfig& c) { c.out_dir = v_.out_dir; });

    auto* seed = cmd->add_option("--seed", v_.seed, "run seed (drives data, training, clustering)");
    if (seed_required) seed->required();
    add(seed, [this](RunConfig& c) { c.seed = v_.seed; });

    cmd->add_option("--cache", cache_dir_, "artifact cache directory (default <out>/cache)");
  }

  RunConfig resolve() const {
    RunConfig cfg = mlcam::default_run_config();
    if (!config_path_.empty())
      cfg = mlcam::run_config_from_json(mlcam::io::load_json(config_path_));
    for (const auto& [opt, apply] : appliers_)
      if (opt->count() > 0) apply(cfg);
    return cfg;
  }

  const std::string& cache_dir() const { return cache_dir_; }

 private:
  void add(CLI::Option* opt, std::function<void(RunConfig&)> apply) {
    appliers_.emplace_back(opt, std::move(apply));
  }

  struct Values {
    std::string data_kind, voc_root, train_split, eval_split, architecture, out_dir;
    int categories = 0, samples = 0, eval_samples = 0, image_size = 0;
    int min_objects = 0, max_objects = 0, short_side = 0, crop_size = 0, input_size = 0;
    int batch_size = 0, epochs = 0, plateau_window = 0, panel_images = 0;
    double lr = 0, plateau_threshold = 0, lr_decay = 0, lambda_orth = 0, momentum = 0;
    double threshold = 0, presence = 0;
    bool use_clustering = true, use_orthogonal = true, eval_train = true;
    std::vector<int> conv_channels, levels;
    std::uint64_t seed = 0;
  };

  std::string config_path_;
  std::string cache_dir_;
  Values v_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> appliers_;
};

void print_eval_summary(const mlcam::io::json& summary) {
  for (const auto& [split, node] : summary.items()) {
    for (const char* source : {"baseline", "fused"}) {
      if (!node.contains(source)) continue;
      const double miou = node.at(source).at("miou");
      const double mlev = node.at(source).at("mlev");
      std::printf("%-6s %-9s mIoU %6.2f  mLEV %6.2f\n", split.c_str(), source,
                  100.0 * miou, mlev);
    }
  }
}

int run_gate(const ConfigBinder& binder, StageGate gate) {
  const RunConfig cfg = binder.resolve();
  const mlcam::RunResult result = mlcam::run_pipeline<float>(cfg, gate, binder.cache_dir());
  if (!result.manifest.completed) {
    std::cerr << "stage '" << result.manifest.failure.at("stage").get<std::string>()
              << "' failed: " << result.manifest.failure.at("message").get<std::string>()
              << "\n";
    return 1;
  }
  std::cout << "manifest: " << (fs::path(cfg.out_dir) / "manifest.json").string() << "\n";
  for (const auto& stage : result.manifest.stages)
    std::printf("  %-16s %s %6.1fs  %s\n", stage.name.c_str(),
                stage.cache_hit ? "cached" : "built ", stage.seconds,
                stage.path.c_str());
  if (!result.eval_summary.empty()) print_eval_summary(result.eval_summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-level class-grouping CAM pipeline"};
  app.require_subcommand(1);

  // ---- dataset generate / import -----------------------------------------
  auto* dataset = app.add_subcommand("dataset", "generate or import datasets");
  dataset->require_subcommand(1);

  auto* gen = dataset->add_subcommand("generate", "write a synthetic VOC-style dataset");
  struct {
    std::string out, split = "train";
    mlcam::SyntheticSpec spec;
  } g;
  gen->add_option("--out", g.out, "target dataset root")->required();
  gen->add_option("--split", g.split, "split tag recorded in labels.json");
  gen->add_option("--categories", g.spec.n_categories, "number of categories");
  gen->add_option("--samples-per-category", g.spec.samples_per_category,
                  "images per category");
  gen->add_option("--image-size", g.spec.image_size, "square image size");
  gen->add_option("--min-objects", g.spec.objects_per_image_range.first,
                  "min objects per image");
  gen->add_option("--max-objects", g.spec.objects_per_image_range.second,
                  "max objects per image");
  gen->add_option("--seed", g.spec.seed, "generator seed");
  gen->callback([&g] {
    const auto ds = mlcam::generate_synthetic<float>(g.spec);
    mlcam::io::save_voc_style<float>(g.out, ds, g.split);
    std::cout << "wrote " << ds.samples.size() << " images, "
              << ds.n_categories() << " categories to " << g.out << " (split '"
              << g.split << "')\n";
  });

  auto* imp = dataset->add_subcommand("import", "validate and summarize a VOC-style dataset");
  struct {
    std::string root, split;
  } i;
  imp->add_option("--root", i.root, "dataset root")->required()->check(CLI::ExistingDirectory);
  imp->add_option("--split", i.split, "only load this split tag");
  imp->callback([&i] {
    const auto ds = mlcam::io::load_voc_style<float>(i.root, i.split);
    std::size_t masks = 0;
    for (const auto& s : ds.samples) masks += s.masks.size();
    std::cout << ds.samples.size() << " images, " << ds.n_categories()
              << " categories, " << masks << " masks\n";
    for (const auto& name : ds.category_names) std::cout << "  " << name << "\n";
  });

  // ---- staged pipeline commands -------------------------------------------
  // Each command runs the pipeline up to its stage gate; earlier stages come
  // from the artifact cache when their inputs are unchanged.
  std::vector<std::unique_ptr<ConfigBinder>> binders;
  const auto add_gate_cmd = [&binders](CLI::App* parent, const char* name,
                                       const char* help, StageGate gate) {
    auto* cmd = parent->add_subcommand(name, help);
    binders.push_back(std::make_unique<ConfigBinder>());
    ConfigBinder* binder = binders.back().get();
    binder->attach(cmd);
    cmd->callback([binder, gate] {
      if (run_gate(*binder, gate) != 0) throw CLI::RuntimeError(1);
    });
    return cmd;
  };

  auto* hier = app.add_subcommand("hierarchy", "category hierarchy operations");
  hier->require_subcommand(1);
  add_gate_cmd(hier, "build", "cluster categories into the multi-level hierarchy",
               StageGate::Hierarchy);
  add_gate_cmd(&app, "train", "train per-level classifiers", StageGate::Train);
  auto* cam = app.add_subcommand("cam", "class activation map operations");
  cam->require_subcommand(1);
  add_gate_cmd(cam, "extract", "extract per-level Grad-CAMs", StageGate::Cams);
  add_gate_cmd(&app, "fuse", "fuse CAMs across hierarchy levels", StageGate::Fuse);
  add_gate_cmd(&app, "eval", "score baseline and fused CAMs", StageGate::Eval);

  // ---- report --------------------------------------------------------------
  auto* rep = app.add_subcommand("report", "re-emit tables and panels from a finished run");
  std::string rep_run;
  rep->add_option("--run", rep_run, "run output directory containing manifest.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  rep->callback([&rep_run] {
    const auto manifest = mlcam::manifest_from_json(
        mlcam::io::load_json((fs::path(rep_run) / "manifest.json").string()));
    mlcam::emit_report<float>(manifest);
    std::cout << "report written under " << rep_run << "\n";
  });

  // ---- run-all ---------------------------------------------------------------
  auto* runall = app.add_subcommand("run-all", "run every stage and emit the report");
  ConfigBinder runall_binder;
  runall_binder.attach(runall, /*seed_required=*/true);
  runall->callback([&runall_binder] {
    if (run_gate(runall_binder, StageGate::Report) != 0) throw CLI::RuntimeError(1);
  });

  // ---- ablation-grid --------------------------------------------------------
  auto* grid = app.add_subcommand("ablation-grid",
                                  "run the 4-configuration switch grid over several seeds");
  ConfigBinder grid_binder;
  grid_binder.attach(grid);
  std::vector<std::uint64_t> grid_seeds = {0, 1, 2, 3, 4};
  std::string grid_out = "runs/grid";
  grid->add_option("--seeds", grid_seeds, "seeds to aggregate over");
  grid->add_option("--grid-out", grid_out, "grid output directory");
  grid->callback([&] {
    const RunConfig base = grid_binder.resolve();
    const mlcam::GridResult result = mlcam::run_ablation_grid<float>(base, grid_seeds, grid_out);
    std::cout << result.table;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const mlcam::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
