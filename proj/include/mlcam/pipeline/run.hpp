#pragma once

// End-to-end orchestration: dataset -> hierarchy -> per-level training ->
// CAM extraction -> fusion -> evaluation -> report, with stage-level caching
// and a four-configuration ablation grid on top.

#include <algorithm>
#include <string>
#include <vector>

#include "mlcam/pipeline/report.hpp"
#include "mlcam/pipeline/stages.hpp"

namespace mlcam {

// How far to run; every CLI subcommand is run_pipeline with a gate.
enum class StageGate { Dataset, Hierarchy, Train, Cams, Fuse, Eval, Report };

struct RunResult {
  RunManifest manifest;
  io::json eval_summary;  // {"<split>": {"baseline": {...}, "fused": {...}}}
};

namespace detail {

struct StageFailure {
  std::string stage;
  std::string message;
};

inline void write_manifest(const std::string& out_dir, const RunManifest& manifest) {
  io::save_json((fs::path(out_dir) / "manifest.json").string(), manifest_to_json(manifest));
}

}  // namespace detail

template <typename S = float>
RunResult run_pipeline(RunConfig cfg, StageGate gate = StageGate::Report,
                       std::string cache_dir = "") {
  validate(cfg);
  if (cache_dir.empty()) cache_dir = (fs::path(cfg.out_dir) / "cache").string();
  StageContext ctx(cfg.out_dir, cache_dir);

  RunResult result;
  auto& manifest = ctx.manifest();
  manifest.config = run_config_to_json(cfg);

  const auto guarded = [&](const char* stage, auto&& body) {
    try {
      body();
    } catch (const Error& e) {
      throw detail::StageFailure{stage, std::string(to_string(e.kind())) + ": " + e.what()};
    }
  };

  try {
    PipelineData<S> data;
    guarded("dataset", [&] { data = ensure_dataset<S>(ctx, cfg); });
    if (gate == StageGate::Dataset) {
      manifest.completed = true;
      detail::write_manifest(cfg.out_dir, manifest);
      result.manifest = manifest;
      return result;
    }

    const int n_c = data.train.n_categories();
    std::vector<int> level_sizes = cfg.level_sizes;
    if (level_sizes.empty()) level_sizes = default_level_sizes(n_c);
    validate_level_sizes(level_sizes, n_c);

    const Tensor4<S> images = pack_images(data.train);
    const MatX<S> labels = pack_labels(data.train);

    CategoryHierarchy hierarchy;
    guarded("hierarchy", [&] {
      hierarchy = ensure_hierarchy<S>(ctx, cfg, data.key, images, labels, level_sizes);
    });
    if (!hierarchy.levels.empty() && hierarchy.k() >= 1)
      io::save_json((fs::path(cfg.out_dir) / "hierarchy.json").string(),
                    io::hierarchy_to_json(hierarchy));
    if (gate == StageGate::Hierarchy) {
      manifest.completed = true;
      detail::write_manifest(cfg.out_dir, manifest);
      result.manifest = manifest;
      return result;
    }

    const int k = hierarchy.k();
    const int n_branches = cfg.use_orthogonal ? 2 : 1;
    std::vector<ModelArtifact<S>> models;
    guarded("train", [&] {
      for (int lvl = 0; lvl <= k; ++lvl) {
        const MatX<S> level_labels =
            lvl == 0 ? labels
                     : remap_labels(labels, hierarchy.levels[static_cast<std::size_t>(lvl)]);
        models.push_back(
            ensure_model<S>(ctx, cfg, data.key, images, level_labels, lvl, n_branches));
      }
    });
    if (gate == StageGate::Train) {
      manifest.completed = true;
      detail::write_manifest(cfg.out_dir, manifest);
      result.manifest = manifest;
      return result;
    }

    std::vector<std::pair<std::string, const Dataset<S>*>> splits = {{"eval", &data.eval}};
    if (cfg.evaluate_train_split) splits.push_back({"train", &data.train});

    std::map<std::string, std::vector<std::string>> cam_paths;
    guarded("cams", [&] {
      for (const auto& [split, ds] : splits)
        for (int lvl = 0; lvl <= k; ++lvl)
          cam_paths[split].push_back(ensure_cams<S>(
              ctx, cfg, data.key, models[static_cast<std::size_t>(lvl)].path,
              models[static_cast<std::size_t>(lvl)].model, *ds, split, lvl,
              hierarchy.levels[static_cast<std::size_t>(lvl)].assignment));
    });
    if (gate == StageGate::Cams) {
      manifest.completed = true;
      detail::write_manifest(cfg.out_dir, manifest);
      result.manifest = manifest;
      return result;
    }

    std::map<std::string, std::string> fused_paths;
    guarded("fuse", [&] {
      for (const auto& [split, ds] : splits)
        fused_paths[split] = ensure_fused<S>(ctx, cfg, hierarchy, *ds, split, cam_paths[split]);
    });
    if (gate == StageGate::Fuse) {
      manifest.completed = true;
      detail::write_manifest(cfg.out_dir, manifest);
      result.manifest = manifest;
      return result;
    }

    guarded("eval", [&] {
      for (const auto& [split, ds] : splits) {
        const std::string path =
            ensure_eval<S>(ctx, cfg, *ds, split, cam_paths[split][0], fused_paths[split]);
        result.eval_summary[split] = io::load_json(path);
      }
      io::save_json((fs::path(cfg.out_dir) / "eval_summary.json").string(),
                    result.eval_summary);
    });
    if (gate == StageGate::Eval) {
      manifest.completed = true;
      detail::write_manifest(cfg.out_dir, manifest);
      result.manifest = manifest;
      return result;
    }

    guarded("report", [&] {
      StageRecord rec;
      rec.name = "report";
      rec.path = (fs::path(cfg.out_dir) / "report.txt").string();
      const auto t0 = std::chrono::steady_clock::now();
      emit_report<S>(manifest);
      rec.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      ctx.record(std::move(rec));
    });

    manifest.completed = true;
  } catch (const detail::StageFailure& failure) {
    StageRecord rec;
    rec.name = failure.stage;
    rec.status = "failed: " + failure.message;
    ctx.record(std::move(rec));
    manifest.completed = false;
    manifest.failure = failure.stage + ": " + failure.message;
  }

  detail::write_manifest(cfg.out_dir, manifest);
  result.manifest = manifest;
  return result;
}

// ---------------------------------------------------------------------------
// Ablation grid (the four switch combinations)

struct GridConfigSpec {
  std::string label;
  bool use_clustering;
  bool use_orthogonal;
};

inline const std::vector<GridConfigSpec>& grid_configs() {
  static const std::vector<GridConfigSpec> configs = {
      {"base", false, false},
      {"clust", true, false},
      {"orth", false, true},
      {"both", true, true},
  };
  return configs;
}

struct GridResult {
  io::json summary;
  std::string table;
};

inline double median(std::vector<double> values) {
  MLCAM_CHECK(!values.empty(), Contract, "median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Runs all four configurations for every seed against one shared cache and
// reports per-seed paired differences (medians across seeds).
template <typename S = float>
GridResult run_ablation_grid(const RunConfig& base_cfg,
                             const std::vector<std::uint64_t>& seeds,
                             const std::string& grid_dir) {
  MLCAM_CHECK(!seeds.empty(), Config, "ablation grid: need at least one seed");
  const std::string cache_dir = (fs::path(grid_dir) / "cache").string();

  // metric[config label] -> one value per seed
  std::map<std::string, std::vector<double>> miou, mlev, miou_train, mlev_train;
  io::json runs = io::json::object();

  for (const std::uint64_t seed : seeds) {
    for (const auto& spec : grid_configs()) {
      RunConfig cfg = base_cfg;
      cfg.seed = seed;
      cfg.use_clustering = spec.use_clustering;
      cfg.use_orthogonal = spec.use_orthogonal;
      cfg.out_dir =
          (fs::path(grid_dir) / ("seed" + std::to_string(seed)) / spec.label).string();
      RunResult run = run_pipeline<S>(cfg, StageGate::Eval, cache_dir);
      MLCAM_CHECK(run.manifest.completed, State,
                  "ablation grid: run failed (" + spec.label + ", seed " +
                      std::to_string(seed) + "): " + run.manifest.failure);
      const io::json& fused = run.eval_summary.at("eval").at("fused");
      miou[spec.label].push_back(fused.at("miou").get<double>());
      mlev[spec.label].push_back(fused.at("mlev").get<double>());
      if (run.eval_summary.contains("train")) {
        miou_train[spec.label].push_back(
            run.eval_summary.at("train").at("fused").at("miou").get<double>());
        mlev_train[spec.label].push_back(
            run.eval_summary.at("train").at("fused").at("mlev").get<double>());
      }
      runs["seed" + std::to_string(seed)][spec.label] = run.eval_summary;
    }
  }

  const std::size_t n = seeds.size();
  std::vector<double> d_clust(n), d_orth(n), d_both_single(n), d_both_base(n);
  std::vector<double> l_clust(n), l_orth(n), l_both_single(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_clust[i] = miou["clust"][i] - miou["base"][i];
    d_orth[i] = miou["orth"][i] - miou["base"][i];
    d_both_single[i] = miou["both"][i] - std::max(miou["clust"][i], miou["orth"][i]);
    d_both_base[i] = miou["both"][i] - miou["base"][i];
    l_clust[i] = mlev["clust"][i] - mlev["base"][i];
    l_orth[i] = mlev["orth"][i] - mlev["base"][i];
    l_both_single[i] = mlev["both"][i] - std::min(mlev["clust"][i], mlev["orth"][i]);
  }

  GridResult result;
  result.summary["seeds"] = seeds;
  for (const auto& spec : grid_configs()) {
    io::json row;
    row["miou_eval"] = median(miou[spec.label]);
    row["mlev_eval"] = median(mlev[spec.label]);
    if (!miou_train.empty()) {
      row["miou_train"] = median(miou_train[spec.label]);
      row["mlev_train"] = median(mlev_train[spec.label]);
    }
    result.summary["configs"][spec.label] = std::move(row);
  }
  result.summary["margins"]["miou_clust_minus_base"] = median(d_clust);
  result.summary["margins"]["miou_orth_minus_base"] = median(d_orth);
  result.summary["margins"]["miou_both_minus_max_single"] = median(d_both_single);
  result.summary["margins"]["miou_both_minus_base"] = median(d_both_base);
  result.summary["margins"]["mlev_clust_minus_base"] = median(l_clust);
  result.summary["margins"]["mlev_orth_minus_base"] = median(l_orth);
  result.summary["margins"]["mlev_both_minus_min_single"] = median(l_both_single);
  result.summary["runs"] = std::move(runs);

  std::vector<MetricsRow> rows;
  for (const auto& spec : grid_configs()) {
    MetricsRow row;
    row.label = std::string(spec.use_clustering ? "clustering" : "-") + " + " +
                (spec.use_orthogonal ? "orthogonal" : "-");
    row.miou_eval = median(miou[spec.label]);
    row.mlev_eval = median(mlev[spec.label]);
    if (!miou_train.empty()) {
      row.has_train = true;
      row.miou_train = median(miou_train[spec.label]);
      row.mlev_train = median(mlev_train[spec.label]);
    }
    rows.push_back(std::move(row));
  }
  result.table = build_metrics_table(rows);

  io::save_json((fs::path(grid_dir) / "grid_summary.json").string(), result.summary);
  {
    std::ofstream out(fs::path(grid_dir) / "grid_report.txt",
                      std::ios::binary | std::ios::trunc);
    MLCAM_CHECK(out.good(), Io, "ablation grid: cannot write grid_report.txt");
    out << result.table;
  }
  return result;
}

}  // namespace mlcam
