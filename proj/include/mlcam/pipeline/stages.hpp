#pragma once

// Pipeline stages with content-addressed caching.  Every stage derives a key
// from its configuration subtree plus the keys of its inputs; artifacts land
// in <cache>/<kind>-<key>.<ext> so reruns and sibling configurations (the
// ablation grid) reuse whatever already exists.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "mlcam/cam/fuse.hpp"
#include "mlcam/cam/gradcam.hpp"
#include "mlcam/eval/metrics.hpp"
#include "mlcam/io/checkpoint.hpp"
#include "mlcam/io/voc.hpp"
#include "mlcam/pipeline/config.hpp"

namespace mlcam {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kDataTag = 0x4441544100ull;  // "DATA"

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string content_key(const io::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return std::string(buf);
}

struct StageRecord {
  std::string name;
  std::string key;
  std::string path;
  bool cache_hit = false;
  double seconds = 0.0;
  std::string status = "ok";
};

struct RunManifest {
  io::json config;
  std::string software_version = kSoftwareVersion;
  std::vector<StageRecord> stages;
  bool completed = false;
  std::string failure;

  const StageRecord* find(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }
};

inline io::json manifest_to_json(const RunManifest& m) {
  io::json j;
  j["software_version"] = m.software_version;
  j["config"] = m.config;
  j["completed"] = m.completed;
  j["failure"] = m.failure;
  j["stages"] = io::json::array();
  for (const auto& s : m.stages) {
    io::json e;
    e["name"] = s.name;
    e["key"] = s.key;
    e["path"] = s.path;
    e["cache_hit"] = s.cache_hit;
    e["seconds"] = s.seconds;
    e["status"] = s.status;
    j["stages"].push_back(std::move(e));
  }
  return j;
}

inline RunManifest manifest_from_json(const io::json& j) {
  RunManifest m;
  m.software_version = j.at("software_version").get<std::string>();
  m.config = j.at("config");
  m.completed = j.at("completed").get<bool>();
  m.failure = j.at("failure").get<std::string>();
  for (const io::json& e : j.at("stages")) {
    StageRecord s;
    s.name = e.at("name").get<std::string>();
    s.key = e.at("key").get<std::string>();
    s.path = e.at("path").get<std::string>();
    s.cache_hit = e.at("cache_hit").get<bool>();
    s.seconds = e.at("seconds").get<double>();
    s.status = e.at("status").get<std::string>();
    m.stages.push_back(std::move(s));
  }
  return m;
}

class StageContext {
 public:
  StageContext(std::string out_dir, std::string cache_dir)
      : out_dir_(std::move(out_dir)), cache_dir_(std::move(cache_dir)) {
    fs::create_directories(out_dir_);
    fs::create_directories(cache_dir_);
  }

  const std::string& out_dir() const { return out_dir_; }
  const std::string& cache_dir() const { return cache_dir_; }
  RunManifest& manifest() { return manifest_; }

  std::string artifact_path(const std::string& kind, const std::string& key,
                            const std::string& ext) const {
    return (fs::path(cache_dir_) / (kind + "-" + key + ext)).string();
  }

  // Runs `compute(path)` unless the artifact already exists; records the
  // stage either way.
  template <typename F>
  std::string ensure(const std::string& stage_name, const std::string& kind,
                     const std::string& key, const std::string& ext, F&& compute) {
    StageRecord rec;
    rec.name = stage_name;
    rec.key = key;
    rec.path = artifact_path(kind, key, ext);
    const auto t0 = std::chrono::steady_clock::now();
    if (fs::exists(rec.path)) {
      rec.cache_hit = true;
    } else {
      compute(rec.path);
      MLCAM_CHECK(fs::exists(rec.path), State,
                  "stage '" + stage_name + "' did not produce " + rec.path);
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest_.stages.push_back(rec);
    return rec.path;
  }

  void record(StageRecord rec) { manifest_.stages.push_back(std::move(rec)); }

 private:
  std::string out_dir_;
  std::string cache_dir_;
  RunManifest manifest_;
};

// ---------------------------------------------------------------------------
// Dataset stage

template <typename S>
struct PipelineData {
  Dataset<S> train;
  Dataset<S> eval;
  std::string key;
};

// The run seed, not SyntheticSpec::seed, drives pipeline data generation so
// that `run-all --seed` reseeds everything from one number.
inline std::pair<SyntheticSpec, SyntheticSpec> pipeline_synthetic_specs(const RunConfig& cfg) {
  SyntheticSpec train_spec = cfg.data.synthetic;
  train_spec.seed = derive_seed(cfg.seed, kDataTag, 0);
  SyntheticSpec eval_spec = cfg.data.synthetic;
  eval_spec.samples_per_category = cfg.data.eval_samples_per_category;
  eval_spec.seed = derive_seed(cfg.seed, kDataTag, 1);
  return {train_spec, eval_spec};
}

template <typename S>
PipelineData<S> ensure_dataset(StageContext& ctx, const RunConfig& cfg) {
  PipelineData<S> out;
  if (cfg.data.kind == "synthetic") {
    const auto [train_spec, eval_spec] = pipeline_synthetic_specs(cfg);
    io::json key_json;
    key_json["kind"] = "synthetic";
    key_json["train"] = synthetic_to_json(train_spec);
    key_json["eval"] = synthetic_to_json(eval_spec);
    out.key = content_key(key_json);

    const std::string dir = (fs::path(ctx.cache_dir()) / ("dataset-" + out.key)).string();
    const std::string done_marker = (fs::path(dir) / "complete.json").string();
    StageRecord rec;
    rec.name = "dataset";
    rec.key = out.key;
    rec.path = dir;
    const auto t0 = std::chrono::steady_clock::now();
    if (fs::exists(done_marker)) {
      rec.cache_hit = true;
    } else {
      fs::remove_all(dir);
      fs::create_directories(dir);
      io::save_voc_style(dir, generate_synthetic<S>(train_spec), "train");
      io::save_voc_style(dir, generate_synthetic<S>(eval_spec), "eval");
      io::save_json(done_marker, key_json);
    }
    out.train = io::load_voc_style<S>(dir, "train");
    out.eval = io::load_voc_style<S>(dir, "eval");
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.record(std::move(rec));
  } else {
    io::json key_json;
    key_json["kind"] = "voc";
    key_json["root"] = cfg.data.voc_root;
    key_json["train_split"] = cfg.data.train_split;
    key_json["eval_split"] = cfg.data.eval_split;
    out.key = content_key(key_json);
    StageRecord rec;
    rec.name = "dataset";
    rec.key = out.key;
    rec.path = cfg.data.voc_root;
    const auto t0 = std::chrono::steady_clock::now();
    out.train = io::load_voc_style<S>(cfg.data.voc_root, cfg.data.train_split);
    out.eval = io::load_voc_style<S>(cfg.data.voc_root, cfg.data.eval_split);
    rec.cache_hit = true;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.record(std::move(rec));
  }
  normalize(out.train, cfg.normalization);
  normalize(out.eval, cfg.normalization);
  MLCAM_CHECK(!out.train.samples.empty() && !out.eval.samples.empty(), Format,
              "dataset: empty split after loading");
  return out;
}

// ---------------------------------------------------------------------------
// Model stage

// Keys a label matrix by content so remapped levels key models without
// carrying the whole hierarchy around.
template <typename S>
std::string labels_key(const MatX<S>& labels) {
  std::string bits;
  bits.reserve(static_cast<std::size_t>(labels.size()) + 16);
  bits += std::to_string(labels.rows()) + "x" + std::to_string(labels.cols()) + ":";
  for (Eigen::Index c = 0; c < labels.cols(); ++c)
    for (Eigen::Index r = 0; r < labels.rows(); ++r)
      bits += labels(r, c) != S(0) ? '1' : '0';
  io::json j = bits;
  return content_key(j);
}

// Per-level model seeds reuse the hierarchy tag so a single-branch pipeline
// model and the hierarchy scaffold at the same level are the same artifact.
inline TrainConfig effective_train_config(const RunConfig& cfg, int level, int n_branches) {
  TrainConfig eff = cfg.train;
  eff.seed = derive_seed(cfg.seed, kHierModelTag, static_cast<std::uint64_t>(level));
  if (n_branches == 1) eff.lambda_orth = 0.0;
  return eff;
}

template <typename S>
struct ModelArtifact {
  ClassifierModel<S> model;
  std::string path;
};

template <typename S>
ModelArtifact<S> ensure_model(StageContext& ctx, const RunConfig& cfg,
                              const std::string& data_key, const Tensor4<S>& images,
                              const MatX<S>& labels, int level, int n_branches) {
  const TrainConfig eff = effective_train_config(cfg, level, n_branches);
  io::json key_json;
  key_json["data"] = data_key;
  key_json["backbone"] = io::backbone_to_json(cfg.backbone);
  key_json["train"] = io::train_config_to_json(eff);
  key_json["labels"] = labels_key(labels);
  key_json["n_branches"] = n_branches;
  const std::string key = content_key(key_json);

  const std::string stage = "model-l" + std::to_string(level) +
                            (n_branches == 2 ? "-two" : "-one");
  const std::string path = ctx.ensure(stage, "model", key, ".mlcn", [&](const std::string& p) {
    ClassifierModel<S> model = build_model<S>(static_cast<int>(labels.rows()), cfg.backbone,
                                              eff.seed, n_branches);
    train(model, images, labels, eff);
    io::json meta;
    meta["level"] = level;
    meta["stage_key"] = key_json;
    io::save_model(p, model, meta);
  });
  return {io::load_model<S>(path), path};
}

// ---------------------------------------------------------------------------
// Hierarchy stage

template <typename S>
CategoryHierarchy ensure_hierarchy(StageContext& ctx, const RunConfig& cfg,
                                   const std::string& data_key, const Tensor4<S>& images,
                                   const MatX<S>& labels,
                                   const std::vector<int>& level_sizes) {
  const int n_c = static_cast<int>(labels.rows());
  if (!cfg.use_clustering || level_sizes.size() == 1) {
    CategoryHierarchy flat;
    flat.n_categories = n_c;
    flat.levels.push_back(identity_clustering(n_c));
    StageRecord rec;
    rec.name = "hierarchy";
    rec.key = "identity";
    rec.path = "";
    rec.status = "skipped";
    ctx.record(std::move(rec));
    return flat;
  }

  io::json key_json;
  key_json["data"] = data_key;
  key_json["backbone"] = io::backbone_to_json(cfg.backbone);
  key_json["train"] = io::train_config_to_json(effective_train_config(cfg, 0, 1));
  key_json["level_sizes"] = level_sizes;
  key_json["seed"] = cfg.seed;
  const std::string key = content_key(key_json);

  const std::string path =
      ctx.ensure("hierarchy", "hierarchy", key, ".json", [&](const std::string& p) {
        LevelTrainer<S> trainer = [&](int level, const MatX<S>& y) {
          return ensure_model<S>(ctx, cfg, data_key, images, y, level, 1).model;
        };
        HierarchyBuild<S> built =
            build_hierarchy<S>(images, labels, level_sizes, cfg.backbone,
                               effective_train_config(cfg, 0, 1), trainer);
        io::save_json(p, io::hierarchy_to_json(built.hierarchy));
      });
  return io::hierarchy_from_json(io::load_json(path));
}

// ---------------------------------------------------------------------------
// CAM stage

template <typename S>
Tensor4<S> image_tensor(const ImageSample<S>& sample) {
  Tensor4<S> x(1, 3, sample.height(), sample.width());
  for (int c = 0; c < 3; ++c)
    x.plane(0, c) = sample.image.ch[static_cast<std::size_t>(c)];
  return x;
}

inline std::string cam_array_name(const std::string& sample_id, int node) {
  return sample_id + "/n" + std::to_string(node);
}
inline std::string rest_array_name(const std::string& sample_id, int category) {
  return sample_id + "/r" + std::to_string(category);
}
inline std::string fused_array_name(const std::string& sample_id, int category) {
  return sample_id + "/c" + std::to_string(category);
}

// Extracts the per-level combined maps for every present label of every
// sample (plus rest maps at level 0) into one container.
template <typename S>
std::string ensure_cams(StageContext& ctx, const RunConfig& cfg, const std::string& data_key,
                        const std::string& model_key_path, const ClassifierModel<S>& model,
                        const Dataset<S>& ds, const std::string& split, int level,
                        const std::vector<int>& assignment) {
  io::json key_json;
  key_json["model"] = model_key_path;  // artifact path embeds the model key
  key_json["data"] = data_key;
  key_json["split"] = split;
  key_json["level"] = level;
  key_json["assignment"] = assignment;
  if (level == 0) key_json["presence_threshold"] = cfg.presence_threshold;
  const std::string key = content_key(key_json);

  const std::string stage = "cams-" + split + "-l" + std::to_string(level);
  return ctx.ensure(stage, "cams", key, ".mlcn", [&](const std::string& p) {
    io::json meta;
    meta["split"] = split;
    meta["level"] = level;
    io::ArtifactWriter writer(meta);
    for (const auto& sample : ds.samples) {
      const Tensor4<S> x = image_tensor(sample);
      std::set<int> nodes;
      std::vector<int> cats;
      for (std::size_t c = 0; c < sample.labels.size(); ++c) {
        if (sample.labels[c] == 0) continue;
        nodes.insert(assignment[c]);
        cats.push_back(static_cast<int>(c));
      }
      for (int node : nodes) {
        const ActivationMap<S> m = model_cam(model, x, node);
        writer.add(cam_array_name(sample.id, node), m.values);
      }
      if (level == 0)
        for (int cat : cats) {
          const ActivationMap<S> rest =
              rest_classes_cam(model, x, cat, cfg.presence_threshold);
          writer.add(rest_array_name(sample.id, cat), rest.values);
        }
    }
    writer.save(p);
  });
}

// Rebuilds an ActivationMap from stored values (normalized or all-zero).
template <typename S>
ActivationMap<S> map_from_values(MatX<S> values) {
  ActivationMap<S> m;
  m.values = std::move(values);
  m.all_zero = m.values.maxCoeff() == S(0);
  m.norm = m.all_zero ? MapNorm::Raw : MapNorm::MinMax;
  return m;
}

// ---------------------------------------------------------------------------
// Fusion stage

template <typename S>
std::string ensure_fused(StageContext& ctx, const RunConfig& cfg,
                         const CategoryHierarchy& hierarchy, const Dataset<S>& ds,
                         const std::string& split,
                         const std::vector<std::string>& cam_paths) {
  io::json key_json;
  key_json["cams"] = cam_paths;
  key_json["split"] = split;
  const std::string key = content_key(key_json);
  (void)cfg;

  const std::string stage = "fuse-" + split;
  return ctx.ensure(stage, "fused", key, ".mlcn", [&](const std::string& p) {
    std::vector<io::ArtifactReader> levels;
    levels.reserve(cam_paths.size());
    for (const auto& path : cam_paths) levels.emplace_back(path);

    io::json meta;
    meta["split"] = split;
    io::ArtifactWriter writer(meta);
    const int k = hierarchy.k();
    for (const auto& sample : ds.samples) {
      for (std::size_t c = 0; c < sample.labels.size(); ++c) {
        if (sample.labels[c] == 0) continue;
        const int cat = static_cast<int>(c);
        const MatX<S> m0 = levels[0].array<S>(cam_array_name(sample.id, cat));
        if (k == 0) {
          // No clustered levels: the final map is the level-0 map itself.
          writer.add(fused_array_name(sample.id, cat), m0);
          continue;
        }
        FusionInputs<S> in;
        in.m0 = map_from_values<S>(m0);
        in.m0_rest = map_from_values<S>(levels[0].array<S>(rest_array_name(sample.id, cat)));
        for (int lvl = 1; lvl <= k; ++lvl) {
          const int node = cluster_of(hierarchy, lvl, cat);
          in.level_maps.push_back(map_from_values<S>(
              levels[static_cast<std::size_t>(lvl)].array<S>(cam_array_name(sample.id, node))));
        }
        const ActivationMap<S> fused = fuse_levels(in);
        writer.add(fused_array_name(sample.id, cat), fused.values);
      }
    }
    writer.save(p);
  });
}

// ---------------------------------------------------------------------------
// Eval stage

inline io::json eval_report_to_json(const EvalReport& report) {
  io::json j;
  j["miou"] = report.miou;
  j["mlev"] = report.mlev;
  j["sample_count"] = report.sample_count;
  j["pair_count"] = report.pair_count;
  j["threshold"] = report.config.threshold;
  io::json per_cat = io::json::object();
  for (const auto& [cat, v] : report.per_category_iou) {
    const std::string name = report.category_names[static_cast<std::size_t>(cat)];
    per_cat[name]["iou"] = v;
    per_cat[name]["lev"] = report.per_category_lev.at(cat);
  }
  j["per_category"] = std::move(per_cat);
  return j;
}

// Scores baseline (level-0) and fused maps side by side on one split.
template <typename S>
std::string ensure_eval(StageContext& ctx, const RunConfig& cfg, const Dataset<S>& ds,
                        const std::string& split, const std::string& cam0_path,
                        const std::string& fused_path) {
  io::json key_json;
  key_json["cams0"] = cam0_path;
  key_json["fused"] = fused_path;
  key_json["threshold"] = cfg.eval.threshold;
  key_json["split"] = split;
  const std::string key = content_key(key_json);

  const std::string stage = "eval-" + split;
  return ctx.ensure(stage, "eval", key, ".json", [&](const std::string& p) {
    io::ArtifactReader cams0(cam0_path);
    io::ArtifactReader fused(fused_path);
    const CamSource<S> baseline_source = [&](const ImageSample<S>& sample, int cat) {
      return map_from_values<S>(cams0.array<S>(cam_array_name(sample.id, cat)));
    };
    const CamSource<S> fused_source = [&](const ImageSample<S>& sample, int cat) {
      return map_from_values<S>(fused.array<S>(fused_array_name(sample.id, cat)));
    };
    io::json out;
    out["split"] = split;
    out["baseline"] = eval_report_to_json(evaluate(ds, baseline_source, cfg.eval));
    out["fused"] = eval_report_to_json(evaluate(ds, fused_source, cfg.eval));
    io::save_json(p, out);
  });
}

}  // namespace mlcam
