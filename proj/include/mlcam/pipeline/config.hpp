#pragma once

// Run configuration for the end-to-end pipeline, plus its JSON round-trip.
// One RunConfig drives every stage; per-model seeds are derived from the run
// seed, so cfg.train.seed is ignored here.

#include <cmath>
#include <string>
#include <vector>

#include "mlcam/dataset/normalize.hpp"
#include "mlcam/dataset/synthetic.hpp"
#include "mlcam/eval/metrics.hpp"
#include "mlcam/hierarchy/build.hpp"
#include "mlcam/io/checkpoint.hpp"
#include "mlcam/nn/train.hpp"

namespace mlcam {

inline constexpr const char* kSoftwareVersion = "1.0.0";

struct DataSourceConfig {
  std::string kind = "synthetic";  // "synthetic" | "voc"

  // Synthetic source: `synthetic` describes the train split; the eval split
  // reuses the spec with its own sample count and a derived seed.
  SyntheticSpec synthetic;
  int eval_samples_per_category = 50;

  // VOC source.
  std::string voc_root;
  std::string train_split = "train";
  std::string eval_split = "eval";
};

struct RunConfig {
  DataSourceConfig data;
  NormalizationSpec normalization;
  BackboneSpec backbone;
  TrainConfig train;
  std::vector<int> level_sizes;  // empty -> default_level_sizes(n_categories)
  EvalConfig eval;
  bool use_clustering = true;
  bool use_orthogonal = true;
  double presence_threshold = 0.5;
  bool evaluate_train_split = true;
  int panel_images = 8;
  std::string out_dir = "runs/out";
  std::uint64_t seed = 0;
};

inline std::vector<int> default_level_sizes(int n_categories) {
  MLCAM_CHECK(n_categories >= 1, Config, "level sizes: need at least one category");
  const auto shrink = [&](double f) {
    return static_cast<int>(std::ceil(f * n_categories));
  };
  std::vector<int> sizes = {n_categories, shrink(0.6), shrink(0.4), shrink(0.25)};
  // Deduplicate while keeping the strictly-decreasing invariant (tiny n_c
  // would otherwise repeat sizes).
  std::vector<int> out;
  for (int s : sizes)
    if (out.empty() || s < out.back()) out.push_back(s);
  return out;
}

// Desk-scale preset: the 12-category synthetic set at its native 32x32
// resolution with a narrow three-block backbone.  Trains in minutes on CPU.
inline RunConfig default_run_config() {
  RunConfig cfg;
  cfg.data.kind = "synthetic";
  cfg.data.synthetic = SyntheticSpec{};  // 12 categories, 150 per category
  cfg.data.eval_samples_per_category = 50;
  cfg.normalization.target_short_side = cfg.data.synthetic.image_size;
  cfg.normalization.crop_size = cfg.data.synthetic.image_size;
  cfg.backbone.architecture = "smallcnn";
  cfg.backbone.conv_channels = {8, 16, 32};
  cfg.backbone.input_size = cfg.data.synthetic.image_size;
  cfg.train.initial_lr = 0.1;
  cfg.train.batch_size = 20;
  cfg.train.max_epochs = 100;
  cfg.train.lr_decay_ratio = 1.0;  // flat schedule at desk scale
  cfg.train.lambda_orth = 1e-4;
  cfg.level_sizes = {12, 6, 3};
  return cfg;
}

inline int config_n_categories(const RunConfig& cfg) {
  MLCAM_CHECK(cfg.data.kind == "synthetic" || cfg.data.kind == "voc", Config,
              "data source kind must be 'synthetic' or 'voc'");
  if (cfg.data.kind == "synthetic") return cfg.data.synthetic.n_categories;
  return -1;  // determined by labels.json at load time
}

inline void validate(const RunConfig& cfg) {
  MLCAM_CHECK(cfg.data.kind == "synthetic" || cfg.data.kind == "voc", Config,
              "data source kind must be 'synthetic' or 'voc'");
  if (cfg.data.kind == "synthetic") {
    validate(cfg.data.synthetic);
    MLCAM_CHECK(cfg.data.eval_samples_per_category >= 1, Config,
                "eval_samples_per_category must be >= 1");
  } else {
    MLCAM_CHECK(!cfg.data.voc_root.empty(), Config, "voc source requires voc_root");
  }
  validate(cfg.train);
  validate(cfg.eval);
  MLCAM_CHECK(cfg.presence_threshold > 0 && cfg.presence_threshold < 1, Config,
              "presence threshold must be in (0,1)");
  MLCAM_CHECK(cfg.panel_images >= 0, Config, "panel_images must be >= 0");
  MLCAM_CHECK(!cfg.out_dir.empty(), Config, "out_dir must be set");
  if (!cfg.level_sizes.empty() && config_n_categories(cfg) > 0)
    validate_level_sizes(cfg.level_sizes, config_n_categories(cfg));
}

inline io::json descriptor_to_json(const CategoryDescriptor& d) {
  io::json j;
  j["shape_kind"] = d.shape_kind;
  j["texture_kind"] = d.texture_kind;
  j["color_family"] = d.color_family;
  return j;
}

inline CategoryDescriptor descriptor_from_json(const io::json& j) {
  CategoryDescriptor d;
  d.shape_kind = j.at("shape_kind").get<int>();
  d.texture_kind = j.at("texture_kind").get<int>();
  d.color_family = j.at("color_family").get<int>();
  return d;
}

inline io::json synthetic_to_json(const SyntheticSpec& spec) {
  io::json j;
  j["n_categories"] = spec.n_categories;
  io::json descriptors = io::json::array();
  for (const auto& d : spec.category_descriptors) descriptors.push_back(descriptor_to_json(d));
  j["category_descriptors"] = std::move(descriptors);
  j["samples_per_category"] = spec.samples_per_category;
  j["image_size"] = spec.image_size;
  j["objects_per_image_range"] = {spec.objects_per_image_range.first,
                                  spec.objects_per_image_range.second};
  j["seed"] = spec.seed;
  return j;
}

inline SyntheticSpec synthetic_from_json(const io::json& j) {
  SyntheticSpec spec;
  spec.n_categories = j.at("n_categories").get<int>();
  spec.category_descriptors.clear();
  for (const io::json& d : j.at("category_descriptors"))
    spec.category_descriptors.push_back(descriptor_from_json(d));
  spec.samples_per_category = j.at("samples_per_category").get<int>();
  spec.image_size = j.at("image_size").get<int>();
  const auto range = j.at("objects_per_image_range").get<std::vector<int>>();
  MLCAM_CHECK(range.size() == 2, Format, "objects_per_image_range must have 2 entries");
  spec.objects_per_image_range = {range[0], range[1]};
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

inline io::json run_config_to_json(const RunConfig& cfg) {
  io::json j;
  j["data"]["kind"] = cfg.data.kind;
  j["data"]["synthetic"] = synthetic_to_json(cfg.data.synthetic);
  j["data"]["eval_samples_per_category"] = cfg.data.eval_samples_per_category;
  j["data"]["voc_root"] = cfg.data.voc_root;
  j["data"]["train_split"] = cfg.data.train_split;
  j["data"]["eval_split"] = cfg.data.eval_split;
  j["normalization"]["target_short_side"] = cfg.normalization.target_short_side;
  j["normalization"]["crop_size"] = cfg.normalization.crop_size;
  j["backbone"] = io::backbone_to_json(cfg.backbone);
  j["train"] = io::train_config_to_json(cfg.train);
  j["level_sizes"] = cfg.level_sizes;
  j["eval"]["threshold"] = cfg.eval.threshold;
  j["use_clustering"] = cfg.use_clustering;
  j["use_orthogonal"] = cfg.use_orthogonal;
  j["presence_threshold"] = cfg.presence_threshold;
  j["evaluate_train_split"] = cfg.evaluate_train_split;
  j["panel_images"] = cfg.panel_images;
  j["out_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  return j;
}

inline RunConfig run_config_from_json(const io::json& j) {
  RunConfig cfg = default_run_config();
  if (j.contains("data")) {
    const io::json& d = j.at("data");
    if (d.contains("kind")) cfg.data.kind = d.at("kind").get<std::string>();
    if (d.contains("synthetic")) cfg.data.synthetic = synthetic_from_json(d.at("synthetic"));
    if (d.contains("eval_samples_per_category"))
      cfg.data.eval_samples_per_category = d.at("eval_samples_per_category").get<int>();
    if (d.contains("voc_root")) cfg.data.voc_root = d.at("voc_root").get<std::string>();
    if (d.contains("train_split")) cfg.data.train_split = d.at("train_split").get<std::string>();
    if (d.contains("eval_split")) cfg.data.eval_split = d.at("eval_split").get<std::string>();
  }
  if (j.contains("normalization")) {
    const io::json& n = j.at("normalization");
    if (n.contains("target_short_side"))
      cfg.normalization.target_short_side = n.at("target_short_side").get<int>();
    if (n.contains("crop_size")) cfg.normalization.crop_size = n.at("crop_size").get<int>();
  }
  if (j.contains("backbone")) cfg.backbone = io::backbone_from_json(j.at("backbone"));
  if (j.contains("train")) cfg.train = io::train_config_from_json(j.at("train"));
  if (j.contains("level_sizes")) cfg.level_sizes = j.at("level_sizes").get<std::vector<int>>();
  if (j.contains("eval")) cfg.eval.threshold = j.at("eval").at("threshold").get<double>();
  if (j.contains("use_clustering")) cfg.use_clustering = j.at("use_clustering").get<bool>();
  if (j.contains("use_orthogonal")) cfg.use_orthogonal = j.at("use_orthogonal").get<bool>();
  if (j.contains("presence_threshold"))
    cfg.presence_threshold = j.at("presence_threshold").get<double>();
  if (j.contains("evaluate_train_split"))
    cfg.evaluate_train_split = j.at("evaluate_train_split").get<bool>();
  if (j.contains("panel_images")) cfg.panel_images = j.at("panel_images").get<int>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace mlcam
