#pragma once

// Round-trips trained models and cluster hierarchies through the artifact
// container so pipeline stages can be cached and resumed.

#include <string>
#include <vector>

#include "mlcam/hierarchy/build.hpp"
#include "mlcam/io/container.hpp"
#include "mlcam/nn/model.hpp"
#include "mlcam/nn/train.hpp"

namespace mlcam::io {

inline json backbone_to_json(const BackboneSpec& spec) {
  json j;
  j["architecture"] = spec.architecture;
  j["conv_channels"] = spec.conv_channels;
  j["input_size"] = spec.input_size;
  return j;
}

inline BackboneSpec backbone_from_json(const json& j) {
  BackboneSpec spec;
  spec.architecture = j.at("architecture").get<std::string>();
  spec.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  spec.input_size = j.at("input_size").get<int>();
  return spec;
}

inline json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["initial_lr"] = cfg.initial_lr;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["plateau_window"] = cfg.plateau_window;
  j["plateau_threshold"] = cfg.plateau_threshold;
  j["lr_decay_ratio"] = cfg.lr_decay_ratio;
  j["lambda_orth"] = cfg.lambda_orth;
  j["momentum"] = cfg.momentum;
  j["seed"] = cfg.seed;
  return j;
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.initial_lr = j.at("initial_lr").get<double>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.max_epochs = j.at("max_epochs").get<int>();
  cfg.plateau_window = j.at("plateau_window").get<int>();
  cfg.plateau_threshold = j.at("plateau_threshold").get<double>();
  cfg.lr_decay_ratio = j.at("lr_decay_ratio").get<double>();
  cfg.lambda_orth = j.at("lambda_orth").get<double>();
  cfg.momentum = j.at("momentum").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

template <typename S>
void save_model(const std::string& path, const ClassifierModel<S>& model,
                const json& extra_meta = json::object()) {
  json meta = extra_meta;
  meta["kind"] = "classifier";
  meta["backbone"] = backbone_to_json(model.backbone);
  meta["n_labels"] = model.n_labels;
  meta["n_branches"] = static_cast<int>(model.branches.size());
  ArtifactWriter writer(meta);
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    const auto& branch = model.branches[b];
    const std::string prefix = "branch" + std::to_string(b) + ".";
    for (std::size_t l = 0; l < branch.convs().size(); ++l) {
      writer.add(prefix + "conv" + std::to_string(l) + ".weight", branch.convs()[l].weight);
      writer.add(prefix + "conv" + std::to_string(l) + ".bias", branch.convs()[l].bias);
    }
    writer.add(prefix + "head.weight", branch.head().weight);
    writer.add(prefix + "head.bias", branch.head().bias);
  }
  writer.save(path);
}

template <typename S>
ClassifierModel<S> load_model(const std::string& path) {
  ArtifactReader reader(path);
  const json& meta = reader.meta();
  MLCAM_CHECK(meta.at("kind") == "classifier", Format,
              "checkpoint: not a classifier artifact: " + path);
  const BackboneSpec backbone = backbone_from_json(meta.at("backbone"));
  const int n_labels = meta.at("n_labels").get<int>();
  const int n_branches = meta.at("n_branches").get<int>();
  ClassifierModel<S> model = build_model<S>(n_labels, backbone, 0, n_branches);
  for (int b = 0; b < n_branches; ++b) {
    auto& branch = model.branches[static_cast<std::size_t>(b)];
    const std::string prefix = "branch" + std::to_string(b) + ".";
    for (std::size_t l = 0; l < branch.convs().size(); ++l) {
      branch.convs()[l].weight = reader.array<S>(prefix + "conv" + std::to_string(l) + ".weight");
      branch.convs()[l].bias = reader.array<S>(prefix + "conv" + std::to_string(l) + ".bias");
    }
    branch.head().weight = reader.array<S>(prefix + "head.weight");
    branch.head().bias = reader.array<S>(prefix + "head.bias");
  }
  return model;
}

inline json clustering_to_json(const Clustering& clustering) {
  json j;
  j["level_index"] = clustering.level_index;
  j["n_clusters"] = clustering.n_clusters;
  j["assignment"] = clustering.assignment;
  j["node_assignment"] = clustering.node_assignment;
  j["objective"] = clustering.objective;
  j["objective_traces"] = clustering.objective_traces;
  json centers = json::array();
  for (Eigen::Index r = 0; r < clustering.centers.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < clustering.centers.cols(); ++c)
      row.push_back(clustering.centers(r, c));
    centers.push_back(std::move(row));
  }
  j["centers"] = std::move(centers);
  return j;
}

inline Clustering clustering_from_json(const json& j) {
  Clustering clustering;
  clustering.level_index = j.at("level_index").get<int>();
  clustering.n_clusters = j.at("n_clusters").get<int>();
  clustering.assignment = j.at("assignment").get<std::vector<int>>();
  clustering.node_assignment = j.at("node_assignment").get<std::vector<int>>();
  clustering.objective = j.at("objective").get<double>();
  clustering.objective_traces = j.at("objective_traces").get<std::vector<std::vector<double>>>();
  const json& centers = j.at("centers");
  const Eigen::Index rows = static_cast<Eigen::Index>(centers.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(centers.at(0).size()) : 0;
  clustering.centers.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      clustering.centers(r, c) = centers.at(static_cast<std::size_t>(r))
                                     .at(static_cast<std::size_t>(c))
                                     .get<double>();
  return clustering;
}

inline json hierarchy_to_json(const CategoryHierarchy& h) {
  json j;
  j["n_categories"] = h.n_categories;
  j["model_refs"] = h.model_refs;
  json levels = json::array();
  for (const auto& level : h.levels) levels.push_back(clustering_to_json(level));
  j["levels"] = std::move(levels);
  return j;
}

inline CategoryHierarchy hierarchy_from_json(const json& j) {
  CategoryHierarchy h;
  h.n_categories = j.at("n_categories").get<int>();
  h.model_refs = j.at("model_refs").get<std::vector<std::string>>();
  for (const json& level : j.at("levels")) h.levels.push_back(clustering_from_json(level));
  return h;
}

}  // namespace mlcam::io
