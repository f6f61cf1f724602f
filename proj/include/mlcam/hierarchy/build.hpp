#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mlcam/hierarchy/kmeans.hpp"
#include "mlcam/nn/train.hpp"

namespace mlcam {

// Ordered clusterings from the identity level (one cluster per category) down
// to the coarsest requested level. Deeper levels cluster the previous level's
// nodes, so the hierarchy is nested by construction.
struct CategoryHierarchy {
  int n_categories = 0;
  std::vector<Clustering> levels;           // levels[0] = identity
  std::vector<std::string> model_refs;      // optional per-level artifact ids

  int k() const { return static_cast<int>(levels.size()) - 1; }
};

inline Clustering identity_clustering(int n_categories) {
  Clustering c;
  c.level_index = 0;
  c.n_clusters = n_categories;
  c.assignment.resize(static_cast<std::size_t>(n_categories));
  std::iota(c.assignment.begin(), c.assignment.end(), 0);
  c.node_assignment = c.assignment;
  return c;
}

inline int cluster_of(const CategoryHierarchy& h, int level, int category) {
  MLCAM_CHECK(level >= 0 && level <= h.k(), Lookup, "cluster_of: bad level");
  MLCAM_CHECK(category >= 0 && category < h.n_categories, Lookup,
              "cluster_of: unknown category");
  return h.levels[static_cast<std::size_t>(level)]
      .assignment[static_cast<std::size_t>(category)];
}

// OR-fold of member labels: a cluster is present when any of its member
// categories is.
template <typename S>
VecX<S> remap_labels(const VecX<S>& labels, const Clustering& clustering) {
  MLCAM_CHECK(labels.size() ==
                  static_cast<Eigen::Index>(clustering.node_assignment.size()),
              Contract, "remap_labels: length mismatch");
  VecX<S> out = VecX<S>::Zero(clustering.n_clusters);
  for (Eigen::Index c = 0; c < labels.size(); ++c) {
    const int j = clustering.node_assignment[static_cast<std::size_t>(c)];
    out(j) = std::max(out(j), labels(c));
  }
  return out;
}

// Column-per-sample matrix form of the same fold.
template <typename S>
MatX<S> remap_labels(const MatX<S>& labels, const Clustering& clustering) {
  MLCAM_CHECK(labels.rows() ==
                  static_cast<Eigen::Index>(clustering.node_assignment.size()),
              Contract, "remap_labels: length mismatch");
  MatX<S> out = MatX<S>::Zero(clustering.n_clusters, labels.cols());
  for (Eigen::Index c = 0; c < labels.rows(); ++c) {
    const int j = clustering.node_assignment[static_cast<std::size_t>(c)];
    out.row(j) = out.row(j).cwiseMax(labels.row(c));
  }
  return out;
}

inline void validate_level_sizes(const std::vector<int>& level_sizes, int n_categories) {
  MLCAM_CHECK(!level_sizes.empty(), Config, "hierarchy: empty level_sizes");
  MLCAM_CHECK(level_sizes.front() == n_categories, Config,
              "hierarchy: level_sizes[0] must equal the category count");
  for (std::size_t i = 1; i < level_sizes.size(); ++i)
    MLCAM_CHECK(level_sizes[i] >= 1 && level_sizes[i] < level_sizes[i - 1], Config,
                "hierarchy: level sizes must be strictly decreasing");
}

template <typename S>
struct HierarchyBuild {
  CategoryHierarchy hierarchy;
  // Single-branch models trained on level-i labels (i = 0..k-1); model i's
  // head-weight rows produced clustering level i+1.
  std::vector<ClassifierModel<S>> level_models;
};

// A trainer maps (level index, remapped label matrix) to a trained
// single-branch model; the default trains in place, the pipeline passes a
// caching version.
template <typename S>
using LevelTrainer =
    std::function<ClassifierModel<S>(int level, const MatX<S>& labels)>;

inline constexpr std::uint64_t kHierModelTag = 0x4849455200ull;
inline constexpr std::uint64_t kHierKmeansTag = 0x4b4d4e5300ull;

// Iterated clustering of §-style: train a plain classifier on the previous
// level's labels, cluster its head-weight rows, remap, repeat.
template <typename S>
HierarchyBuild<S> build_hierarchy(const Tensor4<S>& images, const MatX<S>& labels,
                                  const std::vector<int>& level_sizes,
                                  const BackboneSpec& backbone,
                                  const TrainConfig& cfg,
                                  LevelTrainer<S> trainer = nullptr) {
  const int n_c = static_cast<int>(labels.rows());
  validate_level_sizes(level_sizes, n_c);

  HierarchyBuild<S> out;
  out.hierarchy.n_categories = n_c;
  out.hierarchy.levels.push_back(identity_clustering(n_c));

  if (!trainer) {
    trainer = [&](int level, const MatX<S>& y) {
      auto model = build_model<S>(static_cast<int>(y.rows()), backbone,
                                  derive_seed(cfg.seed, kHierModelTag,
                                              static_cast<std::uint64_t>(level)),
                                  /*n_branches=*/1);
      TrainConfig level_cfg = cfg;
      level_cfg.seed = derive_seed(cfg.seed, kHierModelTag,
                                   static_cast<std::uint64_t>(level));
      train(model, images, y, level_cfg);
      return model;
    };
  }

  MatX<S> cur_labels = labels;
  for (std::size_t lvl = 1; lvl < level_sizes.size(); ++lvl) {
    ClassifierModel<S> model = trainer(static_cast<int>(lvl) - 1, cur_labels);
    MatX<double> feats = extract_category_features(model).template cast<double>();
    Clustering c = kmeans(feats, level_sizes[lvl],
                          derive_seed(cfg.seed, kHierKmeansTag,
                                      static_cast<std::uint64_t>(lvl)));
    c.level_index = static_cast<int>(lvl);
    // Compose down to base categories through the previous level.
    const auto& prev = out.hierarchy.levels.back().assignment;
    c.assignment.resize(static_cast<std::size_t>(n_c));
    for (int cat = 0; cat < n_c; ++cat)
      c.assignment[static_cast<std::size_t>(cat)] =
          c.node_assignment[static_cast<std::size_t>(
              prev[static_cast<std::size_t>(cat)])];

    cur_labels = remap_labels(cur_labels, c);
    out.hierarchy.levels.push_back(std::move(c));
    out.level_models.push_back(std::move(model));
  }
  return out;
}

}  // namespace mlcam
