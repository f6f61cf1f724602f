#pragma once

#include <limits>
#include <vector>

#include "mlcam/core/rng.hpp"
#include "mlcam/core/tensor.hpp"

namespace mlcam {

// One clustering level. `assignment` maps base category ids to cluster ids
// (for level 0 it is the identity); `node_assignment` maps the previous
// level's nodes, which is what K-means actually produced.
struct Clustering {
  int level_index = 0;
  int n_clusters = 0;
  std::vector<int> assignment;       // base category -> cluster, composed
  std::vector<int> node_assignment;  // previous-level node -> cluster
  MatX<double> centers;              // n_clusters × dim
  double objective = 0.0;
  // Per-restart objective traces (one value per Lloyd iteration); kept so
  // the non-increase property can be audited after the fact.
  std::vector<std::vector<double>> objective_traces;
};

namespace detail {

inline double sq_dist(const MatX<double>& points, Eigen::Index i,
                      const MatX<double>& centers, Eigen::Index j) {
  return (points.row(i) - centers.row(j)).squaredNorm();
}

// k-means++ seeding: first center uniform, later ones D²-weighted.
inline MatX<double> seed_centers(const MatX<double>& points, int n_clusters, Rng& rng) {
  const Eigen::Index n = points.rows();
  MatX<double> centers(n_clusters, points.cols());
  centers.row(0) = points.row(rng.uniform_int(n));
  VecX<double> d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = sq_dist(points, i, centers, 0);
  for (int c = 1; c < n_clusters; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double target = rng.uniform() * total, acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target) { pick = i; break; }
        pick = i;
      }
    } else {
      pick = rng.uniform_int(n);  // all points coincide with centers
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2(i) = std::min(d2(i), sq_dist(points, i, centers, c));
  }
  return centers;
}

}  // namespace detail

struct KMeansResult {
  std::vector<int> assignment;
  MatX<double> centers;
  double objective = 0.0;
  std::vector<double> trace;  // objective after each Lloyd iteration
};

// One Lloyd run from a k-means++ seed. Ties in assignment go to the lowest
// cluster index; a cluster that loses all members is re-seeded at the point
// farthest from its own center, which cannot increase the objective.
inline KMeansResult lloyd_run(const MatX<double>& points, int n_clusters,
                              int max_iters, Rng& rng) {
  const Eigen::Index n = points.rows();
  KMeansResult res;
  res.centers = detail::seed_centers(points, n_clusters, rng);
  res.assignment.assign(static_cast<std::size_t>(n), 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    // Assign step; objective is logged against the centers used to assign.
    bool changed = iter == 0;
    double obj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n_clusters; ++j) {
        const double d = detail::sq_dist(points, i, res.centers, j);
        if (d < best_d) { best_d = d; best = j; }
      }
      obj += best_d;
      if (res.assignment[static_cast<std::size_t>(i)] != best) {
        res.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    res.trace.push_back(obj);
    res.objective = obj;
    if (!changed) break;

    // Update step.
    MatX<double> sums = MatX<double>::Zero(n_clusters, points.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(n_clusters), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignment[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])];
    }
    for (int j = 0; j < n_clusters; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) {
        res.centers.row(j) =
            sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);
      } else {
        // Re-seed an empty cluster at the point farthest from its center.
        Eigen::Index far = 0;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d = detail::sq_dist(
              points, i, res.centers,
              res.assignment[static_cast<std::size_t>(i)]);
          if (d > far_d) { far_d = d; far = i; }
        }
        res.centers.row(j) = points.row(far);
      }
    }
  }

  // Final objective against the final centers/assignment.
  double obj = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    obj += detail::sq_dist(points, i, res.centers,
                           res.assignment[static_cast<std::size_t>(i)]);
  res.trace.push_back(obj);
  res.objective = obj;
  return res;
}

// Best-of-restarts K-means on row vectors (squared Euclidean distance).
inline Clustering kmeans(const MatX<double>& points, int n_clusters,
                         std::uint64_t seed, int max_iters = 100,
                         int restarts = 10) {
  MLCAM_CHECK(n_clusters >= 1, Config, "kmeans: need >= 1 cluster");
  MLCAM_CHECK(points.rows() >= n_clusters, Config,
              "kmeans: more clusters than points");
  MLCAM_CHECK(max_iters >= 1 && restarts >= 1, Config,
              "kmeans: need >= 1 iteration and restart");

  Clustering best;
  best.n_clusters = n_clusters;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, 0x4b4d4541ull, static_cast<std::uint64_t>(r)));
    KMeansResult run = lloyd_run(points, n_clusters, max_iters, rng);
    best.objective_traces.push_back(run.trace);
    if (run.objective < best_obj) {
      best_obj = run.objective;
      best.assignment = run.assignment;
      best.node_assignment = run.assignment;
      best.centers = std::move(run.centers);
      best.objective = run.objective;
    }
  }
  return best;
}

}  // namespace mlcam
