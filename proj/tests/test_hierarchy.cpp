#include <doctest.h>

#include <vector>

#include "mlcam/hierarchy/build.hpp"

using namespace mlcam;

namespace {

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1] * (1 + 1e-12) + 1e-12) return false;
  return true;
}

// Exhaustive optimal 2-clustering objective: try every nonempty bipartition
// with centers at the cluster means.
double best_two_cluster_sse(const MatX<double>& points) {
  const Eigen::Index n = points.rows();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    RowVecX<double> mean_a = RowVecX<double>::Zero(points.cols());
    RowVecX<double> mean_b = RowVecX<double>::Zero(points.cols());
    int na = 0, nb = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) { mean_a += points.row(i); ++na; }
      else                  { mean_b += points.row(i); ++nb; }
    }
    mean_a /= na;
    mean_b /= nb;
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      sse += (mask & (1u << i)) ? (points.row(i) - mean_a).squaredNorm()
                                : (points.row(i) - mean_b).squaredNorm();
    best = std::min(best, sse);
  }
  return best;
}

MatX<double> two_blobs(Rng& rng, int na, int nb, double sep, double sigma) {
  MatX<double> p(na + nb, 2);
  for (int i = 0; i < na; ++i)
    p.row(i) << rng.normal(0.0, sigma), rng.normal(0.0, sigma);
  for (int i = 0; i < nb; ++i)
    p.row(na + i) << rng.normal(sep, sigma), rng.normal(sep, sigma);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("hierarchy");

TEST_CASE("kmeans objective trace is non-increasing on randomized inputs") {
  Rng meta(101);
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 5 + static_cast<int>(meta.uniform_int(26));
    const int dim = 2 + static_cast<int>(meta.uniform_int(4));
    const int k = 1 + static_cast<int>(meta.uniform_int(std::min(n, 6)));
    MatX<double> points(n, dim);
    for (Eigen::Index i = 0; i < points.size(); ++i)
      points.data()[i] = meta.uniform(-3.0, 3.0);
    const Clustering c = kmeans(points, k, meta.uniform_int(1 << 30));
    REQUIRE(c.objective_traces.size() == 10);  // one per restart
    for (const auto& trace : c.objective_traces) {
      REQUIRE(trace.size() >= 2);
      CHECK(non_increasing(trace));
    }
    CHECK(c.assignment.size() == static_cast<std::size_t>(n));
    for (int a : c.assignment) CHECK((a >= 0 && a < k));
  }
}

TEST_CASE("kmeans recovers the exhaustive two-cluster optimum") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(seed, 0xb10b5));
    const int na = 3 + static_cast<int>(rng.uniform_int(5));  // 3..7 of 10
    const MatX<double> points = two_blobs(rng, na, 10 - na, 8.0, 0.5);
    const double want = best_two_cluster_sse(points);
    const Clustering got = kmeans(points, 2, seed);
    if (got.objective <= want * (1 + 1e-9) + 1e-12) ++hits;
  }
  CHECK(hits >= 95);
}

TEST_CASE("kmeans objective matches its own assignment/centers") {
  Rng rng(7);
  MatX<double> points(9, 3);
  for (Eigen::Index i = 0; i < points.size(); ++i)
    points.data()[i] = rng.uniform(-2.0, 2.0);
  const Clustering c = kmeans(points, 3, 42);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    sse += (points.row(i) -
            c.centers.row(c.assignment[static_cast<std::size_t>(i)]))
               .squaredNorm();
  CHECK(c.objective == doctest::Approx(sse).epsilon(1e-12));
  // Each point sits with its nearest center (fixed point of the assign step).
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < c.centers.rows(); ++j)
      CHECK((points.row(i) -
             c.centers.row(c.assignment[static_cast<std::size_t>(i)]))
                .squaredNorm() <=
            (points.row(i) - c.centers.row(j)).squaredNorm() + 1e-12);
}

TEST_CASE("kmeans finds the same optimum under row permutation") {
  Rng rng(11);
  const MatX<double> points = two_blobs(rng, 6, 6, 10.0, 0.3);
  MatX<double> shuffled(points.rows(), points.cols());
  const auto perm = rng.permutation(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    shuffled.row(i) = points.row(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]));
  const Clustering a = kmeans(points, 2, 5);
  const Clustering b = kmeans(shuffled, 2, 6);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-9));
}

TEST_CASE("kmeans input validation") {
  MatX<double> p = MatX<double>::Random(4, 2);
  CHECK_THROWS_AS(kmeans(p, 0, 1), Error);
  CHECK_THROWS_AS(kmeans(p, 5, 1), Error);
  CHECK_THROWS_AS(kmeans(p, 2, 1, 0), Error);
  CHECK_THROWS_AS(kmeans(p, 2, 1, 10, 0), Error);
  CHECK_NOTHROW(kmeans(p, 4, 1));
}

TEST_CASE("remap_labels is the per-cluster OR fold") {
  Clustering c;
  c.n_clusters = 4;
  c.node_assignment = {0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3};
  Rng rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    VecX<float> labels(12);
    for (int i = 0; i < 12; ++i)
      labels(i) = rng.uniform() < 0.4f ? 1.0f : 0.0f;
    const VecX<float> folded = remap_labels(labels, c);
    REQUIRE(folded.size() == 4);
    for (int j = 0; j < 4; ++j) {
      float want = 0.0f;  // scalar OR oracle
      for (int i = 0; i < 12; ++i)
        if (c.node_assignment[static_cast<std::size_t>(i)] == j)
          want = std::max(want, labels(i));
      CHECK(folded(j) == want);
    }
  }

  // Matrix form agrees with the vector form column by column.
  MatX<float> m(12, 5);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform() < 0.5f ? 1.0f : 0.0f;
  const MatX<float> folded = remap_labels(m, c);
  for (Eigen::Index col = 0; col < 5; ++col) {
    const VecX<float> one = remap_labels(VecX<float>(m.col(col)), c);
    CHECK((folded.col(col) - one).cwiseAbs().maxCoeff() == 0.0f);
  }

  VecX<float> wrong(5);
  CHECK_THROWS_AS(remap_labels(wrong, c), Error);
}

TEST_CASE("validate_level_sizes accepts chains and rejects junk") {
  CHECK_NOTHROW(validate_level_sizes({12, 6, 3}, 12));
  CHECK_NOTHROW(validate_level_sizes({12}, 12));
  CHECK_THROWS_AS(validate_level_sizes({}, 12), Error);
  CHECK_THROWS_AS(validate_level_sizes({10, 6}, 12), Error);
  CHECK_THROWS_AS(validate_level_sizes({12, 12}, 12), Error);
  CHECK_THROWS_AS(validate_level_sizes({12, 6, 6}, 12), Error);
  CHECK_THROWS_AS(validate_level_sizes({12, 6, 0}, 12), Error);
}

TEST_CASE("identity level and cluster_of lookups") {
  CategoryHierarchy h;
  h.n_categories = 5;
  h.levels.push_back(identity_clustering(5));
  for (int cat = 0; cat < 5; ++cat) CHECK(cluster_of(h, 0, cat) == cat);
  CHECK(h.k() == 0);
  CHECK_THROWS_AS(cluster_of(h, 1, 0), Error);
  CHECK_THROWS_AS(cluster_of(h, 0, 5), Error);
  CHECK_THROWS_AS(cluster_of(h, -1, 0), Error);
}

TEST_CASE("build_hierarchy composes planted groupings through levels") {
  // Planted structure: 12 categories in 4 tight weight-space groups
  // {0,1,2} {3,4,5} {6,7,8} {9,10,11}; super-groups pair 0-1 and 2-3.
  const auto group_of = [](int cat) { return cat / 3; };
  const auto super_of = [](int group) { return group / 2; };

  BackboneSpec spec;
  spec.conv_channels = {4};
  spec.input_size = 4;
  TrainConfig cfg;
  cfg.seed = 99;

  Rng jitter(3);
  const auto corner = [&](int idx, double scale) {
    RowVecX<double> v = RowVecX<double>::Zero(4);
    v(idx) = scale;
    return v;
  };

  std::vector<int> trainer_rows;  // label heights seen per level
  MatX<float> seen_level1_labels;
  LevelTrainer<float> trainer = [&](int level, const MatX<float>& y) {
    trainer_rows.push_back(static_cast<int>(y.rows()));
    if (level == 1) seen_level1_labels = y;
    auto model = build_model<float>(static_cast<int>(y.rows()), spec, 1, 1);
    auto& w = model.branches[0].head().weight;
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      // Identify the planted group from the first member column, so the test
      // is independent of the cluster-id permutation K-means happens to pick.
      int member = -1;
      for (Eigen::Index col = 0; col < y.cols(); ++col)
        if (y(r, col) > 0.5f) { member = static_cast<int>(col); break; }
      REQUIRE(member >= 0);
      const int target = level == 0 ? group_of(member) : super_of(group_of(member));
      RowVecX<double> row = corner(target, 10.0);
      for (Eigen::Index d = 0; d < 4; ++d) row(d) += jitter.normal(0.0, 0.01);
      w.row(r) = row.cast<float>();
    }
    return model;
  };

  Tensor4<float> dummy(1, 3, 4, 4);
  MatX<float> labels = MatX<float>::Identity(12, 12);
  const auto built = build_hierarchy<float>(dummy, labels, {12, 4, 2}, spec, cfg, trainer);
  const CategoryHierarchy& h = built.hierarchy;

  REQUIRE(h.k() == 2);
  REQUIRE(h.levels.size() == 3);
  CHECK(trainer_rows == std::vector<int>{12, 4});
  CHECK(built.level_models.size() == 2);
  CHECK(h.levels[1].n_clusters == 4);
  CHECK(h.levels[2].n_clusters == 2);

  // Level 1 recovers the planted groups, level 2 the planted super-groups
  // (up to cluster relabeling), and composition reaches base categories.
  for (int a = 0; a < 12; ++a)
    for (int b = 0; b < 12; ++b) {
      CHECK((cluster_of(h, 1, a) == cluster_of(h, 1, b)) ==
            (group_of(a) == group_of(b)));
      CHECK((cluster_of(h, 2, a) == cluster_of(h, 2, b)) ==
            (super_of(group_of(a)) == super_of(group_of(b))));
    }

  // The level-1 trainer saw OR-folded labels of the level-1 clustering.
  REQUIRE(seen_level1_labels.rows() == 4);
  for (int col = 0; col < 12; ++col)
    for (int j = 0; j < 4; ++j)
      CHECK(seen_level1_labels(j, col) ==
            (cluster_of(h, 1, col) == j ? 1.0f : 0.0f));

  // Composition identity: assignment-through-previous-level equals the
  // composed table stored at each level.
  for (int cat = 0; cat < 12; ++cat) {
    const int mid = cluster_of(h, 1, cat);
    CHECK(h.levels[2].node_assignment[static_cast<std::size_t>(mid)] ==
          cluster_of(h, 2, cat));
  }
}

TEST_SUITE_END();
