#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mlcam/nn/train.hpp"

using namespace mlcam;

namespace {

// Independent scalar conv for the oracle: direct 5-loop correlation.
double conv_ref(const Tensor4<double>& x, const MatX<double>& w,
                const VecX<double>& b, int oc, int in_ch, int oy, int ox,
                int stride, int pad) {
  double acc = b(oc);
  for (int ci = 0; ci < in_ch; ++ci)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const int iy = oy * stride - pad + ky;
        const int ix = ox * stride - pad + kx;
        if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
        acc += w(oc, ci * 9 + kx * 3 + ky) * x.at(0, ci, iy, ix);
      }
  return acc;
}

Tensor4<double> random_tensor(Rng& rng, int n, int c, int h, int w) {
  Tensor4<double> t(n, c, h, w);
  for (Eigen::Index i = 0; i < t.mat().size(); ++i)
    t.mat().data()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

MatX<double> random_mat(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  MatX<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
  return m;
}

MatX<double> random_targets(Rng& rng, int r, int c) {
  MatX<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return m;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

BackboneSpec tiny_backbone() {
  BackboneSpec spec;
  spec.conv_channels = {3};
  spec.input_size = 6;
  return spec;
}

// Full two-branch objective recomputed by forward passes only (for FD).
double full_loss(const ClassifierModel<double>& model, const Tensor4<double>& x,
                 const MatX<double>& y, double lambda) {
  const auto t1 = model.branches[0].forward(x);
  const auto t2 = model.branches[1].forward(x);
  return bce_with_logits(t1.logits, y) + bce_with_logits(t2.logits, y) +
         lambda * orthogonal_loss(t1.features, t2.features);
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("bce_with_logits matches the scalar formula and stays finite") {
  Rng rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    const int r = 1 + static_cast<int>(rng.uniform_int(4));
    const int c = 1 + static_cast<int>(rng.uniform_int(4));
    const MatX<double> z = random_mat(rng, r, c, -6.0, 6.0);
    const MatX<double> y = random_targets(rng, r, c);
    double want = 0.0;
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) {
        const double zz = z(i, j);
        want += -(y(i, j) * std::log(1.0 / (1.0 + std::exp(-zz))) +
                  (1.0 - y(i, j)) * std::log(1.0 - 1.0 / (1.0 + std::exp(-zz))));
      }
    want /= static_cast<double>(r * c);
    CHECK(rel_err(bce_with_logits(z, y), want) < 1e-9);
  }

  // Saturated logits: the naive formula overflows, the stable one must not.
  MatX<double> z(1, 2), y(1, 2);
  z << 1000.0, -1000.0;
  y << 1.0, 0.0;
  CHECK(bce_with_logits(z, y) == doctest::Approx(0.0));
  y << 0.0, 1.0;
  CHECK(bce_with_logits(z, y) == doctest::Approx(1000.0));
}

TEST_CASE("orthogonal_loss matches the scalar sum / batch oracle") {
  Rng rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform_int(2));
    const int c = 1 + static_cast<int>(rng.uniform_int(8));
    const int h = 1 + static_cast<int>(rng.uniform_int(4));
    const int w = 1 + static_cast<int>(rng.uniform_int(4));
    const auto f1 = random_tensor(rng, n, c, h, w);
    const auto f2 = random_tensor(rng, n, c, h, w);
    double want = 0.0;
    for (int s = 0; s < n; ++s)
      for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            want += f1.at(s, ci, y, x) * f2.at(s, ci, y, x);
    want /= static_cast<double>(n);
    CHECK(rel_err(orthogonal_loss(f1, f2), want) < 1e-9);
  }
  CHECK_THROWS_AS(orthogonal_loss(Tensor4<double>(1, 1, 2, 2),
                                  Tensor4<double>(1, 1, 2, 3)),
                  Error);
}

TEST_CASE("total_loss satisfies the decomposition identity exactly") {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform_int(2));
    const int labels = 1 + static_cast<int>(rng.uniform_int(5));
    const MatX<double> l1 = random_mat(rng, labels, n, -4.0, 4.0);
    const MatX<double> l2 = random_mat(rng, labels, n, -4.0, 4.0);
    const MatX<double> y = random_targets(rng, labels, n);
    const auto f1 = random_tensor(rng, n, 4, 3, 3);
    const auto f2 = random_tensor(rng, n, 4, 3, 3);
    const double lambda = rng.uniform(0.0, 2.0);
    const LossBreakdown lb = total_loss(l1, l2, y, f1, f2, lambda);
    CHECK(lb.l_all == lb.l_c1 + lb.l_c2 + lambda * lb.l_o);
    CHECK(lb.l_c1 == bce_with_logits(l1, y));
    CHECK(lb.l_o == orthogonal_loss(f1, f2));
  }
}

TEST_CASE("conv2d forward matches the direct correlation oracle") {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const int in_ch = 1 + static_cast<int>(rng.uniform_int(3));
    const int out_ch = 1 + static_cast<int>(rng.uniform_int(3));
    const int h = 3 + static_cast<int>(rng.uniform_int(4));
    const int w = 3 + static_cast<int>(rng.uniform_int(4));
    Conv2d<double> conv(in_ch, out_ch, 3, 2, 1);
    conv.weight = random_mat(rng, out_ch, in_ch * 9);
    for (Eigen::Index i = 0; i < out_ch; ++i) conv.bias(i) = rng.uniform(-1, 1);
    const auto x = random_tensor(rng, 1, in_ch, h, w);
    const auto y = conv.forward(x);
    CHECK(y.h() == (h + 1) / 2);
    CHECK(y.w() == (w + 1) / 2);
    for (int oc = 0; oc < out_ch; ++oc)
      for (int oy = 0; oy < y.h(); ++oy)
        for (int ox = 0; ox < y.w(); ++ox)
          CHECK(rel_err(y.at(0, oc, oy, ox),
                        conv_ref(x, conv.weight, conv.bias, oc, in_ch, oy, ox, 2, 1)) <
                1e-9);
  }
}

TEST_CASE("global_avg_pool is the plane mean; backward spreads uniformly") {
  Rng rng(5);
  const auto x = random_tensor(rng, 2, 3, 4, 5);
  const MatX<double> p = global_avg_pool(x);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      CHECK(p(c, n) == doctest::Approx(x.plane(n, c).mean()).epsilon(1e-12));

  MatX<double> g = random_mat(rng, 3, 2);
  const auto dx = global_avg_pool_backward(g, x);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      CHECK(dx.at(n, c, 1, 2) == doctest::Approx(g(c, n) / 20.0).epsilon(1e-12));
}

TEST_CASE("orthogonal loss gradients match central finite differences") {
  Rng rng(6);
  auto f1 = random_tensor(rng, 2, 8, 4, 4);
  auto f2 = random_tensor(rng, 2, 8, 4, 4);
  const auto [d1, d2] = orthogonal_loss_grads(f1, f2);
  const double eps = 1e-5;
  for (int probe = 0; probe < 50; ++probe) {
    const Eigen::Index i = rng.uniform_int(f1.mat().size());
    const Eigen::Index col = i / f1.mat().rows(), row = i % f1.mat().rows();
    const double keep = f1.mat()(row, col);
    f1.mat()(row, col) = keep + eps;
    const double up = orthogonal_loss(f1, f2);
    f1.mat()(row, col) = keep - eps;
    const double dn = orthogonal_loss(f1, f2);
    f1.mat()(row, col) = keep;
    const double fd = (up - dn) / (2 * eps);
    CHECK(rel_err(d1.mat()(row, col), fd) < 1e-3);
  }
  // And for the second argument.
  for (int probe = 0; probe < 50; ++probe) {
    const Eigen::Index i = rng.uniform_int(f2.mat().size());
    const Eigen::Index col = i / f2.mat().rows(), row = i % f2.mat().rows();
    const double keep = f2.mat()(row, col);
    f2.mat()(row, col) = keep + eps;
    const double up = orthogonal_loss(f1, f2);
    f2.mat()(row, col) = keep - eps;
    const double dn = orthogonal_loss(f1, f2);
    f2.mat()(row, col) = keep;
    CHECK(rel_err(d2.mat()(row, col), (up - dn) / (2 * eps)) < 1e-3);
  }
}

TEST_CASE("full objective gradients match finite differences through the net") {
  const BackboneSpec spec = tiny_backbone();
  auto model = build_model<double>(2, spec, 77, 2);
  Rng rng(7);
  const auto x = random_tensor(rng, 2, 3, 6, 6);
  const MatX<double> y = random_targets(rng, 2, 2);
  const double lambda = 0.37;

  // Analytic gradients via the training backward path.
  std::vector<BranchGrads<double>> grads;
  for (const auto& br : model.branches) grads.push_back(br.zero_grads());
  const auto t1 = model.branches[0].forward(x);
  const auto t2 = model.branches[1].forward(x);
  auto [d1, d2] = orthogonal_loss_grads(t1.features, t2.features);
  d1.mat() *= lambda;
  d2.mat() *= lambda;
  model.branches[0].backward(t1, bce_with_logits_grad(t1.logits, y), &d1, grads[0]);
  model.branches[1].backward(t2, bce_with_logits_grad(t2.logits, y), &d2, grads[1]);

  const double eps = 1e-6;
  int checked = 0;
  for (int b = 0; b < 2; ++b) {
    auto& conv = model.branches[static_cast<std::size_t>(b)].convs()[0];
    for (int probe = 0; probe < 40; ++probe) {
      const Eigen::Index r = rng.uniform_int(conv.weight.rows());
      const Eigen::Index c = rng.uniform_int(conv.weight.cols());
      const double keep = conv.weight(r, c);
      conv.weight(r, c) = keep + eps;
      const double up = full_loss(model, x, y, lambda);
      conv.weight(r, c) = keep - eps;
      const double dn = full_loss(model, x, y, lambda);
      conv.weight(r, c) = keep;
      const double fd = (up - dn) / (2 * eps);
      if (std::abs(fd) < 1e-10) continue;  // dead ReLU region, no signal
      CHECK(std::abs(grads[static_cast<std::size_t>(b)].conv_w[0](r, c) - fd) /
                std::max(1e-4, std::abs(fd)) <
            1e-3);
      ++checked;
    }
    auto& head = model.branches[static_cast<std::size_t>(b)].head();
    for (int probe = 0; probe < 6; ++probe) {
      const Eigen::Index r = rng.uniform_int(head.weight.rows());
      const Eigen::Index c = rng.uniform_int(head.weight.cols());
      const double keep = head.weight(r, c);
      head.weight(r, c) = keep + eps;
      const double up = full_loss(model, x, y, lambda);
      head.weight(r, c) = keep - eps;
      const double dn = full_loss(model, x, y, lambda);
      head.weight(r, c) = keep;
      const double fd = (up - dn) / (2 * eps);
      CHECK(std::abs(grads[static_cast<std::size_t>(b)].head_w(r, c) - fd) /
                std::max(1e-4, std::abs(fd)) <
            1e-3);
      ++checked;
    }
  }
  CHECK(checked >= 40);
}

TEST_CASE("conv backward input gradient matches finite differences") {
  Rng rng(8);
  Conv2d<double> conv(2, 3, 3, 2, 1);
  conv.weight = random_mat(rng, 3, 18);
  auto x = random_tensor(rng, 1, 2, 5, 5);
  const auto y0 = conv.forward(x);
  const auto r = random_tensor(rng, 1, 3, y0.h(), y0.w());

  MatX<double> dw = MatX<double>::Zero(3, 18);
  VecX<double> db = VecX<double>::Zero(3);
  Tensor4<double> g = r;
  const auto dx = conv.backward(x, g, dw, db);

  const double eps = 1e-6;
  for (int probe = 0; probe < 40; ++probe) {
    const Eigen::Index i = rng.uniform_int(x.mat().size());
    const double keep = x.mat().data()[i];
    x.mat().data()[i] = keep + eps;
    const double up = (conv.forward(x).mat().array() * r.mat().array()).sum();
    x.mat().data()[i] = keep - eps;
    const double dn = (conv.forward(x).mat().array() * r.mat().array()).sum();
    x.mat().data()[i] = keep;
    CHECK(std::abs(dx.mat().data()[i] - (up - dn) / (2 * eps)) < 1e-6);
  }
}

TEST_CASE("training reduces loss on a separable toy problem") {
  // Bright-left vs bright-right squares; a conv net separates them quickly.
  const int n = 24;
  Tensor4<float> x(n, 3, 6, 6);
  MatX<float> y(2, n);
  Rng rng(9);
  for (int i = 0; i < n; ++i) {
    const int cls = i % 2;
    for (int c = 0; c < 3; ++c)
      for (int yy = 0; yy < 6; ++yy)
        for (int xx = 0; xx < 6; ++xx) {
          const bool hot = cls == 0 ? xx < 3 : xx >= 3;
          x.at(i, c, yy, xx) =
              static_cast<float>((hot ? 0.9 : 0.1) + rng.uniform(-0.05, 0.05));
        }
    y(0, i) = cls == 0 ? 1.0f : 0.0f;
    y(1, i) = cls == 1 ? 1.0f : 0.0f;
  }

  auto model = build_model<float>(2, tiny_backbone(), 5, 2);
  TrainConfig cfg;
  cfg.initial_lr = 0.2;
  cfg.batch_size = 8;
  cfg.max_epochs = 30;
  cfg.lr_decay_ratio = 1.0;
  cfg.lambda_orth = 1e-4;
  cfg.seed = 13;
  const auto history = train(model, x, y, cfg);
  REQUIRE(history.size() == 30);
  CHECK(history.back().l_all < 0.5 * history.front().l_all);
  // The identity holds on every logged epoch.
  for (const auto& e : history)
    CHECK(e.l_all ==
          doctest::Approx(e.l_c1 + e.l_c2 + cfg.lambda_orth * e.l_o).epsilon(1e-12));
}

TEST_CASE("plateau schedule halves the rate only at window boundaries") {
  // With an infinite plateau threshold every window triggers a decay, so the
  // ratio=0.5 run must match a flat run for the first window and diverge
  // right after it.
  const int n = 16;
  Tensor4<float> x(n, 3, 6, 6);
  MatX<float> y(1, n);
  Rng rng(10);
  for (Eigen::Index i = 0; i < x.mat().size(); ++i)
    x.mat().data()[i] = static_cast<float>(rng.uniform());
  for (int i = 0; i < n; ++i) y(0, i) = static_cast<float>(i % 2);

  TrainConfig flat;
  flat.initial_lr = 0.1;
  flat.batch_size = 8;
  flat.max_epochs = 8;
  flat.plateau_window = 5;
  flat.plateau_threshold = std::numeric_limits<double>::infinity();
  flat.lr_decay_ratio = 1.0;
  flat.seed = 21;
  TrainConfig decay = flat;
  decay.lr_decay_ratio = 0.5;

  auto m1 = build_model<float>(1, tiny_backbone(), 33, 1);
  auto m2 = build_model<float>(1, tiny_backbone(), 33, 1);
  const auto h1 = train(m1, x, y, flat);
  const auto h2 = train(m2, x, y, decay);
  for (int e = 0; e < 5; ++e) CHECK(h1[e].l_all == h2[e].l_all);
  bool diverged = false;
  for (std::size_t e = 5; e < h1.size(); ++e)
    diverged = diverged || h1[e].l_all != h2[e].l_all;
  CHECK(diverged);
}

TEST_CASE("divergent training raises a Training error") {
  const int n = 8;
  Tensor4<float> x(n, 3, 6, 6);
  MatX<float> y(2, n);
  Rng rng(11);
  for (Eigen::Index i = 0; i < x.mat().size(); ++i)
    x.mat().data()[i] = static_cast<float>(rng.uniform());
  for (int i = 0; i < n; ++i) { y(0, i) = 1.0f; y(1, i) = 0.0f; }

  auto model = build_model<float>(2, tiny_backbone(), 1, 1);
  TrainConfig cfg;
  cfg.initial_lr = 1e30;
  cfg.batch_size = 4;
  cfg.max_epochs = 5;
  cfg.lr_decay_ratio = 1.0;
  cfg.seed = 2;
  try {
    train(model, x, y, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Training);
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.initial_lr = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = TrainConfig{};
  cfg.lr_decay_ratio = 0.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg.lr_decay_ratio = 1.0;  // flat schedule is legal
  CHECK_NOTHROW(validate(cfg));
  cfg.lr_decay_ratio = 1.5;
  CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_SUITE_END();
