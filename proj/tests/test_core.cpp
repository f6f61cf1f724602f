#include <doctest.h>

#include <set>

#include "mlcam/core/error.hpp"
#include "mlcam/core/image.hpp"
#include "mlcam/core/rng.hpp"
#include "mlcam/core/tensor.hpp"

using namespace mlcam;

TEST_SUITE_BEGIN("core");

TEST_CASE("rng streams are deterministic and tag-separated") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // Derived seeds differ across tags and match across calls.
  CHECK(derive_seed(7, 1) == derive_seed(7, 1));
  CHECK(derive_seed(7, 1) != derive_seed(7, 2));
  CHECK(derive_seed(7, 1, 0) != derive_seed(7, 1, 1));
  CHECK(derive_seed(7, 1, 0) == derive_seed(derive_seed(7, 1), 0));
}

TEST_CASE("rng uniform and uniform_int stay in range") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const auto k = rng.uniform_int(7);
    CHECK(k >= 0);
    CHECK(k < 7);
    const auto r = rng.uniform_int(3, 5);
    CHECK(r >= 3);
    CHECK(r <= 5);
  }
  CHECK_THROWS_AS((void)rng.uniform_int(0), Error);
}

TEST_CASE("rng permutation is a permutation") {
  Rng rng(11);
  const auto p = rng.permutation(50);
  std::set<std::size_t> seen(p.begin(), p.end());
  CHECK(seen.size() == 50);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 49);
}

TEST_CASE("tensor4 layout: planes are column-major blocks per sample") {
  Tensor4<float> t(2, 3, 4, 5);
  t.at(1, 2, 3, 4) = 7.0f;
  // channel 2 plane of sample 1, entry (3,4) = offset 2*20 + 4*4 + 3.
  CHECK(t.mat()(2 * 20 + 4 * 4 + 3, 1) == 7.0f);
  CHECK(t.plane(1, 2)(3, 4) == 7.0f);
  CHECK(t.plane_size() == 20);
  CHECK(t.size() == 2 * 3 * 4 * 5);
}

TEST_CASE("relu and relu_backward gate on the pre-activation sign") {
  Tensor4<float> pre(1, 1, 2, 2);
  pre.at(0, 0, 0, 0) = -1.0f;
  pre.at(0, 0, 0, 1) = 2.0f;
  pre.at(0, 0, 1, 0) = 0.0f;
  pre.at(0, 0, 1, 1) = -0.5f;
  const auto y = relu(pre);
  CHECK(y.at(0, 0, 0, 0) == 0.0f);
  CHECK(y.at(0, 0, 0, 1) == 2.0f);

  Tensor4<float> g(1, 1, 2, 2);
  g.mat().setConstant(3.0f);
  const auto dx = relu_backward(g, pre);
  CHECK(dx.at(0, 0, 0, 0) == 0.0f);
  CHECK(dx.at(0, 0, 0, 1) == 3.0f);
  CHECK(dx.at(0, 0, 1, 0) == 0.0f);  // relu'(0) = 0 (strict >)
  CHECK(dx.at(0, 0, 1, 1) == 0.0f);
}

TEST_CASE("bilinear_resize: identity at same size, exact on linear ramps") {
  MatX<double> p(3, 3);
  p << 0, 1, 2, 3, 4, 5, 6, 7, 8;
  const MatX<double> same = bilinear_resize(p, 3, 3);
  CHECK((same - p).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // A constant image stays constant under any scale.
  MatX<double> c = MatX<double>::Constant(4, 4, 2.5);
  const MatX<double> up = bilinear_resize(c, 9, 5);
  CHECK(up.minCoeff() == doctest::Approx(2.5));
  CHECK(up.maxCoeff() == doctest::Approx(2.5));

  // Half-pixel convention: 2x upsample of [0,1] rows gives 0,0.25,0.75,1
  // after clamping at the borders.
  MatX<double> ramp(1, 2);
  ramp << 0, 1;
  const MatX<double> r2 = bilinear_resize(ramp, 1, 4);
  CHECK(r2(0, 0) == doctest::Approx(0.0));
  CHECK(r2(0, 1) == doctest::Approx(0.25));
  CHECK(r2(0, 2) == doctest::Approx(0.75));
  CHECK(r2(0, 3) == doctest::Approx(1.0));
}

TEST_CASE("nearest_resize keeps masks binary and center_crop is centered") {
  Mask m(2, 2);
  m << 1, 0, 0, 1;
  const Mask big = nearest_resize(m, 4, 4);
  for (Eigen::Index y = 0; y < 4; ++y)
    for (Eigen::Index x = 0; x < 4; ++x)
      CHECK((big(y, x) == 0 || big(y, x) == 1));
  CHECK(big(0, 0) == 1);
  CHECK(big(3, 3) == 1);
  CHECK(big(0, 3) == 0);

  const auto [y0, x0] = center_crop_origin(10, 8, 4, 4);
  CHECK(y0 == 3);
  CHECK(x0 == 2);
  CHECK_THROWS_AS(center_crop_origin(3, 3, 4, 4), Error);
}

TEST_CASE("error kinds are preserved through fail and MLCAM_CHECK") {
  try {
    fail(ErrorKind::Format, "bad bytes");
    FAIL("unreachable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
    CHECK(std::string(e.what()) == "bad bytes");
  }
  try {
    MLCAM_CHECK(false, Lookup, "missing");
    FAIL("unreachable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Lookup);
  }
}

TEST_SUITE_END();
