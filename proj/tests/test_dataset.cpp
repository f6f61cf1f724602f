#include <doctest.h>

#include <cmath>
#include <set>

#include "mlcam/dataset/normalize.hpp"
#include "mlcam/dataset/synthetic.hpp"

using namespace mlcam;

namespace {

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.n_categories = 12;
  spec.samples_per_category = 3;
  spec.image_size = 32;
  spec.seed = 9;
  return spec;
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("generator is a pure function of the spec") {
  const auto a = generate_synthetic<float>(small_spec());
  const auto b = generate_synthetic<float>(small_spec());
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.category_names == b.category_names);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(a.samples[i].labels == b.samples[i].labels);
    for (int c = 0; c < 3; ++c)
      CHECK(a.samples[i].image.ch[c] == b.samples[i].image.ch[c]);
    REQUIRE(a.samples[i].masks.size() == b.samples[i].masks.size());
    for (const auto& [cat, mask] : a.samples[i].masks)
      CHECK((mask == b.samples[i].masks.at(cat)).all());
  }

  SyntheticSpec other = small_spec();
  other.seed = 10;
  const auto c = generate_synthetic<float>(other);
  bool any_differs = false;
  for (std::size_t i = 0; i < a.samples.size() && !any_differs; ++i)
    any_differs = !(a.samples[i].image.ch[0] == c.samples[i].image.ch[0]);
  CHECK(any_differs);
}

TEST_CASE("pixels are 8-bit quantized and in range") {
  const auto ds = generate_synthetic<double>(small_spec());
  for (const auto& s : ds.samples)
    for (int c = 0; c < 3; ++c)
      for (Eigen::Index x = 0; x < s.width(); ++x)
        for (Eigen::Index y = 0; y < s.height(); ++y) {
          const double v = s.image.ch[c](y, x);
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
          const double steps = v * 255.0;
          CHECK(std::abs(steps - std::round(steps)) < 1e-9);
        }
}

TEST_CASE("labels and masks agree") {
  const auto ds = generate_synthetic<float>(small_spec());
  CHECK(ds.n_categories() == 12);
  for (const auto& s : ds.samples) {
    REQUIRE(s.labels.size() == 12);
    for (std::size_t c = 0; c < 12; ++c) {
      const auto it = s.masks.find(static_cast<int>(c));
      if (s.labels[c]) {
        REQUIRE(it != s.masks.end());
        CHECK((it->second != 0).any());
        CHECK(it->second.rows() == s.height());
        CHECK(it->second.cols() == s.width());
      } else {
        CHECK(it == s.masks.end());
      }
    }
    // Sample ids encode the seeding category; at least one label is set
    // (total occlusion of every object is impossible: the last-drawn object
    // always keeps its pixels).
    bool any = false;
    for (const auto v : s.labels) any = any || v != 0;
    CHECK(any);
  }
}

TEST_CASE("default descriptors give unique hue-shape-shade names") {
  const auto ds = generate_synthetic<float>(small_spec());
  std::set<std::string> names(ds.category_names.begin(), ds.category_names.end());
  CHECK(names.size() == 12);
  // Triples share hue+shape, differ in shade.
  CHECK(ds.category_names[0].starts_with("red-disk-"));
  CHECK(ds.category_names[3].starts_with("green-square-"));
  CHECK(ds.category_names[11] == "yellow-ring-dark");
}

TEST_CASE("normalize: identity geometry leaves pixels untouched") {
  const auto ds = generate_synthetic<float>(small_spec());
  NormalizationSpec spec;
  spec.target_short_side = 32;
  spec.crop_size = 32;
  const auto out = normalize(ds, spec);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(out.samples[i].image.ch[0] == ds.samples[i].image.ch[0]);
    for (const auto& [cat, mask] : ds.samples[i].masks)
      CHECK((out.samples[i].masks.at(cat) == mask).all());
  }
}

TEST_CASE("normalize: resize + center crop geometry") {
  // 64x48 image, short side -> 32 gives 43x32, then a centered 32x32 crop.
  ImageSample<float> s;
  s.id = "x";
  s.image = Image<float>(64, 48);
  s.image.ch[0].setConstant(0.25f);
  s.labels = {1};
  Mask m = Mask::Zero(64, 48);
  m.block(20, 10, 10, 10).setConstant(1);
  s.masks.emplace(0, m);

  NormalizationSpec spec;
  spec.target_short_side = 32;
  spec.crop_size = 32;
  const auto out = normalize(s, spec);
  CHECK(out.height() == 32);
  CHECK(out.width() == 32);
  CHECK(out.image.ch[0](0, 0) == doctest::Approx(0.25f));
  const Mask& rm = out.masks.at(0);
  CHECK(rm.rows() == 32);
  CHECK(rm.cols() == 32);
  CHECK((rm != 0).any());
  for (Eigen::Index y = 0; y < rm.rows(); ++y)
    for (Eigen::Index x = 0; x < rm.cols(); ++x)
      CHECK((rm(y, x) == 0 || rm(y, x) == 1));
  CHECK_THROWS_AS(normalize(s, NormalizationSpec{16, 32}), Error);
}

TEST_CASE("spec validation rejects degenerate configs") {
  SyntheticSpec bad = small_spec();
  bad.n_categories = 0;
  CHECK_THROWS_AS((void)generate_synthetic<float>(bad), Error);
  bad = small_spec();
  bad.image_size = 4;
  CHECK_THROWS_AS((void)generate_synthetic<float>(bad), Error);
  bad = small_spec();
  bad.objects_per_image_range = {2, 1};
  CHECK_THROWS_AS((void)generate_synthetic<float>(bad), Error);
}

TEST_SUITE_END();
