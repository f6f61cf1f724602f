#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mlcam/core/image.hpp"
#include "mlcam/core/tensor.hpp"

namespace mlcam {

// One image with its multi-hot labels and (optionally) per-category
// ground-truth masks. Masks are keyed by category index and cover exactly the
// visible pixels of that category's objects.
template <typename S>
struct ImageSample {
  std::string id;
  Image<S> image;                 // values in [0,1]
  std::vector<std::uint8_t> labels;  // multi-hot, length n_categories
  std::map<int, Mask> masks;

  Eigen::Index height() const { return image.h(); }
  Eigen::Index width() const { return image.w(); }
};

template <typename S>
struct Dataset {
  std::vector<std::string> category_names;
  std::vector<ImageSample<S>> samples;

  int n_categories() const { return static_cast<int>(category_names.size()); }
};

// What a synthetic category looks like. Categories sharing shape_kind and
// color_family form visually coherent groups; texture_kind (the marker shade)
// distinguishes members within a group.
struct CategoryDescriptor {
  int shape_kind = 0;    // body outline: disk, square, triangle, ring
  int texture_kind = 0;  // marker shade: pale, vivid, dark
  int color_family = 0;  // hue family: red, green, blue, yellow
};

struct SyntheticSpec {
  int n_categories = 12;
  std::vector<CategoryDescriptor> category_descriptors;  // empty = default grid
  int samples_per_category = 150;
  int image_size = 32;
  std::pair<int, int> objects_per_image_range = {1, 2};
  std::uint64_t seed = 0;
};

// Default descriptor layout: texture cycles fastest, shape/color advance
// together every 3 categories, so consecutive triples share a hue family and
// a body shape.
inline std::vector<CategoryDescriptor> default_descriptors(int n_categories) {
  std::vector<CategoryDescriptor> d(static_cast<std::size_t>(n_categories));
  for (int i = 0; i < n_categories; ++i) {
    d[static_cast<std::size_t>(i)] = {.shape_kind = (i / 3) % 4,
                                      .texture_kind = i % 3,
                                      .color_family = (i / 3) % 4};
  }
  return d;
}

struct NormalizationSpec {
  int target_short_side = 224;
  int crop_size = 224;
};

}  // namespace mlcam
