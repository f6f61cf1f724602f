#pragma once

#include <utility>

#include "mlcam/dataset/types.hpp"

namespace mlcam {

// Paper-style input normalization: scale so the short side hits
// target_short_side (bilinear), then take the centered crop_size square.
// Masks follow the same geometry with nearest-neighbor sampling so they stay
// binary. Labels are untouched.
template <typename S>
ImageSample<S> normalize(const ImageSample<S>& sample, const NormalizationSpec& spec) {
  MLCAM_CHECK(spec.crop_size >= 1 && spec.target_short_side >= spec.crop_size,
              Config, "normalize: crop_size must be in [1, target_short_side]");
  const Eigen::Index h = sample.height(), w = sample.width();
  MLCAM_CHECK(h >= 1 && w >= 1, Format, "normalize: empty image");

  const double scale = static_cast<double>(spec.target_short_side) /
                       static_cast<double>(std::min(h, w));
  // Round the long side; the short side lands exactly on target_short_side.
  Eigen::Index nh, nw;
  if (h <= w) {
    nh = spec.target_short_side;
    nw = std::max<Eigen::Index>(
        spec.crop_size,
        static_cast<Eigen::Index>(std::llround(static_cast<double>(w) * scale)));
  } else {
    nw = spec.target_short_side;
    nh = std::max<Eigen::Index>(
        spec.crop_size,
        static_cast<Eigen::Index>(std::llround(static_cast<double>(h) * scale)));
  }

  ImageSample<S> out;
  out.id = sample.id;
  out.labels = sample.labels;

  Image<S> resized = (nh == h && nw == w) ? sample.image
                                          : resize_image(sample.image, nh, nw);
  auto [y0, x0] = center_crop_origin(nh, nw, spec.crop_size, spec.crop_size);
  out.image = crop_image(resized, y0, x0, spec.crop_size, spec.crop_size);

  for (const auto& [cat, mask] : sample.masks) {
    Mask rm = (nh == h && nw == w) ? mask : nearest_resize(mask, nh, nw);
    out.masks.emplace(cat,
                      Mask(rm.block(y0, x0, spec.crop_size, spec.crop_size)));
  }
  return out;
}

template <typename S>
Dataset<S> normalize(const Dataset<S>& ds, const NormalizationSpec& spec) {
  Dataset<S> out;
  out.category_names = ds.category_names;
  out.samples.reserve(ds.samples.size());
  for (const auto& s : ds.samples) out.samples.push_back(normalize(s, spec));
  return out;
}

}  // namespace mlcam
