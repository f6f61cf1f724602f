#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "mlcam/core/tensor.hpp"

namespace mlcam {

// RGB raster with one h×w plane per channel, values in [0,1].
template <typename S>
struct Image {
  std::array<MatX<S>, 3> ch;

  Image() = default;
  Image(Eigen::Index h, Eigen::Index w) {
    for (auto& p : ch) p = MatX<S>::Zero(h, w);
  }
  Eigen::Index h() const { return ch[0].rows(); }
  Eigen::Index w() const { return ch[0].cols(); }
};

// Sample a plane bilinearly at fractional (y, x), clamped to the border.
template <typename S>
S bilinear_at(const MatX<S>& p, double y, double x) {
  const auto h = p.rows(), w = p.cols();
  double yc = std::clamp(y, 0.0, static_cast<double>(h - 1));
  double xc = std::clamp(x, 0.0, static_cast<double>(w - 1));
  Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(yc));
  Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(xc));
  Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, h - 1);
  Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, w - 1);
  double fy = yc - static_cast<double>(y0);
  double fx = xc - static_cast<double>(x0);
  double v = static_cast<double>(p(y0, x0)) * (1 - fy) * (1 - fx) +
             static_cast<double>(p(y1, x0)) * fy * (1 - fx) +
             static_cast<double>(p(y0, x1)) * (1 - fy) * fx +
             static_cast<double>(p(y1, x1)) * fy * fx;
  return static_cast<S>(v);
}

// Bilinear resize with half-pixel centers (the common align_corners=false
// convention): src = (dst + 0.5) * scale - 0.5.
template <typename S>
MatX<S> bilinear_resize(const MatX<S>& p, Eigen::Index out_h, Eigen::Index out_w) {
  MLCAM_CHECK(p.rows() >= 1 && p.cols() >= 1, Format, "resize: empty image");
  MLCAM_CHECK(out_h >= 1 && out_w >= 1, Contract, "resize: empty target");
  const double sy = static_cast<double>(p.rows()) / static_cast<double>(out_h);
  const double sx = static_cast<double>(p.cols()) / static_cast<double>(out_w);
  MatX<S> out(out_h, out_w);
  for (Eigen::Index x = 0; x < out_w; ++x) {
    double xs = (static_cast<double>(x) + 0.5) * sx - 0.5;
    for (Eigen::Index y = 0; y < out_h; ++y) {
      double ys = (static_cast<double>(y) + 0.5) * sy - 0.5;
      out(y, x) = bilinear_at(p, ys, xs);
    }
  }
  return out;
}

// Nearest-neighbor resize with the same half-pixel geometry; keeps binary
// grids binary.
inline Mask nearest_resize(const Mask& m, Eigen::Index out_h, Eigen::Index out_w) {
  MLCAM_CHECK(m.rows() >= 1 && m.cols() >= 1, Format, "resize: empty mask");
  const double sy = static_cast<double>(m.rows()) / static_cast<double>(out_h);
  const double sx = static_cast<double>(m.cols()) / static_cast<double>(out_w);
  Mask out(out_h, out_w);
  for (Eigen::Index x = 0; x < out_w; ++x) {
    auto xs = static_cast<Eigen::Index>(std::floor((static_cast<double>(x) + 0.5) * sx));
    xs = std::clamp<Eigen::Index>(xs, 0, m.cols() - 1);
    for (Eigen::Index y = 0; y < out_h; ++y) {
      auto ys = static_cast<Eigen::Index>(std::floor((static_cast<double>(y) + 0.5) * sy));
      ys = std::clamp<Eigen::Index>(ys, 0, m.rows() - 1);
      out(y, x) = m(ys, xs);
    }
  }
  return out;
}

// Top-left corner of a centered crop_h×crop_w window inside h×w.
inline std::pair<Eigen::Index, Eigen::Index> center_crop_origin(
    Eigen::Index h, Eigen::Index w, Eigen::Index crop_h, Eigen::Index crop_w) {
  MLCAM_CHECK(crop_h <= h && crop_w <= w, Contract, "crop larger than image");
  return {(h - crop_h) / 2, (w - crop_w) / 2};
}

template <typename S>
Image<S> resize_image(const Image<S>& img, Eigen::Index out_h, Eigen::Index out_w) {
  Image<S> out;
  for (int c = 0; c < 3; ++c) out.ch[c] = bilinear_resize(img.ch[c], out_h, out_w);
  return out;
}

template <typename S>
Image<S> crop_image(const Image<S>& img, Eigen::Index y0, Eigen::Index x0,
                    Eigen::Index ch_, Eigen::Index cw_) {
  Image<S> out;
  for (int c = 0; c < 3; ++c) out.ch[c] = img.ch[c].block(y0, x0, ch_, cw_);
  return out;
}

}  // namespace mlcam
