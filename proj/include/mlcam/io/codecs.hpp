#pragma once

// 8-bit image decode/encode.  PNG and JPEG readers plus a PNG writer; the
// heavy lifting lives in src/codec_*.cpp so libpng/libjpeg stay out of the
// template headers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mlcam/core/error.hpp"
#include "mlcam/core/image.hpp"
#include "mlcam/core/tensor.hpp"

namespace mlcam::io {

// Interleaved row-major pixels, `channels` is 1 (gray) or 3 (RGB).
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  std::uint8_t& at(int y, int x, int c) {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
};

RawImage decode_png(const std::string& path);
RawImage decode_jpeg(const std::string& path);
void encode_png(const std::string& path, const RawImage& image);

// Dispatches on file extension (.png, .jpg, .jpeg; case-insensitive).
RawImage decode_image(const std::string& path);

template <typename S>
Image<S> to_image(const RawImage& raw) {
  MLCAM_CHECK(raw.channels == 1 || raw.channels == 3, Format, "unsupported channel count");
  MLCAM_CHECK(raw.width > 0 && raw.height > 0, Format, "empty image");
  Image<S> img;
  for (int c = 0; c < 3; ++c) {
    img.ch[static_cast<std::size_t>(c)].resize(raw.height, raw.width);
    const int src_c = raw.channels == 3 ? c : 0;
    for (int y = 0; y < raw.height; ++y)
      for (int x = 0; x < raw.width; ++x)
        img.ch[static_cast<std::size_t>(c)](y, x) =
            static_cast<S>(raw.at(y, x, src_c)) / static_cast<S>(255);
  }
  return img;
}

template <typename S>
RawImage from_image(const Image<S>& img) {
  RawImage raw;
  raw.height = static_cast<int>(img.h());
  raw.width = static_cast<int>(img.w());
  raw.channels = 3;
  raw.pixels.resize(static_cast<std::size_t>(raw.height) * raw.width * 3);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v =
            std::clamp(static_cast<double>(img.ch[static_cast<std::size_t>(c)](y, x)), 0.0, 1.0);
        raw.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return raw;
}

inline Mask to_mask(const RawImage& raw) {
  Mask mask(raw.height, raw.width);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x) mask(y, x) = raw.at(y, x, 0) != 0 ? 1 : 0;
  return mask;
}

inline RawImage from_mask(const Mask& mask) {
  RawImage raw;
  raw.height = static_cast<int>(mask.rows());
  raw.width = static_cast<int>(mask.cols());
  raw.channels = 1;
  raw.pixels.resize(static_cast<std::size_t>(raw.height) * raw.width);
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x) raw.at(y, x, 0) = mask(y, x) != 0 ? 255 : 0;
  return raw;
}

}  // namespace mlcam::io
