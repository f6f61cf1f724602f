#include <png.h>

#include <cstdio>
#include <memory>

#include "mlcam/io/codecs.hpp"

namespace mlcam::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

RawImage decode_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  MLCAM_CHECK(file != nullptr, Io, "cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  MLCAM_CHECK(png != nullptr, Io, "png reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::Io, "png info allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Format, "png decode failed for " + path);
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  // Normalise everything to 8-bit gray or RGB.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_byte updated = png_get_color_type(png, info);
  const int channels = updated == PNG_COLOR_TYPE_GRAY ? 1 : 3;

  RawImage raw;
  raw.width = static_cast<int>(width);
  raw.height = static_cast<int>(height);
  raw.channels = channels;
  raw.pixels.resize(static_cast<std::size_t>(width) * height * channels);

  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y)
    rows[y] = raw.pixels.data() + static_cast<std::size_t>(y) * width * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void encode_png(const std::string& path, const RawImage& image) {
  MLCAM_CHECK(image.channels == 1 || image.channels == 3, Contract,
              "png encode expects 1 or 3 channels");
  MLCAM_CHECK(image.width > 0 && image.height > 0, Contract,
              "png encode expects a non-empty image");
  MLCAM_CHECK(image.pixels.size() ==
                  static_cast<std::size_t>(image.width) * image.height * image.channels,
              Contract, "png encode: pixel buffer size mismatch");

  FilePtr file(std::fopen(path.c_str(), "wb"));
  MLCAM_CHECK(file != nullptr, Io, "cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  MLCAM_CHECK(png != nullptr, Io, "png writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::Io, "png info allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "png encode failed for " + path);
  }

  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y)
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
        image.pixels.data() + static_cast<std::size_t>(y) * image.width * image.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace mlcam::io
