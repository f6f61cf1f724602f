#include <cstdio>
#include <csetjmp>
#include <memory>

#include <jpeglib.h>

#include "mlcam/io/codecs.hpp"

namespace mlcam::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct JpegErrorTrap {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* trap = reinterpret_cast<JpegErrorTrap*>(cinfo->err);
  std::longjmp(trap->jump, 1);
}

}  // namespace

RawImage decode_jpeg(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  MLCAM_CHECK(file != nullptr, Io, "cannot open " + path);

  jpeg_decompress_struct cinfo;
  JpegErrorTrap trap;
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = jpeg_error_exit;
  if (setjmp(trap.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorKind::Format, "jpeg decode failed for " + path);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  RawImage raw;
  raw.width = static_cast<int>(cinfo.output_width);
  raw.height = static_cast<int>(cinfo.output_height);
  raw.channels = static_cast<int>(cinfo.output_components);
  MLCAM_CHECK(raw.channels == 1 || raw.channels == 3, Format,
              "unsupported jpeg channel count in " + path);
  raw.pixels.resize(static_cast<std::size_t>(raw.width) * raw.height * raw.channels);

  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = raw.pixels.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) * raw.width * raw.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return raw;
}

RawImage decode_image(const std::string& path) {
  const auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "png") return decode_png(path);
  if (ext == "jpg" || ext == "jpeg") return decode_jpeg(path);
  fail(ErrorKind::Format, "unsupported image extension: " + path);
}

}  // namespace mlcam::io
