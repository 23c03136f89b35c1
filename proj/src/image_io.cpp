#include "scenequal/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include <jpeglib.h>

#include "scenequal/error.hpp"

namespace scenequal {
namespace {

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Decodes a JPEG; when header_only is set the pixel buffer is left empty.
Image decode_jpeg(const std::filesystem::path& path, bool header_only) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error("cannot open image " + path.string());

  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  Image image;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error("cannot decode JPEG " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  image.height = static_cast<int>(cinfo.image_height);
  image.width = static_cast<int>(cinfo.image_width);
  if (!header_only) {
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    std::vector<unsigned char> row(static_cast<std::size_t>(cinfo.output_width) * 3);
    image.pixels.resize(static_cast<std::size_t>(image.height) * image.width * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
      const auto y = cinfo.output_scanline;
      unsigned char* rows[1] = {row.data()};
      jpeg_read_scanlines(&cinfo, rows, 1);
      for (std::size_t i = 0; i < row.size(); ++i) {
        image.pixels[static_cast<std::size_t>(y) * row.size() + i] = row[i] / 255.0f;
      }
    }
    jpeg_finish_decompress(&cinfo);
  }
  jpeg_destroy_decompress(&cinfo);
  return image;
}

Image decode_png(const std::filesystem::path& path, bool header_only) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw Error("cannot decode PNG " + path.string() + ": " + png.message);
  }
  Image image;
  image.height = static_cast<int>(png.height);
  image.width = static_cast<int>(png.width);
  if (header_only) {
    png_image_free(&png);
    return image;
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    throw Error("cannot decode PNG " + path.string() + ": " + png.message);
  }
  image.pixels.resize(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) image.pixels[i] = buffer[i] / 255.0f;
  return image;
}

}  // namespace

bool is_jpeg_path(const std::filesystem::path& path) {
  const auto ext = lower_ext(path);
  return ext == ".jpg" || ext == ".jpeg";
}

bool is_image_path(const std::filesystem::path& path) {
  return lower_ext(path) == ".png" || is_jpeg_path(path);
}

ImageHeader read_image_header(const std::filesystem::path& path) {
  const Image image = is_jpeg_path(path) ? decode_jpeg(path, true) : decode_png(path, true);
  return {image.height, image.width};
}

Image read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("image not found: " + path.string());
  return is_jpeg_path(path) ? decode_jpeg(path, false) : decode_png(path, false);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<png_byte> buffer(image.pixels.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const float v = std::clamp(image.pixels[i], 0.0f, 1.0f);
    buffer[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw Error("cannot write PNG " + path.string() + ": " + png.message);
  }
}

}  // namespace scenequal
