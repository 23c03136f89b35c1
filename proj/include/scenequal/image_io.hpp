#pragma once

#include <filesystem>

#include "scenequal/image.hpp"

namespace scenequal {

struct ImageHeader {
  int height = 0;
  int width = 0;
};

bool is_jpeg_path(const std::filesystem::path& path);
bool is_image_path(const std::filesystem::path& path);

// Reads only the dimensions. Throws Error naming the file when undecodable.
ImageHeader read_image_header(const std::filesystem::path& path);

// Decodes PNG or JPEG to RGB and normalizes 8-bit samples by 1/255.
Image read_image(const std::filesystem::path& path);

// Writes an 8-bit RGB PNG; values are clamped and rounded to the nearest level.
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace scenequal
