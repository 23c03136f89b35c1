#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace scenequal {

// Three-channel float image, row-major HWC, values nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width;
  }

  bool operator==(const Image&) const = default;
};

// An ordered run of same-size views.
using Clip = std::vector<Image>;

enum class Orientation { identity, rot90, rot180, rot270, hflip, vflip };

inline constexpr Orientation kOrientations[] = {
    Orientation::identity, Orientation::rot90, Orientation::rot180,
    Orientation::rot270,   Orientation::hflip, Orientation::vflip};

std::string_view to_string(Orientation o);
Orientation orientation_from_string(std::string_view name);

Image crop(const Image& image, int top, int left, int height, int width);

// Lossless rotation (counter-clockwise) or flip.
Image orient(const Image& image, Orientation o);

// Clamps every channel value into [0, 1].
void clamp_unit(Image& image);

}  // namespace scenequal
