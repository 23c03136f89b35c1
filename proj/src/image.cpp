#include "scenequal/image.hpp"

#include <algorithm>
#include <string>

#include "scenequal/error.hpp"

namespace scenequal {

std::string_view to_string(Orientation o) {
  switch (o) {
    case Orientation::identity: return "identity";
    case Orientation::rot90: return "rot90";
    case Orientation::rot180: return "rot180";
    case Orientation::rot270: return "rot270";
    case Orientation::hflip: return "hflip";
    case Orientation::vflip: return "vflip";
  }
  return "identity";
}

Orientation orientation_from_string(std::string_view name) {
  for (Orientation o : kOrientations) {
    if (to_string(o) == name) return o;
  }
  throw FormatError("unknown orientation '" + std::string(name) + "'");
}

Image crop(const Image& image, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > image.height ||
      left + width > image.width) {
    throw Error("crop (" + std::to_string(top) + "," + std::to_string(left) + "," +
                std::to_string(height) + "," + std::to_string(width) +
                ") outside a " + std::to_string(image.height) + "x" +
                std::to_string(image.width) + " view");
  }
  Image out(height, width);
  for (int y = 0; y < height; ++y) {
    const float* src = &image.pixels[(static_cast<std::size_t>(top + y) * image.width + left) * 3];
    std::copy(src, src + static_cast<std::size_t>(width) * 3,
              &out.pixels[static_cast<std::size_t>(y) * width * 3]);
  }
  return out;
}

Image orient(const Image& image, Orientation o) {
  const int h = image.height;
  const int w = image.width;
  const bool swap = o == Orientation::rot90 || o == Orientation::rot270;
  Image out(swap ? w : h, swap ? h : w);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      int sy = y;
      int sx = x;
      switch (o) {
        case Orientation::identity: break;
        case Orientation::rot90: sy = x; sx = w - 1 - y; break;
        case Orientation::rot180: sy = h - 1 - y; sx = w - 1 - x; break;
        case Orientation::rot270: sy = h - 1 - x; sx = y; break;
        case Orientation::hflip: sx = w - 1 - x; break;
        case Orientation::vflip: sy = h - 1 - y; break;
      }
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

void clamp_unit(Image& image) {
  for (float& v : image.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace scenequal
