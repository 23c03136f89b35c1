#include "scenequal/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scenequal/error.hpp"
#include "scenequal/rng.hpp"

namespace scenequal {
namespace {

constexpr int kBlockSize = 8;

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

Image blockiness(const Image& image, double weight) {
  Image out = image;
  for (int by = 0; by < image.height; by += kBlockSize) {
    for (int bx = 0; bx < image.width; bx += kBlockSize) {
      const int ey = std::min(by + kBlockSize, image.height);
      const int ex = std::min(bx + kBlockSize, image.width);
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) sum += image.at(y, x, c);
        const double mean = sum / ((ey - by) * (ex - bx));
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) {
            out.at(y, x, c) = static_cast<float>((1.0 - weight) * image.at(y, x, c) + weight * mean);
          }
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(DistortionKind kind) {
  switch (kind) {
    case DistortionKind::none: return "none";
    case DistortionKind::gaussian_blur: return "gaussian_blur";
    case DistortionKind::gaussian_noise: return "gaussian_noise";
    case DistortionKind::jpeg_like_blockiness: return "jpeg_like_blockiness";
    case DistortionKind::brightness_shift: return "brightness_shift";
  }
  return "none";
}

DistortionKind distortion_kind_from_string(std::string_view name) {
  if (name == "none") return DistortionKind::none;
  for (DistortionKind k : kDistortionKinds) {
    if (to_string(k) == name) return k;
  }
  throw FormatError("unknown distortion kind '" + std::string(name) + "'");
}

double severity_parameter(DistortionKind kind, int severity) {
  if (kind != DistortionKind::none && (severity < 1 || severity > kMaxSeverity)) {
    throw Error("distortion severity must be in 1..5, got " + std::to_string(severity));
  }
  switch (kind) {
    case DistortionKind::none: return 0.0;
    case DistortionKind::gaussian_blur: return 0.5 * severity;
    case DistortionKind::gaussian_noise: return 0.02 * severity;
    case DistortionKind::jpeg_like_blockiness: return 0.2 * severity;
    case DistortionKind::brightness_shift: return 0.06 * severity;
  }
  return 0.0;
}

Image gaussian_blur(const Image& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  Image tmp(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * image.at(y, reflect(x + k, image.width), c);
        }
        tmp.at(y, x, c) = static_cast<float>(acc);
      }
  Image out(image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * tmp.at(reflect(y + k, image.height), x, c);
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

Image apply_distortion(const Image& image, const DistortionSpec& spec, std::uint64_t stream) {
  const double p = severity_parameter(spec.kind, spec.severity);
  Image out;
  switch (spec.kind) {
    case DistortionKind::none:
      return image;
    case DistortionKind::gaussian_blur:
      out = gaussian_blur(image, p);
      break;
    case DistortionKind::gaussian_noise: {
      out = image;
      Rng rng(mix_seed(spec.seed, stream));
      for (float& v : out.pixels) v = static_cast<float>(v + p * rng.normal());
      break;
    }
    case DistortionKind::jpeg_like_blockiness:
      out = blockiness(image, p);
      break;
    case DistortionKind::brightness_shift:
      out = image;
      for (float& v : out.pixels) v = static_cast<float>(v + p);
      break;
  }
  clamp_unit(out);
  return out;
}

}  // namespace scenequal
