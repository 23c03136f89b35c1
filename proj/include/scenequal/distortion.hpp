#pragma once

#include <cstdint>
#include <string_view>

#include "scenequal/image.hpp"

namespace scenequal {

enum class DistortionKind { none, gaussian_blur, gaussian_noise, jpeg_like_blockiness, brightness_shift };

inline constexpr DistortionKind kDistortionKinds[] = {
    DistortionKind::gaussian_blur, DistortionKind::gaussian_noise,
    DistortionKind::jpeg_like_blockiness, DistortionKind::brightness_shift};

inline constexpr int kMaxSeverity = 5;

// Severity table (level in 1..5):
//   gaussian_blur          sigma        = 0.5  * level  (pixels)
//   gaussian_noise         std          = 0.02 * level
//   jpeg_like_blockiness   blend weight = 0.2  * level toward 8x8 block means
//   brightness_shift       offset       = 0.06 * level (added, then clamped)
struct DistortionSpec {
  DistortionKind kind = DistortionKind::none;
  int severity = 1;
  // Seeds the noise field of gaussian_noise; unused by the other kinds.
  std::uint64_t seed = 0;

  bool operator==(const DistortionSpec&) const = default;
};

std::string_view to_string(DistortionKind kind);
DistortionKind distortion_kind_from_string(std::string_view name);

double severity_parameter(DistortionKind kind, int severity);

// Applies the distortion to one view. `stream` distinguishes views sharing a
// spec so that noise fields are independent yet reproducible.
Image apply_distortion(const Image& image, const DistortionSpec& spec, std::uint64_t stream = 0);

Image gaussian_blur(const Image& image, double sigma);

}  // namespace scenequal
