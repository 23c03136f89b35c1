#pragma once

#include "scenequal/image.hpp"

namespace scenequal {

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Mean SSIM over the valid-window map, averaged across the three channels.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

}  // namespace scenequal
