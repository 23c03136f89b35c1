#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "scenequal/backbone_config.hpp"
#include "scenequal/branch.hpp"
#include "scenequal/image.hpp"

namespace scenequal {

// Residual block: x + conv(gelu(conv(gelu(x)))), 3x3 convolutions.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

// Per-view multi-scale extractor. Four residual stages (stride-2 between
// stages); each stage output is refined by a 1x1 convolution and globally
// average-pooled, and the concatenated descriptors are mapped to one token.
class ViewwiseExtractorImpl : public torch::nn::Module {
 public:
  explicit ViewwiseExtractorImpl(const BackboneConfig& config);
  // [N, 3, H, W] -> [N, D]
  torch::Tensor forward(const torch::Tensor& views);

 private:
  torch::nn::ModuleList downsample_;
  torch::nn::ModuleList blocks_;
  torch::nn::ModuleList refine_;
  torch::nn::Linear token_{nullptr};
  torch::nn::LayerNorm token_norm_{nullptr};
};
TORCH_MODULE(ViewwiseExtractor);

// Pre-norm transformer encoder layer.
class EncoderLayerImpl : public torch::nn::Module {
 public:
  EncoderLayerImpl(int dim, int heads, int ff_dim);
  // [B, V, D] -> [B, V, D]
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int heads_;
  torch::nn::LayerNorm norm1_{nullptr};
  torch::nn::Linear qkv_{nullptr};
  torch::nn::Linear out_{nullptr};
  torch::nn::LayerNorm norm2_{nullptr};
  torch::nn::Linear ff1_{nullptr};
  torch::nn::Linear ff2_{nullptr};
};
TORCH_MODULE(EncoderLayer);

// Sinusoidal positions + encoder layers + mean over views + LayerNorm.
class AnglewiseFusionImpl : public torch::nn::Module {
 public:
  explicit AnglewiseFusionImpl(const BackboneConfig& config);
  // [B, V, D] -> [B, D]
  torch::Tensor forward(const torch::Tensor& tokens);

 private:
  int max_views_;
  torch::Tensor positions_;
  torch::nn::ModuleList layers_;
  torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(AnglewiseFusion);

class ProjectionHeadImpl : public torch::nn::Module {
 public:
  ProjectionHeadImpl(int in, int hidden, int out);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Linear fc1_{nullptr};
  torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(ProjectionHead);

class SceneNetImpl : public torch::nn::Module {
 public:
  explicit SceneNetImpl(const BackboneConfig& config);

  // Clips [B, V, 3, H, W] -> representations [B, D].
  torch::Tensor represent(const torch::Tensor& clips);
  // Representations [B, D] -> branch projections [B, projector_out].
  torch::Tensor project(const torch::Tensor& repr, Branch branch);

  ViewwiseExtractor& extractor() { return extractor_; }
  AnglewiseFusion& fusion() { return fusion_; }
  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  ViewwiseExtractor extractor_{nullptr};
  AnglewiseFusion fusion_{nullptr};
  ProjectionHead heads_[kBranchCount] = {nullptr, nullptr, nullptr};
};
TORCH_MODULE(SceneNet);

// Builds a network with weights drawn from the given seed.
SceneNet make_scene_net(const BackboneConfig& config, std::uint64_t seed);

// [V, 3, H, W] float tensor from a clip.
torch::Tensor clip_to_tensor(const Clip& clip);
torch::Tensor image_to_tensor(const Image& image);

torch::Tensor sinusoidal_positions(int max_views, int dim);

// Exact trainable-parameter count for a configuration.
std::int64_t parameter_count(const BackboneConfig& config);
std::int64_t parameter_count(torch::nn::Module& module);

}  // namespace scenequal
