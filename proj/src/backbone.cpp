#include "scenequal/backbone.hpp"

#include <cmath>
#include <string>

#include "scenequal/error.hpp"
#include "scenequal/scene_io.hpp"

namespace F = torch::nn::functional;

namespace scenequal {

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  conv1_ = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
  conv2_ = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  return x + conv2_->forward(F::gelu(conv1_->forward(F::gelu(x))));
}

ViewwiseExtractorImpl::ViewwiseExtractorImpl(const BackboneConfig& config) {
  int in = 3;
  int concat = 0;
  for (int c : config.stage_channels) {
    downsample_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, c, 3).stride(2).padding(1)));
    blocks_->push_back(ResidualBlock(c));
    refine_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c, 1)));
    concat += c;
    in = c;
  }
  register_module("downsample", downsample_);
  register_module("blocks", blocks_);
  register_module("refine", refine_);
  token_ = register_module("token", torch::nn::Linear(concat, config.repr_dim));
  // Pooled descriptors vary little between inputs; normalizing keeps them on
  // the same scale as the positional encoding.
  token_norm_ = register_module("token_norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config.repr_dim})));
}

torch::Tensor ViewwiseExtractorImpl::forward(const torch::Tensor& views) {
  if (views.dim() != 4 || views.size(1) != 3) throw Error("extractor expects [N, 3, H, W] input");
  if (views.size(2) < kMinViewSide || views.size(3) < kMinViewSide) {
    throw Error("view smaller than 16x16: " + std::to_string(views.size(2)) + "x" +
                std::to_string(views.size(3)));
  }
  std::vector<torch::Tensor> scales;
  torch::Tensor x = (views - 0.5) / 0.25;
  for (std::size_t s = 0; s < downsample_->size(); ++s) {
    x = downsample_[s]->as<torch::nn::Conv2d>()->forward(x);
    x = blocks_[s]->as<ResidualBlock>()->forward(x);
    torch::Tensor refined = F::gelu(refine_[s]->as<torch::nn::Conv2d>()->forward(x));
    scales.push_back(F::adaptive_avg_pool2d(refined, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1));
  }
  return token_norm_->forward(token_->forward(torch::cat(scales, 1)));
}

EncoderLayerImpl::EncoderLayerImpl(int dim, int heads, int ff_dim) : heads_(heads) {
  norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  qkv_ = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  out_ = register_module("out", torch::nn::Linear(dim, dim));
  norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  ff1_ = register_module("ff1", torch::nn::Linear(dim, ff_dim));
  ff2_ = register_module("ff2", torch::nn::Linear(ff_dim, dim));
}

torch::Tensor EncoderLayerImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0);
  const auto v = x.size(1);
  const auto d = x.size(2);
  const auto hd = d / heads_;
  // [B, V, 3D] -> 3 x [B, heads, V, hd]
  auto qkv = qkv_->forward(norm1_->forward(x)).view({b, v, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
  auto q = qkv[0];
  auto k = qkv[1];
  auto val = qkv[2];
  auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));
  auto attended = torch::matmul(torch::softmax(scores, -1), val);
  attended = attended.permute({0, 2, 1, 3}).reshape({b, v, d});
  auto h = x + out_->forward(attended);
  return h + ff2_->forward(F::gelu(ff1_->forward(norm2_->forward(h))));
}

torch::Tensor sinusoidal_positions(int max_views, int dim) {
  auto pe = torch::zeros({max_views, dim});
  for (int p = 0; p < max_views; ++p) {
    for (int i = 0; i < dim; i += 2) {
      const double angle = p / std::pow(10000.0, static_cast<double>(i) / dim);
      pe[p][i] = std::sin(angle);
      if (i + 1 < dim) pe[p][i + 1] = std::cos(angle);
    }
  }
  return pe;
}

AnglewiseFusionImpl::AnglewiseFusionImpl(const BackboneConfig& config) : max_views_(config.max_views) {
  positions_ = register_buffer("positions", sinusoidal_positions(config.max_views, config.repr_dim));
  for (int l = 0; l < config.transformer_layers; ++l) {
    layers_->push_back(EncoderLayer(config.repr_dim, config.attention_heads,
                                    config.ff_multiplier * config.repr_dim));
  }
  register_module("layers", layers_);
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config.repr_dim})));
}

torch::Tensor AnglewiseFusionImpl::forward(const torch::Tensor& tokens) {
  const auto v = tokens.size(1);
  if (v < 1) throw Error("fusion needs at least one view");
  if (v > max_views_) {
    throw Error("clip has " + std::to_string(v) + " views; max_views is " + std::to_string(max_views_));
  }
  auto x = tokens + positions_.slice(0, 0, v).unsqueeze(0);
  for (const auto& layer : *layers_) x = layer->as<EncoderLayer>()->forward(x);
  return norm_->forward(x.mean(1));
}

ProjectionHeadImpl::ProjectionHeadImpl(int in, int hidden, int out) {
  fc1_ = register_module("fc1", torch::nn::Linear(in, hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(hidden, out));
}

torch::Tensor ProjectionHeadImpl::forward(const torch::Tensor& x) {
  return fc2_->forward(F::gelu(fc1_->forward(x)));
}

SceneNetImpl::SceneNetImpl(const BackboneConfig& config) : config_(config) {
  config_.validate();
  extractor_ = register_module("extractor", ViewwiseExtractor(config_));
  fusion_ = register_module("fusion", AnglewiseFusion(config_));
  for (Branch b : kBranches) {
    heads_[index_of(b)] = register_module(
        "head_" + std::string(to_string(b)),
        ProjectionHead(config_.repr_dim, config_.projector_hidden, config_.projector_out));
  }
  // Default conv init shrinks the signal stage by stage until pooled
  // descriptors barely depend on the input.
  torch::NoGradGuard no_grad;
  for (const auto& m : modules(false)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
      torch::nn::init::zeros_(conv->bias);
    } else if (auto* linear = m->as<torch::nn::Linear>()) {
      torch::nn::init::zeros_(linear->bias);
    }
  }
}

torch::Tensor SceneNetImpl::represent(const torch::Tensor& clips) {
  if (clips.dim() != 5) throw Error("represent expects [B, V, 3, H, W] input");
  const auto b = clips.size(0);
  const auto v = clips.size(1);
  if (v > config_.max_views) {
    throw Error("clip has " + std::to_string(v) + " views; max_views is " +
                std::to_string(config_.max_views));
  }
  auto tokens = extractor_->forward(clips.flatten(0, 1)).view({b, v, config_.repr_dim});
  return fusion_->forward(tokens);
}

torch::Tensor SceneNetImpl::project(const torch::Tensor& repr, Branch branch) {
  const auto i = index_of(branch);
  if (i >= kBranchCount) throw KeyNotFound("unknown branch");
  return heads_[i]->forward(repr);
}

SceneNet make_scene_net(const BackboneConfig& config, std::uint64_t seed) {
  torch::manual_seed(seed);
  SceneNet net(config);
  return net;
}

torch::Tensor image_to_tensor(const Image& image) {
  auto t = torch::from_blob(const_cast<float*>(image.pixels.data()),
                            {image.height, image.width, 3}, torch::kFloat32);
  return t.permute({2, 0, 1}).contiguous();
}

torch::Tensor clip_to_tensor(const Clip& clip) {
  std::vector<torch::Tensor> views;
  views.reserve(clip.size());
  for (const auto& img : clip) views.push_back(image_to_tensor(img));
  return torch::stack(views);
}

std::int64_t parameter_count(torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) {
    if (p.requires_grad()) n += p.numel();
  }
  return n;
}

std::int64_t parameter_count(const BackboneConfig& config) {
  SceneNet net(config);
  return parameter_count(*net);
}

}  // namespace scenequal
