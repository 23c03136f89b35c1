#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "scenequal/checkpoint.hpp"

namespace scenequal::detail {

TensorRecord to_record(const std::string& name, const torch::Tensor& t);
torch::Tensor to_tensor(const TensorRecord& record);

// Model parameters and buffers as "model.<canonical name>" records.
std::vector<TensorRecord> module_records(const torch::nn::Module& module);

// Copies "model.*" records into the module; names and shapes must match exactly.
void load_module(torch::nn::Module& module, const CheckpointData& data);

}  // namespace scenequal::detail
