#include "torch_state.hpp"

#include <set>

#include "scenequal/error.hpp"

namespace scenequal::detail {

TensorRecord to_record(const std::string& name, const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  TensorRecord r;
  r.name = name;
  r.shape.assign(c.sizes().begin(), c.sizes().end());
  r.data.assign(c.data_ptr<float>(), c.data_ptr<float>() + c.numel());
  return r;
}

torch::Tensor to_tensor(const TensorRecord& record) {
  return torch::from_blob(const_cast<float*>(record.data.data()), record.shape, torch::kFloat32).clone();
}

std::vector<TensorRecord> module_records(const torch::nn::Module& module) {
  std::vector<TensorRecord> out;
  for (const auto& p : module.named_parameters()) out.push_back(to_record("model." + p.key(), p.value()));
  for (const auto& b : module.named_buffers()) out.push_back(to_record("model." + b.key(), b.value()));
  return out;
}

void load_module(torch::nn::Module& module, const CheckpointData& data) {
  torch::NoGradGuard guard;
  std::set<std::string> expected;
  auto assign = [&](const std::string& key, torch::Tensor& target) {
    const std::string name = "model." + key;
    expected.insert(name);
    const auto* rec = data.find(name);
    if (!rec) throw FormatError("checkpoint is missing weight '" + name + "'");
    if (std::vector<std::int64_t>(target.sizes().begin(), target.sizes().end()) != rec->shape) {
      throw FormatError("checkpoint weight '" + name + "' has a different shape");
    }
    target.copy_(to_tensor(*rec));
  };
  for (auto& p : module.named_parameters()) assign(p.key(), p.value());
  for (auto& b : module.named_buffers()) assign(b.key(), b.value());
  for (const auto& t : data.tensors) {
    if (t.name.rfind("model.", 0) == 0 && !expected.count(t.name)) {
      throw FormatError("checkpoint has unexpected weight '" + t.name + "'");
    }
  }
}

}  // namespace scenequal::detail
