#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <json.hpp>
#include <string>
#include <vector>

#include "estimate/tensor.hpp"

namespace estimate::ad {

/// Named, ordered set of trainable leaf tensors.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  std::size_t size() const { return tensors_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t scalar_count() const;

  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Initializers draw from a per-parameter stream derived from (seed, name), so
/// one parameter's values never depend on which other parameters exist.
std::uint64_t stream_seed(std::uint64_t seed, const std::string& name);
Tensor init_uniform_fan_in(const std::string& name, Shape shape, std::size_t fan_in, std::uint64_t seed);
Tensor init_normal(const std::string& name, Shape shape, double stddev, std::uint64_t seed);

// Checkpoint file, JSON, format "estimate-params" version 1:
//   {"format": "estimate-params", "version": 1, "meta": {...},
//    "params": [{"name": str, "shape": [int...], "values": [float...]}, ...]}
// Values are row-major; doubles are written in shortest round-trip form so a
// reload reproduces every bit.
inline constexpr int kCheckpointVersion = 1;

nlohmann::json parameters_to_json(const ParameterStore& store);
// Overwrites values of every parameter in `store`; names and shapes must match.
void parameters_from_json(const nlohmann::json& j, ParameterStore& store);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const nlohmann::json& meta);
nlohmann::json load_checkpoint_json(const std::filesystem::path& path);

}  // namespace estimate::ad
