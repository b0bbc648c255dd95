#include "estimate/params.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "estimate/error.hpp"

namespace estimate::ad {

Tensor& ParameterStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw Error(ErrorCode::InvalidArgument, "duplicate parameter " + name);
  index_[name] = tensors_.size();
  names_.push_back(name);
  tensors_.push_back(std::move(value));
  return tensors_.back();
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown parameter " + name);
  return tensors_[it->second];
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown parameter " + name);
  return tensors_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

std::uint64_t stream_seed(std::uint64_t seed, const std::string& name) {
  // FNV-1a over the name, mixed with the run seed via splitmix64.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor init_uniform_fan_in(const std::string& name, Shape shape, std::size_t fan_in, std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor init_normal(const std::string& name, Shape shape, double stddev, std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, name));
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values), true);
}

nlohmann::json parameters_to_json(const ParameterStore& store) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& t = store.tensors()[i];
    arr.push_back({{"name", store.names()[i]},
                   {"shape", t.shape()},
                   {"values", std::vector<double>(t.data().begin(), t.data().end())}});
  }
  return arr;
}

void parameters_from_json(const nlohmann::json& j, ParameterStore& store) {
  const auto& arr = j.contains("params") ? j.at("params") : j;
  std::map<std::string, const nlohmann::json*> by_name;
  for (const auto& entry : arr) by_name[entry.at("name").get<std::string>()] = &entry;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& name = store.names()[i];
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorCode::ConfigInvalid, "checkpoint lacks parameter " + name);
    auto shape = it->second->at("shape").get<Shape>();
    auto& t = store.tensors()[i];
    if (shape != t.shape()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "checkpoint parameter " + name + " has shape " + shape_string(shape) +
                      ", model expects " + shape_string(t.shape()));
    }
    auto values = it->second->at("values").get<std::vector<double>>();
    auto dst = t.mutable_data();
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const nlohmann::json& meta) {
  nlohmann::json j = {{"format", "estimate-params"},
                      {"version", kCheckpointVersion},
                      {"meta", meta},
                      {"params", parameters_to_json(store)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

nlohmann::json load_checkpoint_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoFailure, path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "estimate-params") {
    throw Error(ErrorCode::ConfigInvalid, path.string() + " is not an estimate-params checkpoint");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": unsupported checkpoint version");
  }
  return j;
}

}  // namespace estimate::ad
