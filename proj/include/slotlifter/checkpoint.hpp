#pragma once

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#include "slotlifter/nn.hpp"

namespace sl {

// Single-file checkpoint: magic, version, JSON header (step, config, rng
// state, parameter table), then raw little-endian float32 payloads for every
// parameter followed by the optimizer momentum buffers.
inline constexpr char kCheckpointMagic[4] = {'S', 'L', 'C', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  long step = 0;
  nlohmann::json config;
  std::string rng_state;  // operator<< serialization of std::mt19937_64
};

namespace detail {

template <typename T>
void write_f32(std::ostream& out, const Tensor<T>& t) {
  for (long i = 0; i < t.size(); ++i) {
    float v = static_cast<float>(t[i]);
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
}

template <typename T>
void read_f32(std::istream& in, Tensor<T>& t, const std::string& path) {
  for (long i = 0; i < t.size(); ++i) {
    float v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    t[i] = static_cast<T>(v);
  }
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const nn::ParamStore<T>& params,
                     const std::vector<Tensor<T>>* momentum, long step,
                     const nlohmann::json& config, const std::string& rng_state) {
  nlohmann::json header;
  header["step"] = step;
  header["config"] = config;
  header["rng"] = rng_state;
  header["has_momentum"] = momentum != nullptr;
  header["params"] = nlohmann::json::array();
  for (const auto& [name, p] : params.params)
    header["params"].push_back({{"name", name}, {"shape", p->value.shape}});
  std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, 4);
  uint32_t ver = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&ver), 4);
  uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hs.data(), hs.size());
  for (const auto& [_, p] : params.params) detail::write_f32(out, p->value);
  if (momentum) {
    if (momentum->size() != params.params.size())
      throw std::invalid_argument("save_checkpoint: momentum count mismatch");
    for (const auto& m : *momentum) detail::write_f32(out, m);
  }
  if (!out) throw std::runtime_error("checkpoint write failure: " + path);
}

template <typename T>
CheckpointInfo load_checkpoint(const std::string& path, nn::ParamStore<T>& params,
                               std::vector<Tensor<T>>* momentum) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  uint32_t ver = 0;
  uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&ver), 4);
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (ver != kCheckpointVersion)
    throw std::runtime_error("checkpoint version mismatch: got " + std::to_string(ver) +
                             ", expected " + std::to_string(kCheckpointVersion));
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt checkpoint header: " + std::string(e.what()));
  }

  const auto& table = header.at("params");
  if (table.size() != params.params.size())
    throw std::runtime_error("checkpoint parameter count mismatch");
  for (size_t i = 0; i < table.size(); ++i) {
    const auto& [name, p] = params.params[i];
    if (table[i].at("name").get<std::string>() != name ||
        table[i].at("shape").get<std::vector<long>>() != p->value.shape)
      throw std::runtime_error("checkpoint parameter mismatch at " + name);
  }
  for (auto& [_, p] : params.params) detail::read_f32(in, p->value, path);
  bool has_momentum = header.value("has_momentum", false);
  if (momentum) {
    if (!has_momentum) throw std::runtime_error("checkpoint has no optimizer state: " + path);
    momentum->clear();
    for (auto& [_, p] : params.params) {
      Tensor<T> m = Tensor<T>::zeros(p->value.shape);
      detail::read_f32(in, m, path);
      momentum->push_back(std::move(m));
    }
  }
  CheckpointInfo info;
  info.step = header.at("step").get<long>();
  info.config = header.value("config", nlohmann::json::object());
  info.rng_state = header.at("rng").get<std::string>();
  return info;
}

}  // namespace sl
