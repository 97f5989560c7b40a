#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "srn/tensor.hpp"

namespace srn {

inline constexpr int kCheckpointVersion = 1;

// Named learnable arrays. Iteration order is lexicographic by name, which
// fixes the on-disk layout.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);
  void set(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return arrays_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  void erase(const std::string& name) { arrays_.erase(name); }
  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return arrays_.size(); }
  std::size_t total_elements() const;
  bool all_finite() const;

  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

  // Copies every array whose name starts with `from_prefix` to the same name
  // with the prefix replaced by `to_prefix`, overwriting existing entries.
  void copy_prefix(const ParamStore& src, const std::string& from_prefix,
                   const std::string& to_prefix);

  bool operator==(const ParamStore& other) const = default;

 private:
  std::map<std::string, Tensor> arrays_;
};

// Everything needed to resume or reproduce: arrays, the config that shaped
// them, and the RNG stream position.
struct Checkpoint {
  ParamStore params;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t rng_seed = 0;
  std::string rng_state;

  void capture_rng(const std::mt19937_64& rng);
  std::mt19937_64 restore_rng() const;
};

// Archive layout: 8-byte magic "SRNCKPT\n", little-endian u64 manifest length,
// compact JSON manifest, then the float64 little-endian payload in manifest order.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace srn
