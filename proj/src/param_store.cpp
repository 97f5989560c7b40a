#include "srn/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "srn/error.hpp"

namespace srn {
namespace {

constexpr char kMagic[8] = {'S', 'R', 'N', 'C', 'K', 'P', 'T', '\n'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in native order and assumes little-endian");

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

}  // namespace

void ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw InvalidInput("duplicate parameter name: " + name);
  arrays_.emplace(name, std::move(value));
}

void ParamStore::set(const std::string& name, Tensor value) { arrays_[name] = std::move(value); }

Tensor& ParamStore::at(const std::string& name) {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw InvalidInput("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw InvalidInput("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(arrays_.size());
  for (const auto& [k, _] : arrays_) out.push_back(k);
  return out;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : arrays_) n += t.size();
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& [_, t] : arrays_)
    if (!t.all_finite()) return false;
  return true;
}

void ParamStore::copy_prefix(const ParamStore& src, const std::string& from_prefix,
                             const std::string& to_prefix) {
  for (const auto& [name, t] : src.arrays_) {
    if (name.rfind(from_prefix, 0) != 0) continue;
    arrays_[to_prefix + name.substr(from_prefix.size())] = t;
  }
}

void Checkpoint::capture_rng(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  rng_state = os.str();
}

std::mt19937_64 Checkpoint::restore_rng() const {
  std::mt19937_64 rng(rng_seed);
  if (!rng_state.empty()) {
    std::istringstream is(rng_state);
    is >> rng;
    if (!is) throw InvalidInput("corrupt RNG state in checkpoint");
  }
  return rng;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["format"] = "srn-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["dtype"] = "float64";
  manifest["config"] = ckpt.config;
  manifest["rng_seed"] = ckpt.rng_seed;
  manifest["rng_state"] = ckpt.rng_state;
  nlohmann::json arrays = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.params) {
    if (!t.all_finite()) throw InvalidInput("refusing to save non-finite parameter " + name);
    arrays.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
    offset += t.size();
  }
  manifest["arrays"] = std::move(arrays);
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset * sizeof(double));
  for (const auto& [_, t] : ckpt.params)
    out.append(reinterpret_cast<const char*>(t.raw()), t.size() * sizeof(double));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw InvalidInput("not a checkpoint archive (bad magic)");
  std::uint64_t mlen = 0;
  std::memcpy(&mlen, bytes.data() + 8, 8);
  if (16 + mlen > bytes.size()) throw InvalidInput("truncated checkpoint manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("bad checkpoint manifest: ") + e.what());
  }
  if (manifest.value("version", -1) != kCheckpointVersion)
    throw InvalidInput("unsupported checkpoint version");
  if (manifest.value("dtype", "") != "float64") throw InvalidInput("unsupported checkpoint dtype");

  Checkpoint ck;
  ck.config = manifest.at("config");
  ck.rng_seed = manifest.at("rng_seed").get<std::uint64_t>();
  ck.rng_state = manifest.at("rng_state").get<std::string>();
  const char* payload = bytes.data() + 16 + mlen;
  const std::size_t payload_size = bytes.size() - 16 - mlen;
  for (const auto& a : manifest.at("arrays")) {
    const auto shape = a.at("shape").get<Shape>();
    const auto offset = a.at("offset").get<std::uint64_t>();
    const auto count = a.at("count").get<std::uint64_t>();
    if (count != shape_numel(shape)) throw InvalidInput("array count/shape mismatch");
    if ((offset + count) * sizeof(double) > payload_size)
      throw InvalidInput("truncated checkpoint payload");
    std::vector<double> data(count);
    std::memcpy(data.data(), payload + offset * sizeof(double), count * sizeof(double));
    ck.params.add(a.at("name").get<std::string>(), Tensor(shape, std::move(data)));
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace srn
