#pragma once

// Binary checkpoint: magic, version, key=value config text, then named
// parameter records with shape and raw little-endian f64 payload.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aost/model.hpp"

namespace aost {

namespace detail {

constexpr char kCkptMagic[8] = {'A', 'O', 'S', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCkptVersion = 1;

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint: truncated while reading " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const std::string& what) {
  uint32_t n = read_u32(is, what + " length");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n))
    throw std::runtime_error("checkpoint: truncated while reading " + what);
  return s;
}

inline void write_f64_array(std::ostream& os, const std::vector<double>& v) {
  static_assert(sizeof(double) == 8);
  // assumes little-endian host; record layout is defined little-endian
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(detail::kCkptMagic, 8);
  detail::write_u32(os, detail::kCkptVersion);
  std::string config;
  for (const auto& [k, v] : params.cfg.to_kv()) config += k + "=" + v + "\n";
  detail::write_string(os, config);
  auto named = params.named_params();
  detail::write_u32(os, static_cast<uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    detail::write_string(os, name);
    detail::write_u32(os, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) detail::write_u32(os, static_cast<uint32_t>(t.dim(i)));
    detail::write_f64_array(os, t.data());
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  uint32_t version = detail::read_u32(is, "version");
  if (version != detail::kCkptVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  std::map<std::string, std::string> kv;
  {
    std::istringstream cfg(detail::read_string(is, "config"));
    std::string line;
    while (std::getline(cfg, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  ModelParams params{ModelConfig::from_kv(kv)};
  std::map<std::string, Tensor> registry;
  for (auto& [name, t] : params.named_params()) registry.emplace(name, t);
  uint32_t count = detail::read_u32(is, "record count");
  for (uint32_t r = 0; r < count; ++r) {
    std::string name = detail::read_string(is, "parameter name");
    uint32_t ndim = detail::read_u32(is, name + " rank");
    std::vector<int> shape(ndim);
    size_t n = 1;
    for (uint32_t i = 0; i < ndim; ++i) {
      shape[i] = static_cast<int>(detail::read_u32(is, name + " shape"));
      n *= static_cast<size_t>(shape[i]);
    }
    auto it = registry.find(name);
    if (it == registry.end())
      throw std::runtime_error("load_checkpoint: unknown parameter " + name);
    if (it->second.shape() != shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
    if (!is.read(reinterpret_cast<char*>(it->second.data().data()),
                 static_cast<std::streamsize>(n * sizeof(double))))
      throw std::runtime_error("checkpoint: truncated while reading " + name);
  }
  return params;
}

}  // namespace aost
