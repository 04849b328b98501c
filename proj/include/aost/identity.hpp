#pragma once

// Identity bank, random identity assignment, identification embedding
// (pixel-level and patch-wise) and identification decoding.

#include <cstdint>
#include <random>

#include "aost/tensor.hpp"

namespace aost {

// H x W label map, label 0 is background.
struct MaskMap {
  int h = 0, w = 0;
  std::vector<int> labels;  // row-major, values in [0, n_targets)

  MaskMap() = default;
  MaskMap(int h_, int w_, int fill = 0) : h(h_), w(w_), labels(static_cast<size_t>(h_) * w_, fill) {}
  int& at(int y, int x) { return labels[static_cast<size_t>(y) * w + x]; }
  int at(int y, int x) const { return labels[static_cast<size_t>(y) * w + x]; }
  int max_label() const {
    int m = 0;
    for (int v : labels) m = std::max(m, v);
    return m;
  }
  bool operator==(const MaskMap& o) const = default;
};

// M trainable identities, each with s x s sub-vectors of C channels.
struct IdentityBank {
  int m_total = 0;
  int stride = 1;  // patch edge in pixels
  int channels = 0;
  Tensor table;  // [m_total, stride, stride, channels], trainable

  IdentityBank() = default;
  IdentityBank(int m, int s, int c, uint64_t seed) : m_total(m), stride(s), channels(c) {
    table = Tensor({m, s, s, c});
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(c)));
    for (size_t i = 0; i < table.size(); ++i) table[i] = dist(rng);
    table.set_requires_grad(true);
  }
};

// Random selection of N distinct bank slots; as a 0/1 matrix P in {0,1}^{NxM}
// it satisfies P P^tr = I_N.
struct Assignment {
  int n_targets = 0;
  std::vector<int> slots;
  uint64_t seed = 0;
};

// Seeded Fisher-Yates over the bank slots; deterministic across platforms.
inline Assignment assign_identities(int n_targets, const IdentityBank& bank, uint64_t seed) {
  if (n_targets > bank.m_total)
    throw std::invalid_argument("assign_identities: " + std::to_string(n_targets) +
                                " targets exceed bank capacity " + std::to_string(bank.m_total));
  if (n_targets < 1) throw std::invalid_argument("assign_identities: need at least one target");
  std::vector<int> pool(bank.m_total);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  for (int i = bank.m_total - 1; i > 0; --i) {
    int j = static_cast<int>(rng() % static_cast<uint64_t>(i + 1));
    std::swap(pool[i], pool[j]);
  }
  Assignment a;
  a.n_targets = n_targets;
  a.slots.assign(pool.begin(), pool.begin() + n_targets);
  a.seed = seed;
  return a;
}

// E = ID(Y,D): for each feature cell, sum over its s x s pixels of the
// assigned identity's sub-vector at the intra-patch position. With s=1 this
// is exactly the Y P D row selection.
inline Tensor id_embed(const MaskMap& mask, const Assignment& assign, const IdentityBank& bank) {
  const int s = bank.stride, c = bank.channels;
  if (mask.h % s != 0 || mask.w % s != 0)
    throw std::invalid_argument("id_embed: mask " + std::to_string(mask.h) + "x" +
                                std::to_string(mask.w) + " not divisible by stride " +
                                std::to_string(s));
  const int fh = mask.h / s, fw = mask.w / s;
  Tensor e({fh * fw, c});
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      const int label = mask.at(y, x);
      if (label < 0 || label >= assign.n_targets)
        throw std::invalid_argument("id_embed: label " + std::to_string(label) +
                                    " outside [0," + std::to_string(assign.n_targets) + ")");
      const int slot = assign.slots[label];
      const size_t cell = static_cast<size_t>(y / s) * fw + x / s;
      const size_t src = ((static_cast<size_t>(slot) * s + y % s) * s + x % s) * c;
      for (int ch = 0; ch < c; ++ch) e[cell * c + ch] += bank.table[src + ch];
    }
  const Tensor& table = bank.table;
  if (detail::should_record({&table})) {
    const MaskMap m = mask;
    const Assignment a = assign;
    detail::record(e, [e, table, m, a, s, c, fw]() mutable {
      if (!e.has_grad()) return;
      const auto& g = e.grad();
      auto& gt = table.grad();
      for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
          const int slot = a.slots[m.at(y, x)];
          const size_t cell = static_cast<size_t>(y / s) * fw + x / s;
          const size_t dst = ((static_cast<size_t>(slot) * s + y % s) * s + x % s) * c;
          for (int ch = 0; ch < c; ++ch) gt[dst + ch] += g[cell * c + ch];
        }
    });
  }
  return e;
}

// Select the N assigned columns of the all-M logit map, softmax over targets.
inline Tensor id_decode(const Tensor& logits_all_m, const Assignment& assign) {
  if (logits_all_m.ndim() != 2)
    throw std::invalid_argument("id_decode: need [pixels, M] logits");
  Tensor selected = transpose(gather_rows(transpose(logits_all_m), assign.slots));
  return softmax_lastdim(selected);
}

// Cosine similarity between flattened per-identity tables.
inline std::vector<std::vector<double>> bank_similarity_report(const IdentityBank& bank) {
  const int m = bank.m_total;
  const size_t len = bank.table.size() / m;
  std::vector<double> norms(m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < len; ++j) {
      double v = bank.table[i * len + j];
      s += v * v;
    }
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0)
      throw std::domain_error("bank_similarity_report: identity " + std::to_string(i) +
                              " has zero norm");
  }
  std::vector<std::vector<double>> sim(m, std::vector<double>(m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double dot = 0.0;
      for (size_t k = 0; k < len; ++k) dot += bank.table[i * len + k] * bank.table[j * len + k];
      sim[i][j] = dot / (norms[i] * norms[j]);
    }
  return sim;
}

}  // namespace aost
