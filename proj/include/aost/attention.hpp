#pragma once

// Attention variants: scaled dot-product, vanilla ID-attention, layer-wise
// ID-attention with identification and gating weights, long-term non-local
// attention, short-term windowed attention, positional embeddings.
// All variants are multi-head.

#include "aost/identity.hpp"
#include "aost/tensor.hpp"

namespace aost {

struct AttentionConfig {
  int channels = 32;   // C
  int heads = 4;
  int c_k = 32;        // key/query channels
  int c_v = 32;        // value channels
  int lambda = 7;      // short-term window edge, odd
  int n_short = 1;     // short-term frame count

  void validate() const {
    if (c_k % heads != 0 || c_v % heads != 0)
      throw std::invalid_argument("AttentionConfig: C_k and C_v must divide by heads");
    if (lambda < 1 || lambda % 2 == 0)
      throw std::invalid_argument("AttentionConfig: lambda must be odd and >= 1");
  }
};

// Per-layer identification weight (CxC) and gating weight (Cx1).
struct LayerIDWeights {
  Tensor w_id;  // [C, C]
  Tensor w_g;   // [C, 1]
};

// Learned relative positional bias for the short-term window, per head.
struct RelPosBias {
  int lambda = 0;
  Tensor table;  // [(2*lambda-1)^2, heads]

  RelPosBias() = default;
  RelPosBias(int lambda_, int heads) : lambda(lambda_) {
    const int span = 2 * lambda_ - 1;
    table = Tensor({span * span, heads});
    table.set_requires_grad(true);
  }
};

// Gating activation sigma(*) = 1 + tanh(*); sigma(0) = 1 is the identity gate.
inline Tensor gate_activation(const Tensor& x) { return add_scalar(tanh_op(x), 1.0); }

// ---------------------------------------------------------------------------
// Dense multi-head attention primitive (single tape node).
// Per head: softmax(Q_h K_h^tr / sqrt(C_k/heads) + B_h) V_h, concatenated.
// `bias` is [heads, a, b] or an empty tensor.
inline Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                                  const Tensor& bias = Tensor()) {
  if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
    throw std::invalid_argument("multihead_attention: need 2-d Q/K/V");
  const int a = q.dim(0), ck = q.dim(1), b = k.dim(0), cv = v.dim(1);
  if (b < 1) throw std::invalid_argument("multihead_attention: empty key set");
  if (k.dim(1) != ck || v.dim(0) != b)
    throw std::invalid_argument("multihead_attention: K " + detail::shape_str(k.shape()) +
                                " / V " + detail::shape_str(v.shape()) +
                                " incompatible with Q " + detail::shape_str(q.shape()));
  if (ck % heads != 0 || cv % heads != 0)
    throw std::invalid_argument("multihead_attention: channels must divide by heads");
  const bool biased = bias.size() > 0;
  if (biased && bias.shape() != std::vector<int>{heads, a, b})
    throw std::invalid_argument("multihead_attention: bias must be [heads,a,b]");
  const int dk = ck / heads, dv = cv / heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor out({a, cv});
  // softmax weights kept for the backward pass
  auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(heads) * a * b);
  for (int h = 0; h < heads; ++h)
    for (int i = 0; i < a; ++i) {
      double* pr = probs->data() + (static_cast<size_t>(h) * a + i) * b;
      const double* qi = q.data().data() + static_cast<size_t>(i) * ck + h * dk;
      double mx = -1e300;
      for (int j = 0; j < b; ++j) {
        const double* kj = k.data().data() + static_cast<size_t>(j) * ck + h * dk;
        double dot = 0.0;
        for (int d = 0; d < dk; ++d) dot += qi[d] * kj[d];
        dot *= scl;
        if (biased) dot += bias[(static_cast<size_t>(h) * a + i) * b + j];
        pr[j] = dot;
        mx = std::max(mx, dot);
      }
      double sum = 0.0;
      for (int j = 0; j < b; ++j) {
        pr[j] = std::exp(pr[j] - mx);
        sum += pr[j];
      }
      double* oi = out.data().data() + static_cast<size_t>(i) * cv + h * dv;
      for (int j = 0; j < b; ++j) {
        pr[j] /= sum;
        const double* vj = v.data().data() + static_cast<size_t>(j) * cv + h * dv;
        for (int d = 0; d < dv; ++d) oi[d] += pr[j] * vj[d];
      }
    }
  count_macs(static_cast<unsigned long long>(a) * b * (ck + cv));

  if (detail::should_record({&q, &k, &v, &bias})) {
    detail::record(out, [q, k, v, bias, out, probs, heads, a, b, ck, cv, dk, dv, scl,
                         biased]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      std::vector<double> dl(b);
      for (int h = 0; h < heads; ++h)
        for (int i = 0; i < a; ++i) {
          const double* pr = probs->data() + (static_cast<size_t>(h) * a + i) * b;
          const double* go = g.data() + static_cast<size_t>(i) * cv + h * dv;
          // dP and row-dot correction for softmax
          double corr = 0.0;
          for (int j = 0; j < b; ++j) {
            const double* vj = v.data().data() + static_cast<size_t>(j) * cv + h * dv;
            double dp = 0.0;
            for (int d = 0; d < dv; ++d) dp += go[d] * vj[d];
            dl[j] = dp;
            corr += dp * pr[j];
          }
          for (int j = 0; j < b; ++j) dl[j] = pr[j] * (dl[j] - corr);
          if (v.tracked()) {
            auto& gv = v.grad();
            for (int j = 0; j < b; ++j) {
              double* gvj = gv.data() + static_cast<size_t>(j) * cv + h * dv;
              for (int d = 0; d < dv; ++d) gvj[d] += pr[j] * go[d];
            }
          }
          const double* qi = q.data().data() + static_cast<size_t>(i) * ck + h * dk;
          if (q.tracked()) {
            double* gqi = q.grad().data() + static_cast<size_t>(i) * ck + h * dk;
            for (int j = 0; j < b; ++j) {
              const double* kj = k.data().data() + static_cast<size_t>(j) * ck + h * dk;
              const double w = scl * dl[j];
              for (int d = 0; d < dk; ++d) gqi[d] += w * kj[d];
            }
          }
          if (k.tracked()) {
            auto& gk = k.grad();
            for (int j = 0; j < b; ++j) {
              double* gkj = gk.data() + static_cast<size_t>(j) * ck + h * dk;
              const double w = scl * dl[j];
              for (int d = 0; d < dk; ++d) gkj[d] += w * qi[d];
            }
          }
          if (biased && bias.tracked()) {
            auto& gb = bias.grad();
            for (int j = 0; j < b; ++j) gb[(static_cast<size_t>(h) * a + i) * b + j] += dl[j];
          }
        }
    });
  }
  return out;
}

// Eq.-1 style multi-head scaled dot-product attention (no output projection;
// the block applies its own).
inline Tensor scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads = 1) {
  return multihead_attention(q, k, v, heads);
}

// V' = Att(Q, K, V + E): identification embedding added to values directly.
inline Tensor att_id_vanilla(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& e,
                             int heads = 1) {
  if (e.shape() != v.shape())
    throw std::invalid_argument("att_id_vanilla: E " + detail::shape_str(e.shape()) +
                                " must match V " + detail::shape_str(v.shape()));
  return scaled_attention(q, k, add(v, e), heads);
}

// V' = Att(Q, K (.) sigma(E W_G), V + E W_ID), the layer-wise ID attention.
inline Tensor att_id_layerwise(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& e,
                               const LayerIDWeights& w, int heads = 1) {
  if (e.dim(0) != v.dim(0))
    throw std::invalid_argument("att_id_layerwise: E rows " + std::to_string(e.dim(0)) +
                                " != V rows " + std::to_string(v.dim(0)));
  Tensor gate = gate_activation(matmul(e, w.w_g));      // [b,1]
  Tensor k_gated = mul_colvec(k, gate);                 // scalar gate broadcast over channels
  Tensor v_off = add(v, matmul(e, w.w_id));
  return scaled_attention(q, k_gated, v_off, heads);
}

// ---------------------------------------------------------------------------
// Long-term attention: non-local ID attention over concatenated memory frames,
// siamese key projection (queries and memory keys share W_K).

struct MemFrameEntry {
  int frame_index = 0;
  Tensor k;  // [hw, C_k], pre-projected at insertion
  Tensor v;  // [hw, C_v]
  Tensor e;  // [hw, C], ID embedding of the frame's mask
};

struct ProjPair {
  Tensor w_k;  // [C, C_k]
  Tensor w_v;  // [C, C_v]
};

inline Tensor long_term_attention(const Tensor& x, const std::vector<MemFrameEntry>& mem,
                                  const LayerIDWeights& w, const ProjPair& proj, int heads) {
  if (mem.empty())
    throw std::logic_error("long_term_attention: empty memory (first-frame fallback is the caller's job)");
  Tensor q = matmul(x, proj.w_k);
  std::vector<Tensor> ks, vs, es;
  for (const auto& f : mem) {
    ks.push_back(f.k);
    vs.push_back(f.v);
    es.push_back(f.e);
  }
  Tensor k = ks.size() == 1 ? ks[0] : concat_rows(ks);
  Tensor v = vs.size() == 1 ? vs[0] : concat_rows(vs);
  Tensor e = es.size() == 1 ? es[0] : concat_rows(es);
  return att_id_layerwise(q, k, v, e, w, heads);
}

// Pre-projects a frame's features for memory insertion (compute-once caching).
inline MemFrameEntry project_memory_frame(int frame_index, const Tensor& x, const Tensor& e,
                                          const ProjPair& proj) {
  MemFrameEntry f;
  f.frame_index = frame_index;
  f.k = matmul(x, proj.w_k);
  f.v = matmul(x, proj.w_v);
  f.e = e;
  return f;
}

// ---------------------------------------------------------------------------
// Windowed multi-head attention primitive for short-term attention.
// For each location p of the gh x gw grid, attends over the lambda x lambda
// neighbourhood of p in each of n frames (edge windows clipped to the grid).
// `bias_table` is [(2*lambda-1)^2, heads] indexed by relative offset, or empty.
inline Tensor windowed_multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                           int gh, int gw, int n_frames, int lambda, int heads,
                                           const Tensor& bias_table = Tensor()) {
  const int hw = gh * gw;
  if (q.ndim() != 2 || q.dim(0) != hw)
    throw std::invalid_argument("windowed_multihead_attention: Q must be [gh*gw, C_k]");
  const int ck = q.dim(1), cv = v.dim(1);
  if (k.dim(0) != n_frames * hw || v.dim(0) != n_frames * hw || k.dim(1) != ck)
    throw std::invalid_argument("windowed_multihead_attention: K/V must hold n_frames grids");
  if (lambda < 1 || lambda % 2 == 0)
    throw std::invalid_argument("windowed_multihead_attention: lambda must be odd");
  if (ck % heads != 0 || cv % heads != 0)
    throw std::invalid_argument("windowed_multihead_attention: channels must divide by heads");
  const int span = 2 * lambda - 1;
  const bool biased = bias_table.size() > 0;
  if (biased && bias_table.shape() != std::vector<int>{span * span, heads})
    throw std::invalid_argument("windowed_multihead_attention: bias table must be [(2l-1)^2, heads]");
  const int r = (lambda - 1) / 2, dk = ck / heads, dv = cv / heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(dk));

  struct Saved {
    std::vector<int> keys;      // flattened K/V row indices per query, concatenated
    std::vector<int> bias_idx;  // matching bias-table rows
    std::vector<int> offsets;   // per-query start into keys (size hw+1)
    std::vector<double> probs;  // [sum_nk * heads]
  };
  auto sv = std::make_shared<Saved>();
  sv->offsets.resize(hw + 1, 0);
  for (int y = 0; y < gh; ++y)
    for (int x = 0; x < gw; ++x) {
      const int p = y * gw + x;
      for (int f = 0; f < n_frames; ++f)
        for (int yy = std::max(0, y - r); yy <= std::min(gh - 1, y + r); ++yy)
          for (int xx = std::max(0, x - r); xx <= std::min(gw - 1, x + r); ++xx) {
            sv->keys.push_back(f * hw + yy * gw + xx);
            sv->bias_idx.push_back((yy - y + lambda - 1) * span + (xx - x + lambda - 1));
          }
      sv->offsets[p + 1] = static_cast<int>(sv->keys.size());
    }
  sv->probs.resize(sv->keys.size() * static_cast<size_t>(heads));

  Tensor out({hw, cv});
  unsigned long long macs = 0;
  std::vector<double> logits;
  for (int p = 0; p < hw; ++p) {
    const int k0 = sv->offsets[p], k1 = sv->offsets[p + 1], nk = k1 - k0;
    logits.resize(nk);
    macs += static_cast<unsigned long long>(nk) * (ck + cv);
    for (int h = 0; h < heads; ++h) {
      const double* qp = q.data().data() + static_cast<size_t>(p) * ck + h * dk;
      double mx = -1e300;
      for (int j = 0; j < nk; ++j) {
        const double* kj = k.data().data() + static_cast<size_t>(sv->keys[k0 + j]) * ck + h * dk;
        double dot = 0.0;
        for (int d = 0; d < dk; ++d) dot += qp[d] * kj[d];
        dot *= scl;
        if (biased) dot += bias_table[static_cast<size_t>(sv->bias_idx[k0 + j]) * heads + h];
        logits[j] = dot;
        mx = std::max(mx, dot);
      }
      double sum = 0.0;
      for (int j = 0; j < nk; ++j) {
        logits[j] = std::exp(logits[j] - mx);
        sum += logits[j];
      }
      double* op = out.data().data() + static_cast<size_t>(p) * cv + h * dv;
      for (int j = 0; j < nk; ++j) {
        const double w = logits[j] / sum;
        sv->probs[static_cast<size_t>(k0 + j) * heads + h] = w;
        const double* vj = v.data().data() + static_cast<size_t>(sv->keys[k0 + j]) * cv + h * dv;
        for (int d = 0; d < dv; ++d) op[d] += w * vj[d];
      }
    }
  }
  count_macs(macs);

  if (detail::should_record({&q, &k, &v, &bias_table})) {
    detail::record(out, [q, k, v, bias_table, out, sv, hw, heads, ck, cv, dk, dv, scl,
                         biased]() mutable {
      if (!out.has_grad()) return;
      const auto& g = out.grad();
      std::vector<double> dl;
      for (int p = 0; p < hw; ++p) {
        const int k0 = sv->offsets[p], k1 = sv->offsets[p + 1], nk = k1 - k0;
        dl.resize(nk);
        for (int h = 0; h < heads; ++h) {
          const double* go = g.data() + static_cast<size_t>(p) * cv + h * dv;
          double corr = 0.0;
          for (int j = 0; j < nk; ++j) {
            const double* vj = v.data().data() + static_cast<size_t>(sv->keys[k0 + j]) * cv + h * dv;
            double dp = 0.0;
            for (int d = 0; d < dv; ++d) dp += go[d] * vj[d];
            dl[j] = dp;
            corr += dp * sv->probs[static_cast<size_t>(k0 + j) * heads + h];
          }
          for (int j = 0; j < nk; ++j) {
            const double pw = sv->probs[static_cast<size_t>(k0 + j) * heads + h];
            dl[j] = pw * (dl[j] - corr);
            if (v.tracked()) {
              double* gvj = v.grad().data() + static_cast<size_t>(sv->keys[k0 + j]) * cv + h * dv;
              for (int d = 0; d < dv; ++d) gvj[d] += pw * go[d];
            }
          }
          const double* qp = q.data().data() + static_cast<size_t>(p) * ck + h * dk;
          if (q.tracked()) {
            double* gq = q.grad().data() + static_cast<size_t>(p) * ck + h * dk;
            for (int j = 0; j < nk; ++j) {
              const double* kj = k.data().data() + static_cast<size_t>(sv->keys[k0 + j]) * ck + h * dk;
              const double w = scl * dl[j];
              for (int d = 0; d < dk; ++d) gq[d] += w * kj[d];
            }
          }
          if (k.tracked()) {
            for (int j = 0; j < nk; ++j) {
              double* gkj = k.grad().data() + static_cast<size_t>(sv->keys[k0 + j]) * ck + h * dk;
              const double w = scl * dl[j];
              for (int d = 0; d < dk; ++d) gkj[d] += w * qp[d];
            }
          }
          if (biased && bias_table.tracked()) {
            auto& gb = bias_table.grad();
            for (int j = 0; j < nk; ++j)
              gb[static_cast<size_t>(sv->bias_idx[k0 + j]) * heads + h] += dl[j];
          }
        }
      }
    });
  }
  return out;
}

// Short-term attention: layer-wise ID attention restricted to the n*lambda^2
// spatial-temporal neighbourhood, with learned relative positional bias.
inline Tensor short_term_attention(const Tensor& x, int gh, int gw,
                                   const std::vector<MemFrameEntry>& prev,
                                   const LayerIDWeights& w, const ProjPair& proj,
                                   const RelPosBias* bias, int lambda, int heads) {
  if (prev.empty())
    throw std::logic_error("short_term_attention: no previous frames (first-frame fallback is the caller's job)");
  Tensor q = matmul(x, proj.w_k);
  std::vector<Tensor> ks, vs, es;
  for (const auto& f : prev) {
    ks.push_back(f.k);
    vs.push_back(f.v);
    es.push_back(f.e);
  }
  Tensor k = ks.size() == 1 ? ks[0] : concat_rows(ks);
  Tensor v = vs.size() == 1 ? vs[0] : concat_rows(vs);
  Tensor e = es.size() == 1 ? es[0] : concat_rows(es);
  Tensor gate = gate_activation(matmul(e, w.w_g));
  Tensor k_gated = mul_colvec(k, gate);
  Tensor v_off = add(v, matmul(e, w.w_id));
  return windowed_multihead_attention(q, k_gated, v_off, gh, gw, static_cast<int>(prev.size()),
                                      lambda, heads, bias ? bias->table : Tensor());
}

// Fixed 2-D sine/cosine embedding: half the channels encode the row, half the
// column, geometric frequencies with base 10000. Added to self-attention
// queries/keys only.
inline Tensor sine_pos_embed(int h, int w, int c) {
  if (c % 4 != 0)
    throw std::invalid_argument("sine_pos_embed: channels must divide by 4, got " +
                                std::to_string(c));
  const int half = c / 2;
  Tensor out({h * w, c});
  std::vector<double> freq(half);
  for (int j = 0; j < half; ++j)
    freq[j] = std::pow(10000.0, 2.0 * (j / 2) / static_cast<double>(half));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double* row = out.data().data() + (static_cast<size_t>(y) * w + x) * c;
      for (int j = 0; j < half; ++j) {
        const double ay = y / freq[j], ax = x / freq[j];
        row[j] = (j % 2 == 0) ? std::sin(ay) : std::cos(ay);
        row[half + j] = (j % 2 == 0) ? std::sin(ax) : std::cos(ax);
      }
    }
  return out;
}

}  // namespace aost
