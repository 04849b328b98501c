#pragma once

// S-LSTT block assembly, scalable depth with parameter-sharing prefixes,
// convolutional encoder, shared decoder over all-M logits, full model forward.

#include <deque>
#include <map>

#include "aost/attention.hpp"
#include "aost/conv.hpp"
#include "aost/identity.hpp"

namespace aost {

struct ModelConfig {
  int image_h = 64, image_w = 64;
  int channels = 32;  // C
  int heads = 4;
  int lambda = 7;     // short-term window edge
  int n_short = 1;    // previous frames in short-term attention
  int depth = 3;      // L
  int m_total = 10;   // identity bank size
  int stride = 4;     // encoder stride == identity patch edge, power of two
  int enc_mid = 16;   // first encoder stage channels
  bool rel_bias_per_layer = false;
  bool use_sine_pos = true;
  uint64_t init_seed = 1;

  int grid_h() const { return image_h / stride; }
  int grid_w() const { return image_w / stride; }

  void validate() const {
    if (image_h % stride != 0 || image_w % stride != 0)
      throw std::invalid_argument("ModelConfig: image size must divide by stride");
    if (stride != 1 && stride != 2 && stride != 4 && stride != 8)
      throw std::invalid_argument("ModelConfig: stride must be 1, 2, 4 or 8");
    if (channels % heads != 0)
      throw std::invalid_argument("ModelConfig: channels must divide by heads");
    if (use_sine_pos && channels % 4 != 0)
      throw std::invalid_argument("ModelConfig: channels must divide by 4 for sine embedding");
    if (lambda < 1 || lambda % 2 == 0)
      throw std::invalid_argument("ModelConfig: lambda must be odd");
    if (depth < 1) throw std::invalid_argument("ModelConfig: depth must be >= 1");
  }

  std::map<std::string, std::string> to_kv() const {
    std::map<std::string, std::string> kv;
    kv["image_h"] = std::to_string(image_h);
    kv["image_w"] = std::to_string(image_w);
    kv["channels"] = std::to_string(channels);
    kv["heads"] = std::to_string(heads);
    kv["lambda"] = std::to_string(lambda);
    kv["n_short"] = std::to_string(n_short);
    kv["depth"] = std::to_string(depth);
    kv["m_total"] = std::to_string(m_total);
    kv["stride"] = std::to_string(stride);
    kv["enc_mid"] = std::to_string(enc_mid);
    kv["rel_bias_per_layer"] = rel_bias_per_layer ? "1" : "0";
    kv["use_sine_pos"] = use_sine_pos ? "1" : "0";
    kv["init_seed"] = std::to_string(init_seed);
    return kv;
  }

  static ModelConfig from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    auto geti = [&](const char* k, int& dst) {
      auto it = kv.find(k);
      if (it != kv.end()) dst = std::stoi(it->second);
    };
    geti("image_h", c.image_h);
    geti("image_w", c.image_w);
    geti("channels", c.channels);
    geti("heads", c.heads);
    geti("lambda", c.lambda);
    geti("n_short", c.n_short);
    geti("depth", c.depth);
    geti("m_total", c.m_total);
    geti("stride", c.stride);
    geti("enc_mid", c.enc_mid);
    int b = c.rel_bias_per_layer ? 1 : 0;
    geti("rel_bias_per_layer", b);
    c.rel_bias_per_layer = b != 0;
    int s = c.use_sine_pos ? 1 : 0;
    geti("use_sine_pos", s);
    c.use_sine_pos = s != 0;
    if (auto it = kv.find("init_seed"); it != kv.end()) c.init_seed = std::stoull(it->second);
    return c;
  }
};

struct SLSTTBlockParams {
  Tensor self_wq, self_wk, self_wv, self_wo, self_bo;
  ProjPair lt;
  Tensor lt_wo, lt_bo;
  ProjPair st;
  Tensor st_wo, st_bo;
  LayerIDWeights idw;
  Tensor ffn_w1, ffn_b1, ffn_dw, ffn_dwb, ffn_w2, ffn_b2;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b, ln4_g, ln4_b;
};

namespace detail {

inline Tensor init_normal(std::vector<int> shape, int fan_in, std::mt19937_64& rng,
                          bool trainable = true) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in))));
  for (size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  if (trainable) t.set_requires_grad(true);
  return t;
}

inline Tensor init_const(std::vector<int> shape, double v) {
  Tensor t(std::move(shape), v);
  t.set_requires_grad(true);
  return t;
}

// Residual-branch output weights start near zero so each block is close to an
// identity map: with randomly scaled branch outputs the encoder's appearance
// similarity is swamped before matching can be learned.
inline Tensor init_residual_out(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
  Tensor t = init_normal(std::move(shape), fan_in, rng);
  for (size_t i = 0; i < t.size(); ++i) t[i] *= 0.02;
  return t;
}

// Siamese key projections start near a scaled identity so attention logits
// inherit the feature-space similarity structure instead of a random one.
inline Tensor init_key_identity(int c, std::mt19937_64& rng) {
  Tensor t({c, c});
  std::normal_distribution<double> dist(0.0, 0.1);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j)
      t[static_cast<size_t>(i) * c + j] = (i == j ? 2.0 : 0.0) + dist(rng);
  t.set_requires_grad(true);
  return t;
}

inline std::vector<int> encoder_strides(int total) {
  switch (total) {
    case 1: return {1, 1, 1};
    case 2: return {2, 1, 1};
    case 4: return {2, 2, 1};
    case 8: return {2, 2, 2};
    default: throw std::invalid_argument("encoder_strides: unsupported stride");
  }
}

inline int upsample_stages(int stride) {
  int n = 0;
  while (stride > 1) {
    stride /= 2;
    ++n;
  }
  return n;
}

}  // namespace detail

struct ModelParams {
  ModelConfig cfg;
  // encoder: three conv+GELU stages with a total stride of cfg.stride
  Tensor enc_w1, enc_b1, enc_w2, enc_b2, enc_w3, enc_b3;
  std::vector<SLSTTBlockParams> blocks;
  // decoder, shared across all sub-transformer depths
  std::vector<Tensor> dec_fuse;  // per-level [C,C] projections, summed
  Tensor dec_fuse_b;
  std::vector<std::pair<Tensor, Tensor>> dec_stages;  // conv3x3 weight/bias per upsample stage
  Tensor dec_out_w, dec_out_b;                        // 1x1 conv to M logits
  std::vector<RelPosBias> rel_bias;                   // size 1, or depth when per-layer
  IdentityBank bank;

  ModelParams() = default;

  explicit ModelParams(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    std::mt19937_64 rng(cfg.init_seed);
    const int c = cfg.channels, mid = cfg.enc_mid;
    enc_w1 = detail::init_normal({3, 3, 3, mid}, 27, rng);
    enc_b1 = detail::init_const({mid}, 0.0);
    enc_w2 = detail::init_normal({3, 3, mid, c}, 9 * mid, rng);
    enc_b2 = detail::init_const({c}, 0.0);
    enc_w3 = detail::init_normal({3, 3, c, c}, 9 * c, rng);
    enc_b3 = detail::init_const({c}, 0.0);
    for (int l = 0; l < cfg.depth; ++l) {
      SLSTTBlockParams b;
      b.self_wq = detail::init_normal({c, c}, c, rng);
      b.self_wk = detail::init_normal({c, c}, c, rng);
      b.self_wv = detail::init_normal({c, c}, c, rng);
      b.self_wo = detail::init_residual_out({c, c}, c, rng);
      b.self_bo = detail::init_const({c}, 0.0);
      b.lt.w_k = detail::init_key_identity(c, rng);
      b.lt.w_v = detail::init_normal({c, c}, c, rng);
      b.lt_wo = detail::init_residual_out({c, c}, c, rng);
      b.lt_bo = detail::init_const({c}, 0.0);
      b.st.w_k = detail::init_key_identity(c, rng);
      b.st.w_v = detail::init_normal({c, c}, c, rng);
      b.st_wo = detail::init_residual_out({c, c}, c, rng);
      b.st_bo = detail::init_const({c}, 0.0);
      b.idw.w_id = detail::init_normal({c, c}, c, rng);
      b.idw.w_g = detail::init_residual_out({c, 1}, c, rng);
      b.ffn_w1 = detail::init_normal({c, 4 * c}, c, rng);
      b.ffn_b1 = detail::init_const({4 * c}, 0.0);
      b.ffn_dw = detail::init_normal({5, 5, 4 * c}, 25, rng);
      b.ffn_dwb = detail::init_const({4 * c}, 0.0);
      b.ffn_w2 = detail::init_residual_out({4 * c, c}, 4 * c, rng);
      b.ffn_b2 = detail::init_const({c}, 0.0);
      b.ln1_g = detail::init_const({c}, 1.0);
      b.ln1_b = detail::init_const({c}, 0.0);
      b.ln2_g = detail::init_const({c}, 1.0);
      b.ln2_b = detail::init_const({c}, 0.0);
      b.ln3_g = detail::init_const({c}, 1.0);
      b.ln3_b = detail::init_const({c}, 0.0);
      b.ln4_g = detail::init_const({c}, 1.0);
      b.ln4_b = detail::init_const({c}, 0.0);
      blocks.push_back(std::move(b));
    }
    for (int l = 0; l < cfg.depth; ++l)
      dec_fuse.push_back(detail::init_normal({c, c}, c * cfg.depth, rng));
    dec_fuse_b = detail::init_const({c}, 0.0);
    for (int s = 0; s < detail::upsample_stages(cfg.stride); ++s) {
      dec_stages.emplace_back(detail::init_normal({3, 3, c, c}, 9 * c, rng),
                              detail::init_const({c}, 0.0));
    }
    dec_out_w = detail::init_normal({1, 1, c, cfg.m_total}, c, rng);
    dec_out_b = detail::init_const({cfg.m_total}, 0.0);
    const int nbias = cfg.rel_bias_per_layer ? cfg.depth : 1;
    for (int i = 0; i < nbias; ++i) rel_bias.emplace_back(cfg.lambda, cfg.heads);
    bank = IdentityBank(cfg.m_total, cfg.stride, c, rng());
  }

  const RelPosBias& bias_for_layer(int l) const {
    return rel_bias[cfg.rel_bias_per_layer ? l : 0];
  }

  // Named registry for checkpointing, optimization and gradient checks.
  std::vector<std::pair<std::string, Tensor>> named_params() const {
    std::vector<std::pair<std::string, Tensor>> v;
    v.emplace_back("enc.w1", enc_w1);
    v.emplace_back("enc.b1", enc_b1);
    v.emplace_back("enc.w2", enc_w2);
    v.emplace_back("enc.b2", enc_b2);
    v.emplace_back("enc.w3", enc_w3);
    v.emplace_back("enc.b3", enc_b3);
    for (size_t l = 0; l < blocks.size(); ++l) {
      const auto& b = blocks[l];
      const std::string p = "block" + std::to_string(l) + ".";
      v.emplace_back(p + "self_wq", b.self_wq);
      v.emplace_back(p + "self_wk", b.self_wk);
      v.emplace_back(p + "self_wv", b.self_wv);
      v.emplace_back(p + "self_wo", b.self_wo);
      v.emplace_back(p + "self_bo", b.self_bo);
      v.emplace_back(p + "lt_wk", b.lt.w_k);
      v.emplace_back(p + "lt_wv", b.lt.w_v);
      v.emplace_back(p + "lt_wo", b.lt_wo);
      v.emplace_back(p + "lt_bo", b.lt_bo);
      v.emplace_back(p + "st_wk", b.st.w_k);
      v.emplace_back(p + "st_wv", b.st.w_v);
      v.emplace_back(p + "st_wo", b.st_wo);
      v.emplace_back(p + "st_bo", b.st_bo);
      v.emplace_back(p + "w_id", b.idw.w_id);
      v.emplace_back(p + "w_g", b.idw.w_g);
      v.emplace_back(p + "ffn_w1", b.ffn_w1);
      v.emplace_back(p + "ffn_b1", b.ffn_b1);
      v.emplace_back(p + "ffn_dw", b.ffn_dw);
      v.emplace_back(p + "ffn_dwb", b.ffn_dwb);
      v.emplace_back(p + "ffn_w2", b.ffn_w2);
      v.emplace_back(p + "ffn_b2", b.ffn_b2);
      v.emplace_back(p + "ln1_g", b.ln1_g);
      v.emplace_back(p + "ln1_b", b.ln1_b);
      v.emplace_back(p + "ln2_g", b.ln2_g);
      v.emplace_back(p + "ln2_b", b.ln2_b);
      v.emplace_back(p + "ln3_g", b.ln3_g);
      v.emplace_back(p + "ln3_b", b.ln3_b);
      v.emplace_back(p + "ln4_g", b.ln4_g);
      v.emplace_back(p + "ln4_b", b.ln4_b);
    }
    for (size_t l = 0; l < dec_fuse.size(); ++l)
      v.emplace_back("dec.fuse" + std::to_string(l), dec_fuse[l]);
    v.emplace_back("dec.fuse_b", dec_fuse_b);
    for (size_t s = 0; s < dec_stages.size(); ++s) {
      v.emplace_back("dec.stage" + std::to_string(s) + "_w", dec_stages[s].first);
      v.emplace_back("dec.stage" + std::to_string(s) + "_b", dec_stages[s].second);
    }
    v.emplace_back("dec.out_w", dec_out_w);
    v.emplace_back("dec.out_b", dec_out_b);
    for (size_t i = 0; i < rel_bias.size(); ++i)
      v.emplace_back("relbias" + std::to_string(i), rel_bias[i].table);
    v.emplace_back("bank.table", bank.table);
    return v;
  }

  bool is_encoder_param(const std::string& name) const { return name.rfind("enc.", 0) == 0; }

  // Parameter count of the depth-L' sub-network (shared prefix + shared
  // encoder/decoder + bank + bias tables).
  size_t param_count(int sub_depth) const {
    size_t n = 0;
    for (const auto& [name, t] : named_params()) {
      if (name.rfind("block", 0) == 0) {
        int l = std::stoi(name.substr(5));
        if (l >= sub_depth) continue;
      }
      if (name.rfind("relbias", 0) == 0 && cfg.rel_bias_per_layer) {
        int l = std::stoi(name.substr(7));
        if (l >= sub_depth) continue;
      }
      if (name.rfind("dec.fuse", 0) == 0 && name != "dec.fuse_b") {
        int l = std::stoi(name.substr(8));
        if (l >= sub_depth) continue;
      }
      n += t.size();
    }
    return n;
  }

  void zero_grads() const {
    for (auto& [name, t] : named_params()) t.zero_grad();
  }
};

// Per-video rolling state: long-term memory inserted per delta frames plus
// the short-term previous-frame entries, both pre-projected per layer.
struct MemoryStore {
  int delta = 5;
  int n_short = 1;
  std::vector<int> stored_frames;                 // long-term frame indices
  std::vector<std::vector<MemFrameEntry>> lt;     // [layer][stored frame]
  std::vector<std::deque<MemFrameEntry>> st;      // [layer][recent frames, oldest first]
  size_t peak_cached_bytes = 0;

  MemoryStore() = default;
  MemoryStore(int layers, int delta_, int n_short_)
      : delta(delta_), n_short(n_short_), lt(layers), st(layers) {}

  bool empty() const { return stored_frames.empty(); }

  size_t cached_bytes() const {
    size_t n = 0;
    auto count = [&](const MemFrameEntry& f) {
      n += (f.k.size() + f.v.size() + f.e.size()) * sizeof(double);
    };
    for (const auto& layer : lt)
      for (const auto& f : layer) count(f);
    for (const auto& layer : st)
      for (const auto& f : layer) count(f);
    return n;
  }
};

// Per-frame forward artifacts. lt_in/st_in are the normalized features that
// feed the long-/short-term attentions; memory insertion projects exactly
// these, which keeps query/key spaces siamese.
struct FramePass {
  int depth_run = 0;
  std::vector<Tensor> lt_in;   // per layer
  std::vector<Tensor> st_in;   // per layer
  std::vector<Tensor> block_out;
  std::vector<Tensor> logits;  // [H*W, M] per reported depth
  std::vector<int> logit_depths;

  const Tensor& logits_at_depth(int d) const {
    for (size_t i = 0; i < logit_depths.size(); ++i)
      if (logit_depths[i] == d) return logits[i];
    throw std::logic_error("FramePass: no logits recorded for depth " + std::to_string(d));
  }
};

inline Tensor encode_frame(const Tensor& image, const ModelParams& p) {
  if (image.ndim() != 3 || image.dim(2) != 3)
    throw std::invalid_argument("encode_frame: need [H,W,3] image");
  if (image.dim(0) % p.cfg.stride != 0 || image.dim(1) % p.cfg.stride != 0)
    throw std::invalid_argument("encode_frame: image size must divide by stride " +
                                std::to_string(p.cfg.stride));
  auto strides = detail::encoder_strides(p.cfg.stride);
  Tensor x = gelu(conv2d(image, p.enc_w1, p.enc_b1, strides[0], 1));
  x = gelu(conv2d(x, p.enc_w2, p.enc_b2, strides[1], 1));
  x = gelu(conv2d(x, p.enc_w3, p.enc_b3, strides[2], 1));
  const int gh = x.dim(0), gw = x.dim(1);
  return reshape(x, {gh * gw, p.cfg.channels});
}

// One S-LSTT block: pre-norm residual self-attention, long-term attention,
// short-term attention, then the FFN with a depth-wise conv in the middle.
// `self_e` is the current frame's ID embedding and is only consulted when a
// memory side is empty (first-frame self-attention fallback).
inline Tensor block_forward(const Tensor& x, const Tensor& pos,
                            const std::vector<MemFrameEntry>& mem_l,
                            const std::vector<MemFrameEntry>& short_l, const Tensor& self_e,
                            const SLSTTBlockParams& b, const RelPosBias& bias,
                            const ModelConfig& cfg, Tensor* lt_in_out = nullptr,
                            Tensor* st_in_out = nullptr) {
  const int heads = cfg.heads, gh = cfg.grid_h(), gw = cfg.grid_w();
  // self-attention; sine embedding enters queries/keys only
  Tensor h = layer_norm(x, b.ln1_g, b.ln1_b);
  Tensor hq = pos.size() ? add(h, pos) : h;
  Tensor sa = multihead_attention(matmul(hq, b.self_wq), matmul(hq, b.self_wk),
                                  matmul(h, b.self_wv), heads);
  Tensor x1 = add(x, add_rowvec(matmul(sa, b.self_wo), b.self_bo));

  // long-term attention over memory (or self when none)
  Tensor lt_in = layer_norm(x1, b.ln2_g, b.ln2_b);
  if (lt_in_out) *lt_in_out = lt_in;
  Tensor lt_out;
  if (!mem_l.empty()) {
    lt_out = long_term_attention(lt_in, mem_l, b.idw, b.lt, heads);
  } else {
    if (self_e.size() == 0)
      throw std::logic_error("block_forward: empty memory and no self ID embedding");
    MemFrameEntry self = project_memory_frame(0, lt_in, self_e, b.lt);
    lt_out = long_term_attention(lt_in, {self}, b.idw, b.lt, heads);
  }
  Tensor x2 = add(x1, add_rowvec(matmul(lt_out, b.lt_wo), b.lt_bo));

  // short-term windowed attention over previous frames (or self)
  Tensor st_in = layer_norm(x2, b.ln3_g, b.ln3_b);
  if (st_in_out) *st_in_out = st_in;
  Tensor st_out;
  if (!short_l.empty()) {
    st_out = short_term_attention(st_in, gh, gw, short_l, b.idw, b.st, &bias, cfg.lambda, heads);
  } else {
    if (self_e.size() == 0)
      throw std::logic_error("block_forward: empty short-term state and no self ID embedding");
    MemFrameEntry self = project_memory_frame(0, st_in, self_e, b.st);
    st_out = short_term_attention(st_in, gh, gw, {self}, b.idw, b.st, &bias, cfg.lambda, heads);
  }
  Tensor x3 = add(x2, add_rowvec(matmul(st_out, b.st_wo), b.st_bo));

  // FFN: C -> 4C, GELU, depth-wise conv k=5, 4C -> C
  Tensor f = layer_norm(x3, b.ln4_g, b.ln4_b);
  f = gelu(add_rowvec(matmul(f, b.ffn_w1), b.ffn_b1));
  f = reshape(f, {gh, gw, 4 * cfg.channels});
  f = depthwise_conv2d(f, b.ffn_dw, b.ffn_dwb);
  f = reshape(f, {gh * gw, 4 * cfg.channels});
  f = add_rowvec(matmul(f, b.ffn_w2), b.ffn_b2);
  return add(x3, f);
}

// Decoder over the block outputs available at some depth; weights are shared
// across depths (fusion is a per-level projection sum, so a depth-d input
// uses exactly the first d fusion matrices).
inline Tensor decode_logits(const std::vector<Tensor>& block_outs, const ModelParams& p) {
  if (block_outs.empty()) throw std::invalid_argument("decode_logits: no feature levels");
  const int c = p.cfg.channels, gh = p.cfg.grid_h(), gw = p.cfg.grid_w();
  Tensor fused = add_rowvec(matmul(block_outs[0], p.dec_fuse[0]), p.dec_fuse_b);
  for (size_t i = 1; i < block_outs.size(); ++i)
    fused = add(fused, matmul(block_outs[i], p.dec_fuse[i]));
  Tensor g = reshape(fused, {gh, gw, c});
  for (const auto& [w, b] : p.dec_stages) {
    g = gelu(conv2d(g, w, b, 1, 1));
    g = upsample2x_nearest(g);
  }
  Tensor logits = conv2d(g, p.dec_out_w, p.dec_out_b, 1, 0);
  return reshape(logits, {logits.dim(0) * logits.dim(1), p.cfg.m_total});
}

// Runs exactly `depth` blocks. In training mode, logits are produced for
// every depth 1..depth (scalable supervision); otherwise only for `depth`.
inline FramePass model_forward(const Tensor& image, const MemoryStore& mem,
                               const ModelParams& p, int depth, bool train_mode,
                               const Tensor& self_e = Tensor()) {
  if (depth < 1 || depth > p.cfg.depth)
    throw std::invalid_argument("model_forward: depth " + std::to_string(depth) +
                                " outside [1," + std::to_string(p.cfg.depth) + "]");
  op_counter().slstt_forwards += 1;
  FramePass fp;
  fp.depth_run = depth;
  Tensor x = encode_frame(image, p);
  Tensor pos = p.cfg.use_sine_pos
                   ? sine_pos_embed(p.cfg.grid_h(), p.cfg.grid_w(), p.cfg.channels)
                   : Tensor();
  static const std::vector<MemFrameEntry> kEmpty;
  for (int l = 0; l < depth; ++l) {
    Tensor lt_in, st_in;
    const auto& mem_l = mem.lt.empty() ? kEmpty : mem.lt[l];
    std::vector<MemFrameEntry> short_l;
    if (!mem.st.empty())
      short_l.assign(mem.st[l].begin(), mem.st[l].end());
    x = block_forward(x, pos, mem_l, short_l, self_e, p.blocks[l], p.bias_for_layer(l), p.cfg,
                      &lt_in, &st_in);
    fp.lt_in.push_back(lt_in);
    fp.st_in.push_back(st_in);
    fp.block_out.push_back(x);
    if (train_mode || l == depth - 1) {
      std::vector<Tensor> levels(fp.block_out.begin(), fp.block_out.end());
      fp.logits.push_back(decode_logits(levels, p));
      fp.logit_depths.push_back(l + 1);
    }
  }
  return fp;
}

// Inserts the frame into memory: long-term iff (t-1) mod delta == 0 (frame
// indices are 1-based, so the reference frame is always kept), short-term
// always replaced with the newest n frames.
inline void update_memory(MemoryStore& store, const FramePass& fp, const Tensor& frame_e,
                          int frame_index, const ModelParams& p) {
  const bool keep_long = (frame_index - 1) % store.delta == 0;
  for (int l = 0; l < fp.depth_run; ++l) {
    if (keep_long)
      store.lt[l].push_back(project_memory_frame(frame_index, fp.lt_in[l], frame_e, p.blocks[l].lt));
    store.st[l].push_back(project_memory_frame(frame_index, fp.st_in[l], frame_e, p.blocks[l].st));
    while (static_cast<int>(store.st[l].size()) > store.n_short) store.st[l].pop_front();
  }
  if (keep_long) store.stored_frames.push_back(frame_index);
  store.peak_cached_bytes = std::max(store.peak_cached_bytes, store.cached_bytes());
}

}  // namespace aost
