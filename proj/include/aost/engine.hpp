#pragma once

// Sequential training loop, frame-by-frame inference with run-time depth
// selection, and the per-object post-ensemble baseline.

#include <atomic>
#include <thread>

#include "aost/checkpoint.hpp"
#include "aost/losses.hpp"
#include "aost/metrics.hpp"
#include "aost/model.hpp"
#include "aost/synth.hpp"

namespace aost {

struct TrainConfig {
  int clip_len = 5;
  int delta_train = 2;
  int delta_eval = 5;
  int steps = 2000;
  double lr_start = 2e-4;
  double lr_end = 2e-5;
  double lr_power = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.07;
  double encoder_lr_scale = 0.1;
  bool teacher_forcing = false;     // feed GT instead of predicted masks to memory
  int teacher_forcing_until = 0;    // feed GT during the first N steps regardless
  int bootstrap_warmup = 1000;      // steps over which the CE keep-ratio anneals to its target
  uint64_t seed = 1;
  LossConfig loss;

  void validate() const {
    if (clip_len < 2) throw std::invalid_argument("TrainConfig: clip length must be >= 2");
    if (delta_train < 1 || delta_eval < 1)
      throw std::invalid_argument("TrainConfig: delta must be >= 1");
    if (steps < 1) throw std::invalid_argument("TrainConfig: steps must be >= 1");
    if (bootstrap_warmup < 0)
      throw std::invalid_argument("TrainConfig: bootstrap warmup must be >= 0");
    loss.validate();
  }

  double lr_at(int step) const {
    const double frac = std::min(1.0, static_cast<double>(step) / steps);
    return lr_end + (lr_start - lr_end) * std::pow(1.0 - frac, lr_power);
  }

  // Early in training only a dense CE signal escapes the uniform-prediction
  // plateau, so the hard-pixel fraction tightens from 1 to its target.
  double bootstrap_ratio_at(int step) const {
    if (bootstrap_warmup == 0 || step >= bootstrap_warmup) return loss.bootstrap_ratio;
    const double f = static_cast<double>(step) / bootstrap_warmup;
    return 1.0 + f * (loss.bootstrap_ratio - 1.0);
  }
};

// Decoupled-weight-decay adaptive moments, with a reduced encoder rate.
struct AdamW {
  std::map<std::string, std::vector<double>> m, v;
  long long t = 0;

  void step(const ModelParams& params, double lr, const TrainConfig& cfg) {
    ++t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (auto& [name, p] : params.named_params()) {
      if (!p.has_grad()) continue;
      auto& g = p.grad();
      auto& mm = m[name];
      auto& vv = v[name];
      if (mm.empty()) mm.assign(p.size(), 0.0);
      if (vv.empty()) vv.assign(p.size(), 0.0);
      const double plr = params.is_encoder_param(name) ? lr * cfg.encoder_lr_scale : lr;
      for (size_t i = 0; i < p.size(); ++i) {
        mm[i] = cfg.beta1 * mm[i] + (1 - cfg.beta1) * g[i];
        vv[i] = cfg.beta2 * vv[i] + (1 - cfg.beta2) * g[i] * g[i];
        const double mhat = mm[i] / bc1, vhat = vv[i] / bc2;
        p[i] -= plr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * p[i]);
      }
    }
  }
};

namespace detail {

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Argmax over decoded target probabilities; ties go to the lowest label.
inline MaskMap argmax_mask(const Tensor& probs, int h, int w) {
  if (probs.ndim() != 2 || probs.dim(0) != h * w)
    throw std::invalid_argument("argmax_mask: probs rows must equal h*w");
  const int n = probs.dim(1);
  MaskMap m(h, w, 0);
  for (int i = 0; i < h * w; ++i) {
    int best = 0;
    double bv = probs[static_cast<size_t>(i) * n];
    for (int j = 1; j < n; ++j) {
      const double pv = probs[static_cast<size_t>(i) * n + j];
      if (pv > bv) {
        bv = pv;
        best = j;
      }
    }
    m.labels[i] = best;
  }
  return m;
}

}  // namespace detail

struct TrainStepResult {
  double loss = 0;
  std::vector<double> per_depth;  // averaged over predicted frames
};

// One optimizer update from one clip: frame 1 enters memory with its GT mask,
// frames 2..T are predicted sequentially at full depth with all-depth
// supervision; memory sees predicted masks unless teacher forcing is on.
inline TrainStepResult train_step(const VideoSample& clip, ModelParams& params, AdamW& opt,
                                  const TrainConfig& cfg, int step) {
  cfg.validate();
  const int T = static_cast<int>(clip.frames.size());
  if (T < 2) throw std::invalid_argument("train_step: clip needs at least 2 frames");
  const int n_labels = clip.spec.n_obj() + 1;  // background occupies a slot too
  const int L = params.cfg.depth;
  const auto weights = depth_weights(cfg.loss.alpha, L);
  LossConfig lc = cfg.loss;
  lc.bootstrap_ratio = cfg.bootstrap_ratio_at(step);

  params.zero_grads();
  TrainStepResult res;
  res.per_depth.assign(L, 0.0);
  {
    Tape tape;
    Assignment assign =
        assign_identities(n_labels, params.bank, detail::mix_seed(cfg.seed, step));
    MemoryStore mem(L, cfg.delta_train, params.cfg.n_short);
    Tensor e1 = id_embed(clip.masks[0], assign, params.bank);
    FramePass first = model_forward(clip.frames[0], mem, params, L, false, e1);
    update_memory(mem, first, e1, 1, params);

    Tensor total;
    for (int t = 2; t <= T; ++t) {
      FramePass fp = model_forward(clip.frames[t - 1], mem, params, L, true);
      Tensor frame_loss;
      Tensor final_probs;
      for (int d = 1; d <= L; ++d) {
        Tensor probs = id_decode(fp.logits_at_depth(d), assign);
        Tensor dl = aot_frame_loss(probs, clip.masks[t - 1], lc);
        res.per_depth[d - 1] += dl.value() / (T - 1);
        Tensor term = scale(dl, weights[d - 1]);
        frame_loss = frame_loss.size() ? add(frame_loss, term) : term;
        if (d == L) final_probs = probs;
      }
      total = total.size() ? add(total, frame_loss) : frame_loss;

      const bool feed_gt = cfg.teacher_forcing || step < cfg.teacher_forcing_until;
      const MaskMap mem_mask =
          feed_gt ? clip.masks[t - 1]
                  : detail::argmax_mask(final_probs, clip.spec.h, clip.spec.w);
      Tensor et = id_embed(mem_mask, assign, params.bank);
      update_memory(mem, fp, et, t, params);
    }
    Tensor loss = scale(total, 1.0 / (T - 1));
    res.loss = loss.value();
    tape.backward(loss);
  }
  opt.step(params, cfg.lr_at(step), cfg);
  return res;
}

// Frame-by-frame inference. `run_depth` blocks execute; predictions (and the
// masks fed back into memory) come from the `use_depth` logits, so a pruned
// model and a probed full model produce bit-identical outputs.
inline std::vector<MaskMap> infer_video_probe(const std::vector<Tensor>& frames,
                                              const MaskMap& ref_mask, const ModelParams& params,
                                              int run_depth, int use_depth, int delta,
                                              const Assignment* assign_in = nullptr,
                                              uint64_t assign_seed = 0,
                                              size_t* peak_bytes_out = nullptr) {
  if (frames.empty()) throw std::invalid_argument("infer_video: no frames");
  if (use_depth < 1 || use_depth > run_depth)
    throw std::invalid_argument("infer_video: use_depth outside [1, run_depth]");
  const int h = frames[0].dim(0), w = frames[0].dim(1);
  if (ref_mask.h != h || ref_mask.w != w)
    throw std::invalid_argument("infer_video: reference mask does not match frame size");
  const int n_labels = ref_mask.max_label() + 1;
  if (n_labels > params.bank.m_total)
    throw std::invalid_argument("infer_video: " + std::to_string(n_labels - 1) +
                                " objects exceed bank capacity");
  Assignment assign = assign_in
                          ? *assign_in
                          : assign_identities(n_labels, params.bank, assign_seed);

  std::vector<MaskMap> out = {ref_mask};
  MemoryStore mem(params.cfg.depth, delta, params.cfg.n_short);
  Tensor e1 = id_embed(ref_mask, assign, params.bank);
  FramePass first = model_forward(frames[0], mem, params, run_depth, false, e1);
  update_memory(mem, first, e1, 1, params);

  for (size_t t = 1; t < frames.size(); ++t) {
    if (frames[t].dim(0) != h || frames[t].dim(1) != w)
      throw std::invalid_argument("infer_video: resolution changed at frame " +
                                  std::to_string(t + 1));
    FramePass fp =
        model_forward(frames[t], mem, params, run_depth, /*train_mode=*/use_depth != run_depth);
    Tensor probs = id_decode(fp.logits_at_depth(use_depth), assign);
    MaskMap pred = detail::argmax_mask(probs, h, w);
    Tensor et = id_embed(pred, assign, params.bank);
    update_memory(mem, fp, et, static_cast<int>(t) + 1, params);
    out.push_back(std::move(pred));
  }
  if (peak_bytes_out) *peak_bytes_out = mem.peak_cached_bytes;
  return out;
}

inline std::vector<MaskMap> infer_video(const std::vector<Tensor>& frames, const MaskMap& ref_mask,
                                        const ModelParams& params, int depth, int delta,
                                        const Assignment* assign = nullptr,
                                        uint64_t assign_seed = 0,
                                        size_t* peak_bytes_out = nullptr) {
  return infer_video_probe(frames, ref_mask, params, depth, depth, delta, assign, assign_seed,
                           peak_bytes_out);
}

// Per-object baseline: one full network pass per target with a binary mask,
// merged per pixel by comparing foreground logits (background wins only when
// it beats every target in its own pass). Exists for cost measurement.
inline std::vector<MaskMap> infer_post_ensemble(const std::vector<Tensor>& frames,
                                                const MaskMap& ref_mask, const ModelParams& params,
                                                int depth, int delta, uint64_t assign_seed = 0,
                                                size_t* peak_bytes_out = nullptr) {
  if (frames.empty()) throw std::invalid_argument("infer_post_ensemble: no frames");
  const int h = frames[0].dim(0), w = frames[0].dim(1);
  const int n = ref_mask.max_label();
  if (n < 1) throw std::invalid_argument("infer_post_ensemble: reference mask has no objects");

  struct Pass {
    Assignment assign;
    MaskMap ref;
    MemoryStore mem;
  };
  std::vector<Pass> passes;
  for (int i = 1; i <= n; ++i) {
    Pass p{assign_identities(2, params.bank, detail::mix_seed(assign_seed, i)), MaskMap(h, w, 0),
           MemoryStore(params.cfg.depth, delta, params.cfg.n_short)};
    for (size_t j = 0; j < p.ref.labels.size(); ++j)
      p.ref.labels[j] = ref_mask.labels[j] == i ? 1 : 0;
    passes.push_back(std::move(p));
  }
  for (auto& p : passes) {
    Tensor e1 = id_embed(p.ref, p.assign, params.bank);
    FramePass first = model_forward(frames[0], p.mem, params, depth, false, e1);
    update_memory(p.mem, first, e1, 1, params);
  }

  std::vector<MaskMap> out = {ref_mask};
  for (size_t t = 1; t < frames.size(); ++t) {
    std::vector<Tensor> fg(n), bg(n);
    for (int i = 0; i < n; ++i) {
      auto& p = passes[i];
      FramePass fp = model_forward(frames[t], p.mem, params, depth, false);
      const Tensor& logits = fp.logits_at_depth(depth);
      bg[i] = slice_cols(logits, p.assign.slots[0], p.assign.slots[0] + 1);
      fg[i] = slice_cols(logits, p.assign.slots[1], p.assign.slots[1] + 1);
      // each pass keeps tracking its own binary prediction
      Tensor bin = id_decode(logits, p.assign);
      MaskMap pred = detail::argmax_mask(bin, h, w);
      Tensor et = id_embed(pred, p.assign, params.bank);
      update_memory(p.mem, fp, et, static_cast<int>(t) + 1, params);
    }
    MaskMap merged(h, w, 0);
    for (int px = 0; px < h * w; ++px) {
      double bg_mean = 0;
      for (int i = 0; i < n; ++i) bg_mean += bg[i][px];
      bg_mean /= n;
      int best = 0;
      double bv = bg_mean;
      for (int i = 0; i < n; ++i)
        if (fg[i][px] > bv) {
          bv = fg[i][px];
          best = i + 1;
        }
      merged.labels[px] = best;
    }
    out.push_back(std::move(merged));
  }
  if (peak_bytes_out) {
    *peak_bytes_out = 0;
    for (const auto& p : passes) *peak_bytes_out += p.mem.peak_cached_bytes;
  }
  return out;
}

inline int worker_count() {
  if (const char* env = std::getenv("AOST_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

// Per-video J/F over a dataset; videos are independent and distributed over
// AOST_THREADS workers.
inline std::vector<EvalResult> eval_dataset(const std::vector<VideoSample>& samples,
                                            const ModelParams& params, int depth, int delta,
                                            int threads = 0) {
  if (threads < 1) threads = worker_count();
  std::vector<EvalResult> results(samples.size());
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
      const auto& v = samples[i];
      auto pred = infer_video(v.frames, v.masks[0], params, depth, delta);
      results[i] = compute_jf(pred, v.masks);
      results[i].video_id = v.video_id;
    }
  };
  if (threads <= 1 || samples.size() <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return results;
}

inline std::string train_config_text(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "clip_len=" << cfg.clip_len << "\ndelta_train=" << cfg.delta_train
     << "\ndelta_eval=" << cfg.delta_eval << "\nsteps=" << cfg.steps
     << "\nlr_start=" << cfg.lr_start << "\nlr_end=" << cfg.lr_end
     << "\nlr_power=" << cfg.lr_power << "\nweight_decay=" << cfg.weight_decay
     << "\nencoder_lr_scale=" << cfg.encoder_lr_scale
     << "\nteacher_forcing=" << (cfg.teacher_forcing ? 1 : 0)
     << "\nteacher_forcing_until=" << cfg.teacher_forcing_until << "\nseed=" << cfg.seed
     << "\nce_weight=" << cfg.loss.ce_weight << "\njaccard_weight=" << cfg.loss.jaccard_weight
     << "\nbootstrap_ratio=" << cfg.loss.bootstrap_ratio
     << "\nbootstrap_warmup=" << cfg.bootstrap_warmup << "\nalpha=" << cfg.loss.alpha << "\n";
  return os.str();
}

// Full training run over a dataset of clips. Writes config.txt, loss.csv
// (step, loss, per-depth losses) and model.ckpt into `out_dir`; clip windows
// are sampled uniformly per step from a seeded generator.
inline std::vector<double> train_run(const std::vector<VideoSample>& data, ModelParams& params,
                                     const TrainConfig& cfg, const std::string& out_dir,
                                     std::ostream* log = nullptr) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_run: empty dataset");
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream conf(out_dir + "/config.txt", std::ios::trunc);
    conf << train_config_text(cfg);
    for (const auto& [k, v] : params.cfg.to_kv()) conf << "model_" << k << "=" << v << "\n";
  }
  std::ofstream loss_csv(out_dir + "/loss.csv", std::ios::trunc);
  loss_csv << "step,loss";
  for (int d = 1; d <= params.cfg.depth; ++d) loss_csv << ",depth" << d;
  loss_csv << "\n";

  std::mt19937_64 rng(cfg.seed);
  AdamW opt;
  std::vector<double> losses;
  for (int step = 0; step < cfg.steps; ++step) {
    const VideoSample& v = data[rng() % data.size()];
    const int T = static_cast<int>(v.frames.size());
    if (T < 2) throw std::invalid_argument("train_run: video " + v.video_id + " has < 2 frames");
    const int len = std::min(cfg.clip_len, T);
    const int start = static_cast<int>(rng() % static_cast<uint64_t>(T - len + 1));
    VideoSample clip;
    clip.video_id = v.video_id;
    clip.spec = v.spec;
    clip.spec.frames = len;
    clip.frames.assign(v.frames.begin() + start, v.frames.begin() + start + len);
    clip.masks.assign(v.masks.begin() + start, v.masks.begin() + start + len);

    TrainStepResult r = train_step(clip, params, opt, cfg, step);
    losses.push_back(r.loss);
    loss_csv << step << "," << r.loss;
    for (double d : r.per_depth) loss_csv << "," << d;
    loss_csv << "\n";
    if (step % 200 == 0 || step == cfg.steps - 1) {
      loss_csv.flush();
      save_checkpoint(out_dir + "/model.ckpt", params);
      if (log)
        (*log) << "step " << step << "/" << cfg.steps << " loss " << r.loss << std::endl;
    }
  }
  save_checkpoint(out_dir + "/model.ckpt", params);
  return losses;
}

inline EvalResult mean_result(const std::vector<EvalResult>& rs) {
  EvalResult m;
  m.video_id = "mean";
  if (rs.empty()) return m;
  for (const auto& r : rs) {
    m.j += r.j;
    m.f += r.f;
  }
  m.j /= rs.size();
  m.f /= rs.size();
  m.jf = (m.j + m.f) / 2;
  return m;
}

}  // namespace aost
