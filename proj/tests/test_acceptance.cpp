// Acceptance gate: one test case per criterion, each printing a PASS/FAIL
// line. Criterion 7 (the full training run) is tagged [training] and runs as
// its own ctest entry with a long timeout.

#include <catch2/catch_amalgamated.hpp>

#include <iostream>
#include <random>

#include "aost/bench.hpp"
#include "aost/engine.hpp"
#include "support/gradcheck.hpp"

using namespace aost;

namespace {

void report(int criterion, const std::string& name, bool ok) {
  std::cout << "[criterion " << criterion << "] " << name << ": " << (ok ? "PASS" : "FAIL")
            << std::endl;
  CHECK(ok);
}

ModelConfig small_config(int depth = 3) {
  ModelConfig cfg;
  cfg.image_h = 16;
  cfg.image_w = 16;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.lambda = 3;
  cfg.depth = depth;
  cfg.m_total = 8;
  cfg.stride = 4;
  cfg.enc_mid = 4;
  cfg.init_seed = 7;
  return cfg;
}

MaskMap random_mask(int h, int w, int n, std::mt19937_64& rng) {
  MaskMap mk(h, w);
  for (auto& v : mk.labels) v = static_cast<int>(rng() % n);
  mk.labels[0] = 0;
  return mk;
}

std::vector<FramePass> rollout(const ModelParams& p, const std::vector<Tensor>& frames,
                               const std::vector<MaskMap>& masks, const Assignment& assign,
                               int depth, int delta) {
  MemoryStore mem(p.cfg.depth, delta, p.cfg.n_short);
  std::vector<FramePass> passes;
  for (size_t t = 0; t < frames.size(); ++t) {
    Tensor e = id_embed(masks[t], assign, p.bank);
    FramePass fp = model_forward(frames[t], mem, p, depth, true, mem.empty() ? e : Tensor());
    update_memory(mem, fp, e, static_cast<int>(t) + 1, p);
    passes.push_back(std::move(fp));
  }
  return passes;
}

std::vector<VideoSample> make_set(int videos, int frames, int n_obj, int size, uint64_t seed) {
  std::vector<VideoSample> out;
  for (int i = 0; i < videos; ++i) {
    VideoSample v =
        generate_sequence(random_scene(size, size, frames, n_obj, detail::mix_seed(seed, i)));
    char id[32];
    std::snprintf(id, sizeof(id), "vid_%04d", i);
    v.video_id = id;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

TEST_CASE("criterion 1: gradient integrity over all parameter groups") {
  ModelParams p(small_config());
  std::mt19937_64 rng(101);
  std::vector<Tensor> frames = {aost::testing::random_tensor({16, 16, 3}, rng, 0, 1),
                                aost::testing::random_tensor({16, 16, 3}, rng, 0, 1)};
  std::vector<MaskMap> masks = {random_mask(16, 16, 3, rng), random_mask(16, 16, 3, rng)};
  Assignment assign = assign_identities(3, p.bank, 5);  // 2 objects + background

  std::vector<std::pair<std::string, Tensor>> params;
  for (auto& [name, t] : p.named_params()) params.emplace_back(name, t);
  auto res = aost::testing::finite_diff_check(
      params,
      [&]() {
        auto passes = rollout(p, frames, masks, assign, 3, 2);
        Tensor total;
        for (const auto& fp : passes)
          for (const auto& l : fp.logits) {
            Tensor s = mean_all(mul(l, l));
            total = total.size() ? add(total, s) : s;
          }
        return total;
      },
      1e-5, 2);
  INFO("worst " << res.worst << " rel err " << res.max_rel_err);
  report(1, "finite-difference check over every parameter group", res.ok(1e-4));
}

TEST_CASE("criterion 2: depth-prefix logits are bit-identical over a 5-frame rollout") {
  ModelParams p(small_config());
  std::mt19937_64 rng(202);
  std::vector<Tensor> frames;
  std::vector<MaskMap> masks;
  for (int t = 0; t < 5; ++t) {
    frames.push_back(aost::testing::random_tensor({16, 16, 3}, rng, 0, 1));
    masks.push_back(random_mask(16, 16, 3, rng));
  }
  Assignment assign = assign_identities(3, p.bank, 9);
  auto full = rollout(p, frames, masks, assign, 3, 2);
  bool ok = true;
  for (int k = 1; k <= 2; ++k) {
    auto sub = rollout(p, frames, masks, assign, k, 2);
    for (size_t t = 0; t < frames.size(); ++t)
      ok = ok && sub[t].logits_at_depth(k).data() == full[t].logits_at_depth(k).data();
  }
  report(2, "pruned-depth logits equal full-run intermediate logits bitwise", ok);
}

TEST_CASE("criterion 3: depth loss weights") {
  auto w = depth_weights(2.0, 3);
  bool ok = w[0] == 1.0 / 7 && w[1] == 2.0 / 7 && w[2] == 4.0 / 7;
  for (double alpha : {1.0, 2.0, 4.0, 8.0}) {
    double denom = alpha + alpha * alpha + alpha * alpha * alpha;
    auto ws = depth_weights(alpha, 3);
    double p = alpha;
    for (int l = 0; l < 3; ++l, p *= alpha) ok = ok && ws[l] == p / denom;
    double sum = ws[0] + ws[1] + ws[2];
    ok = ok && std::abs(sum - 1.0) <= 1e-15;
  }
  report(3, "alpha-weighted depth losses (1/7, 2/7, 4/7) and alpha sweep", ok);
}

TEST_CASE("criterion 4: identity mechanism against the dense product oracle") {
  std::mt19937_64 rng(404);
  bool embed_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    int h = 1 + static_cast<int>(rng() % 4), w = 1 + static_cast<int>(rng() % 4);
    int n = 1 + static_cast<int>(rng() % 3), m = n + static_cast<int>(rng() % (6 - n));
    IdentityBank bank(m, 1, 3, rng());
    Assignment a = assign_identities(n, bank, rng());
    MaskMap mask = random_mask(h, w, n, rng);
    Tensor e = id_embed(mask, a, bank);
    // dense one-hot * selection * bank product
    const int hw = h * w, c = bank.channels;
    Tensor y({hw, n});
    for (int i = 0; i < hw; ++i) y[i * n + mask.labels[i]] = 1.0;
    Tensor sel({n, m});
    for (int i = 0; i < n; ++i) sel[i * m + a.slots[i]] = 1.0;
    Tensor oracle = matmul(matmul(y, sel), reshape(bank.table, {m, c}));
    for (size_t i = 0; i < e.size(); ++i)
      embed_ok = embed_ok && std::abs(e[i] - oracle[i]) <= 1e-12;
  }

  // end-to-end relabeling equivariance on a briefly trained model
  ModelParams p(small_config(2));
  AdamW opt;
  TrainConfig tc;
  tc.clip_len = 3;
  tc.steps = 30;
  tc.seed = 3;
  auto clips = make_set(4, 3, 2, 16, 11);
  for (int s = 0; s < 30; ++s) train_step(clips[s % clips.size()], p, opt, tc, s);

  VideoSample vid = generate_sequence(random_scene(16, 16, 4, 3, 555));
  Assignment a = assign_identities(4, p.bank, 21);
  const int pi[4] = {0, 2, 3, 1};
  Assignment ap = a;
  for (int l = 0; l < 4; ++l) ap.slots[pi[l]] = a.slots[l];
  MaskMap ref_p = vid.masks[0];
  for (auto& v : ref_p.labels) v = pi[v];
  auto out = infer_video(vid.frames, vid.masks[0], p, 2, 2, &a);
  auto out_p = infer_video(vid.frames, ref_p, p, 2, 2, &ap);
  bool equi_ok = true;
  for (size_t t = 0; t < out.size(); ++t)
    for (size_t i = 0; i < out[t].labels.size(); ++i)
      equi_ok = equi_ok && out_p[t].labels[i] == pi[out[t].labels[i]];

  report(4, "ID embedding oracle (1e-12) and pixel-exact relabeling equivariance",
         embed_ok && equi_ok);
}

TEST_CASE("criterion 5: attention oracles") {
  std::mt19937_64 rng(505);
  const int a = 6, b = 5, c = 8, heads = 2;
  bool ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor q = aost::testing::random_tensor({a, c}, rng), k = aost::testing::random_tensor({b, c}, rng);
    Tensor v = aost::testing::random_tensor({b, c}, rng), e = aost::testing::random_tensor({b, c}, rng);
    LayerIDWeights w{aost::testing::random_tensor({c, c}, rng),
                     aost::testing::random_tensor({c, 1}, rng)};
    Tensor got = att_id_layerwise(q, k, v, e, w, heads);
    // dense formula: Att(Q, K*sigma(E W_G), V + E W_ID), per head
    Tensor gate = gate_activation(matmul(e, w.w_g));
    Tensor kg = mul_colvec(k, gate);
    Tensor vo = add(v, matmul(e, w.w_id));
    const int hc = c / heads;
    const double s = 1.0 / std::sqrt(static_cast<double>(hc));
    for (int h = 0; h < heads; ++h)
      for (int i = 0; i < a; ++i) {
        std::vector<double> logits(b);
        double mx = -1e300;
        for (int j = 0; j < b; ++j) {
          double dot = 0;
          for (int d = 0; d < hc; ++d) dot += q[i * c + h * hc + d] * kg[j * c + h * hc + d];
          logits[j] = dot * s;
          mx = std::max(mx, logits[j]);
        }
        double z = 0;
        for (int j = 0; j < b; ++j) z += std::exp(logits[j] - mx);
        for (int d = 0; d < hc; ++d) {
          double out = 0;
          for (int j = 0; j < b; ++j)
            out += std::exp(logits[j] - mx) / z * vo[j * c + h * hc + d];
          ok = ok && std::abs(out - got[i * c + h * hc + d]) <= 1e-12;
        }
      }
  }

  // short-term over a full window with zero bias equals long-term attention
  bool st_ok = true;
  for (int trial = 0; trial < 5; ++trial) {
    const int gh = 3, gw = 3, hw = gh * gw;
    Tensor x = aost::testing::random_tensor({hw, c}, rng);
    Tensor e = aost::testing::random_tensor({hw, c}, rng);
    LayerIDWeights w{aost::testing::random_tensor({c, c}, rng),
                     aost::testing::random_tensor({c, 1}, rng)};
    ProjPair proj{aost::testing::random_tensor({c, c}, rng),
                  aost::testing::random_tensor({c, c}, rng)};
    MemFrameEntry prev = project_memory_frame(1, aost::testing::random_tensor({hw, c}, rng),
                                              e, proj);
    const int lambda = 5;  // window covers the whole 3x3 grid
    RelPosBias zero_bias(lambda, heads);
    Tensor st = short_term_attention(x, gh, gw, {prev}, w, proj, &zero_bias, lambda, heads);
    Tensor lt = long_term_attention(x, {prev}, w, proj, heads);
    for (size_t i = 0; i < st.size(); ++i) st_ok = st_ok && std::abs(st[i] - lt[i]) <= 1e-10;
  }

  // gate activation at zero is exactly one
  Tensor zero({3, 1}, 0.0);
  Tensor g = gate_activation(zero);
  bool gate_ok = g[0] == 1.0 && g[1] == 1.0 && g[2] == 1.0;

  report(5, "gated attention oracle, windowed/global agreement, unit gate at zero",
         ok && st_ok && gate_ok);
}

TEST_CASE("criterion 6: multi-object cost flatness") {
  ModelParams p{ModelConfig{}};  // desk defaults: 64x64, C=32, L=3, M=10
  BenchReport r = bench_object_scaling(p, {1, 2, 4, 8}, 5, 6);
  std::map<int, const BenchRow*> joint, post;
  for (const auto& row : r.rows)
    (row.mode == "joint" ? joint : post)[row.n_objects] = &row;

  std::vector<unsigned long long> jm;
  for (int n : {1, 2, 4, 8}) jm.push_back(joint[n]->macs_per_frame);
  const auto [lo, hi] = std::minmax_element(jm.begin(), jm.end());
  const bool mac_flat = static_cast<double>(*hi - *lo) / static_cast<double>(*lo) < 0.01;
  const double post_ratio =
      static_cast<double>(post[4]->macs_per_frame) / static_cast<double>(post[1]->macs_per_frame);
  const bool post_scales = post_ratio >= 3.9;

  const double joint_wall = joint[8]->fps > 0 ? (joint[1]->fps / joint[8]->fps) : 1e9;
  const bool wall_flat = joint_wall <= 1.3;
  const double post_wall = post[1]->fps / post[8]->fps;
  const bool wall_scales = post_wall >= 4.0;

  INFO("joint MAC spread " << static_cast<double>(*hi - *lo) / static_cast<double>(*lo)
                           << ", post MAC ratio " << post_ratio << ", joint wall x" << joint_wall
                           << ", post wall x" << post_wall);
  report(6, "joint cost flat in N, per-object cost linear in N",
         mac_flat && post_scales && wall_flat && wall_scales);
}

TEST_CASE("criterion 7: depth trade-off after full training", "[training]") {
  auto train_set = make_set(200, 10, 2, 64, 42);
  auto heldout = make_set(20, 6, 2, 64, 777);
  ModelParams params{ModelConfig{}};
  TrainConfig cfg;  // defaults: 2000 steps, clip 5, delta_train 2
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-4;
  cfg.weight_decay = 0.0;
  cfg.teacher_forcing = true;
  cfg.seed = 2;
  train_run(train_set, params, cfg, "acceptance_run", &std::cout);

  EvalResult d1 = mean_result(eval_dataset(heldout, params, 1, cfg.delta_eval));
  EvalResult d3 = mean_result(eval_dataset(heldout, params, 3, cfg.delta_eval));
  std::cout << "held-out J&F: depth1 " << d1.jf << ", depth3 " << d3.jf << std::endl;
  report(7, "held-out accuracy grows with depth and clears the bar",
         d3.jf >= d1.jf && d3.jf >= 0.80);
}

TEST_CASE("criterion 8: metric sanity") {
  MaskMap ref(32, 32, 0);
  MaskMap g(32, 32, 0);
  for (int y = 8; y < 16; ++y)
    for (int x = 8; x < 16; ++x) g.labels[y * 32 + x] = 1;
  EvalResult exact = compute_jf({ref, g}, {ref, g});
  bool ok = exact.j == 1.0 && exact.f == 1.0;

  MaskMap shifted(32, 32, 0);
  for (int y = 8; y < 16; ++y)
    for (int x = 12; x < 20; ++x) shifted.labels[y * 32 + x] = 1;
  EvalResult third = compute_jf({ref, shifted}, {ref, g});
  ok = ok && third.j == 1.0 / 3;
  report(8, "perfect-match and counted-pixel region scores exact", ok);
}

TEST_CASE("criterion 9: determinism") {
  VideoSample clip = generate_sequence(random_scene(16, 16, 3, 2, 99));
  std::vector<double> first, second;
  for (auto* sink : {&first, &second}) {
    ModelParams p(small_config(2));
    AdamW opt;
    TrainConfig tc;
    tc.clip_len = 3;
    tc.seed = 4;
    for (int s = 0; s < 10; ++s) sink->push_back(train_step(clip, p, opt, tc, s).loss);
  }
  const bool loss_ok = first == second;

  namespace fs = std::filesystem;
  auto set_a = make_set(2, 3, 2, 16, 31);
  auto set_b = make_set(2, 3, 2, 16, 31);
  const fs::path da = fs::temp_directory_path() / "aost_det_a";
  const fs::path db = fs::temp_directory_path() / "aost_det_b";
  fs::remove_all(da);
  fs::remove_all(db);
  write_dataset(set_a, da.string());
  write_dataset(set_b, db.string());
  bool bytes_ok = true;
  for (const auto& entry : fs::recursive_directory_iterator(da)) {
    if (!entry.is_regular_file()) continue;
    const fs::path other = db / fs::relative(entry.path(), da);
    std::ifstream fa(entry.path(), std::ios::binary), fb(other, std::ios::binary);
    std::vector<char> ba((std::istreambuf_iterator<char>(fa)), {});
    std::vector<char> bb((std::istreambuf_iterator<char>(fb)), {});
    bytes_ok = bytes_ok && ba == bb && !ba.empty();
  }
  fs::remove_all(da);
  fs::remove_all(db);
  report(9, "bit-identical training losses and byte-identical datasets", loss_ok && bytes_ok);
}
