#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "aost/engine.hpp"
#include "support/gradcheck.hpp"

using namespace aost;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.image_h = 16;
  cfg.image_w = 16;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.lambda = 3;
  cfg.depth = 2;
  cfg.m_total = 8;
  cfg.stride = 4;
  cfg.enc_mid = 4;
  cfg.init_seed = 3;
  return cfg;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.clip_len = 3;
  t.delta_train = 2;
  t.steps = 50;
  t.seed = 11;
  return t;
}

VideoSample tiny_clip(uint64_t seed, int frames = 3, int n_obj = 2) {
  return generate_sequence(random_scene(16, 16, frames, n_obj, seed));
}

}  // namespace

TEST_CASE("train_step rejects short clips and produces finite losses") {
  ModelParams p(tiny_config());
  AdamW opt;
  TrainConfig tc = tiny_train();
  VideoSample one = tiny_clip(1, 1, 1);
  CHECK_THROWS_AS(train_step(one, p, opt, tc, 0), std::invalid_argument);

  VideoSample clip = tiny_clip(2);
  TrainStepResult r = train_step(clip, p, opt, tc, 0);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss >= 0.0);
  REQUIRE(r.per_depth.size() == 2);
  for (double v : r.per_depth) CHECK(v >= 0.0);
}

TEST_CASE("same seed gives bit-identical losses across runs") {
  VideoSample clip = tiny_clip(5);
  std::vector<double> first, second;
  for (auto* sink : {&first, &second}) {
    ModelParams p(tiny_config());
    AdamW opt;
    TrainConfig tc = tiny_train();
    for (int s = 0; s < 10; ++s) sink->push_back(train_step(clip, p, opt, tc, s).loss);
  }
  CHECK(first == second);
}

TEST_CASE("gradients reach the identity bank") {
  ModelParams p(tiny_config());
  AdamW opt;
  TrainConfig tc = tiny_train();
  train_step(tiny_clip(7), p, opt, tc, 0);
  REQUIRE(p.bank.table.has_grad());
  double norm = 0;
  for (double g : p.bank.table.grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("loss trends down over a short run on a fixed clip") {
  ModelParams p(tiny_config());
  AdamW opt;
  TrainConfig tc = tiny_train();
  tc.teacher_forcing = true;
  tc.steps = 200;
  tc.lr_start = 1e-3;
  tc.lr_end = 1e-4;
  tc.weight_decay = 0.01;
  std::vector<VideoSample> clips;
  for (uint64_t s = 1; s <= 4; ++s) clips.push_back(tiny_clip(s));
  std::vector<double> losses;
  for (int s = 0; s < 200; ++s)
    losses.push_back(train_step(clips[s % clips.size()], p, opt, tc, s).loss);
  double head = 0, tail = 0;
  for (int i = 0; i < 20; ++i) {
    head += losses[i] / 20;
    tail += losses[losses.size() - 20 + i] / 20;
  }
  INFO("head=" << head << " tail=" << tail);
  CHECK(tail < head);
}

TEST_CASE("single-frame inference returns the reference mask") {
  ModelParams p(tiny_config());
  VideoSample clip = tiny_clip(9, 1, 2);
  auto out = infer_video({clip.frames[0]}, clip.masks[0], p, 2, 2);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == clip.masks[0]);
}

TEST_CASE("pruned model matches depth-probed full model end to end") {
  ModelConfig cfg = tiny_config();
  cfg.depth = 3;
  ModelParams p(cfg);
  VideoSample clip = tiny_clip(13, 5, 2);
  for (int k = 1; k <= 2; ++k) {
    auto pruned = infer_video(clip.frames, clip.masks[0], p, k, 2);
    auto probed = infer_video_probe(clip.frames, clip.masks[0], p, 3, k, 2);
    REQUIRE(pruned.size() == probed.size());
    for (size_t t = 0; t < pruned.size(); ++t) CHECK(pruned[t] == probed[t]);
  }
}

TEST_CASE("inference rejects mid-video resolution changes") {
  ModelParams p(tiny_config());
  VideoSample clip = tiny_clip(15, 2, 1);
  std::mt19937_64 rng(1);
  std::vector<Tensor> frames = {clip.frames[0],
                                aost::testing::random_tensor({12, 16, 3}, rng, 0, 1)};
  CHECK_THROWS_AS(infer_video(frames, clip.masks[0], p, 2, 2), std::invalid_argument);
}

TEST_CASE("joint inference runs one forward per frame regardless of objects") {
  ModelParams p(tiny_config());
  for (int n_obj : {1, 3}) {
    VideoSample clip = tiny_clip(17 + n_obj, 4, n_obj);
    op_counter().reset();
    infer_video(clip.frames, clip.masks[0], p, 2, 2);
    CHECK(op_counter().slstt_forwards == 4);
  }
}

TEST_CASE("post-ensemble costs one forward per object per frame") {
  ModelParams p(tiny_config());
  VideoSample clip = tiny_clip(23, 4, 4);
  REQUIRE(clip.spec.n_obj() == 4);

  op_counter().reset();
  infer_video(clip.frames, clip.masks[0], p, 2, 2);
  const auto joint = op_counter().slstt_forwards;

  op_counter().reset();
  auto merged = infer_post_ensemble(clip.frames, clip.masks[0], p, 2, 2);
  const auto ensemble = op_counter().slstt_forwards;
  CHECK(ensemble == 4 * joint);

  REQUIRE(merged.size() == clip.frames.size());
  for (const auto& m : merged)
    for (int label : m.labels) {
      CHECK(label >= 0);
      CHECK(label <= 4);
    }
}

TEST_CASE("relabeling the reference permutes the output pixel for pixel") {
  ModelParams p(tiny_config());
  VideoSample clip = tiny_clip(29, 4, 3);
  const int n_labels = 4;  // background + 3 objects
  Assignment a = assign_identities(n_labels, p.bank, 31);

  const int pi[4] = {0, 3, 1, 2};  // background stays put
  Assignment ap = a;
  for (int old_l = 0; old_l < n_labels; ++old_l) ap.slots[pi[old_l]] = a.slots[old_l];
  MaskMap ref_p = clip.masks[0];
  for (auto& v : ref_p.labels) v = pi[v];

  auto out = infer_video(clip.frames, clip.masks[0], p, 2, 2, &a);
  auto out_p = infer_video(clip.frames, ref_p, p, 2, 2, &ap);
  REQUIRE(out.size() == out_p.size());
  for (size_t t = 0; t < out.size(); ++t)
    for (size_t i = 0; i < out[t].labels.size(); ++i)
      CHECK(out_p[t].labels[i] == pi[out[t].labels[i]]);
}

TEST_CASE("long-term memory stays at one entry below delta") {
  ModelParams p(tiny_config());
  VideoSample clip = tiny_clip(37, 4, 1);
  MemoryStore mem(p.cfg.depth, 5, p.cfg.n_short);
  Assignment assign = assign_identities(2, p.bank, 1);
  for (int t = 1; t <= 4; ++t) {
    Tensor e = id_embed(clip.masks[t - 1], assign, p.bank);
    FramePass fp = model_forward(clip.frames[t - 1], mem, p, 2, false, mem.empty() ? e : Tensor());
    update_memory(mem, fp, e, t, p);
  }
  CHECK(mem.stored_frames == std::vector<int>{1});
  // size after T frames: 1 + floor((T-1)/delta)
  CHECK(mem.stored_frames.size() == 1 + (4 - 1) / 5);
}

TEST_CASE("learning rate schedule decays polynomially") {
  TrainConfig tc;
  tc.steps = 100;
  CHECK(tc.lr_at(0) == Catch::Approx(2e-4).margin(1e-12));
  CHECK(tc.lr_at(100) == Catch::Approx(2e-5).margin(1e-12));
  CHECK(tc.lr_at(50) < tc.lr_at(10));
  CHECK(tc.lr_at(90) < tc.lr_at(50));
}

TEST_CASE("bootstrap ratio anneals linearly from 1 to its target") {
  TrainConfig tc;
  tc.bootstrap_warmup = 100;
  tc.loss.bootstrap_ratio = 0.15;
  CHECK(tc.bootstrap_ratio_at(0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(tc.bootstrap_ratio_at(50) == Catch::Approx(0.575).margin(1e-12));
  CHECK(tc.bootstrap_ratio_at(100) == Catch::Approx(0.15).margin(1e-12));
  CHECK(tc.bootstrap_ratio_at(5000) == Catch::Approx(0.15).margin(1e-12));
  tc.bootstrap_warmup = 0;
  CHECK(tc.bootstrap_ratio_at(0) == Catch::Approx(0.15).margin(1e-12));
}

TEST_CASE("dataset evaluation returns bounded scores for every video") {
  ModelParams p(tiny_config());
  std::vector<VideoSample> set;
  for (uint64_t s = 41; s <= 43; ++s) {
    VideoSample v = tiny_clip(s, 3, 2);
    v.video_id = "vid_" + std::to_string(s);
    set.push_back(std::move(v));
  }
  auto results = eval_dataset(set, p, 2, 5, 2);
  REQUIRE(results.size() == 3);
  for (const auto& r : results) {
    CHECK(r.j >= 0.0);
    CHECK(r.j <= 1.0);
    CHECK(r.f >= 0.0);
    CHECK(r.f <= 1.0);
    CHECK(!r.video_id.empty());
  }
  EvalResult m = mean_result(results);
  CHECK(m.jf == Catch::Approx((m.j + m.f) / 2).margin(1e-12));
}
