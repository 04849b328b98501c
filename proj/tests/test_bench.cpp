#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "aost/bench.hpp"

using namespace aost;

namespace {

ModelConfig bench_config() {
  ModelConfig cfg;
  cfg.image_h = 16;
  cfg.image_w = 16;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.lambda = 3;
  cfg.depth = 3;
  cfg.m_total = 10;
  cfg.stride = 4;
  cfg.enc_mid = 4;
  cfg.init_seed = 2;
  return cfg;
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("joint cost is flat in object count, per-object cost is not") {
  ModelParams p(bench_config());
  BenchReport r = bench_object_scaling(p, {1, 2, 4, 8}, 1, 4);
  REQUIRE(r.rows.size() == 8);

  std::vector<unsigned long long> joint, post;
  for (const auto& row : r.rows) {
    if (row.mode == "joint") {
      joint.push_back(row.macs_per_frame);
      CHECK(row.forwards_per_frame == Catch::Approx(1.0));
    } else {
      post.push_back(row.macs_per_frame);
      CHECK(row.forwards_per_frame == Catch::Approx(static_cast<double>(row.n_objects)));
    }
    CHECK(row.fps > 0);
    CHECK(row.peak_cached_bytes > 0);
  }
  const auto [lo, hi] = std::minmax_element(joint.begin(), joint.end());
  CHECK(static_cast<double>(*hi - *lo) / static_cast<double>(*lo) < 0.01);

  // post-ensemble N=4 vs N=1: 4x within the decode-selection slack
  const double ratio = static_cast<double>(post[2]) / static_cast<double>(post[0]);
  CHECK(ratio > 3.9);
  CHECK(ratio < 4.1);
}

TEST_CASE("post-ensemble memory grows with object count while joint stays put") {
  ModelParams p(bench_config());
  BenchReport r = bench_object_scaling(p, {1, 4}, 1, 4);
  size_t joint1 = 0, joint4 = 0, post1 = 0, post4 = 0;
  for (const auto& row : r.rows) {
    if (row.mode == "joint" && row.n_objects == 1) joint1 = row.peak_cached_bytes;
    if (row.mode == "joint" && row.n_objects == 4) joint4 = row.peak_cached_bytes;
    if (row.mode == "post_ensemble" && row.n_objects == 1) post1 = row.peak_cached_bytes;
    if (row.mode == "post_ensemble" && row.n_objects == 4) post4 = row.peak_cached_bytes;
  }
  CHECK(joint1 == joint4);
  CHECK(post4 == 4 * post1);
}

TEST_CASE("depth benchmark: MACs and parameters strictly increase with depth") {
  ModelParams p(bench_config());
  std::vector<VideoSample> eval_set;
  for (uint64_t s = 1; s <= 2; ++s) {
    VideoSample v = generate_sequence(random_scene(16, 16, 3, 2, s));
    v.video_id = "v" + std::to_string(s);
    eval_set.push_back(std::move(v));
  }
  BenchReport r = bench_depth_scaling(p, {1, 2, 3}, 1, eval_set);
  REQUIRE(r.rows.size() == 3);
  for (int i = 1; i < 3; ++i) {
    CHECK(r.rows[i].macs_per_frame > r.rows[i - 1].macs_per_frame);
    CHECK(r.rows[i].param_count > r.rows[i - 1].param_count);
  }
  for (const auto& row : r.rows) {
    CHECK(row.jf >= 0.0);
    CHECK(row.jf <= 1.0);
  }
}

TEST_CASE("structural columns are reproducible across runs") {
  ModelParams p(bench_config());
  BenchReport a = bench_object_scaling(p, {1, 2}, 1, 3);
  BenchReport b = bench_object_scaling(p, {1, 2}, 1, 3);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].macs_per_frame == b.rows[i].macs_per_frame);
    CHECK(a.rows[i].forwards_per_frame == b.rows[i].forwards_per_frame);
    CHECK(a.rows[i].param_count == b.rows[i].param_count);
    CHECK(a.rows[i].peak_cached_bytes == b.rows[i].peak_cached_bytes);
  }
}

TEST_CASE("csv report shape") {
  ModelParams p(bench_config());
  BenchReport r = bench_object_scaling(p, {1, 2}, 1, 3);
  const std::string csv = r.to_csv();
  CHECK(count_lines(csv) == 2 + 4);  // machine comment + header + 4 rows
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("# machine: ", 0) == 0);
  std::getline(is, line);
  CHECK(line ==
        "mode,n_objects,depth,fps,forwards_per_frame,macs_per_frame,param_count,"
        "peak_cached_bytes,j,f,jf");
  while (std::getline(is, line)) CHECK(std::count(line.begin(), line.end(), ',') == 10);
}
