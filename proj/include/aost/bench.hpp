#pragma once

// Benchmark harness: wall-clock plus exact multiply-accumulate accounting for
// object-count scaling (joint vs per-object passes) and run-time depth.

#include <chrono>
#include <thread>

#include "aost/engine.hpp"

namespace aost {

struct BenchRow {
  std::string mode;  // "joint" or "post_ensemble"
  int n_objects = 0;
  int depth = 0;
  double fps = 0;
  double forwards_per_frame = 0;
  unsigned long long macs_per_frame = 0;
  size_t param_count = 0;
  size_t peak_cached_bytes = 0;
  double j = -1, f = -1, jf = -1;  // filled by the depth benchmark only
};

struct BenchReport {
  std::string machine;
  std::vector<BenchRow> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os << "# machine: " << machine << "\n";
    os << "mode,n_objects,depth,fps,forwards_per_frame,macs_per_frame,param_count,"
          "peak_cached_bytes,j,f,jf\n";
    for (const auto& r : rows) {
      os << r.mode << "," << r.n_objects << "," << r.depth << "," << r.fps << ","
         << r.forwards_per_frame << "," << r.macs_per_frame << "," << r.param_count << ","
         << r.peak_cached_bytes << ",";
      if (r.jf >= 0)
        os << r.j << "," << r.f << "," << r.jf;
      else
        os << ",,";
      os << "\n";
    }
    return os.str();
  }
};

inline std::string machine_descriptor() {
  std::string model = "unknown-cpu";
  std::ifstream cpuinfo("/proc/cpuinfo");
  std::string line;
  while (std::getline(cpuinfo, line)) {
    if (line.rfind("model name", 0) == 0) {
      auto colon = line.find(':');
      if (colon != std::string::npos) {
        model = line.substr(colon + 1);
        while (!model.empty() && model.front() == ' ') model.erase(model.begin());
      }
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " hw threads";
}

namespace detail {

template <class Fn>
double median_seconds(Fn&& fn, int repeats) {
  if (repeats < 1) throw std::invalid_argument("median_seconds: need at least one repeat");
  fn();  // warmup
  std::vector<double> times;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

}  // namespace detail

// Cost versus object count, joint one-pass inference against the per-object
// post-ensemble baseline, on a fixed synthetic video per N.
inline BenchReport bench_object_scaling(const ModelParams& params, const std::vector<int>& n_list,
                                        int repeats, int frames = 6, int delta = 5,
                                        uint64_t seed = 1) {
  BenchReport report;
  report.machine = machine_descriptor();
  const int L = params.cfg.depth;
  for (int n : n_list) {
    VideoSample v =
        generate_sequence(random_scene(params.cfg.image_h, params.cfg.image_w, frames, n, seed));
    for (const char* mode : {"joint", "post_ensemble"}) {
      const bool joint = std::string(mode) == "joint";
      size_t peak = 0;
      op_counter().reset();
      if (joint)
        infer_video(v.frames, v.masks[0], params, L, delta, nullptr, seed, &peak);
      else
        infer_post_ensemble(v.frames, v.masks[0], params, L, delta, seed, &peak);
      const auto macs = op_counter().macs;
      const auto forwards = op_counter().slstt_forwards;

      const double sec = detail::median_seconds(
          [&]() {
            if (joint)
              infer_video(v.frames, v.masks[0], params, L, delta, nullptr, seed);
            else
              infer_post_ensemble(v.frames, v.masks[0], params, L, delta, seed);
          },
          repeats);

      BenchRow row;
      row.mode = mode;
      row.n_objects = n;
      row.depth = L;
      row.fps = frames / sec;
      row.forwards_per_frame = static_cast<double>(forwards) / frames;
      row.macs_per_frame = macs / frames;
      row.param_count = params.param_count(L);
      row.peak_cached_bytes = peak;
      report.rows.push_back(row);
    }
  }
  return report;
}

// Cost and held-out accuracy versus run-time depth.
inline BenchReport bench_depth_scaling(const ModelParams& params, const std::vector<int>& depths,
                                       int repeats, const std::vector<VideoSample>& eval_set,
                                       int delta = 5, uint64_t seed = 1, int frames = 6,
                                       int n_objects = 2) {
  BenchReport report;
  report.machine = machine_descriptor();
  VideoSample v = generate_sequence(
      random_scene(params.cfg.image_h, params.cfg.image_w, frames, n_objects, seed));
  for (int d : depths) {
    size_t peak = 0;
    op_counter().reset();
    infer_video(v.frames, v.masks[0], params, d, delta, nullptr, seed, &peak);
    const auto macs = op_counter().macs;
    const auto forwards = op_counter().slstt_forwards;
    const double sec = detail::median_seconds(
        [&]() { infer_video(v.frames, v.masks[0], params, d, delta, nullptr, seed); }, repeats);

    BenchRow row;
    row.mode = "joint";
    row.n_objects = n_objects;
    row.depth = d;
    row.fps = frames / sec;
    row.forwards_per_frame = static_cast<double>(forwards) / frames;
    row.macs_per_frame = macs / frames;
    row.param_count = params.param_count(d);
    row.peak_cached_bytes = peak;
    if (!eval_set.empty()) {
      EvalResult m = mean_result(eval_dataset(eval_set, params, d, delta));
      row.j = m.j;
      row.f = m.f;
      row.jf = m.jf;
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace aost
