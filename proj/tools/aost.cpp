// Command-line front end: dataset synthesis, training, evaluation, inference,
// scaling benchmarks, and identity-bank inspection.

#include <CLI11.hpp>
#include <iostream>

#include "aost/bench.hpp"
#include "aost/checkpoint.hpp"
#include "aost/engine.hpp"

namespace {

using namespace aost;

int cmd_gen(const std::string& out, int videos, int objects, int frames, int size,
            uint64_t seed) {
  std::vector<VideoSample> samples;
  for (int i = 0; i < videos; ++i) {
    VideoSample v =
        generate_sequence(random_scene(size, size, frames, objects, detail::mix_seed(seed, i)));
    char id[32];
    std::snprintf(id, sizeof(id), "vid_%04d", i);
    v.video_id = id;
    samples.push_back(std::move(v));
  }
  write_dataset(samples, out);
  std::cout << "wrote " << samples.size() << " videos to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out, TrainConfig tcfg,
              ModelConfig mcfg) {
  auto data = read_dataset(data_dir);
  if (data.empty()) throw std::runtime_error("no videos found in " + data_dir);
  mcfg.image_h = data[0].spec.h;
  mcfg.image_w = data[0].spec.w;
  ModelParams params(mcfg);
  train_run(data, params, tcfg, out, &std::cout);
  std::cout << "finished " << tcfg.steps << " steps; checkpoint at " << out << "/model.ckpt\n";
  return 0;
}

int cmd_eval(const std::string& data_dir, const std::string& ckpt, int depth, int delta,
             const std::string& out_csv) {
  auto data = read_dataset(data_dir);
  if (data.empty()) throw std::runtime_error("no videos found in " + data_dir);
  ModelParams params = load_checkpoint(ckpt);
  if (depth < 1) depth = params.cfg.depth;
  auto results = eval_dataset(data, params, depth, delta);
  std::ostringstream os;
  os << "video_id,j,f,jf\n";
  for (const auto& r : results) os << r.csv_row() << "\n";
  os << mean_result(results).csv_row() << "\n";
  if (out_csv.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream f(out_csv, std::ios::trunc);
    f << os.str();
    std::cout << "wrote " << out_csv << "\n";
  }
  return 0;
}

int cmd_infer(const std::string& frames_dir, const std::string& ref_mask_path,
              const std::string& ckpt, int depth, int delta, const std::string& out) {
  namespace fs = std::filesystem;
  std::vector<Tensor> frames;
  for (int t = 1;; ++t) {
    const fs::path p = fs::path(frames_dir) / detail::frame_name(t);
    if (!fs::exists(p)) break;
    int w = 0, h = 0;
    auto rgb = detail::read_pnm(p.string(), "P6", w, h);
    Tensor img({h, w, 3});
    for (size_t i = 0; i < rgb.size(); ++i) img[i] = rgb[i] / 255.0;
    frames.push_back(std::move(img));
  }
  if (frames.empty()) throw std::runtime_error("no frame_%04d.ppm files in " + frames_dir);
  int w = 0, h = 0;
  auto lab = detail::read_pnm(ref_mask_path, "P5", w, h);
  MaskMap ref(h, w, 0);
  for (size_t i = 0; i < lab.size(); ++i) ref.labels[i] = lab[i];

  ModelParams params = load_checkpoint(ckpt);
  if (depth < 1) depth = params.cfg.depth;
  auto masks = infer_video(frames, ref, params, depth, delta);
  fs::create_directories(out);
  for (size_t t = 0; t < masks.size(); ++t) {
    std::vector<unsigned char> bytes(masks[t].labels.begin(), masks[t].labels.end());
    detail::write_pnm((fs::path(out) / detail::mask_name(static_cast<int>(t) + 1)).string(), "P5",
                      masks[t].w, masks[t].h, bytes);
  }
  std::cout << "wrote " << masks.size() << " masks to " << out << "\n";
  return 0;
}

ModelParams model_from_ckpt_or_default(const std::string& ckpt) {
  if (!ckpt.empty()) return load_checkpoint(ckpt);
  return ModelParams(ModelConfig{});
}

void emit_csv(const std::string& csv, const std::string& out_csv) {
  if (out_csv.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out_csv, std::ios::trunc);
    f << csv;
    std::cout << "wrote " << out_csv << "\n";
  }
}

int cmd_bench_objects(const std::string& ckpt, int repeats, const std::string& out_csv) {
  ModelParams params = model_from_ckpt_or_default(ckpt);
  BenchReport r = bench_object_scaling(params, {1, 2, 4, 8}, repeats);
  emit_csv(r.to_csv(), out_csv);
  return 0;
}

int cmd_bench_depth(const std::string& ckpt, int repeats, int eval_videos,
                    const std::string& out_csv) {
  ModelParams params = model_from_ckpt_or_default(ckpt);
  std::vector<VideoSample> eval_set;
  for (int i = 0; i < eval_videos; ++i) {
    VideoSample v = generate_sequence(random_scene(params.cfg.image_h, params.cfg.image_w, 6, 2,
                                                   detail::mix_seed(0xe7a1, i)));
    v.video_id = "held_" + std::to_string(i);
    eval_set.push_back(std::move(v));
  }
  std::vector<int> depths(params.cfg.depth);
  std::iota(depths.begin(), depths.end(), 1);
  BenchReport r = bench_depth_scaling(params, depths, repeats, eval_set);
  emit_csv(r.to_csv(), out_csv);
  return 0;
}

int cmd_bank_report(const std::string& ckpt, const std::string& out_csv) {
  ModelParams params = load_checkpoint(ckpt);
  auto sim = bank_similarity_report(params.bank);
  std::ostringstream os;
  for (size_t i = 0; i < sim.size(); ++i) {
    for (size_t j = 0; j < sim[i].size(); ++j) os << (j ? "," : "") << sim[i][j];
    os << "\n";
  }
  emit_csv(os.str(), out_csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scalable multi-object video segmentation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags take precedence");

  // gen
  auto* gen = app.add_subcommand("gen", "synthesize a dataset");
  std::string gen_out;
  int gen_videos = 10, gen_objects = 2, gen_frames = 10, gen_size = 64;
  uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--videos", gen_videos, "number of videos");
  gen->add_option("--objects", gen_objects, "objects per video");
  gen->add_option("--frames", gen_frames, "frames per video");
  gen->add_option("--size", gen_size, "square frame edge in pixels");
  gen->add_option("--seed", gen_seed, "generator seed");

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string train_data, train_out;
  TrainConfig tcfg;
  ModelConfig mcfg;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "run directory")->required();
  train->add_option("--steps", tcfg.steps, "optimizer steps");
  train->add_option("--depth-max", mcfg.depth, "number of blocks L");
  train->add_option("--alpha", tcfg.loss.alpha, "depth balance weight");
  train->add_option("--seed", tcfg.seed, "training seed");
  train->add_option("--clip-len", tcfg.clip_len, "frames per training clip");
  train->add_option("--delta", tcfg.delta_train, "long-term insertion period");
  train->add_option("--lr", tcfg.lr_start, "initial learning rate");
  train->add_option("--channels", mcfg.channels, "feature channels C");
  train->add_option("--heads", mcfg.heads, "attention heads");
  train->add_option("--lambda", mcfg.lambda, "short-term window edge");
  train->add_option("--m-total", mcfg.m_total, "identity bank size");
  train->add_option("--bootstrap-ratio", tcfg.loss.bootstrap_ratio,
                    "target hard-pixel fraction for the CE loss");
  train->add_option("--bootstrap-warmup", tcfg.bootstrap_warmup,
                    "steps to anneal the CE hard-pixel fraction from 1");
  train->add_flag("--teacher-forcing", tcfg.teacher_forcing,
                  "feed ground-truth masks to memory during training");
  train->add_option("--teacher-forcing-until", tcfg.teacher_forcing_until,
                    "feed ground-truth masks for the first N steps");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_data, eval_ckpt, eval_out;
  int eval_depth = 0, eval_delta = 5;
  ev->add_option("--data", eval_data, "dataset directory")->required();
  ev->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  ev->add_option("--depth", eval_depth, "run-time depth (default: full)");
  ev->add_option("--delta", eval_delta, "long-term insertion period");
  ev->add_option("--out", eval_out, "metrics CSV path (default: stdout)");

  // infer
  auto* infer = app.add_subcommand("infer", "propagate a reference mask");
  std::string inf_frames, inf_ref, inf_ckpt, inf_out;
  int inf_depth = 0, inf_delta = 5;
  infer->add_option("--frames-dir", inf_frames, "directory with frame_%04d.ppm")->required();
  infer->add_option("--ref-mask", inf_ref, "first-frame mask PGM")->required();
  infer->add_option("--ckpt", inf_ckpt, "checkpoint path")->required();
  infer->add_option("--depth", inf_depth, "run-time depth (default: full)");
  infer->add_option("--delta", inf_delta, "long-term insertion period");
  infer->add_option("--out", inf_out, "output directory for mask_%04d.pgm")->required();

  // bench-objects / bench-depth
  auto* bo = app.add_subcommand("bench-objects", "cost vs object count");
  std::string bo_ckpt, bo_out;
  int bo_repeats = 5;
  bo->add_option("--ckpt", bo_ckpt, "checkpoint (default: random init)");
  bo->add_option("--repeats", bo_repeats, "timing repeats");
  bo->add_option("--out", bo_out, "CSV path (default: stdout)");

  auto* bd = app.add_subcommand("bench-depth", "cost and accuracy vs depth");
  std::string bd_ckpt, bd_out;
  int bd_repeats = 5, bd_eval_videos = 8;
  bd->add_option("--ckpt", bd_ckpt, "checkpoint (default: random init)");
  bd->add_option("--repeats", bd_repeats, "timing repeats");
  bd->add_option("--eval-videos", bd_eval_videos, "held-out videos for J&F");
  bd->add_option("--out", bd_out, "CSV path (default: stdout)");

  // bank-report
  auto* br = app.add_subcommand("bank-report", "identity bank cosine similarities");
  std::string br_ckpt, br_out;
  br->add_option("--ckpt", br_ckpt, "checkpoint path")->required();
  br->add_option("--out", br_out, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_out, gen_videos, gen_objects, gen_frames, gen_size,
                                      gen_seed);
    if (train->parsed()) return cmd_train(train_data, train_out, tcfg, mcfg);
    if (ev->parsed()) return cmd_eval(eval_data, eval_ckpt, eval_depth, eval_delta, eval_out);
    if (infer->parsed())
      return cmd_infer(inf_frames, inf_ref, inf_ckpt, inf_depth, inf_delta, inf_out);
    if (bo->parsed()) return cmd_bench_objects(bo_ckpt, bo_repeats, bo_out);
    if (bd->parsed()) return cmd_bench_depth(bd_ckpt, bd_repeats, bd_eval_videos, bd_out);
    if (br->parsed()) return cmd_bank_report(br_ckpt, br_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
