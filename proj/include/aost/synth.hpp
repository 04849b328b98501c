#pragma once

// Deterministic synthetic multi-object videos: moving, occluding shapes with
// exact ground-truth masks, plus PPM/PGM dataset serialization.

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "aost/identity.hpp"
#include "aost/tensor.hpp"

namespace aost {

enum class ShapeKind { disk, square, triangle };

inline const char* shape_name(ShapeKind s) {
  switch (s) {
    case ShapeKind::disk: return "disk";
    case ShapeKind::square: return "square";
    case ShapeKind::triangle: return "triangle";
  }
  throw std::invalid_argument("shape_name: bad shape");
}

inline ShapeKind shape_from_name(const std::string& s) {
  if (s == "disk") return ShapeKind::disk;
  if (s == "square") return ShapeKind::square;
  if (s == "triangle") return ShapeKind::triangle;
  throw std::invalid_argument("shape_from_name: unknown shape '" + s + "'");
}

struct ObjectSpec {
  ShapeKind shape = ShapeKind::disk;
  double size = 10;                     // diameter / edge length in pixels
  std::array<int, 3> color = {0, 0, 0};  // 8-bit so images survive byte I/O
  double x = 0, y = 0;                   // centre at frame 1
  double vx = 0, vy = 0;                 // pixels per frame
};

struct SceneSpec {
  int h = 64, w = 64;
  int frames = 5;
  uint64_t seed = 0;
  std::array<int, 3> background = {26, 26, 26};
  std::vector<ObjectSpec> objects;  // painted in order; later objects are nearer

  int n_obj() const { return static_cast<int>(objects.size()); }
};

struct VideoSample {
  std::string video_id;
  std::vector<Tensor> frames;   // [h, w, 3] in [0,1]
  std::vector<MaskMap> masks;   // labels 0 (background) .. n_obj
  SceneSpec spec;
};

namespace detail {

inline bool inside_shape(const ObjectSpec& o, double cx, double cy, double px, double py) {
  const double dx = px - cx, dy = py - cy, r = o.size / 2.0;
  switch (o.shape) {
    case ShapeKind::disk:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::square:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeKind::triangle:
      // apex up: width 0 at the top edge, full width at the bottom edge
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;
  }
  return false;
}

// Constant-velocity centre with reflection off the walls, evaluated at
// 0-based frame index t. Stepped (not closed-form) so reflections compose.
inline std::pair<double, double> object_center(const ObjectSpec& o, const SceneSpec& s, int t) {
  double x = o.x, y = o.y, vx = o.vx, vy = o.vy;
  const double r = o.size / 2.0;
  const double x_lo = r, x_hi = s.w - 1 - r, y_lo = r, y_hi = s.h - 1 - r;
  for (int i = 0; i < t; ++i) {
    x += vx;
    y += vy;
    if (x < x_lo) { x = 2 * x_lo - x; vx = -vx; }
    if (x > x_hi) { x = 2 * x_hi - x; vx = -vx; }
    if (y < y_lo) { y = 2 * y_lo - y; vy = -vy; }
    if (y > y_hi) { y = 2 * y_hi - y; vy = -vy; }
  }
  return {x, y};
}

}  // namespace detail

inline VideoSample generate_sequence(const SceneSpec& spec) {
  if (spec.h < 1 || spec.w < 1 || spec.frames < 1)
    throw std::invalid_argument("generate_sequence: empty scene");
  for (const auto& o : spec.objects)
    if (o.size > spec.h || o.size > spec.w)
      throw std::invalid_argument("generate_sequence: object of size " + std::to_string(o.size) +
                                  " larger than " + std::to_string(spec.w) + "x" +
                                  std::to_string(spec.h) + " frame");
  VideoSample v;
  v.spec = spec;
  for (int t = 0; t < spec.frames; ++t) {
    Tensor img({spec.h, spec.w, 3});
    MaskMap mask(spec.h, spec.w, 0);
    for (int y = 0; y < spec.h; ++y)
      for (int x = 0; x < spec.w; ++x)
        for (int c = 0; c < 3; ++c) img[(y * spec.w + x) * 3 + c] = spec.background[c] / 255.0;
    for (int i = 0; i < spec.n_obj(); ++i) {
      const auto& o = spec.objects[i];
      auto [cx, cy] = detail::object_center(o, spec, t);
      for (int y = 0; y < spec.h; ++y)
        for (int x = 0; x < spec.w; ++x) {
          if (!detail::inside_shape(o, cx, cy, x, y)) continue;
          mask.labels[y * spec.w + x] = i + 1;
          for (int c = 0; c < 3; ++c) img[(y * spec.w + x) * 3 + c] = o.color[c] / 255.0;
        }
    }
    v.frames.push_back(std::move(img));
    v.masks.push_back(std::move(mask));
  }
  return v;
}

// Samples a random scene whose every object is visible in frame 1 (occlusion
// can hide small far objects, so placement retries until that holds).
inline SceneSpec random_scene(int h, int w, int frames, int n_obj, uint64_t seed) {
  if (n_obj < 1) throw std::invalid_argument("random_scene: need at least one object");
  std::mt19937_64 rng(seed);
  auto unif = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  const double scale = std::min(h, w) / 64.0;
  for (int attempt = 0; attempt < 100; ++attempt) {
    SceneSpec s;
    s.h = h;
    s.w = w;
    s.frames = frames;
    s.seed = seed;
    for (int i = 0; i < n_obj; ++i) {
      ObjectSpec o;
      o.shape = static_cast<ShapeKind>(rng() % 3);
      o.size = std::clamp(unif(8, 20) * scale, 4.0, std::min(h, w) - 2.0);
      for (auto& c : o.color) c = 40 + static_cast<int>(rng() % 216);
      const double r = o.size / 2.0;
      o.x = unif(r, w - 1 - r);
      o.y = unif(r, h - 1 - r);
      const double speed = unif(1, 3), angle = unif(0, 2 * 3.14159265358979323846);
      o.vx = speed * std::cos(angle);
      o.vy = speed * std::sin(angle);
      s.objects.push_back(o);
    }
    VideoSample first = generate_sequence(s);
    std::vector<int> visible(n_obj + 1, 0);
    for (int label : first.masks[0].labels) ++visible[label];
    bool ok = true;
    for (int i = 1; i <= n_obj; ++i) ok = ok && visible[i] > 0;
    if (ok) return s;
  }
  throw std::runtime_error("random_scene: could not place " + std::to_string(n_obj) +
                           " visible objects in 100 attempts");
}

// ---------------------------------------------------------------------------
// Dataset serialization: dir/<video_id>/frame_%04d.ppm, mask_%04d.pgm, spec.txt

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_pnm(const std::string& path, const char* magic, int w, int h,
                      const std::vector<unsigned char>& bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("write_pnm: cannot open " + path);
  os << magic << "\n" << w << " " << h << "\n255\n";
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write_pnm: write failed for " + path);
}

inline std::vector<unsigned char> read_pnm(const std::string& path, const char* magic, int& w,
                                           int& h) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_pnm: cannot open " + path);
  std::string m;
  int maxval = 0;
  is >> m >> w >> h >> maxval;
  if (!is || m != magic || w < 1 || h < 1 || maxval != 255)
    throw std::runtime_error("read_pnm: malformed header in " + path);
  is.get();  // single whitespace after maxval
  const size_t n = static_cast<size_t>(w) * h * (m == "P6" ? 3 : 1);
  std::vector<unsigned char> bytes(n);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n)))
    throw std::runtime_error("read_pnm: truncated pixel data in " + path);
  return bytes;
}

inline std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.ppm", t);
  return buf;
}

inline std::string mask_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mask_%04d.pgm", t);
  return buf;
}

}  // namespace detail

inline std::string spec_to_text(const SceneSpec& s) {
  std::ostringstream os;
  os << "h=" << s.h << "\nw=" << s.w << "\nframes=" << s.frames << "\nseed=" << s.seed << "\n";
  os << "background=" << s.background[0] << " " << s.background[1] << " " << s.background[2]
     << "\n";
  os << "n_obj=" << s.n_obj() << "\n";
  for (int i = 0; i < s.n_obj(); ++i) {
    const auto& o = s.objects[i];
    os << "obj" << i << "=" << shape_name(o.shape) << " " << detail::fmt_double(o.size) << " "
       << o.color[0] << " " << o.color[1] << " " << o.color[2] << " " << detail::fmt_double(o.x)
       << " " << detail::fmt_double(o.y) << " " << detail::fmt_double(o.vx) << " "
       << detail::fmt_double(o.vy) << "\n";
  }
  return os.str();
}

inline SceneSpec spec_from_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("spec_from_text: malformed line '" + line + "' in " + origin);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end())
      throw std::runtime_error("spec_from_text: missing key '" + k + "' in " + origin);
    return it->second;
  };
  SceneSpec s;
  s.h = std::stoi(need("h"));
  s.w = std::stoi(need("w"));
  s.frames = std::stoi(need("frames"));
  s.seed = std::stoull(need("seed"));
  {
    std::istringstream bg(need("background"));
    bg >> s.background[0] >> s.background[1] >> s.background[2];
  }
  const int n = std::stoi(need("n_obj"));
  for (int i = 0; i < n; ++i) {
    std::istringstream os(need("obj" + std::to_string(i)));
    std::string shape;
    ObjectSpec o;
    os >> shape >> o.size >> o.color[0] >> o.color[1] >> o.color[2] >> o.x >> o.y >> o.vx >> o.vy;
    if (!os)
      throw std::runtime_error("spec_from_text: malformed obj" + std::to_string(i) + " in " +
                               origin);
    o.shape = shape_from_name(shape);
    s.objects.push_back(o);
  }
  return s;
}

inline void write_dataset(const std::vector<VideoSample>& samples, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& v : samples) {
    const fs::path vdir = fs::path(dir) / v.video_id;
    fs::create_directories(vdir);
    std::ofstream spec(vdir / "spec.txt", std::ios::trunc);
    if (!spec) throw std::runtime_error("write_dataset: cannot open " + (vdir / "spec.txt").string());
    spec << spec_to_text(v.spec);
    for (size_t t = 0; t < v.frames.size(); ++t) {
      const Tensor& img = v.frames[t];
      std::vector<unsigned char> rgb(img.size());
      for (size_t i = 0; i < img.size(); ++i)
        rgb[i] = static_cast<unsigned char>(std::lround(std::clamp(img[i], 0.0, 1.0) * 255.0));
      detail::write_pnm((vdir / detail::frame_name(static_cast<int>(t) + 1)).string(), "P6",
                        img.dim(1), img.dim(0), rgb);
      const MaskMap& m = v.masks[t];
      std::vector<unsigned char> lab(m.labels.begin(), m.labels.end());
      detail::write_pnm((vdir / detail::mask_name(static_cast<int>(t) + 1)).string(), "P5", m.w,
                        m.h, lab);
    }
  }
}

inline std::vector<VideoSample> read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<VideoSample> out;
  if (!fs::exists(dir)) return out;
  std::vector<fs::path> vdirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) vdirs.push_back(e.path());
  std::sort(vdirs.begin(), vdirs.end());
  for (const auto& vdir : vdirs) {
    const fs::path spec_path = vdir / "spec.txt";
    if (!fs::exists(spec_path)) continue;
    std::ifstream sf(spec_path);
    std::stringstream buf;
    buf << sf.rdbuf();
    VideoSample v;
    v.video_id = vdir.filename().string();
    v.spec = spec_from_text(buf.str(), spec_path.string());
    for (int t = 1; t <= v.spec.frames; ++t) {
      int w = 0, h = 0;
      auto rgb = detail::read_pnm((vdir / detail::frame_name(t)).string(), "P6", w, h);
      Tensor img({h, w, 3});
      for (size_t i = 0; i < rgb.size(); ++i) img[i] = rgb[i] / 255.0;
      v.frames.push_back(std::move(img));
      auto lab = detail::read_pnm((vdir / detail::mask_name(t)).string(), "P5", w, h);
      MaskMap m(h, w, 0);
      for (size_t i = 0; i < lab.size(); ++i) m.labels[i] = lab[i];
      v.masks.push_back(std::move(m));
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace aost
