#pragma once

// Region (J) and boundary (F) evaluation over predicted mask sequences.
// The reference frame is given, not predicted, and is excluded from scoring.

#include <sstream>
#include <string>
#include <vector>

#include "aost/identity.hpp"

namespace aost {

struct EvalResult {
  std::string video_id;
  double j = 0, f = 0, jf = 0;

  std::string csv_row() const {
    std::ostringstream os;
    os << video_id << "," << j << "," << f << "," << jf;
    return os.str();
  }
};

namespace detail {

inline std::vector<char> binary_of(const MaskMap& m, int label) {
  std::vector<char> b(m.labels.size());
  for (size_t i = 0; i < b.size(); ++i) b[i] = m.labels[i] == label;
  return b;
}

// Boundary pixels: mask pixels with a 4-neighbour outside the mask; the image
// border counts as background so a full-frame mask still has a boundary.
inline std::vector<char> boundary_of(const std::vector<char>& b, int h, int w) {
  std::vector<char> out(b.size(), 0);
  auto at = [&](int y, int x) { return y >= 0 && y < h && x >= 0 && x < w && b[y * w + x]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!b[y * w + x]) continue;
      if (!at(y - 1, x) || !at(y + 1, x) || !at(y, x - 1) || !at(y, x + 1))
        out[y * w + x] = 1;
    }
  return out;
}

// 3x3 dilation: 1-pixel match tolerance for the boundary measure.
inline std::vector<char> dilate3x3(const std::vector<char>& b, int h, int w) {
  std::vector<char> out(b.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!b[y * w + x]) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int ny = y + dy, nx = x + dx;
          if (ny >= 0 && ny < h && nx >= 0 && nx < w) out[ny * w + nx] = 1;
        }
    }
  return out;
}

inline size_t count_and(const std::vector<char>& a, const std::vector<char>& b) {
  size_t n = 0;
  for (size_t i = 0; i < a.size(); ++i) n += a[i] && b[i];
  return n;
}

inline size_t count_on(const std::vector<char>& a) {
  size_t n = 0;
  for (char v : a) n += v != 0;
  return n;
}

}  // namespace detail

// J = mean per-target per-frame IoU, F = mean boundary F-measure with 1 px
// tolerance; frame 0 (the reference) is excluded, and a frame-target pair
// absent from both sequences is skipped.
inline EvalResult compute_jf(const std::vector<MaskMap>& pred, const std::vector<MaskMap>& gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("compute_jf: sequence lengths differ, " +
                                std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
  if (gt.size() < 2)
    throw std::invalid_argument("compute_jf: need at least two frames (reference excluded)");
  int n_targets = 0;
  for (const auto& m : gt) n_targets = std::max(n_targets, m.max_label());
  for (const auto& m : pred) n_targets = std::max(n_targets, m.max_label());

  double j_sum = 0, f_sum = 0;
  size_t scored = 0;
  for (size_t t = 1; t < gt.size(); ++t) {
    if (pred[t].h != gt[t].h || pred[t].w != gt[t].w)
      throw std::invalid_argument("compute_jf: frame " + std::to_string(t) + " shape mismatch");
    const int h = gt[t].h, w = gt[t].w;
    for (int label = 1; label <= n_targets; ++label) {
      auto pb = detail::binary_of(pred[t], label);
      auto gb = detail::binary_of(gt[t], label);
      const size_t np = detail::count_on(pb), ng = detail::count_on(gb);
      if (np == 0 && ng == 0) continue;
      const size_t inter = detail::count_and(pb, gb);
      const size_t uni = np + ng - inter;
      j_sum += static_cast<double>(inter) / static_cast<double>(uni);

      auto pbd = detail::boundary_of(pb, h, w);
      auto gbd = detail::boundary_of(gb, h, w);
      const size_t npb = detail::count_on(pbd), ngb = detail::count_on(gbd);
      if (npb == 0 || ngb == 0) {
        f_sum += 0;  // one side has no boundary at all
      } else {
        const double precision =
            static_cast<double>(detail::count_and(pbd, detail::dilate3x3(gbd, h, w))) / npb;
        const double recall =
            static_cast<double>(detail::count_and(gbd, detail::dilate3x3(pbd, h, w))) / ngb;
        f_sum += (precision + recall > 0) ? 2 * precision * recall / (precision + recall) : 0.0;
      }
      ++scored;
    }
  }
  EvalResult r;
  if (scored) {
    r.j = j_sum / static_cast<double>(scored);
    r.f = f_sum / static_cast<double>(scored);
  }
  r.jf = (r.j + r.f) / 2;
  return r;
}

}  // namespace aost
