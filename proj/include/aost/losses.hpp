#pragma once

// Segmentation losses: bootstrapped cross-entropy, soft Jaccard, and the
// depth-weighted aggregation over sub-transformer outputs.

#include "aost/identity.hpp"

namespace aost {

struct LossConfig {
  double ce_weight = 0.5;
  double jaccard_weight = 0.5;
  double bootstrap_ratio = 0.15;  // fraction of hardest pixels kept
  double alpha = 2.0;             // depth balance weight

  void validate() const {
    if (ce_weight < 0 || jaccard_weight < 0)
      throw std::invalid_argument("LossConfig: loss weights must be nonnegative");
    if (bootstrap_ratio <= 0 || bootstrap_ratio > 1)
      throw std::invalid_argument("LossConfig: bootstrap_ratio must be in (0,1]");
    if (alpha <= 0) throw std::invalid_argument("LossConfig: alpha must be positive");
  }
};

namespace detail {

inline void check_probs_vs_mask(const Tensor& probs, const MaskMap& gt, const char* what) {
  if (probs.ndim() != 2)
    throw std::invalid_argument(std::string(what) + ": probs must be [hw, N]");
  if (probs.dim(0) != gt.h * gt.w)
    throw std::invalid_argument(std::string(what) + ": probs rows " +
                                std::to_string(probs.dim(0)) + " vs mask pixels " +
                                std::to_string(gt.h * gt.w));
  for (int v : gt.labels)
    if (v < 0 || v >= probs.dim(1))
      throw std::invalid_argument(std::string(what) + ": mask label " + std::to_string(v) +
                                  " outside [0," + std::to_string(probs.dim(1)) + ")");
}

// One-hot [hw, N] constant tensor of the ground-truth labels.
inline Tensor one_hot_mask(const MaskMap& gt, int n) {
  Tensor y({gt.h * gt.w, n});
  for (int i = 0; i < gt.h * gt.w; ++i) y[static_cast<size_t>(i) * n + gt.labels[i]] = 1.0;
  return y;
}

}  // namespace detail

// Mean of the hardest ratio*hw per-pixel cross-entropy values.
inline Tensor bootstrapped_ce(const Tensor& probs, const MaskMap& gt, double ratio) {
  detail::check_probs_vs_mask(probs, gt, "bootstrapped_ce");
  if (ratio <= 0 || ratio > 1)
    throw std::invalid_argument("bootstrapped_ce: ratio must be in (0,1]");
  Tensor picked = gather_elem(probs, gt.labels);
  Tensor ce = scale(log_eps(picked), -1.0);
  const int hw = gt.h * gt.w;
  const int k = std::max(1, static_cast<int>(std::ceil(ratio * hw)));
  return topk_mean(ce, std::min(k, hw));
}

// 1 - mean over targets of sum(min(p,y)) / (sum(max(p,y)) + eps).
inline Tensor soft_jaccard(const Tensor& probs, const MaskMap& gt, double eps = 1e-6) {
  detail::check_probs_vs_mask(probs, gt, "soft_jaccard");
  Tensor y = detail::one_hot_mask(gt, probs.dim(1));
  Tensor num = sum_rows(min_with_const(probs, y));
  Tensor den = add_scalar(sum_rows(max_with_const(probs, y)), eps);
  Tensor iou = div_elem(num, den);
  return add_scalar(scale(mean_all(iou), -1.0), 1.0);
}

// Per-depth combined loss: ce_weight * bootstrapped CE + jaccard_weight * soft Jaccard.
inline Tensor aot_frame_loss(const Tensor& probs, const MaskMap& gt, const LossConfig& cfg) {
  cfg.validate();
  Tensor ce = bootstrapped_ce(probs, gt, cfg.bootstrap_ratio);
  Tensor sj = soft_jaccard(probs, gt);
  return add(scale(ce, cfg.ce_weight), scale(sj, cfg.jaccard_weight));
}

// Depth weights alpha^l for l = 1..L, normalized by their sum.
inline std::vector<double> depth_weights(double alpha, int depth) {
  if (depth < 1) throw std::invalid_argument("depth_weights: need at least one depth");
  std::vector<double> w(depth);
  double p = alpha, total = 0;
  for (int l = 0; l < depth; ++l, p *= alpha) {
    w[l] = p;
    total += p;
  }
  for (double& v : w) v /= total;
  return w;
}

// Scalable supervision: weighted average of per-depth combined losses with
// weights alpha^l / sum(alpha^l). The division happens once, on the weighted
// sum, so the weights sum to one exactly.
inline Tensor aost_loss(const std::vector<Tensor>& per_depth_probs, const MaskMap& gt,
                        const LossConfig& cfg) {
  cfg.validate();
  if (per_depth_probs.empty())
    throw std::invalid_argument("aost_loss: need at least one depth output");
  Tensor total;
  double p = cfg.alpha, denom = 0;
  for (const Tensor& probs : per_depth_probs) {
    Tensor term = scale(aot_frame_loss(probs, gt, cfg), p);
    total = total.size() ? add(total, term) : term;
    denom += p;
    p *= cfg.alpha;
  }
  return scale(total, 1.0 / denom);
}

}  // namespace aost
