#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mlcam/cam/types.hpp"
#include "mlcam/dataset/types.hpp"

namespace mlcam {

struct EvalConfig {
  double threshold = 0.15;  // binarization threshold T
};

inline void validate(const EvalConfig& cfg) {
  MLCAM_CHECK(cfg.threshold > 0 && cfg.threshold < 1, Config,
              "eval: threshold must be in (0,1)");
}

// pixel = 1 iff value > T (strict).
template <typename S>
Mask binarize(const ActivationMap<S>& map, double threshold) {
  MLCAM_CHECK(fusion_ready(map), Contract,
              "binarize: map must be min-max normalized");
  return (map.values.array() > static_cast<S>(threshold)).template cast<std::uint8_t>();
}

// Intersection over union with the empty-mask conventions: both empty = 1
// (vacuous agreement), exactly one empty = 0.
inline double iou(const Mask& pred, const Mask& gt) {
  MLCAM_CHECK(pred.rows() == gt.rows() && pred.cols() == gt.cols(), Contract,
              "iou: shape mismatch");
  long inter = 0, uni = 0;
  for (Eigen::Index x = 0; x < pred.cols(); ++x)
    for (Eigen::Index y = 0; y < pred.rows(); ++y) {
      const bool p = pred(y, x) != 0, g = gt(y, x) != 0;
      inter += p && g;
      uni += p || g;
    }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Peak position of a map; ties broken by the first index in row-major order.
template <typename S>
std::pair<Eigen::Index, Eigen::Index> argmax_row_major(const MatX<S>& values) {
  Eigen::Index by = 0, bx = 0;
  S best = values(0, 0);
  for (Eigen::Index y = 0; y < values.rows(); ++y)
    for (Eigen::Index x = 0; x < values.cols(); ++x)
      if (values(y, x) > best) { best = values(y, x); by = y; bx = x; }
  return {by, bx};
}

// Peak-in-mask (pointing) rule: 0 when the argmax pixel lies inside the
// ground truth, 1 otherwise.
template <typename S>
int localization_error(const ActivationMap<S>& map, const Mask& gt) {
  MLCAM_CHECK(map.h() == gt.rows() && map.w() == gt.cols(), Contract,
              "localization_error: shape mismatch");
  MLCAM_CHECK((gt != 0).any(), Eval, "localization_error: empty ground truth");
  auto [y, x] = argmax_row_major(map.values);
  return gt(y, x) != 0 ? 0 : 1;
}

// Per-category table plus the two aggregates. Aggregates are unweighted
// means over categories that had at least one evaluated sample.
struct EvalReport {
  std::map<int, double> per_category_iou;
  std::map<int, double> per_category_lev;
  double miou = 0.0;
  double mlev = 0.0;
  long sample_count = 0;       // samples contributing at least one pair
  long pair_count = 0;         // (sample, category) pairs evaluated
  EvalConfig config;
  std::vector<std::string> category_names;
};

// A CAM source maps (sample, category) to the final map to score.
template <typename S>
using CamSource =
    std::function<ActivationMap<S>(const ImageSample<S>&, int category)>;

// Score a dataset: per-category IoU / localization error averaged over the
// samples containing that category, then unweighted means across categories.
template <typename S>
EvalReport evaluate(const Dataset<S>& ds, const CamSource<S>& cam_source,
                    const EvalConfig& cfg) {
  validate(cfg);
  std::map<int, std::pair<double, long>> iou_acc;  // category -> (sum, n)
  std::map<int, std::pair<long, long>> lev_acc;    // category -> (errors, n)
  long sample_count = 0, pair_count = 0;

  for (const auto& sample : ds.samples) {
    bool contributed = false;
    for (std::size_t c = 0; c < sample.labels.size(); ++c) {
      if (sample.labels[c] == 0) continue;
      auto mask_it = sample.masks.find(static_cast<int>(c));
      if (mask_it == sample.masks.end()) continue;
      const Mask& gt = mask_it->second;
      if (!(gt != 0).any()) continue;

      ActivationMap<S> map = cam_source(sample, static_cast<int>(c));
      MLCAM_CHECK(map.h() == gt.rows() && map.w() == gt.cols(), Contract,
                  "evaluate: map/mask shape mismatch");
      const double sample_iou = iou(binarize(map, cfg.threshold), gt);
      const int lev = localization_error(map, gt);

      auto& ia = iou_acc[static_cast<int>(c)];
      ia.first += sample_iou;
      ia.second += 1;
      auto& la = lev_acc[static_cast<int>(c)];
      la.first += lev;
      la.second += 1;
      contributed = true;
      ++pair_count;
    }
    if (contributed) ++sample_count;
  }

  MLCAM_CHECK(pair_count > 0, Eval, "evaluate: no sample with a usable mask");

  EvalReport report;
  report.config = cfg;
  report.category_names = ds.category_names;
  report.sample_count = sample_count;
  report.pair_count = pair_count;
  double iou_sum = 0.0, lev_sum = 0.0;
  for (const auto& [cat, acc] : iou_acc) {
    const double v = acc.first / static_cast<double>(acc.second);
    report.per_category_iou[cat] = v;
    iou_sum += v;
  }
  for (const auto& [cat, acc] : lev_acc) {
    const double v = static_cast<double>(acc.first) / static_cast<double>(acc.second);
    report.per_category_lev[cat] = v;
    lev_sum += v;
  }
  report.miou = iou_sum / static_cast<double>(report.per_category_iou.size());
  report.mlev = lev_sum / static_cast<double>(report.per_category_lev.size());
  return report;
}

}  // namespace mlcam
