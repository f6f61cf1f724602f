#pragma once

#include <vector>

#include "mlcam/cam/gradcam.hpp"

namespace mlcam {

// Eq.-style fusion inputs: the identity-level map for the target category,
// one map per clustered level (the cluster containing the target), and the
// rest-classes map to subtract. All must share shape and be normalized.
template <typename S>
struct FusionInputs {
  ActivationMap<S> m0;
  std::vector<ActivationMap<S>> level_maps;
  ActivationMap<S> m0_rest;
};

template <typename S>
void validate(const FusionInputs<S>& in) {
  MLCAM_CHECK(!in.level_maps.empty(), Config,
              "fuse_levels: need at least one clustered level (k >= 1)");
  MLCAM_CHECK(fusion_ready(in.m0) && fusion_ready(in.m0_rest), Contract,
              "fuse_levels: maps must be min-max normalized");
  for (const auto& m : in.level_maps) {
    MLCAM_CHECK(fusion_ready(m), Contract,
                "fuse_levels: maps must be min-max normalized");
    MLCAM_CHECK(m.h() == in.m0.h() && m.w() == in.m0.w(), Contract,
                "fuse_levels: map shapes differ");
  }
  MLCAM_CHECK(in.m0_rest.h() == in.m0.h() && in.m0_rest.w() == in.m0.w(),
              Contract, "fuse_levels: map shapes differ");
}

// Exact pre-clamp arithmetic of the fusion formula:
//   M = M0 + (1/k) * sum_i M_i - M0_rest.
// Exposed separately so its linearity can be tested against scalar oracles.
template <typename S>
MatX<S> fuse_pre_clamp(const FusionInputs<S>& in) {
  validate(in);
  MatX<S> acc = MatX<S>::Zero(in.m0.h(), in.m0.w());
  for (const auto& m : in.level_maps) acc += m.values;
  acc *= S(1) / static_cast<S>(in.level_maps.size());
  acc += in.m0.values;
  acc -= in.m0_rest.values;
  return acc;
}

// Full fusion: the pre-clamp map can go negative where the rest-classes map
// dominates, so it is clamped at 0 and re-normalized to [0,1] for the
// thresholded evaluation.
template <typename S>
ActivationMap<S> fuse_levels(const FusionInputs<S>& in) {
  ActivationMap<S> raw;
  raw.values = fuse_pre_clamp(in).cwiseMax(S(0));
  raw.norm = MapNorm::Raw;
  raw.all_zero = raw.values.maxCoeff() == S(0);
  if (raw.all_zero) return raw;
  return minmax_normalize(raw);
}

// Rest-classes map M'_0: elementwise max of the level-0 maps of every other
// category the model predicts present (probability > 0.5), re-normalized.
// All-zero when no other category is predicted.
template <typename S>
ActivationMap<S> rest_classes_cam(const ClassifierModel<S>& level0_model,
                                  const Tensor4<S>& image, int target,
                                  double presence_threshold = 0.5) {
  VecX<double> probs = predict_probabilities(level0_model, image);
  ActivationMap<S> rest;
  rest.values = MatX<S>::Zero(image.h(), image.w());
  rest.norm = MapNorm::Raw;
  rest.all_zero = true;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    if (static_cast<int>(c) == target || probs(c) <= presence_threshold) continue;
    ActivationMap<S> m = model_cam(level0_model, image, static_cast<int>(c));
    rest.values = rest.values.cwiseMax(m.values);
    rest.all_zero = rest.all_zero && m.all_zero;
  }
  if (rest.values.maxCoeff() == S(0)) {
    rest.all_zero = true;
    return rest;
  }
  return minmax_normalize(rest);
}

}  // namespace mlcam
