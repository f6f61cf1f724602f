#pragma once

#include <vector>

#include "mlcam/cam/types.hpp"
#include "mlcam/nn/model.hpp"

namespace mlcam {

// Grad-CAM channel weights: the spatial average of d(logit_target)/d(features),
// obtained by running the actual head backward (one-hot logit gradient through
// the FC layer and the global average pool). For a GAP+FC head this equals
// head_weight_row / (h*w), but it is computed, not assumed.
template <typename S>
VecX<S> gradcam_channel_weights(const BranchNet<S>& branch,
                                const BranchTape<S>& tape, int target) {
  MLCAM_CHECK(target >= 0 && target < branch.n_labels(), Lookup,
              "grad_cam: target label out of range");
  MatX<S> dlogits = MatX<S>::Zero(tape.logits.rows(), tape.logits.cols());
  dlogits(target, 0) = S(1);
  // Head backward without touching parameter gradients.
  MatX<S> dpooled = branch.head().weight.transpose() * dlogits;  // n_k × 1
  Tensor4<S> dfeat = global_avg_pool_backward(dpooled, tape.features);
  VecX<S> alpha(tape.features.c());
  const S inv = S(1) / static_cast<S>(tape.features.plane_size());
  for (Eigen::Index k = 0; k < tape.features.c(); ++k)
    alpha(k) = dfeat.plane(0, k).sum() * inv;  // spatial mean of the gradient
  return alpha;
}

// Raw rectified weighted channel sum on the feature grid.
template <typename S>
ActivationMap<S> gradcam_feature_map(const BranchTape<S>& tape, const VecX<S>& alpha) {
  ActivationMap<S> m;
  m.values = MatX<S>::Zero(tape.features.h(), tape.features.w());
  for (Eigen::Index k = 0; k < tape.features.c(); ++k)
    m.values += alpha(k) * tape.features.plane(0, k).eval();
  m.values = m.values.cwiseMax(S(0));
  m.norm = MapNorm::Raw;
  m.all_zero = m.values.maxCoeff() == S(0);
  return m;
}

// Full per-branch Grad-CAM: weights from the head gradient, rectified
// weighted sum, bilinear upsample to image resolution, min-max normalize.
template <typename S>
ActivationMap<S> grad_cam(const BranchNet<S>& branch, const Tensor4<S>& image,
                          int target) {
  MLCAM_CHECK(image.n() == 1, Contract, "grad_cam: expects a single image");
  BranchTape<S> tape = branch.forward(image);
  VecX<S> alpha = gradcam_channel_weights(branch, tape, target);
  ActivationMap<S> raw = gradcam_feature_map(tape, alpha);
  ActivationMap<S> up;
  up.values = bilinear_resize(raw.values, image.h(), image.w());
  // Upsampling zeros stays zero; otherwise interpolation keeps values >= 0.
  up.norm = MapNorm::Raw;
  up.all_zero = up.values.maxCoeff() == S(0);
  if (up.all_zero) return up;
  return minmax_normalize(up);
}

// §-style branch combination: elementwise average of two normalized maps.
// The result generally peaks below 1, so it is re-normalized by callers that
// feed fusion (fusion requires min-max normalized inputs).
template <typename S>
ActivationMap<S> combine_branches(const ActivationMap<S>& m1,
                                  const ActivationMap<S>& m2) {
  MLCAM_CHECK(m1.h() == m2.h() && m1.w() == m2.w(), Contract,
              "combine_branches: shape mismatch");
  MLCAM_CHECK(fusion_ready(m1) && fusion_ready(m2), Contract,
              "combine_branches: maps must be min-max normalized");
  ActivationMap<S> out;
  out.values = (m1.values + m2.values) / S(2);
  out.all_zero = m1.all_zero && m2.all_zero;
  // The average of two normalized maps keeps [0,1] but only counts as
  // normalized if the full range survived.
  out.norm = (!out.all_zero && out.values.maxCoeff() == S(1) &&
              out.values.minCoeff() == S(0))
                 ? MapNorm::MinMax
                 : MapNorm::Raw;
  return out;
}

// Model-level CAM for one target node: per-branch Grad-CAMs averaged, then
// re-normalized so downstream fusion sees a [0,1] map with max 1.
template <typename S>
ActivationMap<S> model_cam(const ClassifierModel<S>& model, const Tensor4<S>& image,
                           int target) {
  MLCAM_CHECK(!model.branches.empty(), State, "model_cam: untrained model");
  ActivationMap<S> acc = grad_cam(model.branches.front(), image, target);
  for (std::size_t b = 1; b < model.branches.size(); ++b)
    acc = combine_branches(acc, grad_cam(model.branches[b], image, target));
  if (acc.all_zero) return acc;
  return minmax_normalize(acc);
}

// Mean of per-branch sigmoid probabilities for every output node.
template <typename S>
VecX<double> predict_probabilities(const ClassifierModel<S>& model,
                                   const Tensor4<S>& image) {
  MLCAM_CHECK(image.n() == 1, Contract, "predict: expects a single image");
  VecX<double> probs = VecX<double>::Zero(model.n_labels);
  for (const auto& br : model.branches) {
    BranchTape<S> tape = br.forward(image);
    for (Eigen::Index i = 0; i < probs.size(); ++i)
      probs(i) += 1.0 / (1.0 + std::exp(-static_cast<double>(tape.logits(i, 0))));
  }
  return probs / static_cast<double>(model.branches.size());
}

}  // namespace mlcam
