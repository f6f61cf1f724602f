#pragma once

#include <cmath>

#include "mlcam/core/tensor.hpp"

namespace mlcam {

// Per-epoch / per-step loss components. l_all = l_c1 + l_c2 + lambda*l_o by
// construction; everything is accumulated in double regardless of the
// model scalar so the identity survives logging.
struct LossBreakdown {
  double l_c1 = 0.0;
  double l_c2 = 0.0;
  double l_o = 0.0;
  double l_all = 0.0;
};

// Numerically stable binary cross entropy with logits, mean over every
// label entry: max(z,0) - z*y + log(1 + exp(-|z|)).
template <typename S>
double bce_with_logits(const MatX<S>& logits, const MatX<S>& targets) {
  MLCAM_CHECK(logits.rows() == targets.rows() && logits.cols() == targets.cols(),
              Contract, "bce: shape mismatch");
  MLCAM_CHECK(logits.size() > 0, Contract, "bce: empty input");
  double total = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double z = static_cast<double>(logits(r, c));
      const double y = static_cast<double>(targets(r, c));
      MLCAM_CHECK(y == 0.0 || y == 1.0, Contract, "bce: targets must be 0/1");
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
  }
  return total / static_cast<double>(logits.size());
}

// dL/dlogits of the mean BCE: (sigmoid(z) - y) / count.
template <typename S>
MatX<S> bce_with_logits_grad(const MatX<S>& logits, const MatX<S>& targets) {
  const double inv = 1.0 / static_cast<double>(logits.size());
  MatX<S> g(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c)
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double z = static_cast<double>(logits(r, c));
      const double sig = 1.0 / (1.0 + std::exp(-z));
      g(r, c) = static_cast<S>((sig - static_cast<double>(targets(r, c))) * inv);
    }
  return g;
}

// Feature-orthogonal loss: sum over elements of f1 .* f2, averaged over the
// batch dimension. Nonnegative whenever both tensors are (they are post-ReLU
// in training); the arithmetic itself accepts any reals so finite-difference
// probes can perturb freely.
template <typename S>
double orthogonal_loss(const Tensor4<S>& f1, const Tensor4<S>& f2) {
  MLCAM_CHECK(f1.same_shape(f2), Contract, "orthogonal_loss: shape mismatch");
  MLCAM_CHECK(f1.n() >= 1, Contract, "orthogonal_loss: empty batch");
  double total = 0.0;
  const auto& a = f1.mat();
  const auto& b = f2.mat();
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      total += static_cast<double>(a(r, c)) * static_cast<double>(b(r, c));
  return total / static_cast<double>(f1.n());
}

// Gradients of orthogonal_loss w.r.t. each feature tensor (without lambda).
template <typename S>
std::pair<Tensor4<S>, Tensor4<S>> orthogonal_loss_grads(const Tensor4<S>& f1,
                                                        const Tensor4<S>& f2) {
  MLCAM_CHECK(f1.same_shape(f2), Contract, "orthogonal_loss: shape mismatch");
  const S inv = S(1) / static_cast<S>(f1.n());
  Tensor4<S> d1 = f2, d2 = f1;
  d1.mat() *= inv;
  d2.mat() *= inv;
  return {std::move(d1), std::move(d2)};
}

// Eq.-style full objective: L_all = L_c1 + L_c2 + lambda * L_o.
template <typename S>
LossBreakdown total_loss(const MatX<S>& logits1, const MatX<S>& logits2,
                         const MatX<S>& targets, const Tensor4<S>& f1,
                         const Tensor4<S>& f2, double lambda) {
  LossBreakdown out;
  out.l_c1 = bce_with_logits(logits1, targets);
  out.l_c2 = bce_with_logits(logits2, targets);
  out.l_o = orthogonal_loss(f1, f2);
  out.l_all = out.l_c1 + out.l_c2 + lambda * out.l_o;
  return out;
}

}  // namespace mlcam
