#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "mlcam/core/error.hpp"

namespace mlcam {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
using RowVecX = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// Binary mask / label grid (0 or 1 per cell).
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

// Mini-batch of feature maps: n samples × c channels × h × w.
// Storage is a single (c*h*w) × n column-major matrix, so each sample is one
// contiguous column and each channel plane is a contiguous h×w block inside
// it. This layout lets convolution run as a GEMM over column blocks and lets
// Eigen expressions apply elementwise ops to the whole batch at once.
template <typename S>
class Tensor4 {
 public:
  using Plane = Eigen::Map<MatX<S>>;
  using ConstPlane = Eigen::Map<const MatX<S>>;

  Tensor4() : n_(0), c_(0), h_(0), w_(0) {}
  Tensor4(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w)
      : n_(n), c_(c), h_(h), w_(w), data_(MatX<S>::Zero(c * h * w, n)) {
    MLCAM_CHECK(n >= 0 && c >= 1 && h >= 1 && w >= 1, Contract,
                "Tensor4: non-positive dimension");
  }

  Eigen::Index n() const { return n_; }
  Eigen::Index c() const { return c_; }
  Eigen::Index h() const { return h_; }
  Eigen::Index w() const { return w_; }
  Eigen::Index plane_size() const { return h_ * w_; }
  Eigen::Index size() const { return data_.size(); }

  MatX<S>& mat() { return data_; }
  const MatX<S>& mat() const { return data_; }

  bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  // h×w view of one channel plane of one sample (column-major inside).
  Plane plane(Eigen::Index sample, Eigen::Index channel) {
    return Plane(data_.col(sample).data() + channel * plane_size(), h_, w_);
  }
  ConstPlane plane(Eigen::Index sample, Eigen::Index channel) const {
    return ConstPlane(data_.col(sample).data() + channel * plane_size(), h_, w_);
  }

  S& at(Eigen::Index n, Eigen::Index c, Eigen::Index y, Eigen::Index x) {
    return data_(c * plane_size() + x * h_ + y, n);
  }
  S at(Eigen::Index n, Eigen::Index c, Eigen::Index y, Eigen::Index x) const {
    return data_(c * plane_size() + x * h_ + y, n);
  }

  Tensor4 like_zero() const { return Tensor4(n_, c_, h_, w_); }

 private:
  Eigen::Index n_, c_, h_, w_;
  MatX<S> data_;
};

template <typename S>
Tensor4<S> relu(const Tensor4<S>& x) {
  Tensor4<S> y = x;
  y.mat() = y.mat().cwiseMax(S(0));
  return y;
}

// dL/dx given dL/dy and the pre-activation input.
template <typename S>
Tensor4<S> relu_backward(const Tensor4<S>& grad_out, const Tensor4<S>& pre) {
  MLCAM_CHECK(grad_out.same_shape(pre), Contract, "relu_backward: shape mismatch");
  Tensor4<S> g = grad_out;
  g.mat() = (pre.mat().array() > S(0)).template cast<S>() * g.mat().array();
  return g;
}

}  // namespace mlcam
