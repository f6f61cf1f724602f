#pragma once

#include <Eigen/Dense>

#include "mlcam/core/rng.hpp"
#include "mlcam/core/tensor.hpp"

namespace mlcam {

// 2-D convolution, implemented as im2col + GEMM. Weight rows are output
// channels; each row holds a (in_channels × kh × kw) receptive-field patch
// laid out to match im2col's row order (channel, then kx, then ky).
template <typename S>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Eigen::Index in_ch, Eigen::Index out_ch, Eigen::Index kernel,
         Eigen::Index stride, Eigen::Index pad)
      : in_ch_(in_ch), out_ch_(out_ch), kh_(kernel), kw_(kernel),
        stride_(stride), pad_(pad),
        weight(MatX<S>::Zero(out_ch, in_ch * kernel * kernel)),
        bias(VecX<S>::Zero(out_ch)) {}

  // He-normal weights (fan-in of the receptive field), zero bias.
  void init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(weight.cols()));
    for (Eigen::Index r = 0; r < weight.rows(); ++r)
      for (Eigen::Index c = 0; c < weight.cols(); ++c)
        weight(r, c) = static_cast<S>(rng.normal(0.0, stddev));
    bias.setZero();
  }

  Eigen::Index out_h(Eigen::Index h) const { return (h + 2 * pad_ - kh_) / stride_ + 1; }
  Eigen::Index out_w(Eigen::Index w) const { return (w + 2 * pad_ - kw_) / stride_ + 1; }
  Eigen::Index in_channels() const { return in_ch_; }
  Eigen::Index out_channels() const { return out_ch_; }

  // Gather receptive fields of every output pixel of one sample into
  // columns: col(ci*kh*kw + kx*kh + ky, x*oh + y). Out-of-image taps are 0.
  void im2col(const Tensor4<S>& x, Eigen::Index sample, MatX<S>& col) const {
    const Eigen::Index h = x.h(), w = x.w(), oh = out_h(h), ow = out_w(w);
    col.setZero(in_ch_ * kh_ * kw_, oh * ow);
    for (Eigen::Index ci = 0; ci < in_ch_; ++ci) {
      auto plane = x.plane(sample, ci);
      for (Eigen::Index kx = 0; kx < kw_; ++kx) {
        for (Eigen::Index ky = 0; ky < kh_; ++ky) {
          const Eigen::Index row = ci * kh_ * kw_ + kx * kh_ + ky;
          for (Eigen::Index ox = 0; ox < ow; ++ox) {
            const Eigen::Index ix = ox * stride_ - pad_ + kx;
            if (ix < 0 || ix >= w) continue;
            for (Eigen::Index oy = 0; oy < oh; ++oy) {
              const Eigen::Index iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= h) continue;
              col(row, ox * oh + oy) = plane(iy, ix);
            }
          }
        }
      }
    }
  }

  Tensor4<S> forward(const Tensor4<S>& x) const {
    MLCAM_CHECK(x.c() == in_ch_, Contract, "conv: channel mismatch");
    const Eigen::Index oh = out_h(x.h()), ow = out_w(x.w());
    Tensor4<S> y(x.n(), out_ch_, oh, ow);
    MatX<S> col;
    for (Eigen::Index n = 0; n < x.n(); ++n) {
      im2col(x, n, col);
      // (S_pix × out_ch) view of this sample's output, channel-major planes.
      Eigen::Map<MatX<S>> out(y.mat().col(n).data(), oh * ow, out_ch_);
      out.noalias() = col.transpose() * weight.transpose();
      out.rowwise() += bias.transpose();
    }
    return y;
  }

  // Accumulates dW/db into the given buffers and returns dL/dx.
  Tensor4<S> backward(const Tensor4<S>& x, const Tensor4<S>& grad_out,
                      MatX<S>& dweight, VecX<S>& dbias) const {
    const Eigen::Index h = x.h(), w = x.w(), oh = out_h(h), ow = out_w(w);
    Tensor4<S> dx = x.like_zero();
    MatX<S> col, dcol;
    for (Eigen::Index n = 0; n < x.n(); ++n) {
      im2col(x, n, col);
      Eigen::Map<const MatX<S>> g(grad_out.mat().col(n).data(), oh * ow, out_ch_);
      dweight.noalias() += g.transpose() * col.transpose();
      dbias.noalias() += g.colwise().sum().transpose();
      dcol.noalias() = weight.transpose() * g.transpose();  // (cikhkw) × pix
      // col2im: scatter-add receptive-field gradients back onto the input.
      for (Eigen::Index ci = 0; ci < in_ch_; ++ci) {
        auto dplane = dx.plane(n, ci);
        for (Eigen::Index kx = 0; kx < kw_; ++kx) {
          for (Eigen::Index ky = 0; ky < kh_; ++ky) {
            const Eigen::Index row = ci * kh_ * kw_ + kx * kh_ + ky;
            for (Eigen::Index ox = 0; ox < ow; ++ox) {
              const Eigen::Index ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= w) continue;
              for (Eigen::Index oy = 0; oy < oh; ++oy) {
                const Eigen::Index iy = oy * stride_ - pad_ + ky;
                if (iy < 0 || iy >= h) continue;
                dplane(iy, ix) += dcol(row, ox * oh + oy);
              }
            }
          }
        }
      }
    }
    return dx;
  }

  MatX<S> weight;  // out_ch × (in_ch·kh·kw)
  VecX<S> bias;    // out_ch

 private:
  Eigen::Index in_ch_ = 0, out_ch_ = 0, kh_ = 0, kw_ = 0, stride_ = 1, pad_ = 0;
};

// Global average pool: (n,c,h,w) -> c × n matrix of plane means.
template <typename S>
MatX<S> global_avg_pool(const Tensor4<S>& x) {
  MatX<S> pooled(x.c(), x.n());
  const S inv = S(1) / static_cast<S>(x.plane_size());
  for (Eigen::Index n = 0; n < x.n(); ++n) {
    Eigen::Map<const MatX<S>> planes(x.mat().col(n).data(), x.plane_size(), x.c());
    pooled.col(n) = planes.colwise().sum().transpose() * inv;
  }
  return pooled;
}

// dL/dx of the pool: gradient spread uniformly over each plane.
template <typename S>
Tensor4<S> global_avg_pool_backward(const MatX<S>& grad_pooled,
                                    const Tensor4<S>& x_like) {
  Tensor4<S> dx = x_like.like_zero();
  const S inv = S(1) / static_cast<S>(x_like.plane_size());
  for (Eigen::Index n = 0; n < x_like.n(); ++n) {
    Eigen::Map<MatX<S>> planes(dx.mat().col(n).data(), x_like.plane_size(), x_like.c());
    planes.rowwise() = (grad_pooled.col(n) * inv).transpose();
  }
  return dx;
}

// Fully connected head: logits = W·x + b with x column-per-sample.
template <typename S>
class Dense {
 public:
  Dense() = default;
  Dense(Eigen::Index in, Eigen::Index out)
      : weight(MatX<S>::Zero(out, in)), bias(VecX<S>::Zero(out)) {}

  // Small-normal weights and a negative prior bias; the bias starts the
  // multi-hot sigmoid heads near the label prior instead of at 0.5, which
  // avoids the early all-negative plateau on sparse label vectors.
  void init(Rng& rng, double weight_stddev, double bias_value) {
    for (Eigen::Index r = 0; r < weight.rows(); ++r)
      for (Eigen::Index c = 0; c < weight.cols(); ++c)
        weight(r, c) = static_cast<S>(rng.normal(0.0, weight_stddev));
    bias.setConstant(static_cast<S>(bias_value));
  }

  MatX<S> forward(const MatX<S>& x) const {
    MatX<S> y = weight * x;
    y.colwise() += bias;
    return y;
  }

  MatX<S> backward(const MatX<S>& x, const MatX<S>& grad_out,
                   MatX<S>& dweight, VecX<S>& dbias) const {
    dweight.noalias() += grad_out * x.transpose();
    dbias.noalias() += grad_out.rowwise().sum();
    return weight.transpose() * grad_out;
  }

  MatX<S> weight;  // out × in
  VecX<S> bias;    // out
};

}  // namespace mlcam
