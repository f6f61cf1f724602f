#pragma once

#include "mlcam/core/image.hpp"
#include "mlcam/core/tensor.hpp"

namespace mlcam {

enum class MapNorm { Raw, MinMax };

// Dense nonnegative score grid aligned to image coordinates (or to the
// feature grid before upsampling). all_zero marks maps whose raw version was
// identically zero; those skip min-max normalization and stay Raw.
template <typename S>
struct ActivationMap {
  MatX<S> values;
  MapNorm norm = MapNorm::Raw;
  bool all_zero = false;

  Eigen::Index h() const { return values.rows(); }
  Eigen::Index w() const { return values.cols(); }
};

// Min-max rescale to [0,1]. A constant nonzero map maps to all-ones (the max
// must be 1 whenever the raw map is not identically zero); an all-zero map is
// returned as zeros, tagged Raw and flagged.
template <typename S>
ActivationMap<S> minmax_normalize(const ActivationMap<S>& m) {
  MLCAM_CHECK(m.values.size() > 0, Contract, "minmax: empty map");
  ActivationMap<S> out;
  const S lo = m.values.minCoeff();
  const S hi = m.values.maxCoeff();
  if (hi > lo) {
    out.values = (m.values.array() - lo) / (hi - lo);
    out.norm = MapNorm::MinMax;
  } else if (hi == S(0) && lo == S(0)) {
    out.values = MatX<S>::Zero(m.values.rows(), m.values.cols());
    out.norm = MapNorm::Raw;
    out.all_zero = true;
  } else {
    out.values = MatX<S>::Ones(m.values.rows(), m.values.cols());
    out.norm = MapNorm::MinMax;
  }
  return out;
}

// Maps entering combination/fusion must be min-max normalized; an all-zero
// map is acceptable in lieu (it has no scale to normalize).
template <typename S>
bool fusion_ready(const ActivationMap<S>& m) {
  return m.norm == MapNorm::MinMax || m.all_zero;
}

}  // namespace mlcam
