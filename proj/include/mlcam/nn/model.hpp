#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mlcam/nn/layers.hpp"

namespace mlcam {

// Small stride-2 conv stack ending in GAP + one FC head. The last conv
// block's post-ReLU tensor is the "feature" every other module consumes:
// Grad-CAM weights it, the orthogonal loss couples it across branches, and
// the head weight rows over its channels are the category features used for
// clustering.
struct BackboneSpec {
  std::string architecture = "smallcnn";
  std::vector<int> conv_channels = {32, 64, 128, 128};
  int input_size = 224;

  int n_k() const { return conv_channels.back(); }
  int n_blocks() const { return static_cast<int>(conv_channels.size()); }
  // Each block halves the grid (kernel 3, stride 2, pad 1): out = ceil(in/2).
  int feature_side() const {
    int s = input_size;
    for (int i = 0; i < n_blocks(); ++i) s = (s + 1) / 2;
    return s;
  }
  std::pair<int, int> feature_spatial() const { return {feature_side(), feature_side()}; }
};

inline constexpr double kInputShift = 0.5;     // center [0,1] pixels
inline constexpr double kHeadWeightStd = 0.01;
inline constexpr double kHeadBias = -2.2;      // ~logit of a sparse label prior

// Everything the backward pass needs from one branch forward.
template <typename S>
struct BranchTape {
  std::vector<Tensor4<S>> inputs;  // input to conv i (shifted / post-ReLU)
  std::vector<Tensor4<S>> pre;     // conv i output before ReLU
  Tensor4<S> features;             // post-ReLU final conv tensor
  MatX<S> pooled;                  // n_k × batch
  MatX<S> logits;                  // n_labels × batch
};

template <typename S>
struct BranchGrads {
  std::vector<MatX<S>> conv_w;
  std::vector<VecX<S>> conv_b;
  MatX<S> head_w;
  VecX<S> head_b;

  void add_scaled(const BranchGrads& other, S scale) {
    for (std::size_t i = 0; i < conv_w.size(); ++i) {
      conv_w[i] += scale * other.conv_w[i];
      conv_b[i] += scale * other.conv_b[i];
    }
    head_w += scale * other.head_w;
    head_b += scale * other.head_b;
  }
};

template <typename S>
class BranchNet {
 public:
  BranchNet() = default;
  BranchNet(int n_labels, const BackboneSpec& spec, std::uint64_t seed)
      : spec_(spec), n_labels_(n_labels) {
    MLCAM_CHECK(n_labels >= 1, Config, "model: need >= 1 output node");
    MLCAM_CHECK(!spec.conv_channels.empty(), Config, "model: empty conv stack");
    Rng rng(seed);
    Eigen::Index in_ch = 3;
    for (int ch : spec.conv_channels) {
      convs_.emplace_back(in_ch, ch, 3, 2, 1);
      convs_.back().init(rng);
      in_ch = ch;
    }
    head_ = Dense<S>(spec.n_k(), n_labels);
    head_.init(rng, kHeadWeightStd, kHeadBias);
  }

  int n_labels() const { return n_labels_; }
  const BackboneSpec& spec() const { return spec_; }
  std::vector<Conv2d<S>>& convs() { return convs_; }
  const std::vector<Conv2d<S>>& convs() const { return convs_; }
  Dense<S>& head() { return head_; }
  const Dense<S>& head() const { return head_; }

  void check_input(const Tensor4<S>& x) const {
    MLCAM_CHECK(x.c() == 3 && x.h() == spec_.input_size && x.w() == spec_.input_size,
                Contract, "forward: input is not 3 x input_size x input_size");
  }

  BranchTape<S> forward(const Tensor4<S>& x) const {
    check_input(x);
    BranchTape<S> tape;
    Tensor4<S> cur = x;
    cur.mat().array() -= static_cast<S>(kInputShift);
    for (const auto& conv : convs_) {
      tape.inputs.push_back(cur);
      Tensor4<S> pre = conv.forward(cur);
      cur = relu(pre);
      tape.pre.push_back(std::move(pre));
    }
    tape.features = std::move(cur);
    tape.pooled = global_avg_pool(tape.features);
    tape.logits = head_.forward(tape.pooled);
    return tape;
  }

  BranchGrads<S> zero_grads() const {
    BranchGrads<S> g;
    for (const auto& c : convs_) {
      g.conv_w.emplace_back(MatX<S>::Zero(c.weight.rows(), c.weight.cols()));
      g.conv_b.emplace_back(VecX<S>::Zero(c.bias.size()));
    }
    g.head_w = MatX<S>::Zero(head_.weight.rows(), head_.weight.cols());
    g.head_b = VecX<S>::Zero(head_.bias.size());
    return g;
  }

  // Backprop from (dL/dlogits, dL/dfeatures). The feature-gradient term is
  // how the orthogonal loss couples into the stack; pass zeros when unused.
  void backward(const BranchTape<S>& tape, const MatX<S>& dlogits,
                const Tensor4<S>* dfeatures_extra, BranchGrads<S>& grads) const {
    MatX<S> dpooled = head_.backward(tape.pooled, dlogits, grads.head_w, grads.head_b);
    Tensor4<S> dfeat = global_avg_pool_backward(dpooled, tape.features);
    if (dfeatures_extra != nullptr) {
      MLCAM_CHECK(dfeatures_extra->same_shape(dfeat), Contract,
                  "backward: feature grad shape mismatch");
      dfeat.mat() += dfeatures_extra->mat();
    }
    Tensor4<S> dcur = std::move(dfeat);
    for (std::size_t i = convs_.size(); i-- > 0;) {
      Tensor4<S> dpre = relu_backward(dcur, tape.pre[i]);
      dcur = convs_[i].backward(tape.inputs[i], dpre, grads.conv_w[i], grads.conv_b[i]);
    }
  }

  void apply_update(const BranchGrads<S>& velocity, S lr) {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i].weight -= lr * velocity.conv_w[i];
      convs_[i].bias -= lr * velocity.conv_b[i];
    }
    head_.weight -= lr * velocity.head_w;
    head_.bias -= lr * velocity.head_b;
  }

 private:
  BackboneSpec spec_;
  int n_labels_ = 0;
  std::vector<Conv2d<S>> convs_;
  Dense<S> head_;
};

// One or two branches over the same input. Two branches (the default) are
// coupled only through the orthogonal loss during training; a single branch
// is the plain classifier used for hierarchy building and ablations.
template <typename S>
struct ClassifierModel {
  BackboneSpec backbone;
  int n_labels = 0;
  std::vector<BranchNet<S>> branches;

  int n_branches() const { return static_cast<int>(branches.size()); }
};

template <typename S>
ClassifierModel<S> build_model(int n_labels, const BackboneSpec& backbone,
                               std::uint64_t seed, int n_branches = 2) {
  MLCAM_CHECK(n_labels >= 1, Config, "build_model: n_labels must be >= 1");
  MLCAM_CHECK(n_branches == 1 || n_branches == 2, Config,
              "build_model: 1 or 2 branches");
  ClassifierModel<S> model;
  model.backbone = backbone;
  model.n_labels = n_labels;
  for (int b = 0; b < n_branches; ++b)
    model.branches.emplace_back(n_labels, backbone,
                                derive_seed(seed, static_cast<std::uint64_t>(b)));
  return model;
}

// Forward through every branch; index 0/1 are branch 1/2 of the paper.
template <typename S>
std::vector<BranchTape<S>> forward(const ClassifierModel<S>& model,
                                   const Tensor4<S>& images) {
  std::vector<BranchTape<S>> tapes;
  tapes.reserve(model.branches.size());
  for (const auto& br : model.branches) tapes.push_back(br.forward(images));
  return tapes;
}

// Head weight rows of branch 1: row i is category i's feature vector.
template <typename S>
MatX<S> extract_category_features(const ClassifierModel<S>& model) {
  MLCAM_CHECK(!model.branches.empty(), State, "extract: model has no branches");
  return model.branches.front().head().weight;
}

}  // namespace mlcam
