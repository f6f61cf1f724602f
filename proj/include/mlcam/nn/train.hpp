#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mlcam/dataset/types.hpp"
#include "mlcam/nn/loss.hpp"
#include "mlcam/nn/model.hpp"

namespace mlcam {

struct TrainConfig {
  double initial_lr = 0.0001;
  int batch_size = 20;
  int max_epochs = 100;
  int plateau_window = 5;          // epochs per plateau check
  double plateau_threshold = 1e-3; // required relative loss decrease
  double lr_decay_ratio = 0.5;
  double lambda_orth = 0.0001;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  MLCAM_CHECK(cfg.initial_lr > 0 && cfg.batch_size > 0 && cfg.max_epochs > 0 &&
                  cfg.plateau_window > 0 && cfg.plateau_threshold > 0 &&
                  cfg.lambda_orth >= 0 && cfg.momentum >= 0,
              Config, "train: non-positive config field");
  MLCAM_CHECK(cfg.lr_decay_ratio > 0 && cfg.lr_decay_ratio <= 1, Config,
              "train: lr_decay_ratio must be in (0,1]");
}

// Pack a whole dataset into one image tensor (samples as columns); batches
// gather columns from it.
template <typename S>
Tensor4<S> pack_images(const Dataset<S>& ds) {
  MLCAM_CHECK(!ds.samples.empty(), Contract, "pack: empty dataset");
  const auto h = ds.samples.front().height(), w = ds.samples.front().width();
  Tensor4<S> x(static_cast<Eigen::Index>(ds.samples.size()), 3, h, w);
  for (std::size_t n = 0; n < ds.samples.size(); ++n) {
    const auto& img = ds.samples[n].image;
    MLCAM_CHECK(img.h() == h && img.w() == w, Contract,
                "pack: mixed image sizes; normalize first");
    for (int c = 0; c < 3; ++c)
      x.plane(static_cast<Eigen::Index>(n), c) = img.ch[c];
  }
  return x;
}

// Multi-hot targets as an n_labels × n_samples matrix.
template <typename S>
MatX<S> pack_labels(const Dataset<S>& ds) {
  MLCAM_CHECK(!ds.samples.empty(), Contract, "pack: empty dataset");
  const auto n_labels = ds.samples.front().labels.size();
  MatX<S> y(static_cast<Eigen::Index>(n_labels),
            static_cast<Eigen::Index>(ds.samples.size()));
  for (std::size_t n = 0; n < ds.samples.size(); ++n) {
    MLCAM_CHECK(ds.samples[n].labels.size() == n_labels, Contract,
                "pack: ragged label vectors");
    for (std::size_t c = 0; c < n_labels; ++c)
      y(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(n)) =
          static_cast<S>(ds.samples[n].labels[c]);
  }
  return y;
}

template <typename S>
Tensor4<S> gather_columns(const Tensor4<S>& x, const std::vector<std::size_t>& idx,
                          std::size_t begin, std::size_t end) {
  Tensor4<S> out(static_cast<Eigen::Index>(end - begin), x.c(), x.h(), x.w());
  for (std::size_t i = begin; i < end; ++i)
    out.mat().col(static_cast<Eigen::Index>(i - begin)) =
        x.mat().col(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// SGD with momentum and the plateau learning-rate schedule: at the end of
// every plateau_window epochs, compare the epoch loss against the window's
// first epoch; if the relative decrease is below plateau_threshold, multiply
// the rate by lr_decay_ratio. The rate therefore equals
// initial_lr * ratio^(#triggered plateaus) and never increases.
template <typename S>
std::vector<LossBreakdown> train(ClassifierModel<S>& model, const Tensor4<S>& images,
                                 const MatX<S>& targets, const TrainConfig& cfg) {
  validate(cfg);
  MLCAM_CHECK(images.n() >= 1, Contract, "train: empty dataset");
  MLCAM_CHECK(targets.cols() == images.n(), Contract,
              "train: image/label count mismatch");
  MLCAM_CHECK(targets.rows() == model.n_labels, Contract,
              "train: label length != model outputs");

  const int n_branches = model.n_branches();
  std::vector<BranchGrads<S>> grads, velocity;
  for (const auto& br : model.branches) {
    grads.push_back(br.zero_grads());
    velocity.push_back(br.zero_grads());
  }

  Rng shuffle_rng(derive_seed(cfg.seed, 0x53485546ull));  // shuffle stream
  const std::size_t n = static_cast<std::size_t>(images.n());
  std::vector<LossBreakdown> history;
  double lr = cfg.initial_lr;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto perm = shuffle_rng.permutation(n);
    LossBreakdown epoch_loss;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      Tensor4<S> xb = gather_columns(images, perm, begin, end);
      MatX<S> yb(targets.rows(), static_cast<Eigen::Index>(end - begin));
      for (std::size_t i = begin; i < end; ++i)
        yb.col(static_cast<Eigen::Index>(i - begin)) =
            targets.col(static_cast<Eigen::Index>(perm[i]));

      std::vector<BranchTape<S>> tapes;
      tapes.reserve(static_cast<std::size_t>(n_branches));
      for (const auto& br : model.branches) tapes.push_back(br.forward(xb));

      LossBreakdown step;
      step.l_c1 = bce_with_logits(tapes[0].logits, yb);
      if (n_branches == 2) {
        step.l_c2 = bce_with_logits(tapes[1].logits, yb);
        step.l_o = orthogonal_loss(tapes[0].features, tapes[1].features);
      }
      step.l_all = step.l_c1 + step.l_c2 + cfg.lambda_orth * step.l_o;

      for (auto& g : grads) {
        for (auto& m : g.conv_w) m.setZero();
        for (auto& v : g.conv_b) v.setZero();
        g.head_w.setZero();
        g.head_b.setZero();
      }
      if (n_branches == 2 && cfg.lambda_orth > 0) {
        auto [d1, d2] = orthogonal_loss_grads(tapes[0].features, tapes[1].features);
        d1.mat() *= static_cast<S>(cfg.lambda_orth);
        d2.mat() *= static_cast<S>(cfg.lambda_orth);
        model.branches[0].backward(tapes[0], bce_with_logits_grad(tapes[0].logits, yb),
                                   &d1, grads[0]);
        model.branches[1].backward(tapes[1], bce_with_logits_grad(tapes[1].logits, yb),
                                   &d2, grads[1]);
      } else {
        for (int b = 0; b < n_branches; ++b)
          model.branches[static_cast<std::size_t>(b)].backward(
              tapes[static_cast<std::size_t>(b)],
              bce_with_logits_grad(tapes[static_cast<std::size_t>(b)].logits, yb),
              nullptr, grads[static_cast<std::size_t>(b)]);
      }

      for (int b = 0; b < n_branches; ++b) {
        auto& v = velocity[static_cast<std::size_t>(b)];
        for (auto& m : v.conv_w) m *= static_cast<S>(cfg.momentum);
        for (auto& vec : v.conv_b) vec *= static_cast<S>(cfg.momentum);
        v.head_w *= static_cast<S>(cfg.momentum);
        v.head_b *= static_cast<S>(cfg.momentum);
        v.add_scaled(grads[static_cast<std::size_t>(b)], S(1));
        model.branches[static_cast<std::size_t>(b)].apply_update(v, static_cast<S>(lr));
      }

      const double weight = static_cast<double>(end - begin) / static_cast<double>(n);
      epoch_loss.l_c1 += step.l_c1 * weight;
      epoch_loss.l_c2 += step.l_c2 * weight;
      epoch_loss.l_o += step.l_o * weight;
      epoch_loss.l_all += step.l_all * weight;
    }

    if (!std::isfinite(epoch_loss.l_all))
      fail(ErrorKind::Training,
           "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    history.push_back(epoch_loss);

    if ((epoch + 1) % cfg.plateau_window == 0 && epoch + 1 >= cfg.plateau_window) {
      const double ref = history[static_cast<std::size_t>(epoch + 1 - cfg.plateau_window)].l_all;
      const double cur = epoch_loss.l_all;
      const bool plateau = std::isinf(cfg.plateau_threshold)
                               ? true
                               : (ref - cur) < cfg.plateau_threshold * std::abs(ref);
      if (plateau) lr *= cfg.lr_decay_ratio;
    }
  }
  return history;
}

// Single-branch convenience: plain BCE training (the hierarchy/ablation path).
template <typename S>
std::vector<LossBreakdown> train_single_branch(ClassifierModel<S>& model,
                                               const Tensor4<S>& images,
                                               const MatX<S>& targets,
                                               const TrainConfig& cfg) {
  MLCAM_CHECK(model.n_branches() == 1, Contract,
              "train_single_branch: model has two branches");
  return train(model, images, targets, cfg);
}

}  // namespace mlcam
