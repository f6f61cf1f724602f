#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mlcam/core/rng.hpp"
#include "mlcam/dataset/types.hpp"

namespace mlcam {
namespace synth {

// Color pathway of the generator: every category is a colored body with a
// small marker disk on it. The body carries the coarse cue (hue family +
// shape), the marker shade carries the fine cue, so a classifier can separate
// all categories while groups stay visually close -- the structure the
// hierarchy is expected to recover.
inline constexpr double kHues[4][3] = {{1.00, 0.15, 0.15},
                                       {0.15, 0.85, 0.20},
                                       {0.20, 0.35, 0.95},
                                       {0.90, 0.80, 0.15}};
inline constexpr double kBodyGray = 0.35;
inline constexpr double kBodyHueMix = 0.55;   // gray->hue blend for bodies
inline constexpr double kPaleMix = 0.55;      // white->hue blend
inline constexpr double kDarkMix = 0.60;      // black->hue blend
inline constexpr double kBackground = 0.12;
inline constexpr double kBackgroundNoise = 0.03;
inline constexpr double kBodyJitter = 0.05;
inline constexpr double kMarkerFrac = 0.30;   // marker radius as body fraction
inline constexpr double kMarkerMin = 1.6;
inline constexpr double kMarkerOffset = 0.45; // marker center at this * r
inline constexpr double kRadiusMin = 7.0;
inline constexpr double kRadiusMax = 10.0;
inline constexpr double kMultiObjectScale = 0.72;  // radius shrink when 2+ objects
inline constexpr int kPlacementTries = 25;

inline std::array<double, 3> lerp3(const double a[3], const double b[3], double t) {
  return {(1 - t) * a[0] + t * b[0], (1 - t) * a[1] + t * b[1],
          (1 - t) * a[2] + t * b[2]};
}

inline std::array<double, 3> body_color(int color_family) {
  const double gray[3] = {kBodyGray, kBodyGray, kBodyGray};
  return lerp3(gray, kHues[color_family % 4], kBodyHueMix);
}

inline std::array<double, 3> marker_color(int color_family, int texture_kind) {
  const double white[3] = {1, 1, 1};
  const double black[3] = {0, 0, 0};
  const double* hue = kHues[color_family % 4];
  switch (texture_kind % 3) {
    case 0: return lerp3(white, hue, kPaleMix);
    case 1: return {hue[0], hue[1], hue[2]};
    default: return lerp3(black, hue, kDarkMix);
  }
}

inline bool inside_body(int shape_kind, double r, double cy, double cx,
                        double y, double x) {
  const double dy = y - cy, dx = x - cx;
  switch (shape_kind % 4) {
    case 0:  // disk
      return dy * dy + dx * dx <= r * r;
    case 1:  // square
      return std::abs(dy) <= r * 0.85 && std::abs(dx) <= r * 0.85;
    case 2:  // triangle (apex up)
      return y >= cy - r && y <= cy + r * 0.8 &&
             std::abs(dx) <= (y - (cy - r)) * 0.65;
    default: {  // ring
      const double d2 = dy * dy + dx * dx;
      return d2 <= r * r && d2 >= (0.55 * r) * (0.55 * r);
    }
  }
}

inline std::string shade_name(int t) {
  switch (t % 3) {
    case 0: return "pale";
    case 1: return "vivid";
    default: return "dark";
  }
}
inline std::string hue_name(int f) {
  switch (f % 4) {
    case 0: return "red";
    case 1: return "green";
    case 2: return "blue";
    default: return "yellow";
  }
}
inline std::string shape_name(int s) {
  switch (s % 4) {
    case 0: return "disk";
    case 1: return "square";
    case 2: return "triangle";
    default: return "ring";
  }
}

}  // namespace synth

inline std::string synthetic_category_name(const CategoryDescriptor& d) {
  return synth::hue_name(d.color_family) + "-" + synth::shape_name(d.shape_kind) +
         "-" + synth::shade_name(d.texture_kind);
}

inline void validate(const SyntheticSpec& spec) {
  MLCAM_CHECK(spec.n_categories >= 1, Config, "synthetic: need >= 1 category");
  MLCAM_CHECK(spec.samples_per_category >= 1, Config,
              "synthetic: need >= 1 sample per category");
  MLCAM_CHECK(spec.image_size >= 8, Config, "synthetic: image_size too small");
  MLCAM_CHECK(spec.objects_per_image_range.first >= 1 &&
                  spec.objects_per_image_range.second >=
                      spec.objects_per_image_range.first,
              Config, "synthetic: bad objects_per_image_range");
  if (!spec.category_descriptors.empty()) {
    MLCAM_CHECK(static_cast<int>(spec.category_descriptors.size()) ==
                    spec.n_categories,
                Config, "synthetic: descriptor count != n_categories");
  }
}

// Deterministic synthetic dataset: pure function of the spec (including its
// seed). Draw order per image is fixed and documented here -- background
// noise, object count, extra categories, then per object radius, placement
// attempts, body jitter, marker corner -- so a scalar reference can replay it.
template <typename S>
Dataset<S> generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  auto desc = spec.category_descriptors.empty()
                  ? default_descriptors(spec.n_categories)
                  : spec.category_descriptors;

  Dataset<S> ds;
  ds.category_names.reserve(static_cast<std::size_t>(spec.n_categories));
  for (int c = 0; c < spec.n_categories; ++c) {
    std::string name = synthetic_category_name(desc[static_cast<std::size_t>(c)]);
    // Disambiguate duplicated descriptors (possible for n > 12 defaults).
    int dup = 0;
    for (int p = 0; p < c; ++p)
      if (ds.category_names[static_cast<std::size_t>(p)].starts_with(name)) ++dup;
    if (dup > 0) name += "-" + std::to_string(dup + 1);
    ds.category_names.push_back(name);
  }

  const int sz = spec.image_size;
  Rng rng(derive_seed(spec.seed, 0x5345544bull));  // one stream for the split
  for (int cat = 0; cat < spec.n_categories; ++cat) {
    for (int i = 0; i < spec.samples_per_category; ++i) {
      ImageSample<S> sample;
      sample.id = "synthetic-" + std::to_string(cat) + "-" + std::to_string(i);
      sample.image = Image<S>(sz, sz);
      sample.labels.assign(static_cast<std::size_t>(spec.n_categories), 0);

      // Background with per-channel-pixel noise; channel-major to keep a
      // stable draw order.
      for (int ch = 0; ch < 3; ++ch)
        for (int x = 0; x < sz; ++x)
          for (int y = 0; y < sz; ++y)
            sample.image.ch[ch](y, x) = static_cast<S>(
                synth::kBackground +
                rng.uniform(-synth::kBackgroundNoise, synth::kBackgroundNoise));

      const int n_obj = static_cast<int>(rng.uniform_int(
          spec.objects_per_image_range.first, spec.objects_per_image_range.second));
      std::vector<int> cats = {cat};
      for (int o = 1; o < n_obj; ++o)
        cats.push_back(static_cast<int>(rng.uniform_int(spec.n_categories)));

      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic> owner(sz, sz);
      owner.setConstant(-1);
      struct Placed { double cy, cx, r; };
      std::vector<Placed> placed;
      const double scale = n_obj == 1 ? 1.0 : synth::kMultiObjectScale;
      const double rlo = synth::kRadiusMin * scale, rhi = synth::kRadiusMax * scale;

      for (std::size_t oi = 0; oi < cats.size(); ++oi) {
        const auto& d = desc[static_cast<std::size_t>(cats[oi])];
        const double r = rng.uniform(rlo, rhi);
        double cy = sz / 2.0, cx = sz / 2.0;
        for (int att = 0; att < synth::kPlacementTries; ++att) {
          cy = rng.uniform(r + 1, sz - 2 - r);
          cx = rng.uniform(r + 1, sz - 2 - r);
          bool clear = true;
          for (const auto& p : placed) {
            const double dy = cy - p.cy, dx = cx - p.cx, rr = r + p.r;
            if (dy * dy + dx * dx <= rr * rr) { clear = false; break; }
          }
          if (clear) break;
        }
        placed.push_back({cy, cx, r});

        auto bc = synth::body_color(d.color_family);
        for (double& v : bc)
          v = std::clamp(v + rng.uniform(-synth::kBodyJitter, synth::kBodyJitter),
                         0.0, 1.0);
        const int corner = static_cast<int>(rng.uniform_int(4));
        constexpr int kCorner[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
        const double mr = std::max(synth::kMarkerMin, r * synth::kMarkerFrac);
        const double my = cy + kCorner[corner][0] * r * synth::kMarkerOffset;
        const double mx = cx + kCorner[corner][1] * r * synth::kMarkerOffset;
        const auto mc = synth::marker_color(d.color_family, d.texture_kind);

        for (int x = 0; x < sz; ++x) {
          for (int y = 0; y < sz; ++y) {
            const bool body = synth::inside_body(d.shape_kind, r, cy, cx, y, x);
            const double dy = y - my, dx = x - mx;
            const bool mark = dy * dy + dx * dx <= mr * mr;
            if (!body && !mark) continue;
            const auto& col = mark ? mc : bc;
            for (int ch = 0; ch < 3; ++ch)
              sample.image.ch[ch](y, x) = static_cast<S>(col[ch]);
            owner(y, x) = static_cast<int>(oi);
          }
        }
      }

      for (std::size_t oi = 0; oi < cats.size(); ++oi) {
        Mask vis = (owner == static_cast<int>(oi)).template cast<std::uint8_t>();
        if (vis.sum() == 0) continue;  // fully occluded object
        const int c = cats[oi];
        sample.labels[static_cast<std::size_t>(c)] = 1;
        auto it = sample.masks.find(c);
        if (it == sample.masks.end())
          sample.masks.emplace(c, std::move(vis));
        else
          it->second = it->second.max(vis);
      }

      // 8-bit quantization so that a PNG export/import round-trips exactly.
      for (int ch = 0; ch < 3; ++ch)
        for (int x = 0; x < sz; ++x)
          for (int y = 0; y < sz; ++y) {
            double v = std::clamp(static_cast<double>(sample.image.ch[ch](y, x)), 0.0, 1.0);
            sample.image.ch[ch](y, x) = static_cast<S>(std::round(v * 255.0) / 255.0);
          }

      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

}  // namespace mlcam
