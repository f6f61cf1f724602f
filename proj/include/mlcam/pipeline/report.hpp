#pragma once

// Report emission: aligned text tables, per-category CSV, and heatmap panel
// images (input | per-level CAMs | fused | ground truth).  Everything is
// re-derivable from a completed run manifest, and re-emission is
// byte-identical because all inputs are cached artifacts.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mlcam/pipeline/stages.hpp"

namespace mlcam {

// Blue->cyan->yellow->red ramp for map tiles.
inline void heat_color(double t, std::uint8_t rgb[3]) {
  t = std::clamp(t, 0.0, 1.0);
  double r = 0, g = 0, b = 0;
  if (t < 1.0 / 3) {
    const double u = t * 3;
    r = 0, g = u, b = 1;
  } else if (t < 2.0 / 3) {
    const double u = (t - 1.0 / 3) * 3;
    r = u, g = 1, b = 1 - u;
  } else {
    const double u = (t - 2.0 / 3) * 3;
    r = 1, g = 1 - u, b = 0;
  }
  rgb[0] = static_cast<std::uint8_t>(std::lround(r * 255));
  rgb[1] = static_cast<std::uint8_t>(std::lround(g * 255));
  rgb[2] = static_cast<std::uint8_t>(std::lround(b * 255));
}

namespace detail {

inline void blit(io::RawImage& canvas, int x0, const io::RawImage& tile) {
  for (int y = 0; y < tile.height; ++y)
    for (int x = 0; x < tile.width; ++x)
      for (int c = 0; c < 3; ++c) canvas.at(y, x0 + x, c) = tile.at(y, x, c);
}

template <typename S>
io::RawImage heat_tile(const MatX<S>& values) {
  io::RawImage tile;
  tile.height = static_cast<int>(values.rows());
  tile.width = static_cast<int>(values.cols());
  tile.channels = 3;
  tile.pixels.resize(static_cast<std::size_t>(tile.height) * tile.width * 3);
  for (int y = 0; y < tile.height; ++y)
    for (int x = 0; x < tile.width; ++x) {
      std::uint8_t rgb[3];
      heat_color(static_cast<double>(values(y, x)), rgb);
      for (int c = 0; c < 3; ++c) tile.at(y, x, c) = rgb[c];
    }
  return tile;
}

inline io::RawImage mask_tile(const Mask& mask) {
  io::RawImage tile;
  tile.height = static_cast<int>(mask.rows());
  tile.width = static_cast<int>(mask.cols());
  tile.channels = 3;
  tile.pixels.resize(static_cast<std::size_t>(tile.height) * tile.width * 3);
  for (int y = 0; y < tile.height; ++y)
    for (int x = 0; x < tile.width; ++x)
      for (int c = 0; c < 3; ++c) tile.at(y, x, c) = mask(y, x) != 0 ? 255 : 0;
  return tile;
}

inline io::RawImage blank_tile(int h, int w) {
  io::RawImage tile;
  tile.height = h;
  tile.width = w;
  tile.channels = 3;
  tile.pixels.assign(static_cast<std::size_t>(h) * w * 3, 32);
  return tile;
}

inline std::string fixed2(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

inline std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

// One metrics row of the text table; use build_metrics_table to render.
struct MetricsRow {
  std::string label;
  double miou_eval = 0, miou_train = 0, mlev_eval = 0, mlev_train = 0;
  bool has_train = false;
};

inline std::string build_metrics_table(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << detail::pad("configuration", 28) << detail::pad("mIoU(eval)", 12)
      << detail::pad("mIoU(train)", 13) << detail::pad("mLEV(eval)", 12)
      << detail::pad("mLEV(train)", 13) << '\n';
  for (const auto& r : rows) {
    out << detail::pad(r.label, 28) << detail::pad(detail::fixed2(r.miou_eval), 12)
        << detail::pad(r.has_train ? detail::fixed2(r.miou_train) : "-", 13)
        << detail::pad(detail::fixed2(r.mlev_eval), 12)
        << detail::pad(r.has_train ? detail::fixed2(r.mlev_train) : "-", 13) << '\n';
  }
  return out.str();
}

// Emits report.txt, report.csv and panels/ under the run's out_dir from a
// completed manifest.  Throws a state error when the run did not finish.
template <typename S = float>
void emit_report(const RunManifest& manifest) {
  MLCAM_CHECK(manifest.completed || manifest.find("eval-eval") != nullptr, State,
              "emit_report: run did not reach the eval stage");
  const RunConfig cfg = run_config_from_json(manifest.config);

  const StageRecord* eval_stage = manifest.find("eval-eval");
  MLCAM_CHECK(eval_stage != nullptr, State, "emit_report: missing eval artifact");
  const io::json eval_json = io::load_json(eval_stage->path);
  const StageRecord* train_eval_stage = manifest.find("eval-train");
  io::json train_eval_json;
  if (train_eval_stage != nullptr) train_eval_json = io::load_json(train_eval_stage->path);

  // ---- text table -------------------------------------------------------
  std::vector<MetricsRow> rows(2);
  rows[0].label = "level-0 baseline";
  rows[1].label = "fused";
  for (int i : {0, 1}) {
    const char* source = i == 0 ? "baseline" : "fused";
    rows[static_cast<std::size_t>(i)].miou_eval = eval_json.at(source).at("miou").get<double>();
    rows[static_cast<std::size_t>(i)].mlev_eval = eval_json.at(source).at("mlev").get<double>();
    if (train_eval_stage != nullptr) {
      rows[static_cast<std::size_t>(i)].has_train = true;
      rows[static_cast<std::size_t>(i)].miou_train =
          train_eval_json.at(source).at("miou").get<double>();
      rows[static_cast<std::size_t>(i)].mlev_train =
          train_eval_json.at(source).at("mlev").get<double>();
    }
  }
  std::ostringstream txt;
  txt << "run: seed=" << cfg.seed << " clustering=" << (cfg.use_clustering ? "on" : "off")
      << " orthogonal=" << (cfg.use_orthogonal ? "on" : "off") << '\n'
      << build_metrics_table(rows);
  {
    std::ofstream out(fs::path(cfg.out_dir) / "report.txt",
                      std::ios::binary | std::ios::trunc);
    MLCAM_CHECK(out.good(), Io, "emit_report: cannot write report.txt");
    out << txt.str();
  }

  // ---- per-category csv --------------------------------------------------
  {
    std::ofstream csv(fs::path(cfg.out_dir) / "report.csv",
                      std::ios::binary | std::ios::trunc);
    MLCAM_CHECK(csv.good(), Io, "emit_report: cannot write report.csv");
    csv << "split,source,category,iou,lev\n";
    const auto emit_split = [&](const std::string& split, const io::json& node) {
      for (const char* source : {"baseline", "fused"}) {
        for (const auto& [name, vals] : node.at(source).at("per_category").items()) {
          const double iou = vals.at("iou");
          const double lev = vals.at("lev");
          csv << split << ',' << source << ',' << name << ',' << iou << ',' << lev << '\n';
        }
        const double miou = node.at(source).at("miou");
        const double mlev = node.at(source).at("mlev");
        csv << split << ',' << source << ",mean," << miou << ',' << mlev << '\n';
      }
    };
    emit_split("eval", eval_json);
    if (train_eval_stage != nullptr) emit_split("train", train_eval_json);
  }

  // ---- heatmap panels ----------------------------------------------------
  if (cfg.panel_images <= 0) return;
  const StageRecord* data_stage = manifest.find("dataset");
  MLCAM_CHECK(data_stage != nullptr, State, "emit_report: missing dataset stage");
  Dataset<S> eval_ds = io::load_voc_style<S>(
      data_stage->path, cfg.data.kind == "synthetic" ? "eval" : cfg.data.eval_split);
  normalize(eval_ds, cfg.normalization);

  CategoryHierarchy hierarchy;
  const StageRecord* hier_stage = manifest.find("hierarchy");
  if (hier_stage != nullptr && !hier_stage->path.empty())
    hierarchy = io::hierarchy_from_json(io::load_json(hier_stage->path));
  else {
    hierarchy.n_categories = eval_ds.n_categories();
    hierarchy.levels.push_back(identity_clustering(eval_ds.n_categories()));
  }
  const int k = hierarchy.k();

  std::vector<io::ArtifactReader> cams;
  for (int lvl = 0; lvl <= k; ++lvl) {
    const StageRecord* stage = manifest.find("cams-eval-l" + std::to_string(lvl));
    MLCAM_CHECK(stage != nullptr, State, "emit_report: missing CAM artifact for level " +
                                             std::to_string(lvl));
    cams.emplace_back(stage->path);
  }
  const StageRecord* fused_stage = manifest.find("fuse-eval");
  MLCAM_CHECK(fused_stage != nullptr, State, "emit_report: missing fused artifact");
  io::ArtifactReader fused(fused_stage->path);

  const fs::path panel_dir = fs::path(cfg.out_dir) / "panels";
  fs::create_directories(panel_dir);
  int emitted = 0;
  for (const auto& sample : eval_ds.samples) {
    if (emitted >= cfg.panel_images) break;
    int target = -1;
    for (std::size_t c = 0; c < sample.labels.size(); ++c)
      if (sample.labels[c] != 0) {
        target = static_cast<int>(c);
        break;
      }
    if (target < 0) continue;

    const int h = static_cast<int>(sample.height()), w = static_cast<int>(sample.width());
    const int tiles = k + 4;  // input, k+1 level maps, fused, ground truth
    const int gutter = 2;
    io::RawImage canvas;
    canvas.height = h;
    canvas.width = tiles * w + (tiles - 1) * gutter;
    canvas.channels = 3;
    canvas.pixels.assign(
        static_cast<std::size_t>(canvas.height) * canvas.width * 3, 255);

    int x0 = 0;
    detail::blit(canvas, x0, io::from_image(sample.image));
    x0 += w + gutter;
    for (int lvl = 0; lvl <= k; ++lvl) {
      const int node = cluster_of(hierarchy, lvl, target);
      detail::blit(canvas, x0, detail::heat_tile(cams[static_cast<std::size_t>(lvl)].array<S>(
                                    cam_array_name(sample.id, node))));
      x0 += w + gutter;
    }
    detail::blit(canvas, x0,
                 detail::heat_tile(fused.array<S>(fused_array_name(sample.id, target))));
    x0 += w + gutter;
    const auto mask_it = sample.masks.find(target);
    detail::blit(canvas, x0,
                 mask_it != sample.masks.end() ? detail::mask_tile(mask_it->second)
                                               : detail::blank_tile(h, w));
    io::encode_png((panel_dir / (sample.id + ".png")).string(), canvas);
    ++emitted;
  }
}

}  // namespace mlcam
