#pragma once

// VOC-style dataset layout:
//   root/images/<id>.png|.jpg
//   root/labels.json    {"categories": [...], "images": {id: {"split": s, "labels": [...]}}}
//   root/masks/<id>/<category>.png   optional, 0/255
//
// An empty split string loads every image regardless of its split tag.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mlcam/dataset/types.hpp"
#include "mlcam/io/codecs.hpp"
#include "mlcam/io/container.hpp"

namespace mlcam::io {

namespace fs = std::filesystem;

inline fs::path find_image_file(const fs::path& images_dir, const std::string& id) {
  for (const char* ext : {".png", ".jpg", ".jpeg"}) {
    fs::path candidate = images_dir / (id + ext);
    if (fs::exists(candidate)) return candidate;
  }
  fail(ErrorKind::Io, "missing image file for id '" + id + "' under " +
                                      images_dir.string());
}

template <typename S>
Dataset<S> load_voc_style(const std::string& root_path, const std::string& split) {
  const fs::path root(root_path);
  const fs::path index_path = root / "labels.json";
  MLCAM_CHECK(fs::exists(index_path), Io,
              "missing index file " + index_path.string());
  const json index = load_json(index_path.string());

  Dataset<S> out;
  out.category_names = index.at("categories").get<std::vector<std::string>>();
  std::map<std::string, int> category_index;
  for (std::size_t i = 0; i < out.category_names.size(); ++i)
    category_index[out.category_names[i]] = static_cast<int>(i);

  const fs::path images_dir = root / "images";
  const fs::path masks_dir = root / "masks";
  for (const auto& [id, entry] : index.at("images").items()) {
    if (!split.empty() && entry.at("split") != split) continue;
    ImageSample<S> sample;
    sample.id = id;
    sample.image = to_image<S>(decode_image(find_image_file(images_dir, id).string()));
    sample.labels.assign(out.category_names.size(), 0);
    for (const json& name : entry.at("labels")) {
      const auto it = category_index.find(name.get<std::string>());
      MLCAM_CHECK(it != category_index.end(), Format,
                  "image '" + id + "' references unknown category '" +
                      name.get<std::string>() + "'");
      sample.labels[static_cast<std::size_t>(it->second)] = 1;
    }
    const fs::path mask_dir = masks_dir / id;
    if (fs::exists(mask_dir)) {
      for (const auto& dir_entry : fs::directory_iterator(mask_dir)) {
        if (!dir_entry.is_regular_file()) continue;
        const std::string name = dir_entry.path().stem().string();
        const auto it = category_index.find(name);
        MLCAM_CHECK(it != category_index.end(), Format,
                    "mask for image '" + id + "' references unknown category '" + name + "'");
        Mask mask = to_mask(decode_png(dir_entry.path().string()));
        MLCAM_CHECK(mask.rows() == sample.height() && mask.cols() == sample.width(),
                    Format,
                    "mask size mismatch for image '" + id + "', category '" + name + "'");
        sample.masks[it->second] = std::move(mask);
      }
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

// Writes/extends the layout.  Repeated calls with different split names share
// one labels.json; ids must be unique across splits.
template <typename S>
void save_voc_style(const std::string& root_path, const Dataset<S>& dataset,
                    const std::string& split) {
  const fs::path root(root_path);
  fs::create_directories(root / "images");
  const fs::path index_path = root / "labels.json";

  json index;
  if (fs::exists(index_path)) {
    index = load_json(index_path.string());
    MLCAM_CHECK(index.at("categories").get<std::vector<std::string>>() ==
                    dataset.category_names,
                Contract, "category list differs from existing labels.json");
  } else {
    index["categories"] = dataset.category_names;
    index["images"] = json::object();
  }

  for (const auto& sample : dataset.samples) {
    MLCAM_CHECK(!index.at("images").contains(sample.id), Contract,
                "duplicate image id '" + sample.id + "'");
    encode_png((root / "images" / (sample.id + ".png")).string(), from_image(sample.image));
    json names = json::array();
    for (std::size_t i = 0; i < sample.labels.size(); ++i)
      if (sample.labels[i]) names.push_back(dataset.category_names[i]);
    json entry;
    entry["split"] = split;
    entry["labels"] = std::move(names);
    index["images"][sample.id] = std::move(entry);
    if (!sample.masks.empty()) {
      const fs::path mask_dir = root / "masks" / sample.id;
      fs::create_directories(mask_dir);
      for (const auto& [category, mask] : sample.masks)
        encode_png((mask_dir / (dataset.category_names[static_cast<std::size_t>(category)] +
                                ".png"))
                       .string(),
                   from_mask(mask));
    }
  }
  save_json(index_path.string(), index);
}

}  // namespace mlcam::io
