#pragma once

// Single-file artifact container: a JSON header describing named float64
// arrays, followed by one contiguous little-endian blob.  Used for model
// checkpoints and cached activation maps so every pipeline stage can be
// written and reloaded independently.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlcam/core/error.hpp"
#include "mlcam/core/tensor.hpp"

namespace mlcam::io {

using nlohmann::json;

inline constexpr char kMagic[4] = {'M', 'L', 'C', 'N'};
inline constexpr std::uint32_t kFormatVersion = 1;

class ArtifactWriter {
 public:
  explicit ArtifactWriter(json meta = json::object()) : meta_(std::move(meta)) {}

  json& meta() { return meta_; }

  // Arrays are stored column-major, exactly as Eigen lays them out.
  template <typename Derived>
  void add(const std::string& name, const Eigen::DenseBase<Derived>& array) {
    MLCAM_CHECK(!arrays_.contains(name), State, "container: duplicate array '" + name + "'");
    std::vector<double> buf(static_cast<std::size_t>(array.size()));
    Eigen::Map<MatX<double>>(buf.data(), array.rows(), array.cols()) =
        array.derived().template cast<double>();
    arrays_[name] = Entry{array.rows(), array.cols(), std::move(buf)};
  }

  void add_scalar(const std::string& name, double value) {
    MatX<double> one(1, 1);
    one(0, 0) = value;
    add(name, one);
  }

  void save(const std::string& path) const {
    json header;
    header["meta"] = meta_;
    header["arrays"] = json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, entry] : arrays_) {
      json desc;
      desc["rows"] = entry.rows;
      desc["cols"] = entry.cols;
      desc["offset"] = offset;
      header["arrays"][name] = desc;
      offset += entry.data.size() * sizeof(double);
    }
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    MLCAM_CHECK(out.good(), Io, "container: cannot write " + path);
    out.write(kMagic, 4);
    write_u64(out, kFormatVersion);
    write_u64(out, head.size());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    write_u64(out, offset);
    for (const auto& [name, entry] : arrays_) {
      (void)name;
      out.write(reinterpret_cast<const char*>(entry.data.data()),
                static_cast<std::streamsize>(entry.data.size() * sizeof(double)));
    }
    MLCAM_CHECK(out.good(), Io, "container: write failed for " + path);
  }

 private:
  struct Entry {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::vector<double> data;
  };

  static void write_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 8);
  }

  json meta_;
  std::map<std::string, Entry> arrays_;  // ordered so the blob layout is stable
};

class ArtifactReader {
 public:
  explicit ArtifactReader(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    MLCAM_CHECK(in.good(), Io, "container: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    MLCAM_CHECK(in.good() && std::memcmp(magic, kMagic, 4) == 0, Format,
                "container: bad magic in " + path);
    const std::uint64_t version = read_u64(in, path);
    MLCAM_CHECK(version == kFormatVersion, Format,
                "container: unsupported version in " + path);
    const std::uint64_t head_len = read_u64(in, path);
    std::string head(head_len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head_len));
    MLCAM_CHECK(in.good(), Format, "container: truncated header in " + path);
    header_ = json::parse(head, nullptr, false);
    MLCAM_CHECK(!header_.is_discarded(), Format, "container: invalid header JSON in " + path);
    const std::uint64_t blob_len = read_u64(in, path);
    blob_.resize(blob_len);
    in.read(blob_.data(), static_cast<std::streamsize>(blob_len));
    MLCAM_CHECK(in.good(), Format, "container: truncated blob in " + path);
  }

  const json& meta() const { return header_.at("meta"); }

  bool has(const std::string& name) const { return header_.at("arrays").contains(name); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, desc] : header_.at("arrays").items()) {
      (void)desc;
      out.push_back(name);
    }
    return out;
  }

  template <typename S = double>
  MatX<S> array(const std::string& name) const {
    MLCAM_CHECK(has(name), Lookup, "container: missing array '" + name + "'");
    const json& desc = header_.at("arrays").at(name);
    const auto rows = desc.at("rows").get<Eigen::Index>();
    const auto cols = desc.at("cols").get<Eigen::Index>();
    const auto offset = desc.at("offset").get<std::uint64_t>();
    const std::size_t bytes =
        static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(double);
    MLCAM_CHECK(offset + bytes <= blob_.size(), Format,
                "container: array '" + name + "' overruns blob");
    MatX<double> out(rows, cols);
    std::memcpy(out.data(), blob_.data() + offset, bytes);
    return out.template cast<S>();
  }

  double scalar(const std::string& name) const {
    const MatX<double> m = array(name);
    MLCAM_CHECK(m.size() == 1, Format, "container: '" + name + "' is not a scalar");
    return m(0, 0);
  }

 private:
  static std::uint64_t read_u64(std::istream& in, const std::string& path) {
    char bytes[8];
    in.read(bytes, 8);
    MLCAM_CHECK(in.good(), Format, "container: truncated file " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    return v;
  }

  json header_;
  std::vector<char> blob_;
};

inline void save_json(const std::string& path, const json& value) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  MLCAM_CHECK(out.good(), Io, "cannot write " + path);
  out << value.dump(2) << '\n';
  MLCAM_CHECK(out.good(), Io, "write failed for " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MLCAM_CHECK(in.good(), Io, "cannot open " + path);
  json value = json::parse(in, nullptr, false);
  MLCAM_CHECK(!value.is_discarded(), Format, "invalid JSON in " + path);
  return value;
}

}  // namespace mlcam::io
