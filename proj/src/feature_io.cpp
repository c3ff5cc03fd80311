#include "formula/feature_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "formula/error.hpp"

namespace formula::io {

using nlohmann::json;

namespace {

constexpr std::array<char, 6> kNpyMagic = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
  return std::move(buffer).str();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v & 0xff0000u) >> 8) | (v >> 24);
  }
  return v;
}

struct NpyHeader {
  std::string descr;
  bool fortran_order = false;
  std::vector<std::size_t> shape;
};

NpyHeader parse_npy_header(const std::string& text, const std::string& where) {
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex fortran_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  std::smatch m;
  NpyHeader header;
  if (!std::regex_search(text, m, descr_re)) throw Error(ErrorCode::MalformedFeatureFile, where + ": header lacks descr");
  header.descr = m[1];
  if (!std::regex_search(text, m, fortran_re))
    throw Error(ErrorCode::MalformedFeatureFile, where + ": header lacks fortran_order");
  header.fortran_order = m[1] == "True";
  if (!std::regex_search(text, m, shape_re)) throw Error(ErrorCode::MalformedFeatureFile, where + ": header lacks shape");
  std::string dims = m[1];
  static const std::regex int_re(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), int_re); it != std::sregex_iterator(); ++it) {
    header.shape.push_back(static_cast<std::size_t>(std::stoull(it->str())));
  }
  return header;
}

// Strict accessors: a manifest is exactly the fields of Manifest, nothing else.
int manifest_int(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::MalformedManifest, std::string("missing field ") + key);
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw Error(ErrorCode::MalformedManifest, std::string("field ") + key + " must be an integer");
  const auto value = v.get<long long>();
  if (value < 0 || value > std::numeric_limits<int>::max())
    throw Error(ErrorCode::MalformedManifest, std::string("field ") + key + " out of range");
  return static_cast<int>(value);
}

std::string manifest_string(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::MalformedManifest, std::string("missing field ") + key);
  const auto& v = j.at(key);
  if (!v.is_string()) throw Error(ErrorCode::MalformedManifest, std::string("field ") + key + " must be a string");
  return v.get<std::string>();
}

const std::set<std::string>& manifest_keys() {
  static const std::set<std::string> keys = {"image_id",   "image_width", "image_height", "patch_size",  "grid_h",
                                             "grid_w",     "num_layers",  "feature_dim",  "feature_file"};
  return keys;
}

double json_number(const json& v, const std::string& what) {
  if (!v.is_number()) throw Error(ErrorCode::MalformedRecord, what + " must be a number");
  return v.get<double>();
}

Box box_from_json(const json& v, const std::string& what) {
  if (!v.is_array() || v.size() != 4) throw Error(ErrorCode::MalformedRecord, what + " must be [xmin, ymin, xmax, ymax]");
  return {json_number(v[0], what), json_number(v[1], what), json_number(v[2], what), json_number(v[3], what)};
}

json box_to_json(const Box& b) { return json::array({b.xmin, b.ymin, b.xmax, b.ymax}); }

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    fn(line, line_no);
  }
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
}

json parse_json_line(const std::string& line, const std::filesystem::path& path, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace

FeatureStack::FeatureStack(int layers, int patches, int dim)
    : FeatureStack(layers, patches, dim,
                   std::vector<float>(static_cast<std::size_t>(layers) * static_cast<std::size_t>(patches) *
                                      static_cast<std::size_t>(dim))) {}

FeatureStack::FeatureStack(int layers, int patches, int dim, std::vector<float> values)
    : layers_(layers), patches_(patches), dim_(dim), values_(std::move(values)) {
  if (layers < 0 || patches < 0 || dim < 0) throw Error(ErrorCode::ShapeMismatch, "negative feature tensor extent");
  const auto expected =
      static_cast<std::size_t>(layers) * static_cast<std::size_t>(patches) * static_cast<std::size_t>(dim);
  if (values_.size() != expected) {
    throw Error(ErrorCode::ShapeMismatch, "feature buffer holds " + std::to_string(values_.size()) +
                                              " values, shape requires " + std::to_string(expected));
  }
}

std::span<const float> FeatureStack::layer(int l) const {
  if (l < 0 || l >= layers_) throw Error(ErrorCode::LengthMismatch, "layer index " + std::to_string(l) + " out of range");
  const auto per_layer = static_cast<std::size_t>(patches_) * static_cast<std::size_t>(dim_);
  return std::span<const float>(values_).subspan(static_cast<std::size_t>(l) * per_layer, per_layer);
}

void write_npy(const std::filesystem::path& path, const FeatureStack& stack) {
  std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + std::to_string(stack.layers()) + ", " +
                     std::to_string(stack.patches()) + ", " + std::to_string(stack.dim()) + "), }";
  // magic(6) + version(2) + length(2) + dict + padding + '\n' is a multiple of 64.
  const std::size_t preamble = kNpyMagic.size() + 4;
  const std::size_t unpadded = preamble + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  auto out = open_for_write(path);
  out.write(kNpyMagic.data(), kNpyMagic.size());
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(dict.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));

  const auto values = stack.values();
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float f : values) {
      const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  finish_write(out, path);
}

FeatureStack read_npy(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  const std::string where = path.string();
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kNpyMagic.data(), kNpyMagic.size()) != 0) {
    throw Error(ErrorCode::MalformedFeatureFile, where + ": not an NPY file");
  }
  if (bytes[6] != 1 || bytes[7] != 0) {
    throw Error(ErrorCode::MalformedFeatureFile, where + ": only NPY format version 1.0 is supported");
  }
  const std::size_t header_len =
      static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (10 + header_len > bytes.size()) throw Error(ErrorCode::MalformedFeatureFile, where + ": truncated header");

  const NpyHeader header = parse_npy_header(bytes.substr(10, header_len), where);
  if (header.descr != "<f4") {
    throw Error(ErrorCode::UnsupportedDtype, where + ": dtype '" + header.descr + "' (expected '<f4')");
  }
  if (header.fortran_order) throw Error(ErrorCode::UnsupportedDtype, where + ": Fortran-ordered arrays are not supported");
  if (header.shape.size() != 3) {
    throw Error(ErrorCode::ShapeMismatch, where + ": expected a 3-D array, got " + std::to_string(header.shape.size()) + "-D");
  }

  const std::size_t count = header.shape[0] * header.shape[1] * header.shape[2];
  const std::size_t payload = bytes.size() - 10 - header_len;
  if (payload != count * sizeof(float)) {
    throw Error(ErrorCode::ShapeMismatch, where + ": payload holds " + std::to_string(payload) + " bytes, shape requires " +
                                              std::to_string(count * sizeof(float)));
  }
  for (std::size_t extent : header.shape) {
    if (extent > static_cast<std::size_t>(std::numeric_limits<int>::max()))
      throw Error(ErrorCode::ShapeMismatch, where + ": extent too large");
  }

  std::vector<float> values(count);
  const char* src = bytes.data() + 10 + header_len;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, src + i * sizeof bits, sizeof bits);
    values[i] = std::bit_cast<float>(to_little_endian(bits));
  }
  return FeatureStack(static_cast<int>(header.shape[0]), static_cast<int>(header.shape[1]),
                      static_cast<int>(header.shape[2]), std::move(values));
}

void validate_manifest(const Manifest& m) {
  if (m.image_id.empty()) throw Error(ErrorCode::MalformedManifest, "image_id is empty");
  if (m.image_width <= 0 || m.image_height <= 0) throw Error(ErrorCode::MalformedManifest, "image size must be positive");
  if (m.patch_size <= 0) throw Error(ErrorCode::MalformedManifest, "patch_size must be positive");
  if (m.num_layers < 1) throw Error(ErrorCode::MalformedManifest, "num_layers must be >= 1");
  if (m.feature_dim < 1) throw Error(ErrorCode::MalformedManifest, "feature_dim must be >= 1");
  if (m.grid_h != m.image_height / m.patch_size || m.grid_w != m.image_width / m.patch_size) {
    throw Error(ErrorCode::MalformedManifest,
                m.image_id + ": grid " + std::to_string(m.grid_h) + "x" + std::to_string(m.grid_w) +
                    " disagrees with floor(image / patch) = " + std::to_string(m.image_height / m.patch_size) + "x" +
                    std::to_string(m.image_width / m.patch_size));
  }
  if (m.grid_h < 1 || m.grid_w < 1) throw Error(ErrorCode::MalformedManifest, m.image_id + ": image smaller than one patch");
  if (m.feature_file.empty()) throw Error(ErrorCode::MalformedManifest, "feature_file is empty");
}

Manifest read_manifest(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file_bytes(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedManifest, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::MalformedManifest, path.string() + ": manifest must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!manifest_keys().contains(key)) throw Error(ErrorCode::MalformedManifest, path.string() + ": unknown field " + key);
  }
  Manifest m;
  m.image_id = manifest_string(j, "image_id");
  m.image_width = manifest_int(j, "image_width");
  m.image_height = manifest_int(j, "image_height");
  m.patch_size = manifest_int(j, "patch_size");
  m.grid_h = manifest_int(j, "grid_h");
  m.grid_w = manifest_int(j, "grid_w");
  m.num_layers = manifest_int(j, "num_layers");
  m.feature_dim = manifest_int(j, "feature_dim");
  m.feature_file = manifest_string(j, "feature_file");
  validate_manifest(m);
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  const json j = {{"image_id", m.image_id},         {"image_width", m.image_width}, {"image_height", m.image_height},
                  {"patch_size", m.patch_size},     {"grid_h", m.grid_h},           {"grid_w", m.grid_w},
                  {"num_layers", m.num_layers},     {"feature_dim", m.feature_dim}, {"feature_file", m.feature_file}};
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
  finish_write(out, path);
}

std::pair<Manifest, FeatureStack> read_features(const std::filesystem::path& manifest_path) {
  Manifest manifest = read_manifest(manifest_path);
  const auto feature_path = manifest_path.parent_path() / manifest.feature_file;
  FeatureStack stack = read_npy(feature_path);

  if (static_cast<std::size_t>(stack.patches()) != manifest.num_patches() || stack.layers() != manifest.num_layers ||
      stack.dim() != manifest.feature_dim) {
    throw Error(ErrorCode::ShapeMismatch,
                manifest.image_id + ": tensor shape (" + std::to_string(stack.layers()) + ", " +
                    std::to_string(stack.patches()) + ", " + std::to_string(stack.dim()) + ") disagrees with manifest (" +
                    std::to_string(manifest.num_layers) + ", " + std::to_string(manifest.num_patches()) + ", " +
                    std::to_string(manifest.feature_dim) + ")");
  }
  const auto values = stack.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFiniteFeature, manifest.image_id + ": non-finite value at flat index " + std::to_string(i));
    }
  }
  return {std::move(manifest), std::move(stack)};
}

std::map<std::string, GroundTruth> read_ground_truth(const std::filesystem::path& path) {
  std::map<std::string, GroundTruth> result;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const json j = parse_json_line(line, path, line_no);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string() || !j.contains("width") ||
        !j.contains("height") || !j.contains("boxes") || !j["boxes"].is_array()) {
      throw Error(ErrorCode::MalformedRecord, where + ": expected {image_id, width, height, boxes}");
    }
    GroundTruth gt;
    gt.image_id = j["image_id"].get<std::string>();
    if (!j["width"].is_number_integer() || !j["height"].is_number_integer())
      throw Error(ErrorCode::MalformedRecord, where + ": width/height must be integers");
    gt.width = j["width"].get<int>();
    gt.height = j["height"].get<int>();
    if (gt.width <= 0 || gt.height <= 0) throw Error(ErrorCode::MalformedRecord, where + ": image size must be positive");
    for (const auto& b : j["boxes"]) {
      const Box box = box_from_json(b, where + " box");
      if (!(box.xmax > box.xmin) || !(box.ymax > box.ymin) || box.xmin < 0 || box.ymin < 0 || box.xmax > gt.width ||
          box.ymax > gt.height) {
        throw Error(ErrorCode::InvalidBox, where + ": box [" + std::to_string(box.xmin) + ", " + std::to_string(box.ymin) +
                                               ", " + std::to_string(box.xmax) + ", " + std::to_string(box.ymax) + "]");
      }
      gt.boxes.push_back(box);
    }
    if (result.contains(gt.image_id)) throw Error(ErrorCode::DuplicateImageId, where + ": " + gt.image_id);
    const std::string id = gt.image_id;
    result.emplace(id, std::move(gt));
  });
  return result;
}

void write_ground_truth(const std::filesystem::path& path, std::span<const GroundTruth> images) {
  auto out = open_for_write(path);
  for (const auto& gt : images) {
    json boxes = json::array();
    for (const auto& b : gt.boxes) boxes.push_back(box_to_json(b));
    const json j = {{"image_id", gt.image_id}, {"width", gt.width}, {"height", gt.height}, {"boxes", boxes}};
    out << j.dump() << '\n';
  }
  finish_write(out, path);
}

std::string detection_to_json_line(const DetectionRecord& r) {
  json trace = json::array();
  for (const auto& c : r.center_trace) trace.push_back(json::array({c.x, c.y}));
  const json j = {{"image_id", r.image_id},
                  {"box", box_to_json(r.box)},
                  {"iterations_run", r.iterations_run},
                  {"converged", r.converged},
                  {"center_trace", trace}};
  return j.dump();
}

DetectionRecord detection_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, e.what());
  }
  if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string() || !j.contains("box")) {
    throw Error(ErrorCode::MalformedRecord, "detection record needs image_id and box");
  }
  DetectionRecord r;
  r.image_id = j["image_id"].get<std::string>();
  const auto& box = j["box"];
  if (box.is_array() && !box.empty() && box[0].is_array()) {
    throw Error(ErrorCode::DuplicatePrediction, r.image_id + ": one box per image expected, got a list of boxes");
  }
  r.box = box_from_json(box, r.image_id + " box");
  if (j.contains("iterations_run")) {
    if (!j["iterations_run"].is_number_integer()) throw Error(ErrorCode::MalformedRecord, "iterations_run must be an integer");
    r.iterations_run = j["iterations_run"].get<int>();
  }
  if (j.contains("converged")) {
    if (!j["converged"].is_boolean()) throw Error(ErrorCode::MalformedRecord, "converged must be a boolean");
    r.converged = j["converged"].get<bool>();
  }
  if (j.contains("center_trace")) {
    for (const auto& c : j["center_trace"]) {
      if (!c.is_array() || c.size() != 2) throw Error(ErrorCode::MalformedRecord, "center_trace entries are [x, y]");
      r.center_trace.push_back({json_number(c[0], "center x"), json_number(c[1], "center y")});
    }
  }
  return r;
}

void write_detections(std::span<const DetectionRecord> records, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& r : records) out << detection_to_json_line(r) << '\n';
  finish_write(out, path);
}

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path) {
  std::vector<DetectionRecord> records;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    try {
      records.push_back(detection_from_json_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return records;
}

}  // namespace formula::io
