#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "formula/types.hpp"

namespace formula::io {

/// Per-image description of an exported feature tensor.
struct Manifest {
  std::string image_id;
  int image_width = 0;
  int image_height = 0;
  int patch_size = 0;
  int grid_h = 0;
  int grid_w = 0;
  int num_layers = 0;
  int feature_dim = 0;
  std::string feature_file;  // relative to the manifest's directory

  GridShape grid() const { return {grid_h, grid_w}; }
  std::size_t num_patches() const { return grid().size(); }

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Multi-layer patch features, shape (L, N, D), float32, C order.
/// Layer 0 is the last transformer layer; layer l counts back from it.
class FeatureStack {
 public:
  FeatureStack() = default;
  FeatureStack(int layers, int patches, int dim);
  FeatureStack(int layers, int patches, int dim, std::vector<float> values);

  int layers() const { return layers_; }
  int patches() const { return patches_; }
  int dim() const { return dim_; }

  float at(int layer, int patch, int d) const { return values_[offset(layer, patch, d)]; }
  float& at(int layer, int patch, int d) { return values_[offset(layer, patch, d)]; }

  std::span<const float> layer(int l) const;
  std::span<const float> values() const { return values_; }
  std::span<float> values() { return values_; }

  friend bool operator==(const FeatureStack&, const FeatureStack&) = default;

 private:
  std::size_t offset(int layer, int patch, int d) const {
    return (static_cast<std::size_t>(layer) * static_cast<std::size_t>(patches_) + static_cast<std::size_t>(patch)) *
               static_cast<std::size_t>(dim_) +
           static_cast<std::size_t>(d);
  }

  int layers_ = 0;
  int patches_ = 0;
  int dim_ = 0;
  std::vector<float> values_;
};

struct GroundTruth {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Box> boxes;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct DetectionRecord {
  std::string image_id;
  Box box;
  int iterations_run = 0;
  bool converged = false;
  std::vector<Center> center_trace;  // length iterations_run + 1

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

// NPY v1.0 subset: '<f4', C order, 3-D shape (L, N, D).
void write_npy(const std::filesystem::path& path, const FeatureStack& stack);
FeatureStack read_npy(const std::filesystem::path& path);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Checks field ranges and the grid = floor(size / patch) relations.
void validate_manifest(const Manifest& manifest);

/// Reads the manifest and the feature file it points to, validating that the
/// two agree and that the tensor is finite.
std::pair<Manifest, FeatureStack> read_features(const std::filesystem::path& manifest_path);

std::map<std::string, GroundTruth> read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::filesystem::path& path, std::span<const GroundTruth> images);

void write_detections(std::span<const DetectionRecord> records, const std::filesystem::path& path);
std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);

std::string detection_to_json_line(const DetectionRecord& record);
DetectionRecord detection_from_json_line(const std::string& line);

}  // namespace formula::io
