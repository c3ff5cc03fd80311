#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "formula/feature_io.hpp"
#include "formula/saliency_heads.hpp"

namespace formula::synth {

enum class Layout {
  Single,      // one rectangular object on a uniform background
  Distractor,  // object, a smaller distractor above it, and a one-patch bridge
};

Layout layout_from_string(const std::string& name);  // "single" | "distractor"

/// Planted-scene parameters. Foreground and background features are unit
/// directions in a seeded random 2-D plane of R^dim, separated by
/// `separation_deg`, plus i.i.d. Gaussian noise drawn per layer.
struct SceneSpec {
  Layout layout = Layout::Single;
  int grid_h = 16;
  int grid_w = 16;
  int patch_size = 16;
  int dim = 32;
  int layers = 4;
  double separation_deg = 120.0;
  double noise = 0.0;
  int object_min = 2;  // object side lengths in patches, drawn per image
  int object_max = 6;
  int count = 1;
  std::uint64_t seed = 1;
  std::string prefix = "synth";

  void validate() const;
};

struct Scene {
  io::Manifest manifest;
  io::FeatureStack features;
  io::GroundTruth truth;
  heads::ObjectMask planted;  // the object only (not the distractor)
};

std::vector<Scene> generate(const SceneSpec& spec);

/// <dir>/<id>.npy, <dir>/<id>.manifest.json and <dir>/gt.jsonl.
void write_scenes(const std::filesystem::path& dir, const std::vector<Scene>& scenes);

}  // namespace formula::synth
