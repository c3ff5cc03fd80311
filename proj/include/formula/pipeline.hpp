#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "formula/feature_io.hpp"
#include "formula/guidance.hpp"
#include "formula/saliency_heads.hpp"

namespace formula::pipeline {

/// Everything a detection run needs; one field per CLI flag.
struct RunConfig {
  heads::Head head = heads::Head::Lost;
  double sigma = 0.1;
  double tau = 1.4142135;
  int max_iterations = 4;
  std::vector<double> fusion_weights;  // empty: uniform over the last four layers
  bool guidance_enabled = true;
  bool fusion_enabled = true;
  bool emit_overlays = false;
  std::vector<std::string> manifests;
  std::string out = "detections.jsonl";
  int threads = 1;

  static RunConfig defaults_for(heads::Head head);

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);

  void validate() const;
  core::GuidanceConfig guidance() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Fused (or last-layer) features per the config.
FeatureMatrix prepare_features(const io::FeatureStack& stack, const RunConfig& config);

struct ImageOutcome {
  io::DetectionRecord record;
  core::GuidanceResult detail;
};

ImageOutcome detect_image(const io::Manifest& manifest, const io::FeatureStack& stack, const RunConfig& config,
                          const heads::HeadParams& params = {});

struct ImageFailure {
  std::string image_id;
  std::string message;
};

struct BatchResult {
  std::vector<io::DetectionRecord> records;  // sorted by image_id
  std::vector<ImageFailure> failures;        // sorted by image_id
};

/// Called from worker threads after each successful image.
using ImageCallback = std::function<void(const io::Manifest&, const ImageOutcome&)>;

/// Runs every manifest through the pipeline on `config.threads` workers.
/// Workers pull images from a shared counter; each owns its image end to end,
/// and results are ordered by image_id so the output is schedule-independent.
BatchResult run_batch(const std::vector<std::filesystem::path>& manifests, const RunConfig& config,
                      const ImageCallback& on_image = {});

/// Manifest files as given, plus every *.manifest.json inside given directories
/// (sorted by path).
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::string>& inputs);

}  // namespace formula::pipeline
