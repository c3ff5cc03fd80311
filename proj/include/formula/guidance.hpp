#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "formula/feature_io.hpp"
#include "formula/saliency_heads.hpp"
#include "formula/types.hpp"

namespace formula::core {

//
// Multi-layer fusion
//

enum class Dataset { Voc07, Voc12, Coco20k };

Dataset dataset_from_string(std::string_view name);  // "voc07" | "voc12" | "coco20k"

/// Convex layer weights; alphas[0] weights the last transformer layer.
struct FusionWeights {
  std::vector<double> alphas;

  /// Uniform over the first min(layers, count) entries, zero elsewhere.
  static FusionWeights uniform_last(int layers, int count = 4);
  /// Tuned per-dataset weights for four layers (integers out of ten).
  static FusionWeights for_dataset(Dataset dataset, heads::Head head);
  /// Divides by the sum. Sets *rescaled when the input did not already sum to one.
  static FusionWeights normalized(std::vector<double> raw, bool* rescaled = nullptr);

  void validate(int layers) const;
};

/// f = sum_l alpha_l k_l over the stack's layers.
FeatureMatrix fuse_layers(const io::FeatureStack& stack, const FusionWeights& weights);

/// A single layer as a dense matrix (layer 0 = last layer).
FeatureMatrix layer_features(const io::FeatureStack& stack, int layer);

//
// Foreground guidance
//

inline constexpr int kMaxGuidanceIterations = 8;

struct GuidanceConfig {
  double sigma = 0.1;               // Gaussian width, normalized image coordinates
  double tau = 1.4142135623730951;  // threshold on the squared center shift, patch units
  int max_iterations = 4;
  /// Run every iteration up to the cap even after the shift drops below tau.
  /// Only used for timing the loop body.
  bool ignore_convergence = false;

  static GuidanceConfig defaults_for(heads::Head head);
  void validate() const;
};

/// Gaussian prior over the grid, peak-normalized.
struct ProbabilityMap {
  GridShape grid;
  std::vector<double> values;
};

/// Mean (col, row) of the foreground patches, patch centers at integer coordinates.
Center mask_centroid(const heads::ObjectMask& mask);

/// Unnormalized 2-D isotropic Gaussian density at squared distance sq_dist.
double gaussian_density(double sq_dist, double sigma);

/// Density around `center` evaluated on per-axis normalized coordinates
/// (col / grid_w, row / grid_h), divided by its maximum over the grid.
ProbabilityMap gaussian_map(Center center, double sigma, GridShape grid);

/// Elementwise product; kind is preserved.
heads::IntermediateMap reweight(const heads::IntermediateMap& map, const ProbabilityMap& prob);

struct GuidanceResult {
  heads::ObjectMask initial_mask;
  heads::ObjectMask mask;                    // final mask
  heads::IntermediateMap final_map;          // map the final mask was extracted from
  std::vector<Center> center_trace;          // iterations_run + 1 entries
  int iterations_run = 0;
  bool converged = false;
  bool fell_back = false;                    // an extraction came back empty
  bool initial_empty = false;                // the bare head found nothing; box = whole image
};

/// Iterative refinement from a prebuilt head: m = D(F); then repeatedly
/// re-center a Gaussian on the mask, reweight F and re-extract, until the
/// squared center shift is below tau or the iteration cap is hit.
GuidanceResult refine(const heads::IntermediateMap& map, const heads::HeadContext& context, const GuidanceConfig& config);

/// End-to-end detection for one image from already-fused features.
io::DetectionRecord foreground_guided_detect(const FeatureMatrix& features, heads::Head head,
                                             const GuidanceConfig& config, const io::Manifest& manifest,
                                             const heads::HeadParams& params = {});

io::DetectionRecord to_record(const GuidanceResult& result, const io::Manifest& manifest);

}  // namespace formula::core
