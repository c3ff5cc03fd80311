#include "formula/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "formula/error.hpp"

namespace formula::core {

Dataset dataset_from_string(std::string_view name) {
  if (name == "voc07") return Dataset::Voc07;
  if (name == "voc12") return Dataset::Voc12;
  if (name == "coco20k") return Dataset::Coco20k;
  throw Error(ErrorCode::InvalidConfig, "unknown dataset '" + std::string(name) + "'");
}

FusionWeights FusionWeights::uniform_last(int layers, int count) {
  if (layers < 1 || count < 1) throw Error(ErrorCode::InvalidWeights, "need at least one layer");
  const int used = std::min(layers, count);
  FusionWeights w;
  w.alphas.assign(static_cast<std::size_t>(layers), 0.0);
  for (int l = 0; l < used; ++l) w.alphas[static_cast<std::size_t>(l)] = 1.0 / used;
  return w;
}

FusionWeights FusionWeights::for_dataset(Dataset dataset, heads::Head head) {
  // Tenths, last layer first.
  static constexpr int kLost[3][4] = {{2, 1, 1, 6}, {1, 1, 2, 6}, {0, 2, 3, 5}};
  static constexpr int kTokenCut[3][4] = {{3, 5, 1, 1}, {1, 6, 1, 2}, {2, 7, 0, 1}};
  const auto& row = (head == heads::Head::Lost ? kLost : kTokenCut)[static_cast<int>(dataset)];
  FusionWeights w;
  for (int v : row) w.alphas.push_back(v / 10.0);
  return w;
}

FusionWeights FusionWeights::normalized(std::vector<double> raw, bool* rescaled) {
  double sum = 0.0;
  for (double a : raw) {
    if (!std::isfinite(a) || a < 0.0) throw Error(ErrorCode::InvalidWeights, "fusion weights must be finite and >= 0");
    sum += a;
  }
  if (!(sum > 0.0)) throw Error(ErrorCode::InvalidWeights, "fusion weights sum to zero");
  const bool needs = std::abs(sum - 1.0) > 1e-9;
  if (rescaled) *rescaled = needs;
  if (needs) {
    for (double& a : raw) a /= sum;
  }
  return {std::move(raw)};
}

void FusionWeights::validate(int layers) const {
  if (static_cast<int>(alphas.size()) != layers) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(alphas.size()) + " fusion weights for " +
                                               std::to_string(layers) + " layers");
  }
  double sum = 0.0;
  for (double a : alphas) {
    if (!std::isfinite(a) || a < 0.0) throw Error(ErrorCode::InvalidWeights, "fusion weights must be finite and >= 0");
    sum += a;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidWeights, "fusion weights sum to " + std::to_string(sum));
}

FeatureMatrix layer_features(const io::FeatureStack& stack, int layer) {
  const auto values = stack.layer(layer);
  FeatureMatrix out(stack.patches(), stack.dim());
  std::copy(values.begin(), values.end(), out.data());
  return out;
}

FeatureMatrix fuse_layers(const io::FeatureStack& stack, const FusionWeights& weights) {
  weights.validate(stack.layers());
  // Accumulated as k_0 + sum_l alpha_l (k_l - k_0): with alphas summing to one
  // this is the same convex combination, and identical layers come back
  // bit-exact.
  FeatureMatrix fused = layer_features(stack, 0);
  const FeatureMatrix anchor = fused;
  for (int l = 1; l < stack.layers(); ++l) {
    const double a = weights.alphas[static_cast<std::size_t>(l)];
    if (a == 0.0) continue;
    fused += a * (layer_features(stack, l) - anchor);
  }
  return fused;
}

GuidanceConfig GuidanceConfig::defaults_for(heads::Head head) {
  GuidanceConfig cfg;
  cfg.sigma = head == heads::Head::Lost ? 0.1 : 1.0;
  return cfg;
}

void GuidanceConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::InvalidConfig, "sigma must be positive");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidConfig, "tau must be positive");
  if (max_iterations < 0 || max_iterations > kMaxGuidanceIterations) {
    throw Error(ErrorCode::InvalidConfig,
                "max_iterations must be in [0, " + std::to_string(kMaxGuidanceIterations) + "]");
  }
}

Center mask_centroid(const heads::ObjectMask& mask) {
  double sx = 0.0, sy = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i]) continue;
    sx += mask.grid.col_of(i);
    sy += mask.grid.row_of(i);
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::EmptyMask, "centroid of an empty mask");
  return {sx / static_cast<double>(count), sy / static_cast<double>(count)};
}

double gaussian_density(double sq_dist, double sigma) {
  return std::exp(-sq_dist / (2.0 * sigma * sigma)) / (2.0 * std::numbers::pi * sigma * sigma);
}

ProbabilityMap gaussian_map(Center center, double sigma, GridShape grid) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidConfig, "sigma must be positive");
  ProbabilityMap prob{grid, std::vector<double>(grid.size())};
  const double cx = center.x / grid.cols;
  const double cy = center.y / grid.rows;
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dx = static_cast<double>(grid.col_of(i)) / grid.cols - cx;
    const double dy = static_cast<double>(grid.row_of(i)) / grid.rows - cy;
    prob.values[i] = dx * dx + dy * dy;
    nearest = std::min(nearest, prob.values[i]);
  }
  // raw / max(raw) in closed form; the peak is exactly 1. Far entries are
  // floored at the smallest normal double so the map stays strictly positive.
  const double denom = 2.0 * sigma * sigma;
  for (double& v : prob.values) {
    v = std::max(std::exp(-(v - nearest) / denom), std::numeric_limits<double>::min());
  }
  return prob;
}

heads::IntermediateMap reweight(const heads::IntermediateMap& map, const ProbabilityMap& prob) {
  if (!(map.grid == prob.grid) || map.values.size() != prob.values.size()) {
    throw Error(ErrorCode::GridMismatch, "probability map and intermediate map cover different grids");
  }
  heads::IntermediateMap out = map;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= prob.values[i];
  return out;
}

GuidanceResult refine(const heads::IntermediateMap& map, const heads::HeadContext& context, const GuidanceConfig& config) {
  config.validate();
  GuidanceResult result;
  result.final_map = map;
  try {
    result.mask = heads::extract_mask(map, context);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyForeground) throw;
    result.mask = heads::ObjectMask::full(map.grid);
    result.initial_mask = result.mask;
    result.fell_back = true;
    result.initial_empty = true;
    result.center_trace.push_back(mask_centroid(result.mask));
    return result;
  }
  result.initial_mask = result.mask;
  result.center_trace.push_back(mask_centroid(result.mask));

  for (int iteration = 1; iteration <= config.max_iterations; ++iteration) {
    const Center previous = result.center_trace.back();
    const ProbabilityMap prob = gaussian_map(previous, config.sigma, map.grid);
    heads::IntermediateMap reweighted = reweight(map, prob);
    heads::ObjectMask next;
    try {
      next = heads::extract_mask(reweighted, context);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyForeground) throw;
      result.fell_back = true;
      result.converged = false;
      break;
    }
    result.mask = std::move(next);
    result.final_map = std::move(reweighted);
    result.iterations_run = iteration;
    const Center current = mask_centroid(result.mask);
    result.center_trace.push_back(current);

    const double dx = current.x - previous.x;
    const double dy = current.y - previous.y;
    if (dx * dx + dy * dy < config.tau) {
      result.converged = true;
      if (!config.ignore_convergence) break;
    }
  }
  return result;
}

io::DetectionRecord to_record(const GuidanceResult& result, const io::Manifest& manifest) {
  io::DetectionRecord record;
  record.image_id = manifest.image_id;
  if (result.initial_empty) {
    record.box = {0.0, 0.0, static_cast<double>(manifest.image_width), static_cast<double>(manifest.image_height)};
  } else {
    record.box = heads::mask_to_box(result.mask, manifest);
  }
  record.iterations_run = result.iterations_run;
  record.converged = result.converged;
  record.center_trace = result.center_trace;
  return record;
}

io::DetectionRecord foreground_guided_detect(const FeatureMatrix& features, heads::Head head,
                                             const GuidanceConfig& config, const io::Manifest& manifest,
                                             const heads::HeadParams& params) {
  config.validate();
  const heads::HeadOutput built = heads::build_intermediate_map(features, manifest.grid(), head, params);
  return to_record(refine(built.map, built.context, config), manifest);
}

}  // namespace formula::core
