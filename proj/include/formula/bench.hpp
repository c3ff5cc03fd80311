#pragma once

#include <array>
#include <string>

#include "formula/feature_io.hpp"
#include "formula/guidance.hpp"
#include "formula/pipeline.hpp"

namespace formula::bench {

struct ImageTiming {
  std::string image_id;
  double build_ms = 0.0;  // fusion + graph + intermediate map
  /// total_ms[k] = build + k guidance iterations (run to the cap, no early exit).
  std::array<double, core::kMaxGuidanceIterations + 1> total_ms{};
};

/// Best-of-`repeats` wall-clock timings of the head for 0..8 iterations.
ImageTiming time_image(const io::Manifest& manifest, const io::FeatureStack& stack, const pipeline::RunConfig& config,
                       int repeats = 3);

std::string format_table(const std::vector<ImageTiming>& rows);

}  // namespace formula::bench
