#include "formula/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>
#include <sstream>

namespace formula::bench {

namespace {

template <typename Fn>
double best_ms(int repeats, Fn&& fn) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, repeats); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

ImageTiming time_image(const io::Manifest& manifest, const io::FeatureStack& stack, const pipeline::RunConfig& config,
                       int repeats) {
  ImageTiming timing;
  timing.image_id = manifest.image_id;
  heads::HeadOutput built;
  timing.build_ms = best_ms(repeats, [&] {
    const FeatureMatrix features = pipeline::prepare_features(stack, config);
    built = heads::build_intermediate_map(features, manifest.grid(), config.head);
  });
  core::GuidanceConfig guidance = config.guidance();
  guidance.ignore_convergence = true;
  for (int k = 0; k <= core::kMaxGuidanceIterations; ++k) {
    guidance.max_iterations = k;
    const double loop_ms = best_ms(repeats, [&] { (void)core::refine(built.map, built.context, guidance); });
    timing.total_ms[static_cast<std::size_t>(k)] = timing.build_ms + loop_ms;
  }
  return timing;
}

std::string format_table(const std::vector<ImageTiming>& rows) {
  std::size_t id_width = 8;
  for (const auto& r : rows) id_width = std::max(id_width, r.image_id.size());
  std::ostringstream out;
  char buf[32];
  out << std::string(id_width - 8, ' ') << "image_id  build_ms";
  for (int k = 0; k <= core::kMaxGuidanceIterations; ++k) {
    std::snprintf(buf, sizeof buf, "  %8s", ("it" + std::to_string(k) + "_ms").c_str());
    out << buf;
  }
  out << "  ratio8/1\n";
  for (const auto& r : rows) {
    out << std::string(id_width - r.image_id.size(), ' ') << r.image_id;
    std::snprintf(buf, sizeof buf, "  %8.2f", r.build_ms);
    out << buf;
    for (double t : r.total_ms) {
      std::snprintf(buf, sizeof buf, "  %8.2f", t);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, "  %8.3f\n", r.total_ms[1] > 0.0 ? r.total_ms[8] / r.total_ms[1] : 0.0);
    out << buf;
  }
  return out.str();
}

}  // namespace formula::bench
