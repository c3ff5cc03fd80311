#include "formula/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <thread>

#include <nlohmann/json.hpp>

#include "formula/error.hpp"

namespace formula::pipeline {

using nlohmann::json;

RunConfig RunConfig::defaults_for(heads::Head head) {
  RunConfig cfg;
  cfg.head = head;
  cfg.sigma = core::GuidanceConfig::defaults_for(head).sigma;
  return cfg;
}

std::string RunConfig::to_json() const {
  const json j = {{"head", std::string(heads::to_string(head))},
                  {"sigma", sigma},
                  {"tau", tau},
                  {"max_iterations", max_iterations},
                  {"fusion_weights", fusion_weights},
                  {"guidance_enabled", guidance_enabled},
                  {"fusion_enabled", fusion_enabled},
                  {"emit_overlays", emit_overlays},
                  {"manifests", manifests},
                  {"out", out},
                  {"threads", threads}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "run config must be a JSON object");
  RunConfig cfg;
  try {
    if (j.contains("head")) cfg = defaults_for(heads::head_from_string(j.at("head").get<std::string>()));
    if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
    if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
    if (j.contains("max_iterations")) cfg.max_iterations = j.at("max_iterations").get<int>();
    if (j.contains("fusion_weights")) cfg.fusion_weights = j.at("fusion_weights").get<std::vector<double>>();
    if (j.contains("guidance_enabled")) cfg.guidance_enabled = j.at("guidance_enabled").get<bool>();
    if (j.contains("fusion_enabled")) cfg.fusion_enabled = j.at("fusion_enabled").get<bool>();
    if (j.contains("emit_overlays")) cfg.emit_overlays = j.at("emit_overlays").get<bool>();
    if (j.contains("manifests")) cfg.manifests = j.at("manifests").get<std::vector<std::string>>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  for (const auto& [key, _] : j.items()) {
    static const std::vector<std::string> known = {"head",           "sigma",           "tau",           "max_iterations",
                                                   "fusion_weights", "guidance_enabled", "fusion_enabled", "emit_overlays",
                                                   "manifests",      "out",             "threads"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorCode::InvalidConfig, "unknown config field " + key);
  }
  return cfg;
}

void RunConfig::validate() const {
  if (threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be >= 1");
  if (guidance_enabled) guidance().validate();
  if (fusion_enabled && !fusion_weights.empty()) {
    double sum = 0.0;
    for (double a : fusion_weights) {
      if (!std::isfinite(a) || a < 0.0) throw Error(ErrorCode::InvalidWeights, "fusion weights must be finite and >= 0");
      sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidWeights, "fusion weights must sum to one");
  }
}

core::GuidanceConfig RunConfig::guidance() const {
  core::GuidanceConfig g;
  g.sigma = sigma;
  g.tau = tau;
  g.max_iterations = guidance_enabled ? max_iterations : 0;
  return g;
}

FeatureMatrix prepare_features(const io::FeatureStack& stack, const RunConfig& config) {
  if (!config.fusion_enabled) return core::layer_features(stack, 0);
  const core::FusionWeights weights = config.fusion_weights.empty()
                                          ? core::FusionWeights::uniform_last(stack.layers())
                                          : core::FusionWeights{config.fusion_weights};
  return core::fuse_layers(stack, weights);
}

ImageOutcome detect_image(const io::Manifest& manifest, const io::FeatureStack& stack, const RunConfig& config,
                          const heads::HeadParams& params) {
  core::GuidanceConfig guidance = config.guidance();
  if (!config.guidance_enabled) guidance.sigma = 1.0;  // ignored at zero iterations
  guidance.validate();
  const FeatureMatrix features = prepare_features(stack, config);
  const heads::HeadOutput built = heads::build_intermediate_map(features, manifest.grid(), config.head, params);
  ImageOutcome outcome;
  outcome.detail = core::refine(built.map, built.context, guidance);
  outcome.record = core::to_record(outcome.detail, manifest);
  return outcome;
}

BatchResult run_batch(const std::vector<std::filesystem::path>& manifests, const RunConfig& config,
                      const ImageCallback& on_image) {
  config.validate();
  struct Slot {
    std::optional<io::DetectionRecord> record;
    std::optional<ImageFailure> failure;
  };
  std::vector<Slot> slots(manifests.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < manifests.size(); i = next.fetch_add(1)) {
      // Until the manifest parses, the file stem is the best available id.
      std::string image_id = manifests[i].stem().string();
      if (image_id.ends_with(".manifest")) image_id.resize(image_id.size() - 9);
      try {
        auto [manifest, stack] = io::read_features(manifests[i]);
        image_id = manifest.image_id;
        ImageOutcome outcome = detect_image(manifest, stack, config);
        if (on_image) on_image(manifest, outcome);
        slots[i].record = std::move(outcome.record);
      } catch (const std::exception& e) {
        slots[i].failure = ImageFailure{image_id, e.what()};
      }
    }
  };

  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(manifests.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }

  BatchResult result;
  for (auto& slot : slots) {
    if (slot.record) result.records.push_back(std::move(*slot.record));
    if (slot.failure) result.failures.push_back(std::move(*slot.failure));
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  std::stable_sort(result.failures.begin(), result.failures.end(),
                   [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  return result;
}

std::vector<std::filesystem::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::filesystem::path> out;
  for (const auto& input : inputs) {
    const std::filesystem::path p(input);
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& entry : std::filesystem::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().filename().string().ends_with(".manifest.json")) {
          found.push_back(entry.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace formula::pipeline
