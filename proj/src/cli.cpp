#include "formula/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "formula/bench.hpp"
#include "formula/error.hpp"
#include "formula/eval.hpp"
#include "formula/feature_io.hpp"
#include "formula/overlay.hpp"
#include "formula/pipeline.hpp"
#include "formula/synth.hpp"

namespace formula::cli {

namespace {

std::vector<double> parse_weight_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidWeights, "cannot parse fusion weight '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::InvalidWeights, "empty fusion weight list");
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct HeadFlags {
  std::string head = "lost";
  double sigma = 0.0;
  double tau = 1.4142135;
  int max_iterations = 4;
  std::string fusion_weights;
  bool no_guidance = false;
  bool no_fusion = false;
  CLI::Option* head_opt = nullptr;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* tau_opt = nullptr;
  CLI::Option* iter_opt = nullptr;
  CLI::Option* weights_opt = nullptr;
  CLI::Option* no_guidance_opt = nullptr;
  CLI::Option* no_fusion_opt = nullptr;

  void add_to(CLI::App& app) {
    head_opt = app.add_option("--head", head, "Localization head")->check(CLI::IsMember({"lost", "tokencut"}));
    sigma_opt = app.add_option("--sigma", sigma, "Gaussian width in normalized coordinates (default: 0.1 lost, 1.0 tokencut)");
    tau_opt = app.add_option("--tau", tau, "Convergence threshold on the squared center shift (patches)");
    iter_opt = app.add_option("--max-iterations", max_iterations, "Guidance iteration cap")
                   ->check(CLI::Range(0, core::kMaxGuidanceIterations));
    weights_opt = app.add_option("--fusion-weights", fusion_weights,
                                 "Comma-separated layer weights, last layer first; normalized to sum one");
    no_guidance_opt = app.add_flag("--no-guidance", no_guidance, "Disable foreground guidance");
    no_fusion_opt = app.add_flag("--no-fusion", no_fusion, "Use last-layer features only");
  }

  // Flags given on the command line override `base`.
  pipeline::RunConfig apply(pipeline::RunConfig base, bool base_from_file, std::ostream& err) const {
    if (head_opt->count()) {
      const heads::Head h = heads::head_from_string(head);
      if (!base_from_file || h != base.head) base.sigma = core::GuidanceConfig::defaults_for(h).sigma;
      base.head = h;
    }
    if (sigma_opt->count()) base.sigma = sigma;
    if (tau_opt->count()) base.tau = tau;
    if (iter_opt->count()) base.max_iterations = max_iterations;
    if (no_guidance_opt->count()) base.guidance_enabled = false;
    if (no_fusion_opt->count()) base.fusion_enabled = false;
    if (weights_opt->count()) {
      bool rescaled = false;
      base.fusion_weights = core::FusionWeights::normalized(parse_weight_list(fusion_weights), &rescaled).alphas;
      if (rescaled) err << "warning: fusion weights do not sum to one; normalized\n";
    }
    return base;
  }
};

int cmd_detect(const pipeline::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto manifests = pipeline::expand_inputs(cfg.manifests);
  const auto out_dir = std::filesystem::path(cfg.out).parent_path();
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::filesystem::path overlay_dir;
  if (cfg.emit_overlays) {
    overlay_dir = out_dir / "overlays";
    std::filesystem::create_directories(overlay_dir);
  }
  pipeline::ImageCallback on_image;
  if (cfg.emit_overlays) {
    on_image = [&](const io::Manifest& m, const pipeline::ImageOutcome& outcome) {
      overlay::write_overlay_png(overlay_dir / (m.image_id + ".png"), outcome.detail.final_map, outcome.record.box, m);
    };
  }
  const pipeline::BatchResult result = pipeline::run_batch(manifests, cfg, on_image);
  io::write_detections(result.records, cfg.out);
  for (const auto& f : result.failures) err << "error: " << f.image_id << ": " << f.message << '\n';
  out << "wrote " << result.records.size() << " detections to " << cfg.out;
  if (!result.failures.empty()) out << " (" << result.failures.size() << " images failed)";
  out << '\n';
  return result.failures.empty() ? kExitOk : kExitPipelineError;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised object discovery on pre-extracted ViT patch features"};
  app.require_subcommand(1);

  // detect
  auto* detect = app.add_subcommand("detect", "Localize one object per image");
  HeadFlags detect_flags;
  detect_flags.add_to(*detect);
  std::vector<std::string> detect_inputs;
  std::string detect_out = "detections.jsonl";
  std::string config_path;
  int threads = 1;
  bool emit_overlays = false;
  bool print_config = false;
  detect->add_option("inputs", detect_inputs, "Manifest files or directories of *.manifest.json");
  auto* out_opt = detect->add_option("--out", detect_out, "Output JSON Lines path");
  auto* threads_opt = detect->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* overlays_opt = detect->add_flag("--emit-overlays", emit_overlays, "Write PNG heatmaps next to --out");
  detect->add_option("--config", config_path, "Load a run config written by --print-config")->check(CLI::ExistingFile);
  detect->add_flag("--print-config", print_config, "Print the effective run config as JSON and exit");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "CorLoc of predictions against ground truth");
  std::string pred_path, gt_path, report_path;
  bool as_json = false;
  eval_cmd->add_option("--pred", pred_path, "Predictions (JSON Lines)")->required();
  eval_cmd->add_option("--gt", gt_path, "Ground truth (JSON Lines)")->required();
  eval_cmd->add_flag("--json", as_json, "Print the report as JSON instead of a table");
  eval_cmd->add_option("--report", report_path, "Also write the JSON report to this path");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted-object feature set");
  synth::SceneSpec spec;
  std::string synth_out, layout = "single";
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--seed", spec.seed, "RNG seed");
  synth_cmd->add_option("--count", spec.count, "Number of images")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--layout", layout, "single | distractor")->check(CLI::IsMember({"single", "distractor"}));
  synth_cmd->add_option("--grid-h", spec.grid_h, "Grid rows");
  synth_cmd->add_option("--grid-w", spec.grid_w, "Grid columns");
  synth_cmd->add_option("--patch-size", spec.patch_size, "Patch size in pixels");
  synth_cmd->add_option("--dim", spec.dim, "Feature dimension");
  synth_cmd->add_option("--layers", spec.layers, "Number of layers");
  synth_cmd->add_option("--separation", spec.separation_deg, "Foreground/background angle in degrees (single layout)");
  synth_cmd->add_option("--noise", spec.noise, "Per-entry Gaussian noise standard deviation");
  synth_cmd->add_option("--object-min", spec.object_min, "Smallest object side (patches)");
  synth_cmd->add_option("--object-max", spec.object_max, "Largest object side (patches)");
  synth_cmd->add_option("--prefix", spec.prefix, "Image id prefix");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Time the head for 0..8 guidance iterations");
  HeadFlags bench_flags;
  bench_flags.add_to(*bench_cmd);
  std::vector<std::string> bench_inputs;
  int repeats = 3;
  bench_cmd->add_option("inputs", bench_inputs, "Manifest files or directories");
  bench_cmd->add_option("--repeats", repeats, "Timing repeats (best of)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "usage error: " << e.what() << '\n';
    return kExitUsageError;
  }

  try {
    if (*detect) {
      pipeline::RunConfig cfg;
      try {
        cfg = config_path.empty() ? pipeline::RunConfig{}
                                  : pipeline::RunConfig::from_json(read_text(config_path));
        cfg = detect_flags.apply(cfg, !config_path.empty(), err);
        if (!detect_inputs.empty()) cfg.manifests = detect_inputs;
        if (out_opt->count()) cfg.out = detect_out;
        if (threads_opt->count()) cfg.threads = threads;
        if (overlays_opt->count()) cfg.emit_overlays = true;
        cfg.validate();
      } catch (const Error& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsageError;
      }
      if (print_config) {
        out << cfg.to_json() << '\n';
        return kExitOk;
      }
      if (cfg.manifests.empty()) {
        err << "usage error: no input manifests\n";
        return kExitUsageError;
      }
      return cmd_detect(cfg, out, err);
    }

    if (*eval_cmd) {
      const auto predictions = eval::predictions_by_image(io::read_detections(pred_path));
      const auto truth = io::read_ground_truth(gt_path);
      const eval::EvalReport report = eval::corloc(predictions, truth);
      out << (as_json ? report.to_json() + "\n" : report.to_table());
      if (!report_path.empty()) {
        std::ofstream f(report_path);
        f << report.to_json() << '\n';
        if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + report_path);
      }
      return kExitOk;
    }

    if (*synth_cmd) {
      spec.layout = synth::layout_from_string(layout);
      std::vector<synth::Scene> scenes;
      try {
        scenes = synth::generate(spec);
      } catch (const Error& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsageError;
      }
      synth::write_scenes(synth_out, scenes);
      out << "wrote " << scenes.size() << " scenes to " << synth_out << '\n';
      return kExitOk;
    }

    if (*bench_cmd) {
      pipeline::RunConfig cfg;
      try {
        cfg = bench_flags.apply(cfg, false, err);
        cfg.validate();
      } catch (const Error& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsageError;
      }
      std::vector<bench::ImageTiming> rows;
      for (const auto& path : pipeline::expand_inputs(bench_inputs)) {
        const auto [manifest, stack] = io::read_features(path);
        rows.push_back(bench::time_image(manifest, stack, cfg, repeats));
      }
      out << bench::format_table(rows);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitPipelineError;
  }
  return kExitUsageError;
}

}  // namespace formula::cli
