#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "formula/error.hpp"
#include "formula/eval.hpp"
#include "formula/feature_io.hpp"
#include "formula/guidance.hpp"
#include "formula/numerics.hpp"
#include "formula/pipeline.hpp"
#include "formula/saliency_heads.hpp"
#include "formula/synth.hpp"

namespace py = pybind11;
using namespace formula;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

io::FeatureStack stack_from_array(const FloatArray& a) {
  if (a.ndim() != 3) throw Error(ErrorCode::ShapeMismatch, "feature stack must be 3-D (layers, patches, dim)");
  const auto l = static_cast<int>(a.shape(0)), n = static_cast<int>(a.shape(1)), d = static_cast<int>(a.shape(2));
  return io::FeatureStack(l, n, d, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray stack_to_array(const io::FeatureStack& s) {
  FloatArray out({s.layers(), s.patches(), s.dim()});
  std::copy(s.values().begin(), s.values().end(), out.mutable_data());
  return out;
}

py::dict manifest_to_dict(const io::Manifest& m) {
  py::dict d;
  d["image_id"] = m.image_id;
  d["image_width"] = m.image_width;
  d["image_height"] = m.image_height;
  d["patch_size"] = m.patch_size;
  d["grid_h"] = m.grid_h;
  d["grid_w"] = m.grid_w;
  d["num_layers"] = m.num_layers;
  d["feature_dim"] = m.feature_dim;
  d["feature_file"] = m.feature_file;
  return d;
}

py::tuple box_tuple(const Box& b) { return py::make_tuple(b.xmin, b.ymin, b.xmax, b.ymax); }

Box box_from(const std::array<double, 4>& b) { return {b[0], b[1], b[2], b[3]}; }

py::dict record_to_dict(const io::DetectionRecord& r) {
  py::dict d;
  d["image_id"] = r.image_id;
  d["box"] = box_tuple(r.box);
  d["iterations_run"] = r.iterations_run;
  d["converged"] = r.converged;
  py::list trace;
  for (const auto& c : r.center_trace) trace.append(py::make_tuple(c.x, c.y));
  d["center_trace"] = trace;
  return d;
}

pipeline::RunConfig make_config(const std::string& head, std::optional<double> sigma, double tau, int max_iterations,
                                std::vector<double> fusion_weights, bool guidance, bool fusion, int threads) {
  auto cfg = pipeline::RunConfig::defaults_for(heads::head_from_string(head));
  if (sigma) cfg.sigma = *sigma;
  cfg.tau = tau;
  cfg.max_iterations = max_iterations;
  if (!fusion_weights.empty()) cfg.fusion_weights = core::FusionWeights::normalized(std::move(fusion_weights)).alphas;
  cfg.guidance_enabled = guidance;
  cfg.fusion_enabled = fusion;
  cfg.threads = threads;
  cfg.validate();
  return cfg;
}

py::array_t<double> grid_array(const std::vector<double>& values, GridShape grid) {
  py::array_t<double> out({grid.rows, grid.cols});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

py::array_t<bool> mask_array(const heads::ObjectMask& m) {
  py::array_t<bool> out({m.grid.rows, m.grid.cols});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < m.bits.size(); ++i) p[i] = m.bits[i] != 0;
  return out;
}

}  // namespace

PYBIND11_MODULE(_formula, m) {
  m.doc() = "Object discovery on pre-extracted ViT patch features";

  static py::exception<Error> error_type(m, "FormulaError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error_type.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def(
      "read_features",
      [](const std::filesystem::path& manifest) {
        auto [man, stack] = io::read_features(manifest);
        return py::make_tuple(manifest_to_dict(man), stack_to_array(stack));
      },
      py::arg("manifest_path"), "Manifest dict and the (layers, patches, dim) float32 tensor it points to.");

  m.def("cosine_similarity", &numerics::cosine_similarity_matrix, py::arg("features"));

  m.def(
      "second_smallest_eigpair",
      [](const SymMatrix& w) {
        const auto r = numerics::second_smallest_generalized_eigpair(w);
        return py::make_tuple(r.eigenvalue, r.eigenvector);
      },
      py::arg("weights"), "(lambda, v) for (D - W) v = lambda D v, v' D v = 1.");

  m.def(
      "fuse_layers",
      [](const FloatArray& stack, const std::vector<double>& alphas) {
        return core::fuse_layers(stack_from_array(stack), {alphas});
      },
      py::arg("stack"), py::arg("alphas"));

  m.def(
      "intermediate_map",
      [](const FeatureMatrix& features, int grid_h, int grid_w, const std::string& head) {
        const GridShape grid{grid_h, grid_w};
        const auto out = heads::build_intermediate_map(features, grid, heads::head_from_string(head));
        return py::make_tuple(grid_array(out.map.values, grid), mask_array(heads::extract_mask(out.map, out.context)));
      },
      py::arg("features"), py::arg("grid_h"), py::arg("grid_w"), py::arg("head") = "lost",
      "Intermediate map and the bare-head mask, both (grid_h, grid_w).");

  m.def(
      "gaussian_map",
      [](double x, double y, double sigma, int grid_h, int grid_w) {
        const GridShape grid{grid_h, grid_w};
        return grid_array(core::gaussian_map({x, y}, sigma, grid).values, grid);
      },
      py::arg("x"), py::arg("y"), py::arg("sigma"), py::arg("grid_h"), py::arg("grid_w"));

  m.def(
      "detect",
      [](const std::filesystem::path& manifest, const std::string& head, std::optional<double> sigma, double tau,
         int max_iterations, std::vector<double> fusion_weights, bool guidance, bool fusion) {
        const auto cfg = make_config(head, sigma, tau, max_iterations, std::move(fusion_weights), guidance, fusion, 1);
        auto [man, stack] = io::read_features(manifest);
        return record_to_dict(pipeline::detect_image(man, stack, cfg).record);
      },
      py::arg("manifest_path"), py::arg("head") = "lost", py::arg("sigma") = py::none(), py::arg("tau") = 1.4142135,
      py::arg("max_iterations") = 4, py::arg("fusion_weights") = std::vector<double>{}, py::arg("guidance") = true,
      py::arg("fusion") = true);

  m.def(
      "detect_batch",
      [](const std::vector<std::string>& inputs, const std::string& head, std::optional<double> sigma, double tau,
         int max_iterations, std::vector<double> fusion_weights, bool guidance, bool fusion, int threads) {
        const auto cfg =
            make_config(head, sigma, tau, max_iterations, std::move(fusion_weights), guidance, fusion, threads);
        const auto paths = pipeline::expand_inputs(inputs);
        pipeline::BatchResult result;
        {
          py::gil_scoped_release release;
          result = pipeline::run_batch(paths, cfg);
        }
        py::list records, failures;
        for (const auto& r : result.records) records.append(record_to_dict(r));
        for (const auto& f : result.failures) failures.append(py::make_tuple(f.image_id, f.message));
        return py::make_tuple(records, failures);
      },
      py::arg("inputs"), py::arg("head") = "lost", py::arg("sigma") = py::none(), py::arg("tau") = 1.4142135,
      py::arg("max_iterations") = 4, py::arg("fusion_weights") = std::vector<double>{}, py::arg("guidance") = true,
      py::arg("fusion") = true, py::arg("threads") = 1, "(records, failures) for manifest files or directories.");

  m.def(
      "iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) { return eval::iou(box_from(a), box_from(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "corloc",
      [](const std::filesystem::path& pred, const std::filesystem::path& gt) {
        const auto report =
            eval::corloc(eval::predictions_by_image(io::read_detections(pred)), io::read_ground_truth(gt));
        py::dict per_image;
        for (const auto& r : report.per_image) per_image[py::str(r.image_id)] = r.best_iou;
        return py::make_tuple(report.corloc, per_image);
      },
      py::arg("pred_path"), py::arg("gt_path"), "(corloc, {image_id: best_iou}).");

  m.def(
      "synth",
      [](const std::filesystem::path& out, int count, std::uint64_t seed, int grid_h, int grid_w, int dim, int layers,
         double separation, double noise, int object_min, int object_max, const std::string& layout,
         const std::string& prefix) {
        synth::SceneSpec spec;
        spec.count = count;
        spec.seed = seed;
        spec.grid_h = grid_h;
        spec.grid_w = grid_w;
        spec.dim = dim;
        spec.layers = layers;
        spec.separation_deg = separation;
        spec.noise = noise;
        spec.object_min = object_min;
        spec.object_max = object_max;
        spec.layout = synth::layout_from_string(layout);
        spec.prefix = prefix;
        const auto scenes = synth::generate(spec);
        synth::write_scenes(out, scenes);
        py::list ids;
        for (const auto& s : scenes) ids.append(s.manifest.image_id);
        return ids;
      },
      py::arg("out"), py::arg("count") = 1, py::arg("seed") = 1, py::arg("grid_h") = 16, py::arg("grid_w") = 16,
      py::arg("dim") = 32, py::arg("layers") = 4, py::arg("separation") = 120.0, py::arg("noise") = 0.0,
      py::arg("object_min") = 2, py::arg("object_max") = 6, py::arg("layout") = "single", py::arg("prefix") = "synth");
}
