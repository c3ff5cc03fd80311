#include "formula/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "formula/error.hpp"

namespace formula::synth {

namespace {

// mt19937_64 is fully specified by the standard; the distributions are not,
// so uniform and normal draws are derived from raw outputs here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  int uniform_int(int lo, int hi) {  // inclusive
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(engine_() % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct Rect {
  int row, col, h, w;
};

void fill(std::vector<int>& labels, GridShape grid, Rect r, int label) {
  for (int y = r.row; y < r.row + r.h; ++y)
    for (int x = r.col; x < r.col + r.w; ++x) labels[grid.index(y, x)] = label;
}

}  // namespace

Layout layout_from_string(const std::string& name) {
  if (name == "single") return Layout::Single;
  if (name == "distractor") return Layout::Distractor;
  throw Error(ErrorCode::InvalidSpec, "unknown layout '" + name + "'");
}

void SceneSpec::validate() const {
  if (grid_h < 1 || grid_w < 1 || patch_size < 1) throw Error(ErrorCode::InvalidSpec, "grid and patch size must be positive");
  if (dim < 2) throw Error(ErrorCode::InvalidSpec, "feature dim must be >= 2");
  if (layers < 1) throw Error(ErrorCode::InvalidSpec, "layers must be >= 1");
  if (count < 1) throw Error(ErrorCode::InvalidSpec, "count must be >= 1");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error(ErrorCode::InvalidSpec, "noise must be >= 0");
  if (!std::isfinite(separation_deg) || separation_deg <= 0.0 || separation_deg > 180.0)
    throw Error(ErrorCode::InvalidSpec, "separation must be in (0, 180] degrees");
  if (layout == Layout::Single) {
    if (object_min < 1 || object_max < object_min) throw Error(ErrorCode::InvalidSpec, "need 1 <= object_min <= object_max");
    if (object_max > grid_h || object_max > grid_w) throw Error(ErrorCode::InvalidSpec, "object larger than the grid");
  } else if (grid_h < 12 || grid_w < 8) {
    throw Error(ErrorCode::InvalidSpec, "distractor layout needs at least a 12x8 grid");
  }
  if (prefix.empty()) throw Error(ErrorCode::InvalidSpec, "prefix must be nonempty");
}

std::vector<Scene> generate(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const GridShape grid{spec.grid_h, spec.grid_w};
  const auto dim = static_cast<std::size_t>(spec.dim);

  std::vector<Scene> scenes;
  for (int k = 0; k < spec.count; ++k) {
    // Orthonormal plane (u, v) for this image.
    std::vector<double> u(dim), v(dim);
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    double nu = 0.0;
    for (double x : u) nu += x * x;
    nu = std::sqrt(nu);
    for (auto& x : u) x /= nu;
    double proj = 0.0;
    for (std::size_t i = 0; i < dim; ++i) proj += u[i] * v[i];
    for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * u[i];
    double nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
    for (auto& x : v) x /= nv;
    auto direction = [&](double deg) {
      const double t = deg * std::numbers::pi / 180.0;
      std::vector<double> d(dim);
      for (std::size_t i = 0; i < dim; ++i) d[i] = std::cos(t) * u[i] + std::sin(t) * v[i];
      return d;
    };

    // Label 0 = background, 1 = object, 2 = distractor, 3 = bridge.
    std::vector<int> labels(grid.size(), 0);
    std::vector<std::vector<double>> dirs;
    Rect object{};
    if (spec.layout == Layout::Single) {
      object.h = rng.uniform_int(spec.object_min, spec.object_max);
      object.w = rng.uniform_int(spec.object_min, spec.object_max);
      object.row = rng.uniform_int(0, spec.grid_h - object.h);
      object.col = rng.uniform_int(0, spec.grid_w - object.w);
      fill(labels, grid, object, 1);
      dirs = {direction(spec.separation_deg), direction(0.0)};
    } else {
      // Object (0 deg), bridge (50), distractor (100), background (230): the
      // bridge is positively correlated with both ends, object and distractor
      // are mildly anti-correlated, the background opposes all three.
      const int h = spec.grid_h, w = spec.grid_w;
      object.h = std::max(3, 3 * h / 8);
      object.w = std::max(3, 3 * w / 8);
      object.row = h / 2;
      object.col = w / 2 - object.w / 2;
      const Rect distractor{1, w / 2 - std::max(1, object.w / 2) / 2, std::max(1, object.h / 2), std::max(1, object.w / 2)};
      const Rect bridge{distractor.row + distractor.h, w / 2, object.row - (distractor.row + distractor.h), 1};
      fill(labels, grid, object, 1);
      fill(labels, grid, distractor, 2);
      fill(labels, grid, bridge, 3);
      dirs = {direction(230.0), direction(0.0), direction(100.0), direction(50.0)};
    }

    char id[128];
    std::snprintf(id, sizeof id, "%s_%03d", spec.prefix.c_str(), k);
    Scene scene;
    scene.manifest = io::Manifest{id,          spec.grid_w * spec.patch_size,
                                  spec.grid_h * spec.patch_size,
                                  spec.patch_size,
                                  spec.grid_h,
                                  spec.grid_w,
                                  spec.layers,
                                  spec.dim,
                                  std::string(id) + ".npy"};
    scene.features = io::FeatureStack(spec.layers, static_cast<int>(grid.size()), spec.dim);
    for (int l = 0; l < spec.layers; ++l) {
      for (std::size_t p = 0; p < grid.size(); ++p) {
        const auto& d = dirs[static_cast<std::size_t>(labels[p])];
        for (std::size_t i = 0; i < dim; ++i) {
          const double noise = spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0;
          scene.features.at(l, static_cast<int>(p), static_cast<int>(i)) = static_cast<float>(d[i] + noise);
        }
      }
    }
    scene.planted = heads::ObjectMask{grid, std::vector<std::uint8_t>(grid.size(), 0)};
    for (std::size_t p = 0; p < grid.size(); ++p) scene.planted.bits[p] = labels[p] == 1;
    const double ps = spec.patch_size;
    scene.truth = io::GroundTruth{id, scene.manifest.image_width, scene.manifest.image_height,
                                  {Box{object.col * ps, object.row * ps, (object.col + object.w) * ps,
                                       (object.row + object.h) * ps}}};
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

void write_scenes(const std::filesystem::path& dir, const std::vector<Scene>& scenes) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<io::GroundTruth> truth;
  for (const auto& s : scenes) {
    io::write_npy(dir / s.manifest.feature_file, s.features);
    io::write_manifest(dir / (s.manifest.image_id + ".manifest.json"), s.manifest);
    truth.push_back(s.truth);
  }
  io::write_ground_truth(dir / "gt.jsonl", truth);
}

}  // namespace formula::synth
