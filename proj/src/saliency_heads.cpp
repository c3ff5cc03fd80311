#include "formula/saliency_heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "formula/error.hpp"

namespace formula::heads {

std::string_view to_string(Head head) {
  switch (head) {
    case Head::Lost: return "lost";
    case Head::TokenCut: return "tokencut";
  }
  return "unknown";
}

Head head_from_string(std::string_view name) {
  if (name == "lost") return Head::Lost;
  if (name == "tokencut") return Head::TokenCut;
  throw Error(ErrorCode::InvalidConfig, "unknown head '" + std::string(name) + "' (expected lost or tokencut)");
}

IntermediateMap IntermediateMap::scaled(double c) const {
  IntermediateMap out = *this;
  for (double& v : out.values) v *= c;
  return out;
}

std::size_t ObjectMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

ObjectMask ObjectMask::full(GridShape grid) { return {grid, std::vector<std::uint8_t>(grid.size(), 1)}; }

std::size_t argmax(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ObjectMask connected_component(const std::vector<std::uint8_t>& region, GridShape grid, std::size_t seed) {
  ObjectMask mask{grid, std::vector<std::uint8_t>(grid.size(), 0)};
  if (seed >= grid.size() || !region[seed]) return mask;
  std::vector<std::size_t> stack{seed};
  mask.bits[seed] = 1;
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    const int r = grid.row_of(cur);
    const int c = grid.col_of(cur);
    constexpr int dr[4] = {-1, 1, 0, 0};
    constexpr int dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int nr = r + dr[k];
      const int nc = c + dc[k];
      if (nr < 0 || nc < 0 || nr >= grid.rows || nc >= grid.cols) continue;
      const std::size_t next = grid.index(nr, nc);
      if (region[next] && !mask.bits[next]) {
        mask.bits[next] = 1;
        stack.push_back(next);
      }
    }
  }
  return mask;
}

HeadOutput build_intermediate_map(const FeatureMatrix& features, GridShape grid, Head head, const HeadParams& params) {
  const std::size_t n = grid.size();
  if (static_cast<std::size_t>(features.rows()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "feature rows " + std::to_string(features.rows()) + " != grid " +
                                              std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
  }
  if (params.expansion_budget < 1) throw Error(ErrorCode::InvalidConfig, "expansion budget must be >= 1");

  HeadOutput out;
  HeadContext& ctx = out.context;
  ctx.head = head;
  ctx.grid = grid;
  ctx.expansion_budget = params.expansion_budget;
  ctx.similarity = numerics::cosine_similarity_matrix(features);
  ctx.adjacency.assign(n * n, 0);
  // similarity is symmetric, so row i of the adjacency is read from column i.
  for (std::size_t i = 0; i < n; ++i) {
    const double* col = ctx.similarity.col(static_cast<Eigen::Index>(i)).data();
    for (std::size_t j = 0; j < n; ++j) ctx.adjacency[i * n + j] = col[j] >= 0.0;
  }

  out.map.grid = grid;
  out.map.values.resize(n);
  if (head == Head::Lost) {
    out.map.kind = MapKind::InverseDegree;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = std::span<const std::uint8_t>(ctx.adjacency).subspan(i * n, n);
      const auto degree = std::count(row.begin(), row.end(), std::uint8_t{1});
      out.map.values[i] = 1.0 / static_cast<double>(degree);
    }
  } else {
    out.map.kind = MapKind::FiedlerVector;
    const double thr = params.tokencut_threshold;
    const double eps = params.tokencut_epsilon;
    const SymMatrix weights = ctx.similarity.unaryExpr([thr, eps](double s) { return s >= thr ? 1.0 : eps; });
    ctx.eigen = numerics::second_smallest_generalized_eigpair(weights, params.eigen);
    for (std::size_t i = 0; i < n; ++i) out.map.values[i] = ctx.eigen.eigenvector[static_cast<Eigen::Index>(i)];
  }
  return out;
}

namespace {

void check_map(const IntermediateMap& map, const HeadContext& ctx) {
  if (!(map.grid == ctx.grid) || map.values.size() != ctx.grid.size()) {
    throw Error(ErrorCode::GridMismatch, "intermediate map and head context cover different grids");
  }
  bool any_signal = false;
  for (double v : map.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::EmptyForeground, "intermediate map has non-finite entries");
    any_signal = any_signal || v != 0.0;
  }
  if (!any_signal) throw Error(ErrorCode::EmptyForeground, "intermediate map is identically zero");
}

ObjectMask lost_mask(const IntermediateMap& map, const HeadContext& ctx) {
  const std::size_t n = ctx.grid.size();
  const std::size_t seed = argmax(map.values);

  // Potentials: the top-k patches by map value (stable on ties), then keep
  // those positively connected to the seed.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return map.values[a] > map.values[b]; });
  const std::size_t budget = std::min(n, static_cast<std::size_t>(ctx.expansion_budget));
  std::vector<std::size_t> expansion;
  for (std::size_t k = 0; k < budget; ++k) {
    if (ctx.adjacent(seed, order[k])) expansion.push_back(order[k]);
  }

  Eigen::VectorXd score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t j : expansion) score += ctx.similarity.col(static_cast<Eigen::Index>(j));
  std::vector<std::uint8_t> region(n, 0);
  for (std::size_t i = 0; i < n; ++i) region[i] = score[static_cast<Eigen::Index>(i)] > 0.0;
  return connected_component(region, ctx.grid, seed);
}

ObjectMask tokencut_mask(const IntermediateMap& map, const HeadContext& ctx) {
  const std::size_t n = map.values.size();
  const double mean = std::accumulate(map.values.begin(), map.values.end(), 0.0) / static_cast<double>(n);
  std::size_t peak = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(map.values[i]) > std::abs(map.values[peak])) peak = i;
  }
  const bool foreground_side = map.values[peak] > mean;
  std::vector<std::uint8_t> region(n);
  for (std::size_t i = 0; i < n; ++i) region[i] = (map.values[i] > mean) == foreground_side;
  return connected_component(region, ctx.grid, peak);
}

}  // namespace

ObjectMask extract_mask(const IntermediateMap& map, const HeadContext& ctx) {
  check_map(map, ctx);
  ObjectMask mask = ctx.head == Head::Lost ? lost_mask(map, ctx) : tokencut_mask(map, ctx);
  if (mask.empty()) throw Error(ErrorCode::EmptyForeground, "no patch survived mask extraction");
  return mask;
}

Box mask_to_box(const ObjectMask& mask, const io::Manifest& manifest) {
  if (!(mask.grid == manifest.grid())) throw Error(ErrorCode::GridMismatch, "mask grid differs from manifest grid");
  int rmin = mask.grid.rows, rmax = -1, cmin = mask.grid.cols, cmax = -1;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (!mask.bits[i]) continue;
    const int r = mask.grid.row_of(i);
    const int c = mask.grid.col_of(i);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  if (rmax < 0) throw Error(ErrorCode::EmptyMask, "cannot box an empty mask");
  const double p = manifest.patch_size;
  return {std::min(cmin * p, static_cast<double>(manifest.image_width)),
          std::min(rmin * p, static_cast<double>(manifest.image_height)),
          std::min((cmax + 1) * p, static_cast<double>(manifest.image_width)),
          std::min((rmax + 1) * p, static_cast<double>(manifest.image_height))};
}

bool uniform_scale_invariance_check(const IntermediateMap& map, double c, const HeadContext& ctx) {
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidConfig, "scale factor must be positive");
  return extract_mask(map.scaled(c), ctx) == extract_mask(map, ctx);
}

}  // namespace formula::heads
