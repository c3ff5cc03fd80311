#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "formula/feature_io.hpp"
#include "formula/numerics.hpp"
#include "formula/types.hpp"

namespace formula::heads {

enum class Head { Lost, TokenCut };

std::string_view to_string(Head head);
Head head_from_string(std::string_view name);  // "lost" | "tokencut"

enum class MapKind { InverseDegree, FiedlerVector };

/// Scalar map over the patch grid, row-major.
struct IntermediateMap {
  GridShape grid;
  std::vector<double> values;
  MapKind kind = MapKind::InverseDegree;

  IntermediateMap scaled(double c) const;
};

struct ObjectMask {
  GridShape grid;
  std::vector<std::uint8_t> bits;

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool contains(std::size_t index) const { return bits[index] != 0; }

  static ObjectMask full(GridShape grid);

  friend bool operator==(const ObjectMask&, const ObjectMask&) = default;
};

struct HeadParams {
  int expansion_budget = 100;         // LOST: patches considered for expansion
  double tokencut_threshold = 0.2;    // TokenCut: edge weight 1 at or above this cosine similarity
  double tokencut_epsilon = 1e-5;     // TokenCut: edge weight below the threshold
  numerics::EigenOptions eigen;
};

/// Per-image graph state. Built once from the features; guidance iterations
/// only touch the intermediate map.
struct HeadContext {
  Head head = Head::Lost;
  GridShape grid;
  SymMatrix similarity;                   // cosine similarity between patches
  std::vector<std::uint8_t> adjacency;    // row-major N x N, 1 iff similarity >= 0
  int expansion_budget = 100;
  numerics::EigenResult eigen;            // TokenCut only

  bool adjacent(std::size_t i, std::size_t j) const { return adjacency[i * grid.size() + j] != 0; }
};

struct HeadOutput {
  IntermediateMap map;
  HeadContext context;
};

/// Inverse-degree map (LOST) or second generalized eigenvector of the
/// thresholded similarity graph (TokenCut), reshaped to the grid.
HeadOutput build_intermediate_map(const FeatureMatrix& features, GridShape grid, Head head,
                                  const HeadParams& params = {});

/// The detector applied to a (possibly reweighted) map. Throws EmptyForeground
/// when the map carries no signal (all entries zero).
ObjectMask extract_mask(const IntermediateMap& map, const HeadContext& context);

/// Tight patch rectangle scaled by the patch size and clamped to the image.
Box mask_to_box(const ObjectMask& mask, const io::Manifest& manifest);

/// Whether extract_mask(c * map) == extract_mask(map) bitwise.
bool uniform_scale_invariance_check(const IntermediateMap& map, double c, const HeadContext& context);

/// 4-connected component of `region` containing `seed`.
ObjectMask connected_component(const std::vector<std::uint8_t>& region, GridShape grid, std::size_t seed);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(const std::vector<double>& values);

}  // namespace formula::heads
