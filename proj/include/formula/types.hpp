#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace formula {

/// Patch grid dimensions (rows = grid_h, cols = grid_w).
struct GridShape {
  int rows = 0;
  int cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  int row_of(std::size_t index) const { return static_cast<int>(index / static_cast<std::size_t>(cols)); }
  int col_of(std::size_t index) const { return static_cast<int>(index % static_cast<std::size_t>(cols)); }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(col);
  }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Axis-aligned pixel box; xmax/ymax are exclusive-style, width = xmax - xmin.
struct Box {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Object center in patch-grid units: x is the column, y the row.
struct Center {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Center&, const Center&) = default;
};

/// N x D patch features, one row per patch in row-major grid order.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense symmetric matrix over patches.
using SymMatrix = Eigen::MatrixXd;

}  // namespace formula
