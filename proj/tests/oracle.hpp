#pragma once
// Test-only reference implementations. Deliberately naive: no Eigen solvers,
// no shared code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// Cyclic Jacobi rotations on a symmetric matrix. Returns eigenvalues in
/// ascending order and eigenvectors as columns of `vecs`, matching order.
inline void jacobi_eigen(Matrix a, std::vector<double>& vals, Matrix& vecs) {
  const std::size_t n = a.size();
  vecs.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) vecs[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vecs[k][p], vkq = vecs[k][q];
          vecs[k][p] = c * vkp - s * vkq;
          vecs[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] < a[y][y]; });
  vals.resize(n);
  Matrix sorted(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    vals[j] = a[order[j]][order[j]];
    for (std::size_t i = 0; i < n; ++i) sorted[i][j] = vecs[i][order[j]];
  }
  vecs = std::move(sorted);
}

struct Pair {
  double lambda = 0.0;
  std::vector<double> v;  // D-normalized, largest |entry| positive
  double gap = 0.0;       // lambda_3 - lambda_2
};

/// Second-smallest eigenpair of (D - W) v = lambda D v via the symmetric form
/// D^{-1/2} (D - W) D^{-1/2}.
inline Pair generalized_second(const Matrix& w) {
  const std::size_t n = w.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i] += w[i][j];
  Matrix l(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      l[i][j] = ((i == j ? d[i] : 0.0) - w[i][j]) / std::sqrt(d[i] * d[j]);
  std::vector<double> vals;
  Matrix vecs;
  jacobi_eigen(l, vals, vecs);
  Pair out;
  out.lambda = vals[1];
  out.gap = n > 2 ? vals[2] - vals[1] : 1.0;
  out.v.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.v[i] = vecs[i][1] / std::sqrt(d[i]);
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) norm += d[i] * out.v[i] * out.v[i];
  norm = std::sqrt(norm);
  std::size_t peak = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.v[i] /= norm;
    if (std::abs(out.v[i]) > std::abs(out.v[peak]) * (1.0 + 1e-9)) peak = i;
  }
  if (out.v[peak] < 0)
    for (double& x : out.v) x = -x;
  return out;
}

/// Random symmetric nonnegative matrix with a strictly positive diagonal.
inline Matrix random_weights(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix w(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double x = u(rng);
      w[i][j] = w[j][i] = x;
    }
    w[i][i] += 0.1;
  }
  return w;
}

inline double iou(double ax0, double ay0, double ax1, double ay1, double bx0, double by0, double bx1, double by1) {
  const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = iw * ih;
  return inter / ((ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter);
}

}  // namespace oracle
