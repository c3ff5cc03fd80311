#include "formula/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "formula/error.hpp"

namespace formula::numerics {

namespace {

constexpr double kDegeneracyGap = 1e-9;

// splitmix64; a fixed seed keeps the Lanczos start vector identical across runs.
std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::VectorXd degrees_of(const SymMatrix& w) {
  if (w.rows() != w.cols()) throw Error(ErrorCode::ShapeMismatch, "weight matrix must be square");
  Eigen::VectorXd d = w.rowwise().sum();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0) || !std::isfinite(d[i])) {
      throw Error(ErrorCode::SingularDegree, "degree of node " + std::to_string(i) + " is " + std::to_string(d[i]));
    }
  }
  return d;
}

struct NormalizedPair {
  double eigenvalue;
  double next_eigenvalue;
  Eigen::VectorXd vector;  // unit eigenvector of the normalized Laplacian
  int iterations;
};

NormalizedPair solve_dense(const SymMatrix& w, const Eigen::VectorXd& inv_sqrt_d, const Eigen::VectorXd& trivial) {
  const Eigen::Index n = w.rows();
  // Shift the known trivial eigenvalue (0) to 3, above the spectrum bound of 2.
  Eigen::MatrixXd lap(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const double m = inv_sqrt_d[i] * w(i, j) * inv_sqrt_d[j];
      lap(i, j) = (i == j ? 1.0 : 0.0) - m + 3.0 * trivial[i] * trivial[j];
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "dense eigensolver failed");
  const double next = n > 2 ? solver.eigenvalues()[1] : std::numeric_limits<double>::infinity();
  return {solver.eigenvalues()[0], next, solver.eigenvectors().col(0), 0};
}

NormalizedPair solve_lanczos(const SymMatrix& w, const Eigen::VectorXd& inv_sqrt_d, const Eigen::VectorXd& trivial,
                             const EigenOptions& options) {
  const Eigen::Index n = w.rows();
  // Largest eigenvalue of M = D^{-1/2} W D^{-1/2} on the complement of the
  // trivial eigenvector; the Laplacian eigenvalue is 1 - theta.
  auto apply = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = inv_sqrt_d.cwiseProduct(w * inv_sqrt_d.cwiseProduct(x));
    y -= trivial * trivial.dot(y);
    return y;
  };

  const long budget = options.max_iterations > 0 ? options.max_iterations : 10L * static_cast<long>(n);
  const long krylov_limit = std::min<long>(budget, static_cast<long>(n) - 1);

  std::vector<Eigen::VectorXd> basis;
  std::vector<double> alpha;
  std::vector<double> beta;

  Eigen::VectorXd q(n);
  std::uint64_t state = 0x5eed5eedULL;
  for (Eigen::Index i = 0; i < n; ++i) {
    q[i] = 0.5 + static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
  }
  q -= trivial * trivial.dot(q);
  q.normalize();
  basis.push_back(q);

  Eigen::VectorXd ritz;
  double theta_next = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int steps = 0;

  while (steps < krylov_limit) {
    const Eigen::VectorXd& qj = basis.back();
    Eigen::VectorXd r = apply(qj);
    const double a = qj.dot(r);
    r -= a * qj;
    if (!beta.empty()) r -= beta.back() * basis[basis.size() - 2];
    // Full reorthogonalization, twice, against the basis and the trivial vector.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& qk : basis) r -= qk * qk.dot(r);
      r -= trivial * trivial.dot(r);
    }
    alpha.push_back(a);
    ++steps;
    const double b = r.norm();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    Eigen::VectorXd sub = beta.empty() ? Eigen::VectorXd()
                                       : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
                                             beta.data(), static_cast<Eigen::Index>(beta.size())));
    tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    const Eigen::Index top = static_cast<Eigen::Index>(alpha.size()) - 1;

    theta_next = top > 0 ? tri.eigenvalues()[top - 1] : -std::numeric_limits<double>::infinity();
    ritz = tri.eigenvectors().col(top);

    const double residual = std::abs(b * ritz[top]);
    if (residual <= options.tolerance || b <= 1e-14 || steps == n - 1) {
      converged = true;
      break;
    }
    beta.push_back(b);
    basis.push_back(r / b);
  }

  if (n == 2) converged = true;  // the complement is one-dimensional
  if (!converged) {
    throw Error(ErrorCode::NoConvergence, "Lanczos did not converge within " + std::to_string(steps) + " steps");
  }

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < ritz.size(); ++k) u += ritz[k] * basis[static_cast<std::size_t>(k)];
  u -= trivial * trivial.dot(u);
  u.normalize();
  const double rayleigh = u.dot(apply(u));
  return {1.0 - rayleigh, 1.0 - theta_next, u, steps};
}

}  // namespace

SymMatrix cosine_similarity_matrix(const FeatureMatrix& features) {
  const Eigen::Index n = features.rows();
  FeatureMatrix normalized = features;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = normalized.row(i).norm();
    if (!(norm > 0.0)) throw Error(ErrorCode::ZeroNormRow, "patch feature " + std::to_string(i) + " has zero norm");
    normalized.row(i) /= norm;
  }
  SymMatrix s = SymMatrix::Zero(n, n);
  s.selfadjointView<Eigen::Lower>().rankUpdate(normalized);
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  s.diagonal().setOnes();
  return s;
}

void canonicalize_sign(Eigen::VectorXd& v) {
  if (v.size() == 0) return;
  const double peak = v.cwiseAbs().maxCoeff();
  if (peak == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= peak * (1.0 - 1e-9)) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

double generalized_residual(const SymMatrix& weights, const Eigen::VectorXd& v, double lambda) {
  const Eigen::VectorXd d = weights.rowwise().sum();
  const Eigen::VectorXd r = d.cwiseProduct(v) - weights * v - lambda * d.cwiseProduct(v);
  return r.cwiseAbs().maxCoeff();
}

EigenResult second_smallest_generalized_eigpair(const SymMatrix& weights, const EigenOptions& options) {
  const Eigen::VectorXd d = degrees_of(weights);
  const Eigen::Index n = d.size();
  if (n == 0) throw Error(ErrorCode::ShapeMismatch, "empty weight matrix");

  EigenResult result;
  if (n == 1) {
    // No second eigenpair exists; report the trivial one so single-patch grids
    // still produce a (constant) map.
    result.eigenvalue = 0.0;
    result.eigenvector = Eigen::VectorXd::Constant(1, 1.0 / std::sqrt(d[0]));
    result.next_eigenvalue = std::numeric_limits<double>::infinity();
    result.degenerate = true;
    return result;
  }

  const Eigen::VectorXd inv_sqrt_d = d.cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd trivial = d.cwiseSqrt().normalized();

  const bool dense = options.method == EigenMethod::Dense ||
                     (options.method == EigenMethod::Auto && n <= static_cast<Eigen::Index>(options.dense_limit));
  NormalizedPair pair = dense ? solve_dense(weights, inv_sqrt_d, trivial) : solve_lanczos(weights, inv_sqrt_d, trivial, options);

  result.eigenvalue = pair.eigenvalue;
  result.next_eigenvalue = pair.next_eigenvalue;
  result.degenerate = std::abs(pair.next_eigenvalue - pair.eigenvalue) < kDegeneracyGap;
  result.iterations = pair.iterations;
  result.eigenvector = inv_sqrt_d.cwiseProduct(pair.vector);
  canonicalize_sign(result.eigenvector);
  return result;
}

}  // namespace formula::numerics
