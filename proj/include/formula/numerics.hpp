#pragma once

#include <Eigen/Core>

#include "formula/types.hpp"

namespace formula::numerics {

/// S_ij = <f_i, f_j> / (|f_i| |f_j|), with S_ii = 1 exactly.
/// Throws ZeroNormRow if any row is identically zero.
SymMatrix cosine_similarity_matrix(const FeatureMatrix& features);

enum class EigenMethod {
  Auto,     // dense for order <= dense_limit, Lanczos above
  Dense,    // tridiagonalization + implicit QR on the normalized Laplacian
  Lanczos,  // Lanczos with full reorthogonalization
};

struct EigenOptions {
  EigenMethod method = EigenMethod::Auto;
  int dense_limit = 512;
  double tolerance = 1e-10;  // on the Ritz residual of the normalized problem
  int max_iterations = 0;    // Lanczos steps; 0 means 10 * order
};

struct EigenResult {
  double eigenvalue = 0.0;
  Eigen::VectorXd eigenvector;  // v' D v = 1, largest |entry| positive
  double next_eigenvalue = 0.0; // third-smallest, for gap reporting
  bool degenerate = false;      // |next - eigenvalue| below 1e-9
  int iterations = 0;           // Lanczos steps (0 for the dense path)
};

/// Second-smallest eigenpair of (D - W) v = lambda D v with D = diag(row sums of W).
///
/// The problem is reduced to the normalized Laplacian I - D^{-1/2} W D^{-1/2}.
/// Its smallest eigenvector D^{1/2} 1 is known in closed form and is deflated
/// explicitly, so disconnected graphs (lambda_2 = 0) still yield the vector
/// orthogonal to the constant one rather than an arbitrary null-space mix.
///
/// Throws SingularDegree when a row sum is not strictly positive and
/// NoConvergence when the Lanczos budget runs out.
EigenResult second_smallest_generalized_eigpair(const SymMatrix& weights, const EigenOptions& options = {});

/// Flips v so its entry of largest magnitude is positive. Entries within a
/// relative 1e-9 of the largest magnitude count as tied; the lowest index wins.
void canonicalize_sign(Eigen::VectorXd& v);

/// max_i |((D - W) v - lambda D v)_i|
double generalized_residual(const SymMatrix& weights, const Eigen::VectorXd& v, double lambda);

}  // namespace formula::numerics
