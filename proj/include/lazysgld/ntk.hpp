#pragma once

// Empirical NTK Gram matrices and their smallest eigenvalue.
//
// The Gram is the n×n matrix Dh Dhᵀ; λ² denotes its smallest eigenvalue and
// λ = √λ² is what enters the lazy radius r = λ / Lip(Dh).

#include "lazysgld/core.hpp"
#include "lazysgld/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace lazysgld {

struct NtkGram {
  Matrix matrix;
  Index size() const { return matrix.rows(); }
};

inline NtkGram gram(const Matrix& jacobian) {
  require_dims(jacobian.rows() >= 1 && jacobian.cols() >= 1, "gram: empty Jacobian");
  Matrix g = jacobian * jacobian.transpose();
  return {0.5 * (g + g.transpose())};
}

inline NtkGram gram(const LocalModel& local) {
  Matrix g = local.gram();
  return {0.5 * (g + g.transpose())};
}

struct EigenOptions {
  /// Above this size the smallest eigenvalue comes from shifted inverse
  /// iteration instead of a full dense decomposition.
  Index dense_limit = 2000;
  double symmetry_tol = 1e-10;
  double tolerance = 1e-12;
  int max_iterations = 500;
};

namespace detail {

inline void check_symmetric(const Matrix& a, double tol) {
  require_dims(a.rows() == a.cols() && a.rows() > 0, "min_eigenvalue: matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol * scale) {
    throw SymmetryError("min_eigenvalue: asymmetry " + std::to_string(asym));
  }
}

// Number of eigenvalues of A below σ (Sylvester inertia of the LDLᵀ pivots).
inline Index count_below(const Matrix& a, double sigma) {
  const Eigen::LDLT<Matrix> ldlt(a - sigma * Matrix::Identity(a.rows(), a.cols()));
  return (ldlt.vectorD().array() < 0.0).count();
}

// Brackets λ_min by inertia bisection between the Gershgorin lower bound and a
// Rayleigh quotient, then polishes with shifted inverse iteration from below.
inline double inverse_iteration_min(const Matrix& a, const EigenOptions& opt) {
  const Index n = a.rows();
  const Eigen::ArrayXd radii =
      a.cwiseAbs().rowwise().sum().array() - a.diagonal().cwiseAbs().array();
  double lo = (a.diagonal().array() - radii).minCoeff();
  double hi = a.diagonal().minCoeff();
  for (int it = 0; it < 40 && hi - lo > 1e-9 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count_below(a, mid) == 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double shift = lo - 1e-9 * std::max(1.0, std::abs(lo));
  const Eigen::LDLT<Matrix> ldlt(a - shift * Matrix::Identity(n, n));
  Vector v = Vector::Ones(n).normalized();
  double rayleigh = v.dot(a * v);
  for (int it = 0; it < opt.max_iterations; ++it) {
    Vector next = ldlt.solve(v);
    next.normalize();
    const double q = next.dot(a * next);
    const bool converged = std::abs(q - rayleigh) <= opt.tolerance * std::max(1.0, std::abs(q));
    v = next;
    rayleigh = q;
    if (converged) break;
  }
  return rayleigh;
}

}  // namespace detail

inline double min_eigenvalue(const Matrix& symmetric, const EigenOptions& opt = {}) {
  detail::check_symmetric(symmetric, opt.symmetry_tol);
  if (symmetric.rows() <= opt.dense_limit) {
    const Matrix sym = 0.5 * (symmetric + symmetric.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(0);
  }
  return detail::inverse_iteration_min(symmetric, opt);
}

inline double min_eigenvalue(const NtkGram& g, const EigenOptions& opt = {}) {
  return min_eigenvalue(g.matrix, opt);
}

inline double max_eigenvalue(const Matrix& symmetric) {
  detail::check_symmetric(symmetric, 1e-10);
  const Matrix sym = 0.5 * (symmetric + symmetric.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(sym.rows() - 1);
}

struct LazyRadius {
  double r;
  double lambda;
  double lip_dh;
};

inline LazyRadius lazy_radius(double lambda, double lip_dh) {
  if (!(lambda > 0.0) || !(lip_dh > 0.0)) {
    throw std::invalid_argument("lazy_radius: lambda and Lip(Dh) must be positive");
  }
  return {lambda / lip_dh, lambda, lip_dh};
}

/// G^(k) for the deep net: layer k in 1..H, or H+1 for the output vector.
inline NtkGram layerwise_gram(const DeepNet& net, const ParamVector& w, const Matrix& inputs,
                              Index k) {
  if (k < 1 || k > net.depth() + 1) {
    throw std::out_of_range("layerwise_gram: layer " + std::to_string(k) + " out of range");
  }
  Matrix g = net.local(w, inputs)->layer_gram(k);
  return {0.5 * (g + g.transpose())};
}

}  // namespace lazysgld
