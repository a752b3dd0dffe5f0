#pragma once

// Independent oracles and random instances shared by the test files. Nothing
// here calls the analytic derivative code under test.

#include "lazysgld/lazysgld.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace lazysgld::testing {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  }
  return m;
}

inline Vector random_vector(Index n, Rng& rng, double scale = 1.0) {
  return random_matrix(n, 1, rng, scale).col(0);
}

inline Dataset random_dataset(Index n, Index d, Rng& rng) {
  return {random_matrix(n, d, rng), random_vector(n, rng, 2.0)};
}

/// h(ω; x_i) by explicit loops over units, for the shallow net.
inline Vector shallow_forward_loops(const Vector& c, const ParamVector& w, const Matrix& x) {
  const Index m = c.size();
  const Index d = x.cols();
  Vector out = Vector::Zero(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < m; ++j) {
      double z = 0.0;
      for (Index k = 0; k < d; ++k) z += w(j * d + k) * x(i, k);
      out(i) += c(j) * std::tanh(z) / std::sqrt(static_cast<double>(m));
    }
  }
  return out;
}

/// Central differences of `predict`, column by column.
inline Matrix fd_jacobian(const Predictor& model, const ParamVector& w, const Matrix& x,
                          double step = 1e-5) {
  Matrix j(x.rows(), w.size());
  for (Index k = 0; k < w.size(); ++k) {
    ParamVector up = w, down = w;
    up(k) += step;
    down(k) -= step;
    j.col(k) = (model.predict(up, x) - model.predict(down, x)) / (2.0 * step);
  }
  return j;
}

/// R(α h(ω)) with the risk written out as a loop.
inline double parameter_risk_loops(const Predictor& model, const ParamVector& w,
                                   const Dataset& data, double alpha) {
  const Vector h = model.predict(w, data.inputs);
  double s = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const double r = data.targets(i) - alpha * h(i);
    s += r * r;
  }
  return s / static_cast<double>(data.size());
}

/// Second central differences of the parameter risk.
inline Matrix fd_risk_hessian(const Predictor& model, const ParamVector& w, const Dataset& data,
                              double alpha, double step = 1e-4) {
  const Index p = w.size();
  Matrix h(p, p);
  for (Index a = 0; a < p; ++a) {
    for (Index b = a; b < p; ++b) {
      auto eval = [&](double sa, double sb) {
        ParamVector v = w;
        v(a) += sa;
        v(b) += sb;
        return parameter_risk_loops(model, v, data, alpha);
      };
      const double val = (eval(step, step) - eval(step, -step) - eval(-step, step) +
                          eval(-step, -step)) /
                         (4.0 * step * step);
      h(a, b) = h(b, a) = val;
    }
  }
  return h;
}

/// Number of eigenvalues of a symmetric matrix below σ, by Gaussian
/// elimination without pivoting on A − σI (Sylvester's law of inertia).
inline Index negative_pivots(Matrix a, double sigma) {
  const Index n = a.rows();
  for (Index i = 0; i < n; ++i) a(i, i) -= sigma;
  Index neg = 0;
  for (Index k = 0; k < n; ++k) {
    double piv = a(k, k);
    if (piv == 0.0) piv = 1e-300;
    if (piv < 0.0) ++neg;
    for (Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / piv;
      for (Index j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return neg;
}

/// Smallest eigenvalue by bisection on the inertia count.
inline double bisection_min_eigenvalue(const Matrix& a) {
  double lo = -1.0, hi = 1.0;
  const double bound = a.cwiseAbs().rowwise().sum().maxCoeff();
  lo = -bound - 1.0;
  hi = bound + 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (negative_pivots(a, mid) >= 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Σ_α by its definition: average outer product of centered per-sample
/// gradients g_i = ℓ'(α h_i, y_i) ∇h_i, with ∇h_i from finite differences.
inline Matrix covariance_oracle(const Predictor& model, const ParamVector& w, const Dataset& data,
                                double alpha) {
  const Matrix j = fd_jacobian(model, w, data.inputs, 1e-6);
  const Vector h = model.predict(w, data.inputs);
  const Index n = data.size();
  Matrix g(n, w.size());
  for (Index i = 0; i < n; ++i) g.row(i) = 2.0 * (alpha * h(i) - data.targets(i)) * j.row(i);
  const RowVector mean = g.colwise().mean();
  Matrix cov = Matrix::Zero(w.size(), w.size());
  for (Index i = 0; i < n; ++i) {
    const RowVector c = g.row(i) - mean;
    cov += c.transpose() * c;
  }
  return cov / static_cast<double>(n);
}

struct ShallowInstance {
  std::shared_ptr<ShallowTanhNet> net;
  ParamVector w;
  Dataset data;
};

inline ShallowInstance random_shallow(Index m, Index d, Index n, Rng& rng) {
  ShallowInstance s;
  s.net = std::make_shared<ShallowTanhNet>(d, random_vector(m, rng));
  s.w = random_vector(m * d, rng);
  s.data = random_dataset(n, d, rng);
  return s;
}

}  // namespace lazysgld::testing
