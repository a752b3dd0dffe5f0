#pragma once

// Checks of the standing assumptions on concrete instances: the loss
// constants, positivity of the NTK at initialization, the Lipschitz modulus
// of Dh for the shallow tanh net, and its curvature bound together with the
// step-size rule derived from it.

#include "lazysgld/activation.hpp"
#include "lazysgld/core.hpp"
#include "lazysgld/loss.hpp"
#include "lazysgld/model.hpp"
#include "lazysgld/ntk.hpp"

#include <json.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace lazysgld {

struct AssumptionEntry {
  std::string id;
  std::string description;
  double bound = 0.0;
  double witness = 0.0;
  bool holds = false;
  nlohmann::json details = nlohmann::json::object();
};

struct AssumptionReport {
  std::vector<AssumptionEntry> entries;

  bool all_hold() const {
    for (const auto& e : entries) {
      if (!e.holds) return false;
    }
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) {
      arr.push_back({{"id", e.id},
                     {"description", e.description},
                     {"bound", e.bound},
                     {"witness", e.witness},
                     {"holds", e.holds},
                     {"details", e.details}});
    }
    return arr;
  }
};

// ---------------------------------------------------------------------------
// Lipschitz modulus of Dh for h(ω; x) = Σ_j (c_j/√m) tanh(ω_jᵀx).

/// ‖Dh(ω) − Dh(ω')‖_F ≤ L ‖c‖_∞ √(λ_max(Σ_i ‖x_i‖² x_i x_iᵀ) / m) ‖ω − ω'‖ with
/// L = sup|tanh''|. Row i of block j changes by (c_j/√m)(σ'(a) − σ'(b)) x_i and
/// |σ'(a) − σ'(b)| ≤ L |(ω_j − ω'_j)ᵀ x_i|; summing the squares over i and j
/// gives the quadratic form above.
inline double lip_dh_shallow(const Vector& c, const Matrix& inputs) {
  require_dims(inputs.rows() > 0 && inputs.cols() > 0, "lip_dh_shallow: empty dataset");
  require_dims(c.size() > 0, "lip_dh_shallow: empty output weights");
  const double cmax = c.cwiseAbs().maxCoeff();
  if (cmax == 0.0) return 0.0;
  const Vector sq = inputs.rowwise().squaredNorm();
  const Matrix weighted = inputs.transpose() * sq.asDiagonal() * inputs;
  const double top = max_eigenvalue(0.5 * (weighted + weighted.transpose()));
  return kTanhSecondDerivativeBound * cmax *
         std::sqrt(std::max(top, 0.0) / static_cast<double>(c.size()));
}

/// Largest ‖Dh(ω₁) − Dh(ω₂)‖_F / ‖ω₁ − ω₂‖ over random pairs ω₂ = ω₁ + δ.
inline double sampled_lipschitz_quotient(const Predictor& model, const ParamVector& center,
                                         const Matrix& inputs, double spread, Index pairs,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index p = model.num_params();
  double best = 0.0;
  for (Index k = 0; k < pairs; ++k) {
    ParamVector a(p), delta(p);
    for (Index i = 0; i < p; ++i) a(i) = center(i) + spread * gauss(rng);
    for (Index i = 0; i < p; ++i) delta(i) = gauss(rng);
    // Step lengths spread over several decades so both the local and the
    // long-range quotient are probed.
    delta *= spread * std::pow(10.0, -3.0 * unit(rng)) / delta.norm();
    const Matrix ja = model.jacobian(a, inputs);
    const Matrix jb = model.jacobian(a + delta, inputs);
    best = std::max(best, (ja - jb).norm() / delta.norm());
  }
  return best;
}

// ---------------------------------------------------------------------------
// Curvature of ω ↦ R(α h(ω)) for the shallow net.

/// λ_max ∇²_ω R(α h) ≤ κ [α² ‖c‖₂² S/(mn) + (L α ‖c‖_∞/(n√m)) (α H + ‖y‖_∞) S]
/// with S = Σ_i ‖x_i‖², L = sup|tanh''|, κ = ℓ'' (2 for squared error; 1 gives
/// the bare expression) and H = sup|h| = ‖c‖₁/√m, doubled for the centered
/// model whose outputs are differences of two such sums.
inline double curvature_bound(double alpha, const Vector& c, const Dataset& data,
                              double loss_curvature = 1.0, bool centered = false) {
  if (!(alpha > 0.0)) throw std::invalid_argument("curvature_bound: alpha must be positive");
  check_dataset(data);
  const double m = static_cast<double>(c.size());
  const double n = static_cast<double>(data.size());
  const double s = data.inputs.squaredNorm();
  const double h_sup = (centered ? 2.0 : 1.0) * c.lpNorm<1>() / std::sqrt(m);
  const double y_inf = data.targets.lpNorm<Eigen::Infinity>();
  const double gauss_newton = alpha * alpha * c.squaredNorm() * s / (m * n);
  const double residual = kTanhSecondDerivativeBound * alpha * c.lpNorm<Eigen::Infinity>() /
                          (n * std::sqrt(m)) * (alpha * h_sup + y_inf) * s;
  return loss_curvature * (gauss_newton + residual);
}

struct EtaSelection {
  double admissible = kInfinity;  // α² / bound
  double requested = 0.0;
  bool unbounded = false;
  bool accepted = true;
};

/// Largest η_α with bound ≤ α²/η_α; a requested η_α above it is flagged.
inline EtaSelection select_eta(double alpha, double bound, double requested) {
  EtaSelection s;
  s.requested = requested;
  if (bound <= 0.0) {
    s.unbounded = true;
    return s;
  }
  s.admissible = alpha * alpha / bound;
  s.accepted = requested <= s.admissible;
  return s;
}

// ---------------------------------------------------------------------------
// Verifiers.

/// Randomized probes of (∇ℓ(a) − ∇ℓ(b))(a − b) = μ (a − b)² and
/// |∇ℓ(a) − ∇ℓ(b)| = Lip |a − b|, scalar and on R^n.
inline AssumptionEntry verify_loss_constants(const SquaredLoss& loss, Index probes = 10000,
                                             std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 3.0);
  double worst = 0.0;
  for (Index k = 0; k < probes; ++k) {
    const double y = gauss(rng);
    const double a = gauss(rng);
    const double b = gauss(rng);
    const double da = loss.derivative(a, y) - loss.derivative(b, y);
    const double diff = a - b;
    const double scale = std::max(1.0, diff * diff);
    worst = std::max(worst, std::abs(da * diff - SquaredLoss::mu_strong * diff * diff) / scale);
    worst = std::max(worst, std::abs(std::abs(da) - SquaredLoss::lip_grad * std::abs(diff)) /
                                std::max(1.0, std::abs(diff)));
  }
  for (Index k = 0; k < 100; ++k) {
    Vector y(8), a(8), b(8);
    for (Index i = 0; i < 8; ++i) {
      y(i) = gauss(rng);
      a(i) = gauss(rng);
      b(i) = gauss(rng);
    }
    Vector ga(8), gb(8);
    for (Index i = 0; i < 8; ++i) {
      ga(i) = loss.derivative(a(i), y(i));
      gb(i) = loss.derivative(b(i), y(i));
    }
    const Vector diff = a - b;
    const double scale = std::max(1.0, diff.squaredNorm());
    worst = std::max(worst, std::abs((ga - gb).dot(diff) - SquaredLoss::mu_strong * diff.squaredNorm()) /
                                scale);
    worst = std::max(worst, std::abs((ga - gb).norm() - SquaredLoss::lip_grad * diff.norm()) /
                                std::max(1.0, diff.norm()));
  }
  AssumptionEntry e;
  e.id = "loss_constants";
  e.description = "squared loss is 2-strongly convex with 2-Lipschitz derivative";
  e.bound = 1e-12;
  e.witness = worst;
  e.holds = worst <= 1e-12;
  e.details = {{"mu", SquaredLoss::mu_strong}, {"lip_grad", SquaredLoss::lip_grad},
               {"probes", probes}};
  return e;
}

inline AssumptionEntry verify_ntk_positive(const Predictor& model, const ParamVector& w0,
                                           const Matrix& inputs, double floor = 1e-12) {
  const double eig = min_eigenvalue(gram(*model.linearize(w0, inputs)));
  AssumptionEntry e;
  e.id = "ntk_positive";
  e.description = "NTK Gram at initialization is positive definite";
  e.bound = floor;
  e.witness = eig;
  e.holds = eig > floor;
  e.details = {{"lambda_sq", eig}, {"lambda", std::sqrt(std::max(eig, 0.0))}};
  return e;
}

inline AssumptionEntry verify_lipschitz_dh(const Predictor& model, const ParamVector& w0,
                                           const Matrix& inputs, double bound, double spread,
                                           Index pairs, std::uint64_t seed) {
  AssumptionEntry e;
  e.id = "lipschitz_dh";
  e.description = "sampled Lipschitz quotients of Dh stay below the analytic modulus";
  e.bound = bound;
  e.witness = sampled_lipschitz_quotient(model, w0, inputs, spread, pairs, seed);
  e.holds = e.witness <= bound;
  e.details = {{"pairs", pairs}, {"spread", spread}};
  return e;
}

/// Dense-Hessian λ_max at random points of B_r(ω₀) and on a shell just
/// outside it, against the closed-form bound. Exact domination is required.
inline AssumptionEntry verify_curvature(const Predictor& model, const ParamVector& w0,
                                        const Dataset& data, double alpha, double bound,
                                        double radius, Index points, std::uint64_t seed,
                                        Index cap = kDefaultDenseCap) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index p = model.num_params();
  const SquaredLoss loss;
  double worst = -kInfinity;
  for (Index k = 0; k < points; ++k) {
    ParamVector dir(p);
    for (Index i = 0; i < p; ++i) dir(i) = gauss(rng);
    const bool shell = k % 4 == 3;
    const double len = shell ? radius * (1.0 + 0.1 * unit(rng))
                             : radius * std::pow(unit(rng), 1.0 / static_cast<double>(p));
    const ParamVector w = w0 + dir.normalized() * len;
    worst = std::max(worst, max_eigenvalue(dense_parameter_hessian(model, w, data, loss, alpha, cap)));
  }
  AssumptionEntry e;
  e.id = "curvature";
  e.description = "largest Hessian eigenvalue of the parameter risk is below the closed-form bound";
  e.bound = bound;
  e.witness = worst;
  e.holds = worst <= bound;
  e.details = {{"alpha", alpha}, {"radius", radius}, {"points", points}};
  return e;
}

inline AssumptionEntry verify_eta(double alpha, double bound, double eta) {
  const EtaSelection s = select_eta(alpha, bound, eta);
  AssumptionEntry e;
  e.id = "step_size";
  e.description = "eta_alpha does not exceed alpha^2 / curvature bound";
  e.bound = s.admissible;
  e.witness = eta;
  e.holds = s.accepted;
  e.details = {{"alpha", alpha}, {"unbounded", s.unbounded}};
  if (!s.unbounded) e.details["admissible"] = s.admissible;
  return e;
}

}  // namespace lazysgld
