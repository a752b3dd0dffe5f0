#pragma once

// Squared-error loss, the empirical risk on R^n and its regularity constants.

#include "lazysgld/core.hpp"

#include <string_view>

namespace lazysgld {

/// Selects which strong-convexity / smoothness pair the bound evaluators
/// consume. `per_sample` uses the constants of ℓ itself (2, 2); `averaged`
/// uses those of R(h) = (1/n) Σ ℓ(x_i, h) on R^n with the Euclidean inner
/// product (2/n, 2/n).
enum class NormConvention { per_sample, averaged };

inline std::string_view to_string(NormConvention c) {
  return c == NormConvention::averaged ? "averaged" : "per_sample";
}

inline NormConvention parse_norm_convention(std::string_view s) {
  if (s == "averaged") return NormConvention::averaged;
  if (s == "per_sample") return NormConvention::per_sample;
  throw ConfigError("unknown norm convention: " + std::string(s));
}

/// ℓ(x, h) = (y − h(x))².
struct SquaredLoss {
  static constexpr double mu_strong = 2.0;
  static constexpr double lip_grad = 2.0;

  double value(double prediction, double target) const {
    const double d = target - prediction;
    return d * d;
  }
  double derivative(double prediction, double target) const {
    return 2.0 * (prediction - target);
  }
  double curvature() const { return 2.0; }

  static double effective_mu(NormConvention c, Index n) {
    return c == NormConvention::averaged ? mu_strong / static_cast<double>(n) : mu_strong;
  }
  static double effective_lip(NormConvention c, Index n) {
    return c == NormConvention::averaged ? lip_grad / static_cast<double>(n) : lip_grad;
  }
};

/// Risk and optimality gap. The unconstrained minimizer on R^n interpolates
/// the targets, so the minimal risk is zero and gap == risk.
struct RiskValue {
  double risk = 0.0;
  double gap = 0.0;
};

inline RiskValue empirical_risk(const Vector& outputs, const Vector& targets) {
  require_dims(outputs.size() == targets.size(), "empirical_risk: length mismatch");
  require_dims(outputs.size() >= 1, "empirical_risk: empty input");
  const double risk = (targets - outputs).squaredNorm() / static_cast<double>(outputs.size());
  return {risk, risk};
}

/// ∇R(h) = (2/n)(h − y).
inline Vector risk_gradient(const Vector& outputs, const Vector& targets) {
  require_dims(outputs.size() == targets.size(), "risk_gradient: length mismatch");
  require_dims(outputs.size() >= 1, "risk_gradient: empty input");
  return (2.0 / static_cast<double>(outputs.size())) * (outputs - targets);
}

/// ‖∇R‖² / (2 μ gap). Identically 1 under the averaged convention and 1/n
/// under the per-sample one.
inline double pl_ratio(const Vector& outputs, const Vector& targets,
                       NormConvention convention = NormConvention::averaged) {
  const RiskValue r = empirical_risk(outputs, targets);
  if (!(r.gap > 0.0)) throw DegenerateGapError("pl_ratio: zero optimality gap");
  const double mu = SquaredLoss::effective_mu(convention, outputs.size());
  return risk_gradient(outputs, targets).squaredNorm() / (2.0 * mu * r.gap);
}

}  // namespace lazysgld
