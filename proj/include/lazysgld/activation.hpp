#pragma once

#include <Eigen/Core>
#include <boost/math/quadrature/sinh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace lazysgld {

/// Pointwise activation with its first two derivatives and the moduli used
/// by the deep-net normalization: `lipschitz` bounds |σ'|, `smoothness`
/// bounds |σ''|.
struct Activation {
  std::string name;
  double (*value)(double);
  double (*first)(double);
  double (*second)(double);
  double lipschitz;
  double smoothness;
};

// sup |tanh''| = 4 / (3 sqrt 3), attained at tanh(x) = ±1/sqrt(3).
inline constexpr double kTanhSecondDerivativeBound = 4.0 / (3.0 * 1.7320508075688772);

/// Elementwise tanh through the vectorized exponential, 1 − 2/(e^{2z} + 1).
/// Absolute error is a few ulps of 1; libm's scalar tanh dominated the cost
/// of a shallow-net step.
template <typename Derived>
Eigen::ArrayXXd tanh_array(const Eigen::ArrayBase<Derived>& z) {
  return 1.0 - 2.0 / ((2.0 * z).exp() + 1.0);
}

inline Activation tanh_activation() {
  return Activation{
      "tanh",
      [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      },
      [](double x) {
        const double t = std::tanh(x);
        return -2.0 * t * (1.0 - t * t);
      },
      1.0,
      kTanhSecondDerivativeBound,
  };
}

inline Activation identity_activation() {
  return Activation{
      "identity",
      [](double x) { return x; },
      [](double) { return 1.0; },
      [](double) { return 0.0; },
      1.0,
      0.0,
  };
}

/// c_σ = 1 / E_{z~N(0,1)}[σ(z)²], by deterministic double-exponential
/// quadrature over the real line.
inline double c_sigma(const Activation& act) {
  boost::math::quadrature::sinh_sinh<double> integrator;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto f = [&](double z) {
    const double s = act.value(z);
    return s * s * std::exp(-0.5 * z * z) * inv_sqrt_2pi;
  };
  const double second_moment = integrator.integrate(f);
  return 1.0 / second_moment;
}

}  // namespace lazysgld
