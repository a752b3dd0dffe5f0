#pragma once

// Euler–Maruyama integration of the scaled Langevin dynamics
//
//   dω = −(1/α) Dhᵀ(ω) ∇R(α h(ω)) dt + (√η_α / α) σ_α(ω) dW,
//
// the single-sample SGD recursion it approximates, and the exponential
// martingale ℰ = exp(M − ⟨M⟩/2) driven by the same Brownian increments.
//
// Σ_α(ω) is the covariance over samples of g_i = Dhᵀ(ω) ∇_h ℓ(x_i, α h(ω))
// = ℓ'(α h_i, y_i) ∇_ω h_i. In the default factor mode σ_α is represented by
// the p×n map e_i ↦ (g_i − ḡ)/√n, whose outer product is exactly Σ_α, so the
// Brownian increment is n-dimensional and no p×p matrix is formed.

#include "lazysgld/core.hpp"
#include "lazysgld/loss.hpp"
#include "lazysgld/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>

namespace lazysgld {

using Rng = std::mt19937_64;

enum class NoiseMode { factor, dense_sqrt, none };

inline std::string_view to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::factor:
      return "factor";
    case NoiseMode::dense_sqrt:
      return "dense_sqrt";
    case NoiseMode::none:
      return "none";
  }
  return "factor";
}

inline NoiseMode parse_noise_mode(std::string_view s) {
  if (s == "factor") return NoiseMode::factor;
  if (s == "dense_sqrt") return NoiseMode::dense_sqrt;
  if (s == "none") return NoiseMode::none;
  throw ConfigError("unknown noise mode: " + std::string(s));
}

struct SgldConfig {
  double alpha = 1.0;
  double eta_alpha = 1e-2;
  double dt = 1e-2;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  NoiseMode noise_mode = NoiseMode::factor;
  Index record_every = 1;
  Index dense_cap = kDefaultDenseCap;

  std::int64_t num_steps() const { return std::llround(horizon / dt); }

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (!(eta_alpha > 0.0)) throw ConfigError("eta_alpha must be positive");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    if (!(dt < horizon)) throw ConfigError("dt must be smaller than the horizon");
    if (record_every < 1) throw ConfigError("record_every must be at least 1");
  }
};

// ---------------------------------------------------------------------------

/// σ_α(ω) in the basis of the Brownian increment.
class NoiseFactor {
 public:
  /// σ dW ∈ R^p.
  Vector apply(const Vector& dw) const {
    switch (mode_) {
      case NoiseMode::none:
        return Vector::Zero(p_);
      case NoiseMode::dense_sqrt:
        return root_ * dw;
      case NoiseMode::factor: {
        require_dims(dw.size() == slopes_.size(), "noise increment length mismatch");
        const double n = static_cast<double>(slopes_.size());
        const Vector coeff = slopes_.cwiseProduct(dw) - slopes_ * (dw.sum() / n);
        return local_->pullback(coeff) / std::sqrt(n);
      }
    }
    return Vector::Zero(p_);
  }

  /// σᵀ q, in increment coordinates.
  Vector transpose_apply(const Vector& q) const {
    switch (mode_) {
      case NoiseMode::none:
        return Vector();
      case NoiseMode::dense_sqrt:
        return root_.transpose() * q;
      case NoiseMode::factor: {
        const double n = static_cast<double>(slopes_.size());
        const Vector mean_grad = local_->pullback(slopes_ / n);
        const Vector proj = local_->pushforward(q);
        return (slopes_.cwiseProduct(proj).array() - mean_grad.dot(q)).matrix() / std::sqrt(n);
      }
    }
    return Vector();
  }

  Index dim() const {
    switch (mode_) {
      case NoiseMode::none:
        return 0;
      case NoiseMode::dense_sqrt:
        return p_;
      case NoiseMode::factor:
        return slopes_.size();
    }
    return 0;
  }

 private:
  friend class SgldIntegrator;
  NoiseMode mode_ = NoiseMode::none;
  Index p_ = 0;
  const LocalModel* local_ = nullptr;
  Vector slopes_;
  Matrix root_;
};

struct MartingaleState {
  double M = 0.0;
  double QV = 0.0;
  double E = 1.0;
};

/// One Euler–Maruyama increment of M_t = ∫ (numerator / gap) · dW and its
/// quadratic variation; ℰ = exp(M − QV/2).
inline MartingaleState advance_martingale(const MartingaleState& state, const Vector& numerator,
                                          double gap, const Vector& dw, double dt) {
  if (!(gap > 0.0)) throw DegenerateGapError("martingale: optimality gap is zero");
  require_dims(numerator.size() == dw.size(), "martingale: integrand/increment mismatch");
  MartingaleState next = state;
  if (numerator.size() == 0) return next;
  const Vector integrand = numerator / gap;
  next.M += integrand.dot(dw);
  next.QV += integrand.squaredNorm() * dt;
  next.E = std::exp(next.M - 0.5 * next.QV);
  return next;
}

class SgldIntegrator {
 public:
  SgldIntegrator(const Predictor& model, const Dataset& data, SgldConfig cfg,
                 SquaredLoss loss = {})
      : model_(model), data_(data), cfg_(cfg), loss_(loss) {
    cfg_.validate();
    check_dataset(data_);
    require_dims(data_.input_dim() == model_.input_dim(), "dataset/model input dimension");
    if (cfg_.noise_mode == NoiseMode::dense_sqrt && model_.num_params() > cfg_.dense_cap) {
      throw CapacityError("dense_sqrt noise needs p <= " + std::to_string(cfg_.dense_cap));
    }
  }

  const SgldConfig& config() const { return cfg_; }
  const Dataset& data() const { return data_; }
  const Predictor& model() const { return model_; }

  std::unique_ptr<LocalModel> linearize(const ParamVector& w) const {
    return model_.linearize(w, data_.inputs);
  }

  /// R̄(α h(ω)).
  double gap(const LocalModel& local) const {
    return empirical_risk(cfg_.alpha * local.outputs(), data_.targets).gap;
  }

  /// ℓ'(α h_i, y_i) for every sample.
  Vector slopes(const LocalModel& local) const {
    Vector s(data_.size());
    for (Index i = 0; i < s.size(); ++i) {
      s(i) = loss_.derivative(cfg_.alpha * local.outputs()(i), data_.targets(i));
    }
    return s;
  }

  /// Dhᵀ ∇R(α h) = mean of the per-sample pulled-back gradients.
  Vector mean_gradient(const LocalModel& local) const {
    return local.pullback(slopes(local) / static_cast<double>(data_.size()));
  }

  /// −(1/α) Dhᵀ ∇R(α h).
  Vector drift(const LocalModel& local) const { return -mean_gradient(local) / cfg_.alpha; }

  /// Σ_α = (1/n) Σ g_i g_iᵀ − ḡ ḡᵀ, dense. Capped by `dense_cap`.
  Matrix noise_covariance(const LocalModel& local) const {
    const Index p = model_.num_params();
    if (p > cfg_.dense_cap) throw CapacityError("noise covariance exceeds dense cap");
    const double n = static_cast<double>(data_.size());
    const Vector s = slopes(local);
    Matrix centered = s.asDiagonal() * local.jacobian();
    centered.rowwise() -= centered.colwise().mean();
    return centered.transpose() * centered / n;
  }

  NoiseFactor noise_factor(const LocalModel& local) const {
    NoiseFactor f;
    f.mode_ = cfg_.noise_mode;
    f.p_ = model_.num_params();
    if (cfg_.noise_mode == NoiseMode::factor) {
      f.local_ = &local;
      f.slopes_ = slopes(local);
    } else if (cfg_.noise_mode == NoiseMode::dense_sqrt) {
      const Matrix cov = noise_covariance(local);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
      const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      f.root_ = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
    }
    return f;
  }

  Index noise_dim() const {
    switch (cfg_.noise_mode) {
      case NoiseMode::none:
        return 0;
      case NoiseMode::dense_sqrt:
        return model_.num_params();
      case NoiseMode::factor:
        return data_.size();
    }
    return 0;
  }

  /// Brownian increment √dt·ξ, ξ ~ N(0, I).
  Vector draw_increment(Rng& rng) const {
    return std::sqrt(cfg_.dt) * standard_normal(noise_dim(), rng);
  }

  static Vector standard_normal(Index dim, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v(i) = gauss(rng);
    return v;
  }

  ParamVector advance(const ParamVector& w, const LocalModel& local, const NoiseFactor& noise,
                      const Vector& dw) const {
    ParamVector next = w + drift(local) * cfg_.dt;
    if (cfg_.noise_mode != NoiseMode::none) {
      next += (std::sqrt(cfg_.eta_alpha) / cfg_.alpha) * noise.apply(dw);
    }
    return next;
  }

  /// √η_α σ_αᵀ Dhᵀ ∇R(α h); divided by the gap this is the integrand of M.
  Vector martingale_numerator(const LocalModel& local, const NoiseFactor& noise) const {
    return std::sqrt(cfg_.eta_alpha) * noise.transpose_apply(mean_gradient(local));
  }

  /// Same as `advance`, given precomputed slopes. In factor mode drift and
  /// noise go through one pullback with per-sample coefficients
  /// −dt s/(nα) + √η (s⊙dW − s ΣdW/n)/(α√n).
  ParamVector step(const ParamVector& w, const LocalModel& local, const Vector& s,
                   const Vector& dw) const {
    if (cfg_.noise_mode != NoiseMode::factor) {
      return advance(w, local, noise_factor(local), dw);
    }
    require_dims(dw.size() == s.size(), "noise increment length mismatch");
    const double n = static_cast<double>(s.size());
    const double a = cfg_.alpha;
    const Vector coeff = (-cfg_.dt / (n * a)) * s +
                         (std::sqrt(cfg_.eta_alpha) / (a * std::sqrt(n))) *
                             (s.cwiseProduct(dw) - s * (dw.sum() / n));
    return w + local.pullback(coeff);
  }

  /// Same as `martingale_numerator`, given precomputed slopes.
  Vector martingale_numerator(const LocalModel& local, const Vector& s) const {
    if (cfg_.noise_mode != NoiseMode::factor) {
      return martingale_numerator(local, noise_factor(local));
    }
    const double n = static_cast<double>(s.size());
    const Vector g = local.pullback(s / n);
    const Vector proj = local.pushforward(g);
    return (std::sqrt(cfg_.eta_alpha) / std::sqrt(n)) *
           (s.cwiseProduct(proj).array() - g.squaredNorm()).matrix();
  }

 private:
  const Predictor& model_;
  const Dataset& data_;
  SgldConfig cfg_;
  SquaredLoss loss_;
};

inline void check_finite(const ParamVector& w, std::int64_t step) {
  if (!w.allFinite()) throw DivergenceError(step, "non-finite parameters");
}

// ---------------------------------------------------------------------------

struct NoiseSample {
  Vector value;
};

/// One draw from N(0, Σ_α(ω)).
inline NoiseSample sample_noise(const Predictor& model, const ParamVector& w, const Dataset& data,
                                const SquaredLoss& loss, double alpha, NoiseMode mode, Rng& rng,
                                Index dense_cap = kDefaultDenseCap) {
  require_dims(data.size() >= 2, "sample_noise: need at least two samples");
  SgldConfig cfg;
  cfg.alpha = alpha;
  cfg.noise_mode = mode;
  cfg.dense_cap = dense_cap;
  const SgldIntegrator integrator(model, data, cfg, loss);
  const auto local = integrator.linearize(w);
  const NoiseFactor factor = integrator.noise_factor(*local);
  const Vector xi = SgldIntegrator::standard_normal(factor.dim(), rng);
  return {factor.apply(xi)};
}

inline ParamVector em_step(const ParamVector& w, const Predictor& model, const Dataset& data,
                           const SgldConfig& cfg, Rng& rng, std::int64_t step = 0) {
  const SgldIntegrator integrator(model, data, cfg);
  const auto local = integrator.linearize(w);
  const NoiseFactor noise = integrator.noise_factor(*local);
  ParamVector next = integrator.advance(w, *local, noise, integrator.draw_increment(rng));
  check_finite(next, step);
  return next;
}

/// Same update with the frozen Jacobian and the linearized model's own noise
/// covariance.
inline ParamVector linearized_em_step(const ParamVector& w, const LinearizedPredictor& model,
                                      const Dataset& data, const SgldConfig& cfg, Rng& rng,
                                      std::int64_t step = 0) {
  return em_step(w, model, data, cfg, rng, step);
}

/// V = √η (Dhᵀ∇R(αh) − Dhᵀ∇ℓ(x_k, αh)) for sample k.
inline Vector sgd_deviation(const ParamVector& w, const Predictor& model, const Dataset& data,
                            const SgldConfig& cfg, Index sample) {
  const SgldIntegrator integrator(model, data, cfg);
  const auto local = integrator.linearize(w);
  const Vector s = integrator.slopes(*local);
  Vector e = Vector::Zero(data.size());
  e(sample) = s(sample);
  return std::sqrt(cfg.eta_alpha) * (integrator.mean_gradient(*local) - local->pullback(e));
}

/// ω − (η/α) Dhᵀ∇R(αh) + (√η/α) V with the sample drawn uniformly.
inline ParamVector sgd_step(const ParamVector& w, const Predictor& model, const Dataset& data,
                            const SgldConfig& cfg, Rng& rng, std::int64_t step = 0) {
  const SgldIntegrator integrator(model, data, cfg);
  const auto local = integrator.linearize(w);
  const Vector s = integrator.slopes(*local);
  std::uniform_int_distribution<Index> pick(0, data.size() - 1);
  const Index k = pick(rng);
  Vector e = Vector::Zero(data.size());
  e(k) = s(k);
  const Vector mean = integrator.mean_gradient(*local);
  const Vector deviation = std::sqrt(cfg.eta_alpha) * (mean - local->pullback(e));
  ParamVector next = w - (cfg.eta_alpha / cfg.alpha) * mean +
                     (std::sqrt(cfg.eta_alpha) / cfg.alpha) * deviation;
  check_finite(next, step);
  return next;
}

}  // namespace lazysgld
