#include "support.hpp"

#include <gtest/gtest.h>

using namespace lazysgld;
using namespace lazysgld::testing;

namespace {

SgldConfig make_config(double alpha, NoiseMode mode = NoiseMode::factor) {
  SgldConfig cfg;
  cfg.alpha = alpha;
  cfg.eta_alpha = 0.05;
  cfg.dt = 0.01;
  cfg.horizon = 1.0;
  cfg.noise_mode = mode;
  return cfg;
}

// σ as an explicit p × dim matrix, column by column.
Matrix factor_matrix(const NoiseFactor& f, Index p) {
  Matrix s(p, f.dim());
  for (Index k = 0; k < f.dim(); ++k) s.col(k) = f.apply(Vector::Unit(f.dim(), k));
  return s;
}

}  // namespace

TEST(NoiseLaw, FactorReproducesCovarianceOracle) {
  Rng rng(41);
  for (int rep = 0; rep < 5; ++rep) {
    const auto inst = random_shallow(3, 2, 8, rng);
    const double alpha = 0.5 + rep;
    const SgldIntegrator integ(*inst.net, inst.data, make_config(alpha));
    const auto local = integ.linearize(inst.w);
    const NoiseFactor f = integ.noise_factor(*local);
    const Matrix s = factor_matrix(f, 6);
    const Matrix oracle = covariance_oracle(*inst.net, inst.w, inst.data, alpha);
    const double scale = std::max(1.0, oracle.cwiseAbs().maxCoeff());
    EXPECT_LT((s * s.transpose() - oracle).cwiseAbs().maxCoeff() / scale, 1e-7);
    EXPECT_LT((integ.noise_covariance(*local) - oracle).cwiseAbs().maxCoeff() / scale, 1e-7);
  }
}

TEST(NoiseLaw, DenseSquareRootSquaresToCovariance) {
  Rng rng(42);
  const auto inst = random_shallow(3, 3, 6, rng);
  const SgldIntegrator integ(*inst.net, inst.data, make_config(2.0, NoiseMode::dense_sqrt));
  const auto local = integ.linearize(inst.w);
  const NoiseFactor f = integ.noise_factor(*local);
  const Matrix root = factor_matrix(f, 9);
  const Matrix cov = integ.noise_covariance(*local);
  EXPECT_LT((root * root.transpose() - cov).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((root - root.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NoiseLaw, TransposeApplyIsAdjoint) {
  Rng rng(43);
  const auto inst = random_shallow(4, 2, 7, rng);
  for (NoiseMode mode : {NoiseMode::factor, NoiseMode::dense_sqrt}) {
    const SgldIntegrator integ(*inst.net, inst.data, make_config(1.5, mode));
    const auto local = integ.linearize(inst.w);
    const NoiseFactor f = integ.noise_factor(*local);
    const Vector dw = random_vector(f.dim(), rng);
    const Vector q = random_vector(8, rng);
    EXPECT_NEAR(f.apply(dw).dot(q), dw.dot(f.transpose_apply(q)), 1e-12);
  }
}

TEST(NoiseLaw, VanishesAtInterpolatingPoint) {
  Rng rng(44);
  auto inst = random_shallow(4, 3, 6, rng);
  const double alpha = 3.0;
  // Targets taken from the same forward pass the integrator uses, so every residual is exactly 0.
  inst.data.targets = alpha * inst.net->linearize(inst.w, inst.data.inputs)->outputs();
  const auto draw = sample_noise(*inst.net, inst.w, inst.data, SquaredLoss{}, alpha,
                                 NoiseMode::factor, rng);
  EXPECT_EQ(draw.value.norm(), 0.0);
  SgldConfig cfg = make_config(alpha);
  EXPECT_EQ((em_step(inst.w, *inst.net, inst.data, cfg, rng) - inst.w).norm(), 0.0);
}

TEST(NoiseLaw, MonteCarloCovarianceWithinTolerance) {
  // p = 6, n = 8; error normalized by the spectral norm of Σ_α.
  Rng rng(45);
  const auto inst = random_shallow(3, 2, 8, rng);
  const double alpha = 1.0;
  const SgldIntegrator integ(*inst.net, inst.data, make_config(alpha));
  const auto local = integ.linearize(inst.w);
  const NoiseFactor f = integ.noise_factor(*local);
  const Matrix oracle = covariance_oracle(*inst.net, inst.w, inst.data, alpha);
  const Index draws = 200000;
  Matrix acc = Matrix::Zero(6, 6);
  Rng noise(46);
  for (Index k = 0; k < draws; ++k) {
    const Vector v = f.apply(SgldIntegrator::standard_normal(f.dim(), noise));
    acc.noalias() += v * v.transpose();
  }
  acc /= static_cast<double>(draws);
  EXPECT_LE((acc - oracle).cwiseAbs().maxCoeff() / max_eigenvalue(oracle), 5e-3);
}

TEST(EulerMaruyama, FusedStepEqualsAdvance) {
  Rng rng(47);
  const auto inst = random_shallow(5, 3, 9, rng);
  const SgldIntegrator integ(*inst.net, inst.data, make_config(4.0));
  const auto local = integ.linearize(inst.w);
  const Vector dw = integ.draw_increment(rng);
  const ParamVector a = integ.advance(inst.w, *local, integ.noise_factor(*local), dw);
  const ParamVector b = integ.step(inst.w, *local, integ.slopes(*local), dw);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EulerMaruyama, FastMartingaleIntegrandMatchesFactorPath) {
  Rng rng(48);
  const auto inst = random_shallow(5, 3, 9, rng);
  const SgldIntegrator integ(*inst.net, inst.data, make_config(2.0));
  const auto local = integ.linearize(inst.w);
  const Vector slow = integ.martingale_numerator(*local, integ.noise_factor(*local));
  const Vector fast = integ.martingale_numerator(*local, integ.slopes(*local));
  EXPECT_LT((slow - fast).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, slow.norm()));
}

TEST(EulerMaruyama, NoiselessStepIsGradientStepOnParameterRisk) {
  // ∇_ω R(α h) = α Dhᵀ∇R, so the drift step is ω − (dt/α²) ∇_ω R(α h).
  Rng rng(49);
  const auto inst = random_shallow(3, 2, 5, rng);
  const double alpha = 2.0;
  SgldConfig cfg = make_config(alpha, NoiseMode::none);
  const ParamVector next = em_step(inst.w, *inst.net, inst.data, cfg, rng);
  Vector grad(6);
  for (Index k = 0; k < 6; ++k) {
    ParamVector up = inst.w, down = inst.w;
    up(k) += 1e-6;
    down(k) -= 1e-6;
    grad(k) = (parameter_risk_loops(*inst.net, up, inst.data, alpha) -
               parameter_risk_loops(*inst.net, down, inst.data, alpha)) / 2e-6;
  }
  const ParamVector expect = inst.w - (cfg.dt / (alpha * alpha)) * grad;
  EXPECT_LT((next - expect).cwiseAbs().maxCoeff(), 1e-10);

  // Against the explicit reference step built from the Jacobian.
  const Matrix j = inst.net->jacobian(inst.w, inst.data.inputs);
  const Vector h = inst.net->predict(inst.w, inst.data.inputs);
  const ParamVector ref =
      inst.w - (cfg.dt / alpha) * j.transpose() * ((2.0 / 5.0) * (alpha * h - inst.data.targets));
  EXPECT_LT((next - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EulerMaruyama, LinearizedNoiselessRunMatchesClosedFormRecursion) {
  Rng rng(50);
  const auto inst = random_shallow(4, 3, 6, rng);
  const LinearizedPredictor lin(inst.net, inst.w, inst.data.inputs);
  const double alpha = 5.0;
  SgldConfig cfg = make_config(alpha, NoiseMode::none);
  cfg.dt = 0.05;
  const Matrix j0 = lin.initial_jacobian();
  const Vector h0 = inst.net->predict(inst.w, inst.data.inputs);
  const double n = 6.0;
  // ω_{k+1} = A ω_k + b with A = I − (2 dt/n) J0ᵀJ0.
  const Matrix a = Matrix::Identity(12, 12) - (2.0 * cfg.dt / n) * j0.transpose() * j0;
  const Vector b =
      -(2.0 * cfg.dt / (n * alpha)) * j0.transpose() * (alpha * (h0 - j0 * inst.w) - inst.data.targets);
  ParamVector w = inst.w;
  ParamVector ref = inst.w;
  for (int k = 0; k < 100; ++k) {
    w = linearized_em_step(w, lin, inst.data, cfg, rng, k);
    ref = a * ref + b;
  }
  EXPECT_LT((w - ref).cwiseAbs().maxCoeff(), 1e-10);

  // The function-space residual contracts at most by 1 − (2dt/n)λ_min per step.
  const Vector u0 = alpha * h0 - inst.data.targets;
  const Vector u = alpha * lin.predict(w, inst.data.inputs) - inst.data.targets;
  const double lmin = bisection_min_eigenvalue(j0 * j0.transpose());
  EXPECT_LE(u.norm(), std::pow(1.0 - 2.0 * cfg.dt / n * lmin, 100) * u0.norm() * (1.0 + 1e-10));
}

TEST(EulerMaruyama, StrongErrorShrinksWithStep) {
  // Shared fine Brownian path summed onto coarser grids; reference is the finest grid.
  Rng rng(51);
  const auto inst = random_shallow(4, 2, 6, rng);
  const double alpha = 1.0;
  const double horizon = 0.5;
  const int finest = 7;
  const Index fine_steps = 5 << finest;
  std::vector<double> err(4, 0.0);
  Rng noise(52);
  for (int path = 0; path < 20; ++path) {
    std::vector<Vector> dw_fine;
    const double dt_fine = horizon / static_cast<double>(fine_steps);
    for (Index k = 0; k < fine_steps; ++k) {
      dw_fine.push_back(std::sqrt(dt_fine) * SgldIntegrator::standard_normal(6, noise));
    }
    auto run = [&](int level) {
      const Index stride = Index{1} << (finest - level);
      SgldConfig cfg = make_config(alpha);
      cfg.eta_alpha = 0.5;
      cfg.dt = dt_fine * static_cast<double>(stride);
      const SgldIntegrator integ(*inst.net, inst.data, cfg);
      ParamVector w = inst.w;
      for (Index k = 0; k < fine_steps; k += stride) {
        Vector dw = Vector::Zero(6);
        for (Index i = 0; i < stride; ++i) dw += dw_fine[static_cast<std::size_t>(k + i)];
        const auto local = integ.linearize(w);
        w = integ.step(w, *local, integ.slopes(*local), dw);
      }
      return w;
    };
    const ParamVector ref = run(finest);
    for (int level = 0; level < 4; ++level) err[static_cast<std::size_t>(level)] += (run(level) - ref).norm();
  }
  for (int level = 1; level < 4; ++level) {
    EXPECT_LT(err[static_cast<std::size_t>(level)], err[static_cast<std::size_t>(level - 1)]);
  }
}

TEST(EulerMaruyama, DriftScalingAcrossAlpha) {
  Rng rng(53);
  const Matrix x = random_matrix(10, 3, rng);
  const Dataset data{x, random_vector(10, rng)};
  const Student s = centered_shallow_student(3, 20, data.inputs, 9);
  Vector reference;
  for (double alpha : {0.125, 8.0, 32.0, 256.0}) {
    const SgldIntegrator integ(*s.model, data, make_config(alpha));
    const auto local = integ.linearize(s.w0);
    const Vector drift = integ.drift(*local);
    const Vector function_drift = alpha * local->pushforward(drift);
    if (reference.size() == 0) {
      reference = function_drift;
      continue;
    }
    EXPECT_LT((function_drift - reference).norm(), 1e-12 * reference.norm());
    const SgldIntegrator first(*s.model, data, make_config(0.125));
    EXPECT_NEAR(drift.norm() * alpha, first.drift(*first.linearize(s.w0)).norm() * 0.125,
                1e-12 * drift.norm() * alpha);
  }
}

TEST(EulerMaruyama, DeterministicForFixedSeed) {
  Rng rng(54);
  const auto inst = random_shallow(5, 3, 8, rng);
  SgldConfig cfg = make_config(2.0);
  cfg.seed = 99;
  const auto a = simulate_trajectory(*inst.net, inst.w, inst.data, cfg);
  const auto b = simulate_trajectory(*inst.net, inst.w, inst.data, cfg);
  EXPECT_EQ(a.gap, b.gap);
  EXPECT_EQ(a.martingale_E, b.martingale_E);
  EXPECT_EQ(a.final_params, b.final_params);
  cfg.seed = 100;
  const auto c = simulate_trajectory(*inst.net, inst.w, inst.data, cfg);
  EXPECT_NE(a.final_params, c.final_params);
}

TEST(EulerMaruyama, DivergenceCarriesStepIndex) {
  Rng rng(55);
  auto inst = random_shallow(3, 2, 4, rng);
  ParamVector w = inst.w;
  w(0) = std::numeric_limits<double>::infinity();
  SgldConfig cfg = make_config(1.0, NoiseMode::none);
  try {
    em_step(w, *inst.net, inst.data, cfg, rng, 17);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 17);
  }
  EXPECT_THROW(SgldIntegrator(*inst.net, inst.data, [] {
                 SgldConfig c;
                 c.dense_cap = 3;
                 c.noise_mode = NoiseMode::dense_sqrt;
                 return c;
               }()),
               CapacityError);
}

TEST(Martingale, ZeroIntegrandLeavesStateUnchanged) {
  MartingaleState s{0.3, 0.2, std::exp(0.2)};
  const MartingaleState next = advance_martingale(s, Vector::Zero(3), 1.0, Vector::Ones(3), 0.01);
  EXPECT_EQ(next.M, s.M);
  EXPECT_EQ(next.QV, s.QV);
  EXPECT_DOUBLE_EQ(next.E, std::exp(0.3 - 0.1));
  EXPECT_THROW(advance_martingale(s, Vector::Ones(3), 0.0, Vector::Ones(3), 0.01),
               DegenerateGapError);
}

TEST(Martingale, NoiselessRunKeepsUnitExponential) {
  Rng rng(56);
  const auto inst = random_shallow(4, 2, 6, rng);
  const auto rec =
      simulate_trajectory(*inst.net, inst.w, inst.data, make_config(1.0, NoiseMode::none));
  for (double e : rec.martingale_E) EXPECT_EQ(e, 1.0);
}

TEST(Martingale, ExponentialHasUnitMean) {
  Rng rng(57);
  const auto inst = random_shallow(6, 3, 8, rng);
  SgldConfig cfg = make_config(2.0);
  cfg.eta_alpha = 0.2;
  cfg.horizon = 0.5;
  cfg.record_every = 50;
  TrajectoryOptions opt;
  opt.track_lambda = false;
  std::vector<double> finals;
  for (int s = 0; s < 300; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    finals.push_back(simulate_trajectory(*inst.net, inst.w, inst.data, cfg, opt).martingale_E.back());
  }
  const MeanEstimate m = mean_estimate(finals);
  EXPECT_LE(std::abs(m.mean - 1.0), 3.0 * m.stderr_);
}

TEST(StochasticGradient, DeviationAveragesToZeroOverSamples) {
  Rng rng(58);
  const auto inst = random_shallow(3, 2, 7, rng);
  const SgldConfig cfg = make_config(1.5);
  Vector mean = Vector::Zero(6);
  Matrix second = Matrix::Zero(6, 6);
  for (Index k = 0; k < 7; ++k) {
    const Vector v = sgd_deviation(inst.w, *inst.net, inst.data, cfg, k);
    mean += v / 7.0;
    second += v * v.transpose() / 7.0;
  }
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-12);
  const Matrix oracle = covariance_oracle(*inst.net, inst.w, inst.data, cfg.alpha);
  EXPECT_LT((second - cfg.eta_alpha * oracle).cwiseAbs().maxCoeff(),
            1e-7 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
}

TEST(StochasticGradient, MonteCarloMeanOfDeviationIsZero) {
  Rng rng(59);
  const auto inst = random_shallow(3, 2, 7, rng);
  const SgldConfig cfg = make_config(1.5);
  std::vector<Vector> per_sample;
  for (Index k = 0; k < 7; ++k) per_sample.push_back(sgd_deviation(inst.w, *inst.net, inst.data, cfg, k));
  std::uniform_int_distribution<Index> pick(0, 6);
  const Index draws = 100000;
  Vector sum = Vector::Zero(6), sq = Vector::Zero(6);
  for (Index d = 0; d < draws; ++d) {
    const Vector& v = per_sample[static_cast<std::size_t>(pick(rng))];
    sum += v;
    sq += v.cwiseProduct(v);
  }
  const Vector mean = sum / static_cast<double>(draws);
  const Vector var = sq / static_cast<double>(draws) - mean.cwiseProduct(mean);
  for (Index i = 0; i < 6; ++i) {
    EXPECT_LE(std::abs(mean(i)), 4.0 * std::sqrt(var(i) / static_cast<double>(draws)));
  }
}

TEST(StochasticGradient, SingleSampleIsDeterministicScaledGradientStep) {
  Rng rng(60);
  const auto inst = random_shallow(3, 2, 1, rng);
  const SgldConfig cfg = make_config(2.0);
  EXPECT_EQ(sgd_deviation(inst.w, *inst.net, inst.data, cfg, 0).norm(), 0.0);
  const ParamVector next = sgd_step(inst.w, *inst.net, inst.data, cfg, rng);
  const Matrix j = inst.net->jacobian(inst.w, inst.data.inputs);
  const Vector h = inst.net->predict(inst.w, inst.data.inputs);
  const ParamVector expect =
      inst.w - (cfg.eta_alpha / cfg.alpha) * j.transpose() * (2.0 * (cfg.alpha * h - inst.data.targets));
  EXPECT_LT((next - expect).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(StochasticGradient, WeakAgreementWithLangevinRun) {
  // One SGD step is dt = η of Langevin time; compare mean gaps at the end.
  Rng rng(61);
  const auto inst = random_shallow(8, 3, 8, rng);
  SgldConfig cfg = make_config(1.0);
  cfg.eta_alpha = 0.02;
  cfg.dt = cfg.eta_alpha;
  cfg.horizon = 40 * cfg.dt;
  const int trials = 200;
  std::vector<double> sgd_gap, em_gap;
  for (int t = 0; t < trials; ++t) {
    Rng a(1000 + t), b(5000 + t);
    ParamVector ws = inst.w, we = inst.w;
    for (int k = 0; k < 40; ++k) {
      ws = sgd_step(ws, *inst.net, inst.data, cfg, a, k);
      we = em_step(we, *inst.net, inst.data, cfg, b, k);
    }
    sgd_gap.push_back(empirical_risk(cfg.alpha * inst.net->predict(ws, inst.data.inputs), inst.data.targets).gap);
    em_gap.push_back(empirical_risk(cfg.alpha * inst.net->predict(we, inst.data.inputs), inst.data.targets).gap);
  }
  const MeanEstimate ms = mean_estimate(sgd_gap), me = mean_estimate(em_gap);
  const double se = std::hypot(ms.stderr_, me.stderr_);
  EXPECT_LE(std::abs(ms.mean - me.mean), 4.0 * se);
}
