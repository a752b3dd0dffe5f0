#pragma once

// Teacher-student data, student construction, α sweeps and the full-scale
// reproduction run.

#include "lazysgld/activation.hpp"
#include "lazysgld/assumptions.hpp"
#include "lazysgld/config.hpp"
#include "lazysgld/core.hpp"
#include "lazysgld/diagnostics.hpp"
#include "lazysgld/io.hpp"
#include "lazysgld/model.hpp"
#include "lazysgld/ntk.hpp"
#include "lazysgld/parallel.hpp"
#include "lazysgld/sgld.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lazysgld {

// ---------------------------------------------------------------------------
// Teacher-student data.

struct TeacherConfig {
  Index d = 8;
  Index m_prime = 1;
  Index n = 200;
  std::uint64_t data_seed = 1;
  double c_star = 1.0;
  double label_noise = 1.0;
};

struct TeacherParams {
  Matrix weights;  // m' × d, rows ω⋆_j ~ U[0,1]^d
  Vector c;        // c⋆_j
};

struct TeacherStudentData {
  Dataset train;
  TeacherParams teacher;
};

/// Σ_j c⋆_j tanh(ω⋆_jᵀ x) per row of `inputs`.
inline Vector teacher_output(const TeacherParams& t, const Matrix& inputs) {
  require_dims(inputs.cols() == t.weights.cols(), "teacher_output: input dimension");
  return (inputs * t.weights.transpose()).array().tanh().matrix() * t.c;
}

namespace detail {

inline Dataset draw_samples(const TeacherParams& t, Index count, double label_noise, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset data;
  data.inputs.resize(count, t.weights.cols());
  for (Index i = 0; i < count; ++i) {
    for (Index k = 0; k < data.inputs.cols(); ++k) data.inputs(i, k) = gauss(rng);
  }
  data.targets = teacher_output(t, data.inputs);
  for (Index i = 0; i < count; ++i) data.targets(i) += label_noise * gauss(rng);
  return data;
}

}  // namespace detail

/// Pure function of `cfg`: the teacher is drawn first, then inputs, then noise.
inline TeacherStudentData generate_teacher_student(const TeacherConfig& cfg) {
  if (cfg.d < 1 || cfg.m_prime < 1 || cfg.n < 1) {
    throw DimensionError("generate_teacher_student: dimensions must be positive");
  }
  Rng rng(cfg.data_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TeacherStudentData out;
  out.teacher.weights.resize(cfg.m_prime, cfg.d);
  for (Index j = 0; j < cfg.m_prime; ++j) {
    for (Index k = 0; k < cfg.d; ++k) out.teacher.weights(j, k) = unit(rng);
  }
  out.teacher.c = Vector::Constant(cfg.m_prime, cfg.c_star);
  out.train = detail::draw_samples(out.teacher, cfg.n, cfg.label_noise, rng);
  return out;
}

/// Fresh samples from the same teacher on an independent stream, so the
/// training set does not depend on how many held-out samples are requested.
inline Dataset generate_heldout(const TeacherConfig& cfg, const TeacherParams& teacher,
                                Index count) {
  std::seed_seq seq{cfg.data_seed, std::uint64_t{0x68656c64}};
  Rng rng(seq);
  return detail::draw_samples(teacher, count, cfg.label_noise, rng);
}

inline TeacherConfig teacher_config(const RunConfig& cfg) {
  return {cfg.d, cfg.m_prime, cfg.n, cfg.data_seed, cfg.c_star, cfg.label_noise};
}

// ---------------------------------------------------------------------------
// Students.

struct Student {
  std::shared_ptr<const Predictor> model;
  ParamVector w0;
  std::shared_ptr<const ShallowTanhNet> shallow;  // set for the shallow family
  std::shared_ptr<const DeepNet> deep;            // set for the deep family

  /// Lip(Dh) bound where one is available in closed form, else 0.
  double lip_dh(const Matrix& inputs) const {
    return shallow ? lip_dh_shallow(shallow->output_weights(), inputs) : 0.0;
  }
  bool centered() const { return model.get() != shallow.get() && model.get() != deep.get(); }
};

/// c_j = +1 for even j and −1 for odd j.
inline Vector alternating_signs(Index m) {
  Vector c(m);
  for (Index j = 0; j < m; ++j) c(j) = j % 2 == 0 ? 1.0 : -1.0;
  return c;
}

/// Shallow student with ω⁰ ~ N(0, I) wrapped in the centered model.
inline Student centered_shallow_student(Index d, Index m, const Matrix& inputs,
                                        std::uint64_t init_seed) {
  auto net = std::make_shared<const ShallowTanhNet>(d, alternating_signs(m));
  Rng rng(init_seed);
  ParamVector w0 = SgldIntegrator::standard_normal(net->num_params(), rng);
  Student s;
  s.shallow = net;
  s.w0 = w0;
  s.model = std::make_shared<const CenteredPredictor>(net, w0, &inputs);
  return s;
}

/// Paired neurons: rows j and j + m/2 share ω⁰_j ~ N(0, I) and carry output
/// weights +1 and −1, so h(ω⁰) vanishes up to rounding.
inline Student symmetric_shallow_student(Index d, Index m, std::uint64_t init_seed) {
  if (m % 2 != 0) throw DimensionError("symmetric initialization needs an even width");
  const Index half = m / 2;
  Vector c(m);
  c.head(half).setOnes();
  c.tail(half).setConstant(-1.0);
  auto net = std::make_shared<const ShallowTanhNet>(d, c);
  Rng rng(init_seed);
  const ParamVector top = SgldIntegrator::standard_normal(half * d, rng);
  ParamVector w0(m * d);
  w0.head(half * d) = top;
  w0.tail(half * d) = top;
  Student s;
  s.shallow = net;
  s.w0 = w0;
  s.model = net;
  return s;
}

inline Student centered_deep_student(Index d, Index m, Index depth, const Matrix& inputs,
                                     std::uint64_t init_seed) {
  auto net = std::make_shared<const DeepNet>(d, m, depth);
  Rng rng(init_seed);
  ParamVector w0 = net->init_params(rng);
  Student s;
  s.deep = net;
  s.w0 = w0;
  s.model = std::make_shared<const CenteredPredictor>(net, w0, &inputs);
  return s;
}

inline Student build_student(const RunConfig& cfg, const Matrix& inputs, std::uint64_t init_seed) {
  if (cfg.model == ModelKind::deep) {
    return centered_deep_student(cfg.d, cfg.width, cfg.depth, inputs, init_seed);
  }
  if (cfg.init == InitScheme::symmetric) return symmetric_shallow_student(cfg.d, cfg.width, init_seed);
  return centered_shallow_student(cfg.d, cfg.width, inputs, init_seed);
}

// ---------------------------------------------------------------------------
// Instances.

struct Problem {
  Dataset train;
  std::optional<Dataset> heldout;
  std::optional<TeacherParams> teacher;
};

inline Problem build_problem(const RunConfig& cfg) {
  Problem p;
  if (!cfg.data_csv.empty()) {
    p.train = read_dataset_csv(cfg.data_csv);
    if (p.train.input_dim() != cfg.d) {
      throw ConfigError("data_csv has " + std::to_string(p.train.input_dim()) +
                        " input columns but d = " + std::to_string(cfg.d));
    }
    if (cfg.heldout_n > 0) throw ConfigError("heldout_n needs teacher data, not data_csv");
    return p;
  }
  const TeacherConfig tc = teacher_config(cfg);
  auto gen = generate_teacher_student(tc);
  p.train = std::move(gen.train);
  if (cfg.heldout_n > 0) p.heldout = generate_heldout(tc, gen.teacher, cfg.heldout_n);
  p.teacher = std::move(gen.teacher);
  return p;
}

/// Quantities measured once at the initialization.
struct InitStats {
  double eig_min = 0.0;  // smallest Gram eigenvalue λ²
  double lambda = 0.0;   // √eig_min
  double lip_dh = 0.0;
  double radius = kInfinity;
  double frob_dh0 = 0.0;
};

/// `radius_override` > 0 wins; otherwise r = λ / Lip(Dh) when Lip(Dh) is known.
inline InitStats init_stats(const Student& s, const Dataset& data, double radius_override) {
  InitStats st;
  const auto local = s.model->linearize(s.w0, data.inputs);
  st.eig_min = min_eigenvalue(gram(*local));
  st.lambda = std::sqrt(std::max(st.eig_min, 0.0));
  st.lip_dh = s.lip_dh(data.inputs);
  st.frob_dh0 = std::sqrt(std::max(local->gram().trace(), 0.0));
  if (radius_override > 0.0) {
    st.radius = radius_override;
  } else if (st.lip_dh > 0.0 && st.lambda > 0.0) {
    st.radius = lazy_radius(st.lambda, st.lip_dh).r;
  }
  return st;
}

inline TrajectoryOptions trajectory_options(const RunConfig& cfg, const InitStats& st) {
  TrajectoryOptions opt;
  opt.radius = st.radius;
  opt.track_lambda = cfg.track_lambda;
  opt.lip_dh = st.lip_dh;
  return opt;
}

/// Mean of (α h(ω; x) − y)² over a dataset.
inline double prediction_error(const Predictor& model, const ParamVector& w, const Dataset& data,
                               double alpha) {
  return (alpha * model.predict(w, data.inputs) - data.targets).squaredNorm() /
         static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Assumption checks on a configured instance.

struct VerifyResult {
  AssumptionReport report;
  InitStats init;
  std::vector<std::string> skipped;
  nlohmann::json to_json() const {
    return {{"entries", report.to_json()},
            {"all_hold", report.all_hold()},
            {"skipped", skipped},
            {"lambda_min", init.eig_min},
            {"lip_dh", init.lip_dh},
            {"radius", std::isfinite(init.radius) ? nlohmann::json(init.radius)
                                                  : nlohmann::json(nullptr)}};
  }
};

/// Loss constants, NTK positivity, Lip(Dh) against sampled quotients, the
/// curvature bound against dense Hessians inside the lazy ball, and the
/// step-size rule for `alpha` and every entry of `alphas`.
inline VerifyResult verify_instance(const RunConfig& cfg) {
  cfg.validate();
  const Problem problem = build_problem(cfg);
  const Dataset& data = problem.train;
  const Student student = build_student(cfg, data.inputs, cfg.init_seed);
  VerifyResult out;
  out.init = init_stats(student, data, cfg.radius);
  const SquaredLoss loss;
  out.report.entries.push_back(verify_loss_constants(loss));
  out.report.entries.push_back(
      verify_ntk_positive(*student.model, student.w0, data.inputs, cfg.ntk_floor));

  std::vector<double> alphas{cfg.alpha};
  for (double a : cfg.alphas) {
    if (std::find(alphas.begin(), alphas.end(), a) == alphas.end()) alphas.push_back(a);
  }
  const double probe_radius = std::isfinite(out.init.radius) ? out.init.radius : 1.0;
  const bool dense_ok = student.model->num_params() <= cfg.dense_cap;

  if (student.shallow) {
    out.report.entries.push_back(verify_lipschitz_dh(*student.model, student.w0, data.inputs,
                                                     out.init.lip_dh, probe_radius,
                                                     cfg.probe_count, cfg.init_seed + 1));
    const Vector& c = student.shallow->output_weights();
    const bool centered = student.centered();
    for (double a : alphas) {
      const double bound = curvature_bound(a, c, data, loss.curvature(), centered);
      AssumptionEntry eta = verify_eta(a, bound, cfg.eta_alpha);
      eta.id = "step_size[alpha=" + detail::show(a) + "]";
      out.report.entries.push_back(std::move(eta));
    }
    if (dense_ok && cfg.hessian_points > 0) {
      AssumptionEntry e = verify_curvature(
          *student.model, student.w0, data, cfg.alpha,
          curvature_bound(cfg.alpha, c, data, loss.curvature(), centered), probe_radius,
          cfg.hessian_points, cfg.init_seed + 2, cfg.dense_cap);
      e.id = "curvature[alpha=" + detail::show(cfg.alpha) + "]";
      out.report.entries.push_back(std::move(e));
    } else {
      out.skipped.push_back("curvature: dense Hessian disabled or p exceeds dense_cap");
    }
  } else {
    out.skipped.push_back("lipschitz_dh: no closed form for the deep model");
    // Without a closed form the dense-Hessian witness is compared directly
    // with α²/η_α.
    if (dense_ok && cfg.hessian_points > 0) {
      for (double a : alphas) {
        AssumptionEntry e = verify_curvature(*student.model, student.w0, data, a,
                                             a * a / cfg.eta_alpha, probe_radius,
                                             cfg.hessian_points, cfg.init_seed + 2, cfg.dense_cap);
        e.id = "curvature_step_size[alpha=" + detail::show(a) + "]";
        out.report.entries.push_back(std::move(e));
      }
    } else {
      out.skipped.push_back("curvature: dense Hessian disabled or p exceeds dense_cap");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepConfig {
  RunConfig run;
  fs::path out;
  unsigned threads = 1;
};

struct SweepCell {
  double alpha = 0.0;
  Index seed_index = 0;
  TrajectoryRecord record;
  ParamVector final_params;
  fs::path csv;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<InitStats> init;  // per seed index
  nlohmann::json summary;
  Index divergences = 0;
};

inline std::string alpha_tag(double alpha) { return detail::show(alpha); }

inline fs::path trajectory_path(const fs::path& dir, double alpha, Index seed_index) {
  return dir / ("traj_alpha_" + alpha_tag(alpha) + "_seed_" + std::to_string(seed_index) + ".csv");
}

namespace detail {

inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json series_json(const std::vector<double>& xs) {
  nlohmann::json arr = nlohmann::json::array();
  for (double v : xs) arr.push_back(finite_or_null(v));
  return arr;
}

/// Column-wise mean and 95% half-width over the records that reach row i.
struct Fold {
  std::vector<double> mean;
  std::vector<double> half_width;
};

template <typename Column>
Fold fold(const std::vector<const TrajectoryRecord*>& runs, std::size_t len, Column column) {
  Fold f;
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> xs;
    for (const auto* r : runs) {
      if (i < r->size()) xs.push_back(column(*r)[i]);
    }
    const MeanEstimate m = mean_estimate(xs);
    f.mean.push_back(xs.empty() ? std::numeric_limits<double>::quiet_NaN() : m.mean);
    f.half_width.push_back(m.half_width());
  }
  return f;
}

inline std::string wide_csv(const std::vector<double>& times, const std::vector<double>& alphas,
                            const std::vector<std::vector<double>>& columns) {
  std::string s = "t";
  for (double a : alphas) s += ",alpha_" + show(a);
  s += '\n';
  for (std::size_t i = 0; i < times.size(); ++i) {
    s += format_double(times[i]);
    for (const auto& col : columns) s += ',' + format_double(i < col.size() ? col[i] : std::nan(""));
    s += '\n';
  }
  return s;
}

}  // namespace detail

/// One trajectory per (α, seed index). Seed index s uses Brownian seed
/// `seed + s` and, when `vary_init` is set, initialization seed
/// `init_seed + s`; the same initialization is shared across the α grid.
inline SweepResult run_alpha_sweep(const SweepConfig& sweep) {
  const RunConfig& cfg = sweep.run;
  cfg.validate();
  const Problem problem = build_problem(cfg);
  const Dataset& data = problem.train;
  const auto seeds = static_cast<std::size_t>(cfg.seeds);

  std::vector<Student> students(seeds);
  SweepResult res;
  res.init.resize(seeds);
  parallel_for(seeds, sweep.threads, [&](std::size_t s) {
    const std::uint64_t init_seed = cfg.vary_init ? cfg.init_seed + s : cfg.init_seed;
    students[s] = build_student(cfg, data.inputs, init_seed);
    res.init[s] = init_stats(students[s], data, cfg.radius);
  });

  std::vector<double> alphas = cfg.alphas;
  res.cells.resize(alphas.size() * seeds);
  parallel_for(res.cells.size(), sweep.threads, [&](std::size_t c) {
    SweepCell& cell = res.cells[c];
    const std::size_t s = c % seeds;
    cell.alpha = alphas[c / seeds];
    cell.seed_index = static_cast<Index>(s);
    SgldConfig sc = cfg.sgld();
    sc.alpha = cell.alpha;
    sc.seed = cfg.seed + s;
    TrajectoryOptions opt = trajectory_options(cfg, res.init[s]);
    cell.record = simulate_trajectory(*students[s].model, students[s].w0, data, sc, opt);
    cell.final_params = cell.record.final_params;
  });

  for (auto& cell : res.cells) {
    cell.csv = trajectory_path(sweep.out, cell.alpha, cell.seed_index);
    write_trajectory_csv(cell.csv, cell.record);
    if (cell.record.diverged) ++res.divergences;
  }

  // Aggregation.
  std::vector<double> eig_init;
  for (const auto& st : res.init) eig_init.push_back(st.eig_min);
  const double eig_mean = mean_estimate(eig_init).mean;
  const double gap0 = empirical_risk(Vector::Zero(data.size()), data.targets).gap;

  nlohmann::json per_alpha = nlohmann::json::array();
  std::vector<double> ref_times;
  std::vector<std::vector<double>> loss_cols, dist_cols, lambda_cols;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    std::vector<const TrajectoryRecord*> ok;
    std::vector<Index> diverged;
    std::vector<double> taus;
    nlohmann::json heldout = nlohmann::json::array();
    Index exits = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const SweepCell& cell = res.cells[a * seeds + s];
      if (cell.record.diverged) {
        diverged.push_back(cell.seed_index);
        continue;
      }
      ok.push_back(&cell.record);
      taus.push_back(cell.record.tau);
      if (cell.record.exited) ++exits;
      if (problem.heldout) {
        heldout.push_back(prediction_error(*students[s].model, cell.final_params,
                                           *problem.heldout, cell.alpha));
      }
    }
    std::size_t len = 0;
    const TrajectoryRecord* longest = nullptr;
    for (const auto* r : ok) {
      if (r->size() > len) {
        len = r->size();
        longest = r;
      }
    }
    std::vector<double> times = longest ? longest->times : std::vector<double>{};
    if (times.size() > ref_times.size()) ref_times = times;
    const auto gap = detail::fold(ok, len, [](const TrajectoryRecord& r) -> const auto& { return r.gap; });
    const auto dist = detail::fold(ok, len, [](const TrajectoryRecord& r) -> const auto& { return r.dist; });
    const auto lam = detail::fold(ok, len, [](const TrajectoryRecord& r) -> const auto& { return r.lambda_min; });
    const auto mart = detail::fold(ok, len, [](const TrajectoryRecord& r) -> const auto& { return r.martingale_E; });
    loss_cols.push_back(gap.mean);
    dist_cols.push_back(dist.mean);
    lambda_cols.push_back(lam.mean);

    const Proportion exit_ci = wilson_interval(exits, static_cast<Index>(ok.size()));
    BoundInputs bi;
    bi.alpha = alphas[a];
    bi.n = data.size();
    bi.t = times.empty() ? 0.0 : times.back();
    bi.gap0 = gap0;
    bi.eig_min = eig_mean;
    bi.lip_dh = res.init.front().lip_dh;
    bi.frob_dh0 = res.init.front().frob_dh0;
    bi.hstar_norm_sq = data.targets.squaredNorm();
    bi.init_distance_sq = data.targets.squaredNorm();
    if (!gap.mean.empty()) {
      bi.observed_gap = gap.mean.back();
      bi.observed_distance_sq = gap.mean.back() * static_cast<double>(data.size());
      bi.observed_exit = exit_ci.estimate;
    }
    nlohmann::json entry = {
        {"alpha", alphas[a]},
        {"seeds", static_cast<Index>(ok.size())},
        {"diverged_seeds", diverged},
        {"times", detail::series_json(times)},
        {"gap_mean", detail::series_json(gap.mean)},
        {"gap_ci95", detail::series_json(gap.half_width)},
        {"dist_mean", detail::series_json(dist.mean)},
        {"dist_ci95", detail::series_json(dist.half_width)},
        {"lambda_min_mean", detail::series_json(lam.mean)},
        {"martingale_E_mean", detail::series_json(mart.mean)},
        {"exit_frequency", exit_ci.estimate},
        {"exit_ci95", {exit_ci.lower, exit_ci.upper}},
        {"tau_quantiles",
         {{"q25", detail::finite_or_null(quantile(taus, 0.25))},
          {"q50", detail::finite_or_null(quantile(taus, 0.5))},
          {"q75", detail::finite_or_null(quantile(taus, 0.75))}}},
        {"bounds", evaluate_bounds(bi).to_json()},
    };
    if (problem.heldout) entry["heldout_error_final"] = heldout;
    per_alpha.push_back(std::move(entry));
  }

  std::vector<double> reference;
  for (double t : ref_times) reference.push_back(gap0 * std::exp(-eig_mean * eig_mean * t));

  nlohmann::json init = nlohmann::json::array();
  for (const auto& st : res.init) {
    init.push_back({{"lambda_min", st.eig_min},
                    {"lip_dh", st.lip_dh},
                    {"radius", detail::finite_or_null(st.radius)},
                    {"frob_dh0", st.frob_dh0}});
  }
  res.summary = {
      {"config", config_json(cfg)},
      {"n", data.size()},
      {"gap0", gap0},
      {"init", init},
      {"lambda_min_init_mean", eig_mean},
      {"reference",
       {{"description", "gap0 * exp(-lambda_min^2 t), lambda_min = smallest NTK Gram eigenvalue "
                        "at initialization (seed mean)"},
        {"lambda_min", eig_mean},
        {"times", detail::series_json(ref_times)},
        {"curve", detail::series_json(reference)}}},
      {"error_kind", "training gap in trajectory files; held-out error only under "
                     "heldout_error_final when heldout_n > 0"},
      {"per_alpha", per_alpha},
      {"divergences", res.divergences},
  };
  write_json(sweep.out / "summary.json", res.summary);
  write_atomic(sweep.out / "figure_loss.csv", detail::wide_csv(ref_times, alphas, loss_cols));
  write_atomic(sweep.out / "figure_distance.csv", detail::wide_csv(ref_times, alphas, dist_cols));
  write_atomic(sweep.out / "figure_lambda_min.csv",
               detail::wide_csv(ref_times, alphas, lambda_cols));
  return res;
}

// ---------------------------------------------------------------------------
// Full-scale reproduction.

/// Smallest Gram eigenvalue reported for the full-scale instance.
inline constexpr double kReferenceLambdaMin = 0.01122;

inline RunConfig full_scale_config() {
  RunConfig c;
  c.model = ModelKind::shallow;
  c.d = 16;
  c.width = 600;
  c.m_prime = 1;
  c.n = 800;
  c.c_star = 1.0;
  c.label_noise = 1.0;
  c.dt = 1e-2;
  c.eta_alpha = 1e-2;
  c.alphas = {0.125, 8.0, 32.0, 256.0};
  c.horizon = 100.0;
  c.seeds = 5;
  c.record_every = 100;
  c.init = InitScheme::centered;
  return c;
}

class BudgetError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Rough cost: three n·m·d passes per step for the forward map, the pullback
/// and the pushforward, plus one O(n³) eigen solve per recorded row.
inline double estimated_core_hours(const RunConfig& c, double gflops = 2.0) {
  const double steps = c.horizon / c.dt;
  const double cells = static_cast<double>(c.alphas.size() * static_cast<std::size_t>(c.seeds));
  const double nmd = static_cast<double>(c.n * c.width * c.d);
  const double n3 = std::pow(static_cast<double>(c.n), 3.0);
  const double per_cell = steps * 8.0 * nmd +
                          (c.track_lambda ? steps / static_cast<double>(c.record_every) *
                                                (4.0 * n3 + 2.0 * nmd * static_cast<double>(c.n))
                                          : 0.0);
  return cells * per_cell / (gflops * 1e9) / 3600.0;
}

/// Runs the full-scale sweep when `acknowledged`; otherwise throws a
/// BudgetError carrying the cost estimate.
inline SweepResult reproduce_full_scale(const RunConfig& cfg, const fs::path& out, unsigned threads,
                                      bool acknowledged) {
  if (!acknowledged) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "full-scale reproduction needs about %.1f core-hours (%zu trajectories); "
                  "rerun with --ack-budget",
                  estimated_core_hours(cfg),
                  cfg.alphas.size() * static_cast<std::size_t>(cfg.seeds));
    throw BudgetError(buf);
  }
  SweepResult res = run_alpha_sweep({cfg, out, threads});
  nlohmann::json cmp = nlohmann::json::array();
  bool in_band = true;
  for (const auto& st : res.init) {
    const bool ok = st.eig_min >= 3e-3 && st.eig_min <= 4e-2;
    in_band = in_band && ok;
    cmp.push_back({{"lambda_min", st.eig_min},
                   {"ratio_to_reference", st.eig_min / kReferenceLambdaMin},
                   {"within_order_of_magnitude", ok}});
  }
  // Final training gap per seed, smallest versus largest α.
  const auto seeds = static_cast<std::size_t>(cfg.seeds);
  const auto lo = static_cast<std::size_t>(
      std::min_element(cfg.alphas.begin(), cfg.alphas.end()) - cfg.alphas.begin());
  const auto hi = static_cast<std::size_t>(
      std::max_element(cfg.alphas.begin(), cfg.alphas.end()) - cfg.alphas.begin());
  bool ordered = true;
  nlohmann::json finals = nlohmann::json::array();
  for (std::size_t s = 0; s < seeds; ++s) {
    const auto& a = res.cells[lo * seeds + s].record;
    const auto& b = res.cells[hi * seeds + s].record;
    const double ga = a.gap.empty() ? kInfinity : a.gap.back();
    const double gb = b.gap.empty() ? kInfinity : b.gap.back();
    const bool ok = !a.diverged && !b.diverged && gb < ga;
    ordered = ordered && ok;
    finals.push_back({{"small_alpha_final_gap", detail::finite_or_null(ga)},
                      {"large_alpha_final_gap", detail::finite_or_null(gb)},
                      {"large_alpha_lower", ok}});
  }
  res.summary["reproduction"] = {{"reference_lambda_min", kReferenceLambdaMin},
                                 {"lambda_min_band", {3e-3, 4e-2}},
                                 {"lambda_min_in_band", in_band},
                                 {"lambda_min_per_seed", cmp},
                                 {"final_gap_ordering", finals},
                                 {"large_alpha_lower_on_every_seed", ordered}};
  write_json(out / "summary.json", res.summary);
  return res;
}

}  // namespace lazysgld
