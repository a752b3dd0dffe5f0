// Command-line driver: simulate, sweep, exit-prob, verify, gen-data and the
// full-scale reproduction.

#include "lazysgld/lazysgld.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace lazysgld;

constexpr int kOk = 0;
constexpr int kViolation = 1;
constexpr int kConfigError = 2;
constexpr int kDiverged = 3;

struct Options {
  std::string config;
  std::string out = "out";
  std::vector<std::string> overrides;
  unsigned threads = default_threads();
  bool ack_budget = false;
};

std::string key_listing() {
  const RunConfig defaults;
  std::string s = "Config keys (key = default):\n";
  for (const auto& k : config_keys()) {
    std::string line = "  " + k.name + " = " + k.get(defaults);
    if (line.size() < 34) line.resize(34, ' ');
    s += line + "  " + k.help + '\n';
  }
  s += "\nExit status: 0 ok, 1 verify violation, 2 config error, 3 divergence.\n";
  return s;
}

RunConfig resolve(const Options& opt, RunConfig base) {
  if (!opt.config.empty()) {
    std::string text;
    try {
      text = read_file(opt.config);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    parse_config(base, text);
  }
  for (const auto& kv : opt.overrides) apply_setting(base, kv);
  base.validate();
  if (opt.threads < 1) throw ConfigError("--threads must be positive");
  return base;
}

nlohmann::json init_json(const InitStats& st) {
  return {{"lambda_min", st.eig_min},
          {"lambda", st.lambda},
          {"lip_dh", st.lip_dh},
          {"radius", std::isfinite(st.radius) ? nlohmann::json(st.radius) : nlohmann::json(nullptr)},
          {"frob_dh0", st.frob_dh0}};
}

int run_simulate(const RunConfig& cfg, const fs::path& out) {
  const Problem problem = build_problem(cfg);
  const Student student = build_student(cfg, problem.train.inputs, cfg.init_seed);
  const InitStats st = init_stats(student, problem.train, cfg.radius);
  const TrajectoryRecord rec = simulate_trajectory(*student.model, student.w0, problem.train,
                                                   cfg.sgld(), trajectory_options(cfg, st));
  write_trajectory_csv(out / "trajectory.csv", rec);
  nlohmann::json run = {{"config", config_json(cfg)},
                        {"init", init_json(st)},
                        {"exited", rec.exited},
                        {"tau", std::isfinite(rec.tau) ? nlohmann::json(rec.tau) : nlohmann::json(nullptr)},
                        {"diverged", rec.diverged},
                        {"divergence_step", rec.divergence_step},
                        {"ntk_checks", rec.ntk_checks},
                        {"ntk_violations", rec.ntk_violations}};
  if (problem.heldout && !rec.diverged) {
    run["heldout_error_final"] =
        prediction_error(*student.model, rec.final_params, *problem.heldout, cfg.alpha);
  }
  write_json(out / "run.json", run);
  if (rec.diverged) {
    std::cerr << "trajectory diverged at step " << rec.divergence_step << '\n';
    return kDiverged;
  }
  return kOk;
}

int run_sweep(const RunConfig& cfg, const fs::path& out, unsigned threads) {
  const SweepResult res = run_alpha_sweep({cfg, out, threads});
  if (res.divergences > 0) {
    std::cerr << res.divergences << " trajectories diverged\n";
    return kDiverged;
  }
  return kOk;
}

int run_exit_prob(const RunConfig& cfg, const fs::path& out, unsigned threads) {
  if (cfg.trials < 30) throw ConfigError("exit-prob needs trials >= 30");
  const Problem problem = build_problem(cfg);
  const Student student = build_student(cfg, problem.train.inputs, cfg.init_seed);
  const InitStats st = init_stats(student, problem.train, cfg.radius);
  if (!std::isfinite(st.radius)) throw ConfigError("exit-prob needs a finite radius");
  const ExitProbabilityReport rep = exit_probability_mc(
      *student.model, student.w0, problem.train, cfg.sgld(), cfg.alphas, cfg.trials, st.radius,
      threads);
  const Index n = problem.train.size();
  const double mu = SquaredLoss::effective_mu(cfg.norm_convention, n);
  const double lip = SquaredLoss::effective_lip(cfg.norm_convention, n);
  nlohmann::json per_alpha = nlohmann::json::array();
  Index divergences = 0;
  for (const auto& e : rep.per_alpha) {
    divergences += e.divergences;
    const double bound = exit_probability_bound(e.alpha, st.radius, st.frob_dh0, lip, mu,
                                        problem.train.targets.squaredNorm(), st.eig_min);
    nlohmann::json taus = nlohmann::json::array();
    for (double t : e.taus) taus.push_back(std::isfinite(t) ? nlohmann::json(t) : nlohmann::json(nullptr));
    per_alpha.push_back({{"alpha", e.alpha},
                         {"trials", e.trials},
                         {"exits", e.exits},
                         {"divergences", e.divergences},
                         {"estimate", e.ci.estimate},
                         {"ci95", {e.ci.lower, e.ci.upper}},
                         {"exit_bound", bound},
                         {"bound_vacuous", bound >= 1.0},
                         {"bound_covers_lower_ci", bound >= 1.0 || e.ci.lower <= bound},
                         {"tau", taus}});
  }
  write_json(out / "exit_prob.json", {{"config", config_json(cfg)},
                                      {"init", init_json(st)},
                                      {"norm_convention", to_string(cfg.norm_convention)},
                                      {"nonincreasing", rep.nonincreasing},
                                      {"per_alpha", per_alpha}});
  return divergences > 0 ? kDiverged : kOk;
}

int run_verify(const RunConfig& cfg, const fs::path& out) {
  const VerifyResult res = verify_instance(cfg);
  nlohmann::json j = res.to_json();
  j["config"] = config_json(cfg);
  write_json(out / "assumptions.json", j);
  for (const auto& e : res.report.entries) {
    if (!e.holds) std::cerr << "assumption check failed: " << e.id << '\n';
  }
  return res.report.all_hold() ? kOk : kViolation;
}

int run_gen_data(const RunConfig& cfg, const fs::path& out) {
  if (!cfg.data_csv.empty()) throw ConfigError("gen-data generates teacher data; unset data_csv");
  const TeacherConfig tc = teacher_config(cfg);
  const TeacherStudentData gen = generate_teacher_student(tc);
  write_dataset_csv(out / "train.csv", gen.train);
  if (cfg.heldout_n > 0) {
    write_dataset_csv(out / "heldout.csv", generate_heldout(tc, gen.teacher, cfg.heldout_n));
  }
  nlohmann::json w = nlohmann::json::array();
  for (Index j = 0; j < gen.teacher.weights.rows(); ++j) {
    std::vector<double> row(gen.teacher.weights.cols());
    for (Index k = 0; k < gen.teacher.weights.cols(); ++k) row[static_cast<std::size_t>(k)] = gen.teacher.weights(j, k);
    w.push_back(row);
  }
  write_json(out / "teacher.json", {{"weights", w},
                                    {"c", std::vector<double>(gen.teacher.c.data(),
                                                              gen.teacher.c.data() + gen.teacher.c.size())},
                                    {"config", config_json(cfg)}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Scaled Langevin dynamics in the lazy training regime"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(key_listing());
  Options opt;
  app.add_option("--config", opt.config, "flat key = value config file");
  app.add_option("--out", opt.out, "output directory")->capture_default_str();
  app.add_option("--set", opt.overrides, "override one key (KEY=VALUE), repeatable")
      ->allow_extra_args(false);
  app.add_option("--threads", opt.threads, "worker threads")->capture_default_str();
  app.add_flag("--ack-budget", opt.ack_budget, "allow the full-scale reproduction to run");

  auto* simulate = app.add_subcommand("simulate", "one trajectory at alpha");
  auto* sweep = app.add_subcommand("sweep", "trajectories over the alpha grid and seeds");
  auto* exitp = app.add_subcommand("exit-prob", "Monte Carlo first-exit frequencies per alpha");
  auto* verify = app.add_subcommand("verify", "check the assumptions on the configured instance");
  auto* gen = app.add_subcommand("gen-data", "write teacher-student data as CSV");
  auto* repro = app.add_subcommand("reproduce-full-scale", "full-scale sweep (needs --ack-budget)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    const fs::path out = opt.out;
    if (repro->parsed()) {
      const RunConfig cfg = resolve(opt, full_scale_config());
      reproduce_full_scale(cfg, out, opt.threads, opt.ack_budget);
      return kOk;
    }
    const RunConfig cfg = resolve(opt, RunConfig{});
    if (simulate->parsed()) return run_simulate(cfg, out);
    if (sweep->parsed()) return run_sweep(cfg, out, opt.threads);
    if (exitp->parsed()) return run_exit_prob(cfg, out, opt.threads);
    if (verify->parsed()) return run_verify(cfg, out);
    if (gen->parsed()) return run_gen_data(cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DivergenceError& e) {
    std::cerr << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
