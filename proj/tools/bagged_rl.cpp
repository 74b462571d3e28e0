#include "bagged_rl/causal_env.hpp"
#include "bagged_rl/dag_env.hpp"
#include "bagged_rl/errors.hpp"
#include "bagged_rl/experiment.hpp"
#include "bagged_rl/fqi.hpp"
#include "bagged_rl/oracle.hpp"
#include "bagged_rl/periodic_mdp.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace bagged_rl;

namespace {

int cmd_solve(const std::string& path, double tol, bool as_json) {
  TabularPeriodicMdp mdp = load_mdp(path);
  IterationTrace trace;
  QFunctions q = value_iteration(mdp, tol, 1000000, nullptr, &trace);
  auto act = greedy_actions(q);
  if (as_json) {
    nlohmann::json j{{"q", to_json(q)}, {"policy", act}, {"sweeps", trace.sweeps},
                     {"residual", bellman_residual(mdp, q)}};
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("converged in %d sweeps, Bellman residual %.3g\n", trace.sweeps, bellman_residual(mdp, q));
  for (int k = 0; k < mdp.K; ++k) {
    Eigen::VectorXd v = q.values(k);
    for (int s = 0; s < mdp.state_counts[k]; ++s)
      std::printf("k=%d s=%d V=%.10f a*=%d\n", k, s, v(s), act[k][s]);
  }
  std::printf("initial value %.10f\n", mdp.initial_dist.dot(q.values(0)));
  return 0;
}

VariantSpec make_spec(const std::string& kind, double xi, const std::vector<double>& coef, double divisor) {
  VariantSpec v;
  v.kind = variant_kind_from_string(kind);
  v.xi = xi;
  v.coefficients = coef;
  v.scale_divisor = divisor;
  return v;
}

void print_stationarity(const EnvParams& p) {
  for (int pattern = 0; pattern < 2; ++pattern) {
    StationarityReport r = check_stationarity(p, pattern);
    std::printf("actions all %d: |eigenvalues| = %.6f, %.6f -> %s\n", pattern, r.eigenvalues[0], r.eigenvalues[1],
                r.stationary ? "stationary" : "explosive");
  }
}

int cmd_variant(const std::string& path, const VariantSpec& spec, const std::string& out) {
  EnvParams base = load_env_params(path);
  VariantResult r = make_variant_detailed(base, spec);
  std::printf("variant %s: scale %.6g after %d halvings\n", to_string(spec.kind).c_str(), r.scale, r.halvings);
  print_stationarity(r.params);
  if (!out.empty()) save_env_params(r.params, out);
  return 0;
}

int cmd_check(const std::string& path) {
  EnvParams p = load_env_params(path);
  print_stationarity(p);
  const double mean_C = p.theta_C[0];
  for (int pattern = 0; pattern < 2; ++pattern) {
    std::vector<int> acts(static_cast<std::size_t>(p.K), pattern);
    try {
      auto m = limiting_mean(p, acts, mean_C);
      std::printf("actions all %d: limiting mean R = %.6f, E = %.6f\n", pattern, m[0], m[1]);
    } catch (const SingularError& e) {
      std::printf("actions all %d: %s\n", pattern, e.what());
    }
  }
  return stationary_under_both(p) ? 0 : 1;
}

int cmd_ste(const std::string& path, const VariantSpec& spec, int episodes, int horizon, int fqi_episodes,
            std::uint64_t seed) {
  EnvParams p = make_variant(load_env_params(path), spec);
  FqiConfig fc;
  fc.episodes = fqi_episodes;
  fc.horizon = horizon;
  fc.seed = derive_seed(seed, 0, 0, 0, fnv1a("fqi"));
  FqiResult f = fitted_q_iteration(p, fc);
  std::printf("FQI: %d iterations, converged %s, %ld rows\n", f.iterations, f.converged ? "yes" : "no", f.rows);
  SteReport r = estimate_ste_detailed(p, greedy_step_policy(fc.basis, f.beta), episodes, horizon, seed);
  std::printf("STE %.6f (policy mean %.4f, zero mean %.4f, zero sd %.4f)\n", r.ste, r.mean_star, r.mean_zero,
              r.sd_zero);
  return 0;
}

int cmd_theorem2(const std::string& path, const std::string& fine, const std::string& coarse, double gamma_bar,
                 bool as_json) {
  DiscreteDagEnv env = load_dag_env(path);
  GapReport r = theorem2_gap(env, dag_state_kind_from_string(fine), dag_state_kind_from_string(coarse), gamma_bar);
  if (as_json) {
    std::cout << to_json(r).dump(2) << "\n";
    return 0;
  }
  std::printf("%-3s %-28s %8s %12s %12s %12s %12s %5s\n", "k", "coarse state", "mass", "V_fine", "V_coarse", "gap",
              "jensen", "cond");
  for (const auto& row : r.rows)
    std::printf("%-3d %-28s %8.4f %12.8f %12.8f %12.3e %12.3e %5s\n", row.k + 1, row.label.c_str(), row.mass,
                row.v_fine, row.v_coarse, row.gap, row.jensen, row.condition_holds ? "yes" : "no");
  std::printf("initial value: fine %.10f, coarse %.10f\n", r.initial_fine, r.initial_coarse);
  return 0;
}

void print_summary(const ResultsTable& t) {
  Summary s = summarize(t);
  for (const auto& a : s.agents)
    std::printf("%-16s delta vs zero %9.4f  se %.4f  95%% CI [%.4f, %.4f]%s\n", a.agent.c_str(), a.delta.mean,
                a.delta.se, a.delta.lo, a.delta.hi,
                a.failed_cells ? (" (" + std::to_string(a.failed_cells) + " failed cells)").c_str() : "");
}

int cmd_simulate(const std::string& path, const std::string& out, int workers) {
  ExperimentConfig cfg = load_experiment_config(path);
  if (workers > 0) cfg.workers = workers;
  if (!out.empty()) cfg.output_dir = out;
  ResultsTable t = run_experiment(cfg);
  emit_outputs(t, cfg.output_dir, cfg.plots);
  if (t.replications >= 2) print_summary(t);
  for (const auto& r : t.rows)
    if (!r.error.empty())
      std::fprintf(stderr, "cell %s/env %d/rep %d failed: %s\n", r.agent.c_str(), r.env, r.replication,
                   r.error.c_str());
  return t.any_failed() ? 1 : 0;
}

int cmd_compare_states(const std::string& path, const std::string& out, int workers) {
  ExperimentConfig cfg = load_experiment_config(path);
  if (workers > 0) cfg.workers = workers;
  if (!out.empty()) cfg.output_dir = out;
  if (cfg.variant.kind != VariantKind::interaction_MA)
    std::fprintf(stderr, "note: the state comparison is meant for the interaction_MA variant\n");
  cfg = state_comparison_config(cfg);
  ResultsTable t = run_experiment(cfg);
  emit_outputs(t, cfg.output_dir, cfg.plots);
  print_summary(t);
  const auto sp = t.replication_means("S_prime");
  for (const char* other : {"S_doubleprime", "S_tripleprime"}) {
    const auto o = t.replication_means(other);
    if (o.size() != sp.size() || sp.size() < 2) continue;
    PairedTest pt = paired_t_greater(sp, o);
    std::printf("S_prime - %s: mean %.4f, one-sided paired p = %.4g\n", other, pt.mean_diff, pt.p);
  }
  return t.any_failed() ? 1 : 0;
}

int cmd_plot(const std::string& csv, const std::string& out) {
  ResultsTable t = read_results_csv(csv);
  Summary s = summarize(t);
  std::string target = out.empty() ? (std::filesystem::path(csv).parent_path() / "cumulative.svg").string() : out;
  std::ofstream f(target, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + target);
  f << plot_svg(s, "Cumulative reward minus zero policy");
  std::printf("wrote %s\n", target.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement learning with bagged decision times"};
  app.require_subcommand(1);

  std::string path, out, kind = "vanilla", fine = "S_prime", coarse = "S_doubleprime";
  double tol = 1e-10, xi = 0.0, divisor = 1.0, gamma_bar = 0.9;
  bool as_json = false;
  int workers = 0, episodes = 500, horizon = 252, fqi_episodes = 2000;
  std::uint64_t seed = 0;
  std::vector<double> coef;

  auto* solve = app.add_subcommand("solve", "value iteration on a tabular periodic MDP");
  solve->add_option("mdp", path, "MDP JSON file")->required()->check(CLI::ExistingFile);
  solve->add_option("--tol", tol, "stopping tolerance on the Bellman residual");
  solve->add_flag("--json", as_json, "print JSON");

  auto add_variant_opts = [&](CLI::App* c) {
    c->add_option("--kind", kind, "variant kind");
    c->add_option("--xi", xi, "shift size");
    c->add_option("--coef", coef, "added coefficients");
    c->add_option("--scale-divisor", divisor, "divisor for add_AR coefficients");
  };
  auto* variant = app.add_subcommand("variant", "build a testbed variant");
  variant->add_option("env", path, "EnvParams JSON")->required()->check(CLI::ExistingFile);
  add_variant_opts(variant);
  variant->add_option("-o,--output", out, "write the variant params here");

  auto* check = app.add_subcommand("check", "stationarity and limiting means");
  check->add_option("env", path, "EnvParams JSON")->required()->check(CLI::ExistingFile);

  auto* ste = app.add_subcommand("ste", "standardized treatment effect of an FQI policy");
  ste->add_option("env", path, "EnvParams JSON")->required()->check(CLI::ExistingFile);
  add_variant_opts(ste);
  ste->add_option("--episodes", episodes, "episodes per arm");
  ste->add_option("--horizon", horizon, "bags per episode");
  ste->add_option("--fqi-episodes", fqi_episodes, "random-action episodes for FQI");
  ste->add_option("--seed", seed, "seed");

  auto* thm = app.add_subcommand("theorem2", "value gap between a fine and a coarse state");
  thm->add_option("--instance", path, "DiscreteDagEnv JSON")->required()->check(CLI::ExistingFile);
  thm->add_option("--fine", fine, "S, S_prime or S_doubleprime");
  thm->add_option("--coarse", coarse, "S, S_prime or S_doubleprime");
  thm->add_option("--gamma-bar", gamma_bar, "per-bag discount");
  thm->add_flag("--json", as_json, "print JSON");

  auto* sim = app.add_subcommand("simulate", "run an experiment grid");
  sim->add_option("config", path, "experiment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--output", out, "output directory");
  sim->add_option("--workers", workers, "worker threads");

  auto* cmp = app.add_subcommand("compare-states", "BRLSVI with S', S'' and S''' states");
  cmp->add_option("config", path, "experiment JSON")->required()->check(CLI::ExistingFile);
  cmp->add_option("-o,--output", out, "output directory");
  cmp->add_option("--workers", workers, "worker threads");

  auto* plot = app.add_subcommand("plot", "plot results.csv (and daily.csv next to it)");
  plot->add_option("results", path, "results.csv")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--output", out, "SVG file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(path, tol, as_json);
    if (*variant) return cmd_variant(path, make_spec(kind, xi, coef, divisor), out);
    if (*check) return cmd_check(path);
    if (*ste) return cmd_ste(path, make_spec(kind, xi, coef, divisor), episodes, horizon, fqi_episodes, seed);
    if (*thm) return cmd_theorem2(path, fine, coarse, gamma_bar, as_json);
    if (*sim) return cmd_simulate(path, out, workers);
    if (*cmp) return cmd_compare_states(path, out, workers);
    if (*plot) return cmd_plot(path, out);
  } catch (const NonMarkovError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
