#pragma once

#include "bagged_rl/agents.hpp"
#include "bagged_rl/causal_env.hpp"
#include "bagged_rl/env_params.hpp"
#include "bagged_rl/stats.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace bagged_rl {

struct ExperimentConfig {
  std::vector<std::string> roster;  // EnvParams paths, resolved against the config file
  VariantSpec variant;
  std::vector<AgentConfig> agents;
  int horizon = 252;
  int replications = 100;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  bool plots = true;
  int workers = 1;

  void validate() const;
};

// Unknown keys are rejected. Relative roster paths are taken relative to
// base_dir.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
// Also applies the BAGGED_RL_SEED override when the variable is set.
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);

struct ResultRow {
  std::string agent;
  int env = 0;
  int replication = 0;
  double total_reward = 0.0;
  double delta_vs_zero = 0.0;
  std::vector<double> cumulative_delta;  // per day, agent minus zero policy
  std::string error;                     // non-empty if the cell failed
};

struct ResultsTable {
  std::vector<ResultRow> rows;  // sorted by (agent order, env, replication)
  std::vector<std::string> agents;
  int envs = 0;
  int replications = 0;

  bool any_failed() const;
  // Per-replication roster average of delta_vs_zero for one agent.
  std::vector<double> replication_means(const std::string& agent) const;
};

// Seeds. The environment seed is shared by every agent (and the zero-policy
// companion) of a cell; the agent seed depends on the agent name only.
std::uint64_t env_seed(std::uint64_t master, int env, int replication);
std::uint64_t agent_seed(std::uint64_t master, int env, int replication, const std::string& agent);

// Runs one online episode: the agent acts on each context and sees each
// mediator and bag outcome as it happens.
BagTrajectory run_agent_episode(const EnvParams& p, int horizon, std::uint64_t seed, Agent& agent);

// Replaces the agent list with BRLSVI on the S_prime, S_doubleprime and
// S_tripleprime bases, keeping the first agent's hyperparameters.
ExperimentConfig state_comparison_config(ExperimentConfig cfg);

// Loads the roster, applies the variant and runs every cell.
ResultsTable run_experiment(const ExperimentConfig& cfg);
// Runs on already-built environments (the variant is not applied again).
ResultsTable run_experiment(const ExperimentConfig& cfg, const std::vector<EnvParams>& envs);

struct AgentSummary {
  std::string agent;
  MeanCi delta;                    // over replications of the roster average
  std::vector<double> daily_mean;  // cumulative delta per day
  std::vector<double> daily_lo, daily_hi;
  int failed_cells = 0;
};

struct Summary {
  std::vector<AgentSummary> agents;
};

// Throws DegenerateError with fewer than two replications.
Summary summarize(const ResultsTable& results);
nlohmann::json to_json(const Summary& s);
Summary summary_from_json(const nlohmann::json& j);
Summary load_summary(const std::string& path);

// Writes results.csv, daily.csv, summary.json and (when plots is set)
// cumulative.svg into dir, overwriting earlier files.
void emit_outputs(const ResultsTable& results, const std::string& dir, bool plots = true);

std::string results_csv(const ResultsTable& results);
ResultsTable read_results_csv(const std::string& path);

// SVG line plot: one mean line and CI band per agent over days.
std::string plot_svg(const Summary& s, const std::string& title);

}  // namespace bagged_rl
