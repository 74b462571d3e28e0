#include "bagged_rl/experiment.hpp"

#include "bagged_rl/errors.hpp"
#include "bagged_rl/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <utility>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace bagged_rl {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  if (roster.empty()) throw ConfigError("experiment roster is empty");
  if (agents.empty()) throw ConfigError("experiment has no agents");
  if (replications < 1) throw ConfigError("replications must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  std::set<std::string> names;
  for (const auto& a : agents) {
    a.validate();
    if (a.name.empty()) throw ConfigError("every agent needs a name");
    if (!names.insert(a.name).second) throw ConfigError("duplicate agent name: " + a.name);
    if (horizon < a.warmup_L) throw ConfigError("horizon must be at least the warm-up length");
  }
  if (horizon < 1) throw ConfigError("horizon must be positive");
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  static const std::set<std::string> keys{"roster", "variant", "agents", "horizon", "replications",
                                          "seed", "output_dir", "plots", "workers"};
  if (!j.is_object()) throw ConfigError("experiment config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw ConfigError("unknown experiment key: " + it.key());
  ExperimentConfig c;
  try {
    for (const auto& r : j.at("roster")) {
      fs::path p = r.get<std::string>();
      if (p.is_relative()) p = fs::path(base_dir) / p;
      c.roster.push_back(p.lexically_normal().string());
    }
    if (j.contains("variant")) c.variant = variant_spec_from_json(j["variant"]);
    for (const auto& a : j.at("agents")) c.agents.push_back(agent_config_from_json(a));
    c.horizon = j.value("horizon", 252);
    c.replications = j.value("replications", 100);
    c.seed = j.value("seed", std::uint64_t{0});
    c.output_dir = j.value("output_dir", std::string("out"));
    c.plots = j.value("plots", true);
    c.workers = j.value("workers", 1);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  ExperimentConfig c = experiment_config_from_json(j, fs::path(path).parent_path().string());
  if (const char* s = std::getenv("BAGGED_RL_SEED"); s && *s) {
    char* end = nullptr;
    errno = 0;
    unsigned long long v = std::strtoull(s, &end, 10);
    if (errno != 0 || *end != '\0') throw ConfigError("BAGGED_RL_SEED must be a nonnegative integer");
    c.seed = v;
  }
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : c.agents) agents.push_back(to_json(a));
  return {{"roster", c.roster},   {"variant", to_json(c.variant)},     {"agents", agents},
          {"horizon", c.horizon}, {"replications", c.replications},    {"seed", c.seed},
          {"output_dir", c.output_dir}, {"plots", c.plots}, {"workers", c.workers}};
}

bool ResultsTable::any_failed() const {
  return std::any_of(rows.begin(), rows.end(), [](const ResultRow& r) { return !r.error.empty(); });
}

std::vector<double> ResultsTable::replication_means(const std::string& agent) const {
  std::vector<double> sum(static_cast<std::size_t>(replications), 0.0);
  std::vector<int> n(static_cast<std::size_t>(replications), 0);
  for (const auto& r : rows) {
    if (r.agent != agent || !r.error.empty()) continue;
    sum[static_cast<std::size_t>(r.replication)] += r.delta_vs_zero;
    ++n[static_cast<std::size_t>(r.replication)];
  }
  // A replication with a failed cell is dropped.
  std::vector<double> out;
  for (std::size_t i = 0; i < sum.size(); ++i)
    if (n[i] == envs && envs > 0) out.push_back(sum[i] / envs);
  return out;
}

std::uint64_t env_seed(std::uint64_t master, int env, int replication) {
  return derive_seed(master, static_cast<std::uint64_t>(env), static_cast<std::uint64_t>(replication), 0,
                     fnv1a("env"));
}

std::uint64_t agent_seed(std::uint64_t master, int env, int replication, const std::string& agent) {
  return derive_seed(master, static_cast<std::uint64_t>(env), static_cast<std::uint64_t>(replication),
                     fnv1a(agent), fnv1a("agent"));
}

BagTrajectory run_agent_episode(const EnvParams& p, int horizon, std::uint64_t seed, Agent& agent) {
  if (agent.K() != p.K) throw ConfigError("agent and environment disagree on K");
  Rng rng(seed);
  BagTrajectory traj;
  auto [E0, R0] = draw_initial_state(p, rng);
  traj.E0 = E0;
  traj.R0 = R0;
  double E = E0, R = R0;
  traj.bags.reserve(static_cast<std::size_t>(horizon));
  for (int d = 0; d < horizon; ++d) {
    BagStepper st(p, E, R, draw_bag_noise(p, rng));
    agent.begin_bag(E, R);
    while (!st.done()) {
      const int a = agent.act(st.context());
      agent.observe_mediator(st.act(a));
    }
    traj.bags.push_back(st.finish());
    agent.end_bag(traj.bags.back());
    E = traj.bags.back().E;
    R = traj.bags.back().R;
  }
  return traj;
}

namespace {

std::vector<double> cumulative(const BagTrajectory& t) {
  std::vector<double> c;
  double s = 0.0;
  for (const auto& b : t.bags) c.push_back(s += b.R);
  return c;
}

}  // namespace

ExperimentConfig state_comparison_config(ExperimentConfig cfg) {
  AgentConfig base = cfg.agents.empty() ? AgentConfig::defaults(AgentKind::brlsvi) : cfg.agents.front();
  base.kind = AgentKind::brlsvi;
  cfg.agents.clear();
  for (auto [name, basis] : {std::pair{"S_prime", BasisKind::brlsvi_Sp}, std::pair{"S_doubleprime", BasisKind::brlsvi_Spp},
                             std::pair{"S_tripleprime", BasisKind::brlsvi_Sppp}}) {
    AgentConfig a = base;
    a.name = name;
    a.basis = basis;
    cfg.agents.push_back(a);
  }
  return cfg;
}

ResultsTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<EnvParams> envs;
  for (const auto& path : cfg.roster) envs.push_back(make_variant(load_env_params(path), cfg.variant));
  return run_experiment(cfg, envs);
}

ResultsTable run_experiment(const ExperimentConfig& cfg, const std::vector<EnvParams>& envs) {
  cfg.validate();
  if (envs.empty()) throw ConfigError("no environments");
  ResultsTable table;
  for (const auto& a : cfg.agents) table.agents.push_back(a.name);
  table.envs = static_cast<int>(envs.size());
  table.replications = cfg.replications;
  const int n_agents = static_cast<int>(cfg.agents.size());
  const int n_cells = table.envs * cfg.replications;
  table.rows.resize(static_cast<std::size_t>(n_cells * n_agents));

  // Slot of (agent, env, rep) in the canonical order.
  auto slot = [&](int a, int e, int r) {
    return static_cast<std::size_t>((a * table.envs + e) * cfg.replications + r);
  };

  auto run_cell = [&](int cell) {
    const int e = cell / cfg.replications, r = cell % cfg.replications;
    const EnvParams& p = envs[static_cast<std::size_t>(e)];
    const std::uint64_t es = env_seed(cfg.seed, e, r);
    std::vector<double> zero;
    std::string zero_error;
    try {
      zero = cumulative(simulate_episode(p, cfg.horizon, es, [](const StepView&) { return 0; }));
    } catch (const std::exception& ex) {
      zero_error = std::string("zero-policy run failed: ") + ex.what();
    }
    for (int a = 0; a < n_agents; ++a) {
      ResultRow& row = table.rows[slot(a, e, r)];
      row.agent = cfg.agents[static_cast<std::size_t>(a)].name;
      row.env = e;
      row.replication = r;
      if (!zero_error.empty()) {
        row.error = zero_error;
        continue;
      }
      try {
        AgentConfig ac = cfg.agents[static_cast<std::size_t>(a)];
        ac.seed = agent_seed(cfg.seed, e, r, ac.name);
        auto agent = make_agent(ac, p.K);
        auto c = cumulative(run_agent_episode(p, cfg.horizon, es, *agent));
        row.total_reward = c.back();
        row.delta_vs_zero = c.back() - zero.back();
        row.cumulative_delta.resize(c.size());
        for (std::size_t d = 0; d < c.size(); ++d) row.cumulative_delta[d] = c[d] - zero[d];
      } catch (const std::exception& ex) {
        row.error = ex.what();
      }
    }
  };

  const int workers = std::min(cfg.workers, n_cells);
  if (workers <= 1) {
    for (int c = 0; c < n_cells; ++c) run_cell(c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (int c; (c = next.fetch_add(1)) < n_cells;) run_cell(c);
      });
    for (auto& t : pool) t.join();
  }
  return table;
}

Summary summarize(const ResultsTable& results) {
  if (results.replications < 2) throw DegenerateError("a confidence interval needs at least two replications");
  Summary s;
  for (const auto& name : results.agents) {
    AgentSummary a;
    a.agent = name;
    for (const auto& r : results.rows)
      if (r.agent == name && !r.error.empty()) ++a.failed_cells;
    const auto means = results.replication_means(name);
    // Too many failed cells: report the usable count and leave the interval empty.
    if (means.size() >= 2) a.delta = mean_ci(means);
    else a.delta.n = static_cast<int>(means.size());
    // Daily curves: roster average per replication first, then the interval.
    std::map<int, std::vector<double>> per_rep;
    std::map<int, int> counts;
    std::size_t days = 0;
    for (const auto& r : results.rows) {
      if (r.agent != name || !r.error.empty()) continue;
      days = std::max(days, r.cumulative_delta.size());
    }
    if (days > 0) {
      for (const auto& r : results.rows) {
        if (r.agent != name || !r.error.empty() || r.cumulative_delta.size() != days) continue;
        auto& v = per_rep[r.replication];
        v.resize(days, 0.0);
        for (std::size_t d = 0; d < days; ++d) v[d] += r.cumulative_delta[d];
        ++counts[r.replication];
      }
      std::vector<std::vector<double>> by_day(days);
      for (auto& [rep, v] : per_rep) {
        if (counts[rep] != results.envs) continue;
        for (std::size_t d = 0; d < days; ++d) by_day[d].push_back(v[d] / results.envs);
      }
      if (by_day[0].size() >= 2) {
        for (std::size_t d = 0; d < days; ++d) {
          MeanCi m = mean_ci(by_day[d]);
          a.daily_mean.push_back(m.mean);
          a.daily_lo.push_back(m.lo);
          a.daily_hi.push_back(m.hi);
        }
      }
    }
    s.agents.push_back(std::move(a));
  }
  return s;
}

nlohmann::json to_json(const Summary& s) {
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : s.agents)
    agents.push_back({{"agent", a.agent},
                      {"mean", a.delta.mean},
                      {"se", a.delta.se},
                      {"ci_lo", a.delta.lo},
                      {"ci_hi", a.delta.hi},
                      {"replications", a.delta.n},
                      {"failed_cells", a.failed_cells},
                      {"daily_mean", a.daily_mean},
                      {"daily_lo", a.daily_lo},
                      {"daily_hi", a.daily_hi}});
  return {{"agents", agents}};
}

Summary summary_from_json(const nlohmann::json& j) {
  Summary s;
  try {
    for (const auto& x : j.at("agents")) {
      AgentSummary a;
      a.agent = x.at("agent").get<std::string>();
      a.delta.mean = x.at("mean").get<double>();
      a.delta.se = x.at("se").get<double>();
      a.delta.lo = x.at("ci_lo").get<double>();
      a.delta.hi = x.at("ci_hi").get<double>();
      a.delta.n = x.at("replications").get<int>();
      a.failed_cells = x.at("failed_cells").get<int>();
      a.daily_mean = x.at("daily_mean").get<std::vector<double>>();
      a.daily_lo = x.at("daily_lo").get<std::vector<double>>();
      a.daily_hi = x.at("daily_hi").get<std::vector<double>>();
      s.agents.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed summary: ") + e.what());
  }
  return s;
}

Summary load_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return summary_from_json(j);
}

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string x;
  while (std::getline(ss, x, ',')) f.push_back(x);
  return f;
}

}  // namespace

std::string results_csv(const ResultsTable& results) {
  std::string s = "agent,env,replication,total_reward,delta_vs_zero\n";
  for (const auto& r : results.rows) {
    if (!r.error.empty()) continue;
    s += r.agent + "," + std::to_string(r.env) + "," + std::to_string(r.replication) + "," +
         num(r.total_reward) + "," + num(r.delta_vs_zero) + "\n";
  }
  return s;
}

void emit_outputs(const ResultsTable& results, const std::string& dir, bool plots) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  const fs::path d(dir);
  write_file(d / "results.csv", results_csv(results));
  std::string daily = "agent,env,replication,day,cumulative_delta\n";
  std::string errors = "agent,env,replication,error\n";
  for (const auto& r : results.rows) {
    if (!r.error.empty()) {
      errors += r.agent + "," + std::to_string(r.env) + "," + std::to_string(r.replication) + ",\"" + r.error + "\"\n";
      continue;
    }
    for (std::size_t t = 0; t < r.cumulative_delta.size(); ++t)
      daily += r.agent + "," + std::to_string(r.env) + "," + std::to_string(r.replication) + "," +
               std::to_string(t + 1) + "," + num(r.cumulative_delta[t]) + "\n";
  }
  write_file(d / "daily.csv", daily);
  if (results.any_failed()) write_file(d / "errors.csv", errors);
  if (results.replications >= 2 && !results.rows.empty()) {
    Summary s = summarize(results);
    write_file(d / "summary.json", to_json(s).dump(2) + "\n");
    if (plots) write_file(d / "cumulative.svg", plot_svg(s, "Cumulative reward minus zero policy"));
  }
}

ResultsTable read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "agent,env,replication,total_reward,delta_vs_zero") throw ConfigError("unexpected results header");
  ResultsTable t;
  std::map<std::tuple<std::string, int, int>, std::size_t> index;
  int max_env = -1, max_rep = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 5) throw ConfigError("malformed results row: " + line);
    ResultRow r;
    r.agent = f[0];
    r.env = std::stoi(f[1]);
    r.replication = std::stoi(f[2]);
    r.total_reward = std::stod(f[3]);
    r.delta_vs_zero = std::stod(f[4]);
    if (std::find(t.agents.begin(), t.agents.end(), r.agent) == t.agents.end()) t.agents.push_back(r.agent);
    max_env = std::max(max_env, r.env);
    max_rep = std::max(max_rep, r.replication);
    index[{r.agent, r.env, r.replication}] = t.rows.size();
    t.rows.push_back(std::move(r));
  }
  t.envs = max_env + 1;
  t.replications = max_rep + 1;
  const fs::path daily = fs::path(path).parent_path() / "daily.csv";
  std::ifstream din(daily);
  if (din) {
    std::getline(din, line);
    while (std::getline(din, line)) {
      if (line.empty()) continue;
      auto f = split_csv(line);
      if (f.size() != 5) throw ConfigError("malformed daily row: " + line);
      auto it = index.find({f[0], std::stoi(f[1]), std::stoi(f[2])});
      if (it == index.end()) continue;
      auto& v = t.rows[it->second].cumulative_delta;
      const std::size_t day = static_cast<std::size_t>(std::stoi(f[3]));
      if (v.size() < day) v.resize(day, 0.0);
      v[day - 1] = std::stod(f[4]);
    }
  }
  return t;
}

}  // namespace bagged_rl
