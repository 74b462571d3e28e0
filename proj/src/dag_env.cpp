#include "bagged_rl/dag_env.hpp"

#include "bagged_rl/errors.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace bagged_rl {

Cpt::Cpt(std::vector<int> parents, int child) : parent_sizes(std::move(parents)), child_size(child) {
  table.assign(rows() * static_cast<std::size_t>(child_size), 0.0);
}

std::size_t Cpt::rows() const {
  std::size_t n = 1;
  for (int s : parent_sizes) n *= static_cast<std::size_t>(s);
  return n;
}

void Cpt::validate(const std::string& name) const {
  if (table.size() != rows() * static_cast<std::size_t>(child_size))
    throw ShapeError("CPT " + name + " has the wrong number of entries");
  for (std::size_t r = 0; r < rows(); ++r) {
    double s = 0.0;
    for (int c = 0; c < child_size; ++c) {
      double v = (*this)(r, c);
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("CPT " + name + " has an invalid entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) throw ConfigError("CPT " + name + " row does not sum to 1");
  }
}

namespace {

constexpr int kMaxK = 3;

std::vector<int> repeat(int value, int times) { return std::vector<int>(static_cast<std::size_t>(times), value); }

std::vector<int> concat(std::vector<int> a, const std::vector<int>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Expected parent layouts for an env's sizes and flags.
struct Layout {
  std::vector<int> C, M, N, E, R;
};

Layout layout(const DiscreteDagEnv& env) {
  Layout l;
  l.C = env.flag_RC ? std::vector<int>{env.nE, env.nR} : std::vector<int>{};
  l.M = {env.nE, env.nR, env.nC, 2};
  l.N = {env.nE, 2};
  l.E = concat({env.nE}, repeat(env.nN, env.K));
  if (env.flag_RE) l.E.push_back(env.nR);
  l.R = concat(concat({env.nR}, repeat(env.nM, env.K)), {env.nE});
  if (env.flag_AR) l.R = concat(l.R, repeat(2, env.K));
  return l;
}

void check_layout(const Cpt& c, const std::vector<int>& parents, int child, const std::string& name) {
  if (c.parent_sizes != parents || c.child_size != child)
    throw ShapeError("CPT " + name + " does not match the alphabet sizes and flags");
  c.validate(name);
}

}  // namespace

void DiscreteDagEnv::validate() const {
  if (K < 1 || K > kMaxK) throw ConfigError("DiscreteDagEnv supports 1 <= K <= 3");
  for (int n : {nE, nR, nC, nM, nN})
    if (n < 1 || n > 3) throw ConfigError("alphabet sizes must be between 1 and 3");
  if (static_cast<int>(r_values.size()) != nR) throw ShapeError("r_values must have nR entries");
  if (static_cast<int>(prior.size()) != nE * nR) throw ShapeError("prior must have nE * nR entries");
  double s = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0)) throw ConfigError("prior has a negative entry");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ConfigError("prior does not sum to 1");
  Layout l = layout(*this);
  check_layout(C, l.C, nC, "C");
  if (static_cast<int>(M.size()) != K || static_cast<int>(N.size()) != K)
    throw ShapeError("M and N need one CPT per step");
  for (int k = 0; k < K; ++k) {
    check_layout(M[k], l.M, nM, "M" + std::to_string(k + 1));
    check_layout(N[k], l.N, nN, "N" + std::to_string(k + 1));
  }
  check_layout(E, l.E, nE, "E");
  check_layout(R, l.R, nR, "R");
}

// JSON: each CPT is a nested array, one nesting level per parent plus the
// child distribution innermost.
namespace {

nlohmann::json nest(const Cpt& c, std::size_t level, std::size_t offset) {
  nlohmann::json j = nlohmann::json::array();
  if (level == c.parent_sizes.size()) {
    for (int v = 0; v < c.child_size; ++v) j.push_back(c(offset, v));
    return j;
  }
  for (int i = 0; i < c.parent_sizes[level]; ++i)
    j.push_back(nest(c, level + 1, offset * static_cast<std::size_t>(c.parent_sizes[level]) + static_cast<std::size_t>(i)));
  return j;
}

Cpt unnest(const nlohmann::json& j, const std::vector<int>& parents, int child, const std::string& name) {
  Cpt c(parents, child);
  std::function<void(const nlohmann::json&, std::size_t, std::size_t)> rec =
      [&](const nlohmann::json& node, std::size_t level, std::size_t offset) {
        if (!node.is_array()) throw ShapeError("CPT " + name + " is not a nested array");
        if (level == parents.size()) {
          if (node.size() != static_cast<std::size_t>(child)) throw ShapeError("CPT " + name + " has a wrong child size");
          for (int v = 0; v < child; ++v) c.at(offset, v) = node[static_cast<std::size_t>(v)].get<double>();
          return;
        }
        if (node.size() != static_cast<std::size_t>(parents[level]))
          throw ShapeError("CPT " + name + " has a wrong parent size");
        for (int i = 0; i < parents[level]; ++i)
          rec(node[static_cast<std::size_t>(i)], level + 1,
              offset * static_cast<std::size_t>(parents[level]) + static_cast<std::size_t>(i));
      };
  rec(j, 0, 0);
  return c;
}

}  // namespace

nlohmann::json to_json(const DiscreteDagEnv& env) {
  nlohmann::json j;
  j["K"] = env.K;
  j["sizes"] = {{"E", env.nE}, {"R", env.nR}, {"C", env.nC}, {"M", env.nM}, {"N", env.nN}};
  j["r_values"] = env.r_values;
  nlohmann::json prior = nlohmann::json::array();
  for (int e = 0; e < env.nE; ++e) {
    nlohmann::json row = nlohmann::json::array();
    for (int r = 0; r < env.nR; ++r) row.push_back(env.prior[static_cast<std::size_t>(e * env.nR + r)]);
    prior.push_back(row);
  }
  j["prior"] = prior;
  j["flags"] = {{"RE", env.flag_RE}, {"AR", env.flag_AR}, {"RC", env.flag_RC}};
  nlohmann::json cpt;
  cpt["C"] = nest(env.C, 0, 0);
  cpt["M"] = nlohmann::json::array();
  cpt["N"] = nlohmann::json::array();
  for (int k = 0; k < env.K; ++k) {
    cpt["M"].push_back(nest(env.M[k], 0, 0));
    cpt["N"].push_back(nest(env.N[k], 0, 0));
  }
  cpt["E"] = nest(env.E, 0, 0);
  cpt["R"] = nest(env.R, 0, 0);
  j["cpt"] = cpt;
  return j;
}

DiscreteDagEnv dag_env_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("DiscreteDagEnv JSON must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "K" && k != "sizes" && k != "r_values" && k != "prior" && k != "flags" && k != "cpt")
      throw ConfigError("unknown DiscreteDagEnv key: " + k);
  }
  DiscreteDagEnv env;
  try {
    env.K = j.at("K").get<int>();
    const auto& s = j.at("sizes");
    env.nE = s.at("E").get<int>();
    env.nR = s.at("R").get<int>();
    env.nC = s.at("C").get<int>();
    env.nM = s.at("M").get<int>();
    env.nN = s.at("N").get<int>();
    env.r_values = j.at("r_values").get<std::vector<double>>();
    env.prior.clear();
    for (const auto& row : j.at("prior"))
      for (const auto& v : row) env.prior.push_back(v.get<double>());
    if (j.contains("flags")) {
      const auto& f = j["flags"];
      env.flag_RE = f.value("RE", false);
      env.flag_AR = f.value("AR", false);
      env.flag_RC = f.value("RC", false);
    }
    if (env.K < 1 || env.K > kMaxK) throw ConfigError("DiscreteDagEnv supports 1 <= K <= 3");
    Layout l = layout(env);
    const auto& cpt = j.at("cpt");
    env.C = unnest(cpt.at("C"), l.C, env.nC, "C");
    const auto& Ms = cpt.at("M");
    const auto& Ns = cpt.at("N");
    if (Ms.size() != static_cast<std::size_t>(env.K) || Ns.size() != static_cast<std::size_t>(env.K))
      throw ShapeError("M and N need one CPT per step");
    for (int k = 0; k < env.K; ++k) {
      env.M.push_back(unnest(Ms[static_cast<std::size_t>(k)], l.M, env.nM, "M" + std::to_string(k + 1)));
      env.N.push_back(unnest(Ns[static_cast<std::size_t>(k)], l.N, env.nN, "N" + std::to_string(k + 1)));
    }
    env.E = unnest(cpt.at("E"), l.E, env.nE, "E");
    env.R = unnest(cpt.at("R"), l.R, env.nR, "R");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed DiscreteDagEnv: ") + e.what());
  }
  env.validate();
  return env;
}

DiscreteDagEnv load_dag_env(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return dag_env_from_json(j);
}

namespace {

void random_rows(Cpt& c, Rng& rng) {
  std::uniform_real_distribution<double> u(1.0, 6.0);
  for (std::size_t r = 0; r < c.rows(); ++r) {
    double s = 0.0;
    for (int v = 0; v < c.child_size; ++v) s += (c.at(r, v) = u(rng));
    for (int v = 0; v < c.child_size; ++v) c.at(r, v) /= s;
  }
}

}  // namespace

DiscreteDagEnv random_dag_env(Rng& rng, DagFlags flags, int K) {
  std::uniform_int_distribution<int> size(2, 3);
  DiscreteDagEnv env;
  env.K = K;
  env.nE = size(rng);
  env.nR = size(rng);
  env.nC = size(rng);
  env.nM = size(rng);
  env.nN = size(rng);
  env.flag_RE = flags.RE;
  env.flag_AR = flags.AR;
  env.flag_RC = flags.RC;
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  env.r_values.clear();
  for (int r = 0; r < env.nR; ++r) env.r_values.push_back(value(rng));
  Cpt prior({}, env.nE * env.nR);
  random_rows(prior, rng);
  env.prior = prior.table;
  Layout l = layout(env);
  env.C = Cpt(l.C, env.nC);
  random_rows(env.C, rng);
  for (int k = 0; k < K; ++k) {
    env.M.emplace_back(l.M, env.nM);
    random_rows(env.M.back(), rng);
    env.N.emplace_back(l.N, env.nN);
    random_rows(env.N.back(), rng);
  }
  env.E = Cpt(l.E, env.nE);
  random_rows(env.E, rng);
  env.R = Cpt(l.R, env.nR);
  random_rows(env.R, rng);
  env.validate();
  return env;
}

std::string to_string(DagStateKind k) {
  switch (k) {
    case DagStateKind::S: return "S";
    case DagStateKind::S_prime: return "S_prime";
    case DagStateKind::S_doubleprime: return "S_doubleprime";
  }
  return "unknown";
}

DagStateKind dag_state_kind_from_string(const std::string& s) {
  if (s == "S") return DagStateKind::S;
  if (s == "S_prime") return DagStateKind::S_prime;
  if (s == "S_doubleprime") return DagStateKind::S_doubleprime;
  throw ConfigError("unknown DAG state kind: " + s);
}

int StateSpace::size() const {
  int n = 1;
  for (int r : radices) n *= r;
  return n;
}

std::vector<int> StateSpace::decode(int index) const {
  std::vector<int> v(radices.size());
  for (std::size_t i = radices.size(); i-- > 0;) {
    v[i] = index % radices[i];
    index /= radices[i];
  }
  return v;
}

std::string StateSpace::label(int index) const {
  auto v = decode(index);
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << names[i] << "=" << v[i];
  return os.str();
}

StateCoords coords(DagStateKind k) {
  switch (k) {
    case DagStateKind::S: return {true, true, false, true};
    case DagStateKind::S_prime: return {true, false, true, true};
    case DagStateKind::S_doubleprime: return {false, false, true, false};
  }
  throw ConfigError("unknown DAG state kind");
}

StateSpace state_space(const DiscreteDagEnv& env, const StateCoords& c, int k) {
  StateSpace sp;
  sp.names = {"E", "R"};
  sp.radices = {env.nE, env.nR};
  auto add = [&](const char* name, int radix) {
    for (int j = 0; j < k; ++j) {
      sp.names.push_back(name + std::to_string(j + 1));
      sp.radices.push_back(radix);
    }
  };
  if (c.M) add("M", env.nM);
  if (c.N) add("N", env.nN);
  if (c.A) add("A", 2);
  if (c.C) {
    sp.names.push_back("C" + std::to_string(k + 1));
    sp.radices.push_back(env.nC);
  }
  return sp;
}

namespace {

struct Hist {
  int e = 0, r = 0;
  std::array<int, kMaxK> c{}, a{}, m{}, n{};
};

// Every within-bag history of the first bag, grouped by step. Children of
// history i at step k occupy a contiguous block at step k+1, in the order
// (a, m, n, c').
class Enumeration {
 public:
  explicit Enumeration(const DiscreteDagEnv& env) : env_(env) {
    const int K = env.K;
    hist_.resize(static_cast<std::size_t>(K));
    for (int e = 0; e < env.nE; ++e)
      for (int r = 0; r < env.nR; ++r)
        for (int c = 0; c < env.nC; ++c) {
          Hist h;
          h.e = e;
          h.r = r;
          h.c[0] = c;
          hist_[0].push_back(h);
        }
    for (int k = 0; k + 1 < K; ++k)
      for (const Hist& h : hist_[static_cast<std::size_t>(k)])
        for (int a = 0; a < 2; ++a)
          for (int m = 0; m < env.nM; ++m)
            for (int n = 0; n < env.nN; ++n)
              for (int c = 0; c < env.nC; ++c) {
                Hist g = h;
                g.a[k] = a;
                g.m[k] = m;
                g.n[k] = n;
                g.c[k + 1] = c;
                hist_[static_cast<std::size_t>(k + 1)].push_back(g);
              }
  }

  const std::vector<Hist>& at(int k) const { return hist_[static_cast<std::size_t>(k)]; }
  int branching() const { return 2 * env_.nM * env_.nN * env_.nC; }

  int encode(const StateCoords& c, const Hist& h, int k) const {
    int idx = h.e * env_.nR + h.r;
    if (c.M)
      for (int j = 0; j < k; ++j) idx = idx * env_.nM + h.m[j];
    if (c.N)
      for (int j = 0; j < k; ++j) idx = idx * env_.nN + h.n[j];
    if (c.A)
      for (int j = 0; j < k; ++j) idx = idx * 2 + h.a[j];
    if (c.C) idx = idx * env_.nC + h.c[k];
    return idx;
  }

  double pC(int e, int r, int c) const { return env_.C(env_.flag_RC ? static_cast<std::size_t>(e * env_.nR + r) : 0, c); }
  double pM(int k, const Hist& h, int a, int m) const {
    return env_.M[static_cast<std::size_t>(k)](static_cast<std::size_t>(((h.e * env_.nR + h.r) * env_.nC + h.c[k]) * 2 + a), m);
  }
  double pN(int k, const Hist& h, int a, int n) const {
    return env_.N[static_cast<std::size_t>(k)](static_cast<std::size_t>(h.e * 2 + a), n);
  }
  // h must hold the step-K action, mediators already.
  double pE(const Hist& h, int e_new) const {
    std::size_t idx = static_cast<std::size_t>(h.e);
    for (int j = 0; j < env_.K; ++j) idx = idx * static_cast<std::size_t>(env_.nN) + static_cast<std::size_t>(h.n[j]);
    if (env_.flag_RE) idx = idx * static_cast<std::size_t>(env_.nR) + static_cast<std::size_t>(h.r);
    return env_.E(idx, e_new);
  }
  double pR(const Hist& h, int e_new, int r_new) const {
    std::size_t idx = static_cast<std::size_t>(h.r);
    for (int j = 0; j < env_.K; ++j) idx = idx * static_cast<std::size_t>(env_.nM) + static_cast<std::size_t>(h.m[j]);
    idx = idx * static_cast<std::size_t>(env_.nE) + static_cast<std::size_t>(e_new);
    if (env_.flag_AR)
      for (int j = 0; j < env_.K; ++j) idx = idx * 2 + static_cast<std::size_t>(h.a[j]);
    return env_.R(idx, r_new);
  }

 private:
  const DiscreteDagEnv& env_;
  std::vector<std::vector<Hist>> hist_;
};

// Behaviour: prior over (E_0, R_0) and P(A = 1 | state) per step.
struct Behaviour {
  std::vector<double> prior;
  std::vector<std::vector<double>> p1;
};

// Forward weights: probability of each history at step k, excluding the
// action taken at step k.
std::vector<std::vector<double>> forward(const DiscreteDagEnv& env, const Enumeration& en,
                                         const StateCoords& sc, const Behaviour& b) {
  const int K = env.K;
  std::vector<std::vector<double>> w(static_cast<std::size_t>(K));
  for (const Hist& h : en.at(0))
    w[0].push_back(b.prior[static_cast<std::size_t>(h.e * env.nR + h.r)] * en.pC(h.e, h.r, h.c[0]));
  for (int k = 0; k + 1 < K; ++k) {
    const auto& H = en.at(k);
    auto& next = w[static_cast<std::size_t>(k + 1)];
    next.reserve(en.at(k + 1).size());
    for (std::size_t i = 0; i < H.size(); ++i) {
      const Hist& h = H[i];
      const double p1 = b.p1[static_cast<std::size_t>(k)][static_cast<std::size_t>(en.encode(sc, h, k))];
      for (int a = 0; a < 2; ++a)
        for (int m = 0; m < env.nM; ++m)
          for (int n = 0; n < env.nN; ++n)
            for (int c = 0; c < env.nC; ++c)
              next.push_back(w[static_cast<std::size_t>(k)][i] * (a ? p1 : 1.0 - p1) * en.pM(k, h, a, m) *
                             en.pN(k, h, a, n) * en.pC(h.e, h.r, c));
    }
  }
  return w;
}

struct Kernels {
  std::vector<Eigen::MatrixXd> P;  // P[k]: rows s*2+a of step k, cols states of step k+1
  Eigen::MatrixXd reward;          // step K-1, |S| x 2
};

Kernels kernels(const DiscreteDagEnv& env, const Enumeration& en, const StateCoords& sc,
                const std::vector<int>& sizes, const std::vector<std::vector<double>>& w) {
  const int K = env.K;
  Kernels out;
  for (int k = 0; k < K; ++k) {
    const int S = sizes[static_cast<std::size_t>(k)], Sn = sizes[static_cast<std::size_t>((k + 1) % K)];
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(2 * S, Sn), numu = num;
    Eigen::VectorXd den = Eigen::VectorXd::Zero(S), denu = den;
    Eigen::MatrixXd rew = Eigen::MatrixXd::Zero(S, 2), rewu = rew;
    const auto& H = en.at(k);
    for (std::size_t i = 0; i < H.size(); ++i) {
      const Hist& h = H[i];
      const int s = en.encode(sc, h, k);
      const double wi = w[static_cast<std::size_t>(k)][i];
      den(s) += wi;
      denu(s) += 1.0;
      for (int a = 0; a < 2; ++a) {
        const int row = s * 2 + a;
        for (int m = 0; m < env.nM; ++m) {
          const double qm = en.pM(k, h, a, m);
          for (int n = 0; n < env.nN; ++n) {
            const double qmn = qm * en.pN(k, h, a, n);
            if (k + 1 < K) {
              Hist g = h;
              g.a[k] = a;
              g.m[k] = m;
              g.n[k] = n;
              for (int c = 0; c < env.nC; ++c) {
                g.c[k + 1] = c;
                const double q = qmn * en.pC(h.e, h.r, c);
                const int t = en.encode(sc, g, k + 1);
                num(row, t) += wi * q;
                numu(row, t) += q;
              }
              continue;
            }
            Hist g = h;
            g.a[k] = a;
            g.m[k] = m;
            g.n[k] = n;
            for (int e2 = 0; e2 < env.nE; ++e2) {
              const double qe = qmn * en.pE(g, e2);
              for (int r2 = 0; r2 < env.nR; ++r2) {
                const double qr = qe * en.pR(g, e2, r2);
                const double val = qr * env.r_values[static_cast<std::size_t>(r2)];
                rew(s, a) += wi * val;
                rewu(s, a) += val;
                for (int c = 0; c < env.nC; ++c) {
                  const double q = qr * en.pC(e2, r2, c);
                  const int t = (e2 * env.nR + r2) * (sc.C ? env.nC : 1) + (sc.C ? c : 0);
                  num(row, t) += wi * q;
                  numu(row, t) += q;
                }
              }
            }
          }
        }
      }
    }
    // States the behaviour never reaches get an unweighted average, which
    // does not depend on the behaviour.
    for (int s = 0; s < S; ++s) {
      const bool reached = den(s) > 0.0;
      const double d = reached ? den(s) : denu(s);
      if (d == 0.0) throw ConfigError("empty state in compiled alphabet");
      for (int a = 0; a < 2; ++a) {
        num.row(s * 2 + a) = (reached ? num.row(s * 2 + a) : numu.row(s * 2 + a)) / d;
        rew(s, a) = (reached ? rew(s, a) : rewu(s, a)) / d;
      }
    }
    out.P.push_back(std::move(num));
    if (k + 1 == K) out.reward = rew;
  }
  return out;
}

Behaviour uniform_behaviour(const DiscreteDagEnv& env, const std::vector<int>& sizes) {
  Behaviour b;
  b.prior = env.prior;
  for (int S : sizes) b.p1.emplace_back(static_cast<std::size_t>(S), 0.5);
  return b;
}

}  // namespace

CompiledMdp compile_dag_to_mdp(const DiscreteDagEnv& env, DagStateKind kind, double gamma_bar) {
  return compile_dag_to_mdp(env, coords(kind), gamma_bar);
}

CompiledMdp compile_dag_to_mdp(const DiscreteDagEnv& env, const StateCoords& sc, double gamma_bar) {
  env.validate();
  if (!(gamma_bar >= 0.0 && gamma_bar < 1.0)) throw ConfigError("gamma_bar must lie in [0, 1)");
  const int K = env.K;
  CompiledMdp out;
  std::vector<int> sizes;
  for (int k = 0; k < K; ++k) {
    out.spaces.push_back(state_space(env, sc, k));
    sizes.push_back(out.spaces.back().size());
  }
  Enumeration en(env);

  std::vector<Behaviour> behaviours{uniform_behaviour(env, sizes)};
  Rng rng(0xb0a7f1e1dULL);
  std::uniform_real_distribution<double> pa(0.2, 0.8), pw(1.0, 6.0);
  for (int i = 0; i < 2; ++i) {
    Behaviour b;
    double total = 0.0;
    for (std::size_t j = 0; j < env.prior.size(); ++j) total += b.prior.emplace_back(pw(rng));
    for (double& p : b.prior) p /= total;
    for (int S : sizes) {
      b.p1.emplace_back();
      for (int s = 0; s < S; ++s) b.p1.back().push_back(pa(rng));
    }
    behaviours.push_back(std::move(b));
  }

  Kernels ref = kernels(env, en, sc, sizes, forward(env, en, sc, behaviours[0]));
  for (std::size_t b = 1; b < behaviours.size(); ++b) {
    Kernels alt = kernels(env, en, sc, sizes, forward(env, en, sc, behaviours[b]));
    for (int k = 0; k < K; ++k) {
      const Eigen::MatrixXd diff = (alt.P[static_cast<std::size_t>(k)] - ref.P[static_cast<std::size_t>(k)]).cwiseAbs();
      Eigen::Index row = 0, col = 0;
      double worst = diff.maxCoeff(&row, &col);
      if (k + 1 == K) {
        Eigen::Index rs = 0, ra = 0;
        const double rworst = (alt.reward - ref.reward).cwiseAbs().maxCoeff(&rs, &ra);
        if (rworst > worst) {
          worst = rworst;
          row = rs * 2 + ra;
        }
      }
      if (worst > 1e-9) {
        const int s = static_cast<int>(row / 2), a = static_cast<int>(row % 2);
        throw NonMarkovError("induced kernel depends on the behaviour policy at step " + std::to_string(k) +
                                 ", state " + out.spaces[static_cast<std::size_t>(k)].label(s) +
                                 ", action " + std::to_string(a),
                             k, s, a);
      }
    }
  }

  TabularPeriodicMdp& mdp = out.mdp;
  mdp.K = K;
  mdp.state_counts = sizes;
  mdp.action_counts.assign(static_cast<std::size_t>(K), 2);
  mdp.transitions.resize(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    mdp.transitions[static_cast<std::size_t>((k + 1) % K)] = ref.P[static_cast<std::size_t>(k)];
    mdp.reward_means.push_back(k + 1 == K ? ref.reward
                                          : Eigen::MatrixXd::Zero(sizes[static_cast<std::size_t>(k)], 2));
    mdp.discounts.push_back(k + 1 == K ? gamma_bar : 1.0);
  }
  mdp.initial_dist = Eigen::VectorXd::Zero(sizes[0]);
  for (const Hist& h : en.at(0))
    mdp.initial_dist(en.encode(sc, h, 0)) +=
        env.prior[static_cast<std::size_t>(h.e * env.nR + h.r)] * en.pC(h.e, h.r, h.c[0]);
  // Guard against accumulated rounding before validation.
  for (auto& T : mdp.transitions)
    for (Eigen::Index r = 0; r < T.rows(); ++r) T.row(r) /= T.row(r).sum();
  mdp.initial_dist /= mdp.initial_dist.sum();
  mdp.validate();
  return out;
}

Eigen::MatrixXd joint_state_mass(const DiscreteDagEnv& env, const StateCoords& fine,
                                 const StateCoords& coarse, int k) {
  env.validate();
  if (k < 0 || k >= env.K) throw ConfigError("step out of range");
  Enumeration en(env);
  std::vector<int> sizes;
  for (int j = 0; j < env.K; ++j) sizes.push_back(state_space(env, fine, j).size());
  const auto w = forward(env, en, fine, uniform_behaviour(env, sizes));
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(sizes[static_cast<std::size_t>(k)],
                                               state_space(env, coarse, k).size());
  const auto& H = en.at(k);
  for (std::size_t i = 0; i < H.size(); ++i)
    mass(en.encode(fine, H[i], k), en.encode(coarse, H[i], k)) += w[static_cast<std::size_t>(k)][i];
  return mass;
}

}  // namespace bagged_rl
