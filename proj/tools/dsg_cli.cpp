// SPDX-License-Identifier: MIT
//
// dsg: command-line front end.
//
//   dsg solve    MODEL [--n N | --alpha A | --infinite] [--social]
//                      [--horizon T] [--discount G] [--out FILE]
//   dsg check    MODEL [--n N] [--grid K] [--horizon T] [--discount G]
//   dsg gap      MODEL --sweep-n 10,20,... [--strategy sapde|swmfe|both]
//                      [--t0 1,10] [--mc REPS] [--seed S] [--horizon T]
//   dsg simulate MODEL --n N [--profile spne|sapde|swmfe|zero] [--reps R]
//                      [--seed S] [--sampler gaussian|uniform|zero]
//                      [--trajectories K --trajectory-out FILE]
//
// Every command accepts --out, --manifest and --threads. Exit codes:
// 0 success, 1 usage or parse error, 2 mathematical failure, 3 numeric
// instability.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "dsg/dsg.hpp"

namespace {

using dsg::Json;

constexpr int kOk = 0, kUsage = 1, kMath = 2, kUnstable = 3;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dsg::input_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dsg::input_error("cannot write '" + path + "'");
  out << text;
}

std::string num(double v) { return dsg::format_double(v); }

// Options shared by all commands.
struct Common {
  std::string model_path;
  std::string out;
  std::string manifest;
  int threads = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("model", c.model_path, "Model JSON file")->required();
  sub->add_option("--out", c.out, "Result file (default: stdout)");
  sub->add_option("--manifest", c.manifest,
                  "Manifest file (default: <out>.manifest.json or "
                  "dsg-<command>.manifest.json)");
  sub->add_option("--threads", c.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
}

// Run record written next to every result.
struct Run {
  std::string command;
  Common common;
  Json options = Json::object();  // result-affecting options only
  std::optional<std::uint64_t> seed;
  std::string started, hash, model_hash;
  std::vector<std::string> outputs;

  std::string manifest_path() const {
    if (!common.manifest.empty()) return common.manifest;
    if (!common.out.empty()) return common.out + ".manifest.json";
    return "dsg-" + command + ".manifest.json";
  }

  void resolve(const std::string& model_text) {
    model_hash = dsg::hex64(dsg::fnv1a(model_text));
    Json key = Json::object();
    key["command"] = command;
    key["model_hash"] = model_hash;
    key["options"] = options;
    hash = dsg::hex64(dsg::fnv1a(dsg::to_text(key)));
  }

  // Header fields every result carries.
  void stamp(Json& j, const char* schema) const {
    j["schema"] = schema;
    j["tool_version"] = dsg::kVersion;
    j["manifest"] = manifest_path();
    j["config_hash"] = hash;
  }

  std::string csv_comment(const char* schema) const {
    return std::string("# schema=") + schema + " manifest=" + manifest_path() +
           " config_hash=" + hash + "\n";
  }

  void emit(const std::string& text) {
    if (common.out.empty()) {
      std::cout << text;
    } else {
      write_file(common.out, text);
      outputs.push_back(common.out);
    }
  }

  void finish(int code) const {
    Json m = Json::object();
    m["schema"] = "dsg.manifest/1";
    m["command"] = command;
    m["tool_version"] = dsg::kVersion;
    m["config_hash"] = hash;
    m["model"] = common.model_path;
    m["model_hash"] = model_hash;
    m["options"] = options;
    m["seed"] = seed ? Json(*seed) : Json(nullptr);
    m["outputs"] = outputs;
    m["exit_code"] = code;
    m["started"] = started;
    m["finished"] = utc_now();
    write_file(manifest_path(), dsg::to_text(m));
  }
};

Json report_json(const dsg::AssumptionReport& r) {
  Json out = Json::object();
  for (const auto& [k, v] : r.items) {
    Json e = Json::object();
    e["status"] = dsg::to_string(v.status);
    if (!v.note.empty()) e["note"] = v.note;
    Json sc = Json::object();
    for (const auto& [a, b] : v.scalars) sc[a] = b;
    e["scalars"] = sc;
    if (!v.series.empty()) {
      Json se = Json::object();
      for (const auto& [a, b] : v.series) se[a] = b;
      e["series"] = se;
    }
    out[k] = e;
  }
  return out;
}

// Shared horizon/discount resolution.
struct Horizon {
  std::optional<int> T;
  std::optional<double> gamma;
};

Horizon resolve_horizon(const dsg::GameModel& m, std::optional<int> T,
                        std::optional<double> g) {
  Horizon h;
  h.T = T ? T : m.horizon;
  h.gamma = g ? g : m.discount;
  if (h.gamma && !(*h.gamma > 0.0 && *h.gamma < 1.0))
    throw dsg::input_error("discount must lie in (0,1)");
  if (h.T && *h.T < 1) throw dsg::input_error("horizon must be positive");
  return h;
}

// Finite model used by solvers and simulation: discounted when the model
// is stationary and a discount is given.
dsg::GameModel finite_model(const dsg::GameModel& m, const Horizon& h) {
  if (!h.T) throw dsg::input_error("a horizon is required (use --horizon)");
  if (m.stationary() && h.gamma) return dsg::discounted_horizon(m, *h.gamma, *h.T);
  if (m.horizon && *h.T != *m.horizon)
    throw dsg::input_error("--horizon differs from the model horizon");
  return dsg::with_horizon(m, *h.T);
}

int players_for(const dsg::ModelFile& f, std::optional<int> n) {
  const auto implied = dsg::implied_players(f);
  if (n && implied && *n != *implied)
    throw dsg::input_error("--n differs from the player count in the model");
  if (n) return *n;
  if (implied) return *implied;
  throw dsg::input_error("number of players unknown (use --n)");
}

// ---------------------------------------------------------------- solve

struct SolveOpts {
  std::optional<int> n, T;
  std::optional<double> alpha, gamma;
  bool infinite = false, social = false;
};

Json stage_json(int t, const dsg::RiccatiStage& s) {
  Json j = Json::object();
  j["t"] = t;
  j["theta"] = dsg::to_json(s.theta);
  j["theta_bar"] = dsg::to_json(s.theta_bar);
  j["P"] = dsg::to_json(s.P);
  j["P_alpha"] = dsg::to_json(s.Pd);
  j["F"] = dsg::to_json(s.F);
  j["F_bar"] = dsg::to_json(s.Fbar);
  j["K"] = dsg::to_json(s.K);
  j["K_bar"] = dsg::to_json(s.Kbar);
  j["min_eig_combo"] = s.min_eig_combo;
  j["cond_F"] = s.cond_F;
  j["cond_F_bar"] = s.cond_Fbar;
  return j;
}

int cmd_solve(Run& run, const dsg::ModelFile& f, const SolveOpts& o) {
  const auto& m = f.model;
  const Horizon h = resolve_horizon(m, o.T, o.gamma);
  const bool algebraic = m.stationary() && !o.T;
  if (algebraic && !h.gamma)
    throw dsg::input_error("stationary model needs --horizon or a discount");

  Json out = Json::object();
  run.stamp(out, "dsg.gains/1");
  out["model"] = f.name;
  out["horizon"] = algebraic ? Json(nullptr) : Json(*h.T);
  out["discount"] = h.gamma ? Json(*h.gamma) : Json(nullptr);

  if (o.social) {
    const auto d = algebraic ? dsg::solve_social(m, std::nullopt, h.gamma)
                             : dsg::solve_social(finite_model(m, h));
    out["mode"] = algebraic ? "social-algebraic" : "social";
    Json st = Json::array();
    for (size_t k = 0; k < d.theta.size(); ++k) {
      Json j = Json::object();
      j["t"] = static_cast<int>(k) + 1;
      j["theta"] = dsg::to_json(d.theta[k]);
      j["theta_bar"] = dsg::to_json(d.theta_bar[k]);
      j["P_deviation"] = dsg::to_json(d.first.P[k]);
      j["P_mean"] = dsg::to_json(d.second.P[k]);
      st.push_back(j);
    }
    out["stages"] = st;
    run.emit(dsg::to_text(out));
    return kOk;
  }

  double alpha = 0.0;
  std::optional<int> n;
  if (o.alpha) {
    alpha = *o.alpha;
  } else if (o.infinite) {
    alpha = 0.0;
  } else {
    n = players_for(f, o.n);
    if (f.weights.type == "positive")
      throw dsg::input_error(
          "positive weights need --social (or --alpha for a fixed weight)");
    alpha = f.weights.type == "vanishing" ? 0.0 : 1.0 / *n;
  }
  if (!(alpha < 1.0)) throw dsg::input_error("alpha must be < 1");
  out["mode"] = algebraic ? "algebraic" : "finite";
  out["alpha"] = alpha;
  out["n"] = n ? Json(*n) : Json(nullptr);

  dsg::RiccatiSolution sol;
  try {
    sol = algebraic ? dsg::solve_algebraic(m, alpha, *h.gamma)
                    : dsg::solve_finite(finite_model(m, h), alpha);
    dsg::detail::require_pd(sol, alpha == 0.0 ? "infinite-population condition"
                                               : "positive definiteness condition");
  } catch (const dsg::Error& e) {
    if (e.kind() != dsg::ErrorKind::Math) throw;
    std::cerr << "dsg solve: " << e.what() << "\n";
    const int rn = o.n ? *o.n : dsg::implied_players(f).value_or(1);
    Json rep = Json::object();
    run.stamp(rep, "dsg.assumptions/1");
    rep["error"] = e.what();
    rep["report"] = report_json(dsg::check_assumptions(
        m, dsg::WeightProfile::homogeneous(rn), h.T, h.gamma));
    run.emit(dsg::to_text(rep));
    return kMath;
  }
  if (algebraic) {
    out["iterations"] = sol.iterations;
    out["residual"] = sol.residual;
  }
  Json st = Json::array();
  for (int t = 1; t <= sol.horizon(); ++t) st.push_back(stage_json(t, sol.at(t)));
  out["stages"] = st;
  run.emit(dsg::to_text(out));
  return kOk;
}

// ---------------------------------------------------------------- check

struct CheckOpts {
  std::optional<int> n, T;
  std::optional<double> gamma;
  int grid = 21;
};

int cmd_check(Run& run, const dsg::ModelFile& f, const CheckOpts& o) {
  const Horizon h = resolve_horizon(f.model, o.T, o.gamma);
  std::optional<int> n = o.n;
  if (!n) n = dsg::implied_players(f);
  dsg::WeightProfile p = dsg::WeightProfile::homogeneous(n.value_or(1));
  if (n && f.weights.type != "homogeneous") p = dsg::instantiate_weights(f, *n);
  dsg::AssumptionOptions ao;
  ao.alpha_grid = o.grid;
  Json out = Json::object();
  run.stamp(out, "dsg.assumptions/1");
  out["model"] = f.name;
  out["n"] = n ? Json(*n) : Json(nullptr);
  out["grid"] = o.grid;
  out["report"] = report_json(dsg::check_assumptions(f.model, p, h.T, h.gamma, ao));
  out["warnings"] = f.warnings;
  run.emit(dsg::to_text(out));
  return kOk;
}

// ---------------------------------------------------------------- gap

struct GapOpts {
  std::vector<int> ns;
  std::string strategy = "both";
  std::vector<int> t0s = {1};
  long mc = 0;
  std::uint64_t seed = 1;
  std::optional<int> T;
  std::optional<double> gamma;
};

struct GapRow {
  int n = 0;
  std::string strategy;
  int t0 = 1;
  double lyap = 0.0;
  std::optional<double> mc, se;
  bool failed = false;
};

int cmd_gap(Run& run, const dsg::ModelFile& f, const GapOpts& o) {
  if (f.weights.type != "homogeneous")
    throw dsg::input_error("gap needs homogeneous weights");
  const Horizon h = resolve_horizon(f.model, o.T, o.gamma);
  const dsg::GameModel m = finite_model(f.model, h);
  const int T = *h.T;
  for (int t0 : o.t0s)
    if (t0 < 1 || t0 > T) throw dsg::input_error("--t0 outside the horizon");
  std::vector<dsg::NsKind> kinds;
  if (o.strategy == "sapde" || o.strategy == "both") kinds.push_back(dsg::NsKind::Sapde);
  if (o.strategy == "swmfe" || o.strategy == "both") kinds.push_back(dsg::NsKind::Swmfe);

  struct Job {
    int n;
    dsg::NsKind kind;
    std::vector<double> gap;
    std::string error;
  };
  std::vector<Job> jobs;
  for (int n : o.ns)
    for (auto k : kinds) jobs.push_back({n, k, {}, {}});

  // Lyapunov evaluations in parallel over the sweep.
  std::atomic<size_t> next{0};
  const auto work = [&]() {
    for (size_t k = next++; k < jobs.size(); k = next++) {
      Job& j = jobs[k];
      try {
        const auto noise = dsg::instantiate_noise(f, j.n);
        j.gap = dsg::performance_gap(m, noise, j.n, j.kind, T).gap;
      } catch (const dsg::Error& e) {
        j.error = e.what();
      }
    }
  };
  const int workers =
      static_cast<int>(std::min<size_t>(static_cast<size_t>(run.common.threads), jobs.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<GapRow> rows;
  int code = kOk;
  for (const Job& j : jobs) {
    std::optional<dsg::GapEstimate> est;
    bool pooled = false;
    if (j.error.empty() && o.mc > 0) {
      const auto noise = dsg::instantiate_noise(f, j.n);
      const auto a = dsg::realize_weights(dsg::WeightProfile::homogeneous(j.n));
      const dsg::Vector z1 = dsg::mean_deep_state(a, noise);
      const auto star = dsg::spne(m, dsg::WeightProfile::homogeneous(j.n), T);
      const auto hat = j.kind == dsg::NsKind::Sapde ? dsg::sapde(m, j.n, z1, T)
                                                    : dsg::swmfe(m, z1, T);
      dsg::GapOptions go;
      go.threads = run.common.threads;
      go.pool = pooled = noise.iid;
      // Same draws for both strategies at a given n.
      const std::uint64_t s = dsg::detail::rep_seed(o.seed, j.n, 7);
      est = dsg::empirical_performance_gap(m, noise, j.n, {hat}, {star}, o.mc,
                                           s, 1, T, go);
      if (est->flagged > 0) code = std::max(code, kUnstable);
    }
    for (int t0 : o.t0s) {
      GapRow r;
      r.n = j.n;
      r.strategy = dsg::to_string(j.kind);
      r.t0 = t0;
      if (!j.error.empty()) {
        r.failed = true;
        std::cerr << "dsg gap: n=" << j.n << " " << r.strategy << ": "
                  << j.error << "\n";
        code = std::max(code, kMath);
      } else {
        r.lyap = j.gap[static_cast<size_t>(t0 - 1)];
      }
      if (est) {
        const size_t k = static_cast<size_t>(t0 - 1);
        if (pooled) {
          r.mc = std::abs(est->pooled_mean[k]);
          r.se = est->pooled_stderr[k];
        } else {
          double best = -1.0;
          for (size_t p = 0; p < est->mean.size(); ++p)
            if (std::abs(est->mean[p][k]) > best) {
              best = std::abs(est->mean[p][k]);
              r.mc = best;
              r.se = est->stderr_by_player[p][k];
            }
        }
      }
      rows.push_back(r);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const GapRow& a, const GapRow& b) {
    return std::tie(a.n, a.strategy, a.t0) < std::tie(b.n, b.strategy, b.t0);
  });

  std::ostringstream os;
  os << run.csv_comment("dsg.gap/1");
  os << "n,strategy,t0,gap_lyapunov,gap_mc,mc_stderr,n_times_gap\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.strategy << ',' << r.t0 << ',';
    if (r.failed)
      os << "nan,";
    else
      os << num(r.lyap) << ',';
    os << (r.mc ? num(*r.mc) : "") << ',' << (r.se ? num(*r.se) : "") << ',';
    os << (r.failed ? std::string("nan") : num(r.n * r.lyap)) << "\n";
  }
  run.emit(os.str());
  return code;
}

// ---------------------------------------------------------------- simulate

struct SimOpts {
  std::optional<int> n, T;
  std::optional<double> gamma;
  long reps = 1000;
  std::uint64_t seed = 1;
  std::string profile = "spne";
  std::string sampler = "gaussian";
  long trajectories = 0;
  std::string trajectory_out;
};

int cmd_simulate(Run& run, const dsg::ModelFile& f, const SimOpts& o) {
  const Horizon h = resolve_horizon(f.model, o.T, o.gamma);
  const dsg::GameModel m = finite_model(f.model, h);
  const int T = *h.T;
  const int n = players_for(f, o.n);
  const auto profile = dsg::instantiate_weights(f, n);
  const auto a = dsg::realize_weights(profile);
  const auto noise = dsg::instantiate_noise(f, n);
  const auto check = dsg::validate_model(m, profile, noise);
  if (!check.ok()) throw dsg::input_error(check.issues.front());

  dsg::Strategy g;
  try {
    const dsg::Vector z1 = dsg::mean_deep_state(a, noise);
    const bool social = profile.kind == dsg::WeightProfile::Kind::Positive;
    if (o.profile == "spne") {
      g = dsg::spne(m, profile, T, social);
    } else if (o.profile == "sapde") {
      if (profile.kind != dsg::WeightProfile::Kind::Homogeneous)
        throw dsg::input_error("sapde needs homogeneous weights");
      g = dsg::sapde(m, n, z1, T);
    } else if (o.profile == "swmfe") {
      g = dsg::swmfe(m, z1, T);
    } else {
      g = dsg::zero_strategy(m, T);
    }
  } catch (const dsg::Error& e) {
    if (e.kind() != dsg::ErrorKind::Math) throw;
    std::cerr << "dsg simulate: " << e.what() << "\n";
    return kMath;
  }

  dsg::SimConfig c;
  c.n = n;
  c.T = T;
  c.replications = o.reps;
  c.seed = o.seed;
  c.profile = {g};
  c.weights = a;
  c.sampler = o.sampler == "uniform" ? dsg::Sampler::Uniform
              : o.sampler == "zero"  ? dsg::Sampler::Zero
                                     : dsg::Sampler::Gaussian;
  c.threads = run.common.threads;
  c.store_trajectories = o.trajectories;
  const dsg::SimResult r = dsg::simulate(m, noise, c);

  // Exact expected cost-to-go averaged over the players evaluated.
  std::vector<double> exact(static_cast<size_t>(T), 0.0);
  const std::vector<int> who =
      noise.iid ? std::vector<int>{0} : [&] {
        std::vector<int> v;
        for (int i = 0; i < n; ++i) v.push_back(i);
        return v;
      }();
  for (int i : who) {
    const auto e = dsg::expected_cost(m, a, noise, g, i).to_go;
    for (int t = 0; t < T; ++t) exact[t] += e[t] / static_cast<double>(who.size());
  }

  Json out = Json::object();
  run.stamp(out, "dsg.sim/1");
  out["model"] = f.name;
  out["n"] = n;
  out["horizon"] = T;
  out["profile"] = o.profile;
  out["sampler"] = dsg::to_string(c.sampler);
  out["seed"] = o.seed;
  out["replications"] = r.replications;
  out["used"] = r.used;
  out["flagged"] = r.flagged;
  Json pooled = Json::object();
  pooled["mean"] = r.pooled_mean;
  pooled["stderr"] = r.pooled_stderr;
  pooled["exact"] = exact;
  out["cost_to_go"] = pooled;
  Json players = Json::array();
  for (int i = 0; i < n && !r.mean.empty(); ++i) {
    Json p = Json::object();
    p["player"] = i;
    p["mean"] = r.mean[i];
    p["stderr"] = r.stderr_[i];
    players.push_back(p);
  }
  out["players"] = players;
  Json deep = Json::object();
  Json dm = Json::array(), ds = Json::array();
  for (int t = 0; t < T; ++t) {
    dm.push_back(dsg::to_json(r.deep_mean[t]));
    ds.push_back(dsg::to_json(r.deep_sd[t]));
  }
  deep["mean"] = dm;
  deep["sd"] = ds;
  if (g.ref == dsg::Reference::Prediction) {
    Json z = Json::array();
    for (int t = 0; t < T; ++t) z.push_back(dsg::to_json(g.z[t]));
    deep["prediction"] = z;
  }
  out["deep_state"] = deep;
  run.emit(dsg::to_text(out));

  if (!o.trajectory_out.empty()) {
    std::ostringstream os;
    os << run.csv_comment("dsg.trajectory/1");
    dsg::write_trajectory_csv(os, r.trajectories, m.d_x, m.d_u);
    write_file(o.trajectory_out, os.str());
    run.outputs.push_back(o.trajectory_out);
  }
  if (r.flagged > 0) {
    std::cerr << "dsg simulate: " << r.flagged
              << " replications exceeded the instability threshold\n";
    return kUnstable;
  }
  return kOk;
}

template <class T>
Json opt_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic LQ games with a deep state: solvers, checks, gaps and simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dsg::kVersion);

  Common common;
  SolveOpts so;
  CheckOpts co;
  GapOpts go;
  SimOpts mo;

  auto* solve = app.add_subcommand("solve", "Equilibrium gains");
  add_common(solve, common);
  auto* g_n = solve->add_option("--n", so.n, "Number of players (alpha = 1/n)");
  auto* g_a = solve->add_option("--alpha", so.alpha, "Weight alpha in [0,1)");
  auto* g_i = solve->add_flag("--infinite", so.infinite, "Infinite population (alpha = 0)");
  g_n->excludes(g_a)->excludes(g_i);
  g_a->excludes(g_i);
  solve->add_flag("--social", so.social, "Social-cost solution");
  solve->add_option("--horizon", so.T, "Horizon T");
  solve->add_option("--discount", so.gamma, "Discount factor");

  auto* check = app.add_subcommand("check", "Assumption report");
  add_common(check, common);
  check->add_option("--n", co.n, "Number of players");
  check->add_option("--grid", co.grid, "Grid points for the uniform check")
      ->check(CLI::PositiveNumber);
  check->add_option("--horizon", co.T, "Horizon T");
  check->add_option("--discount", co.gamma, "Discount factor");

  auto* gap = app.add_subcommand("gap", "Performance-gap sweep (CSV)");
  add_common(gap, common);
  gap->add_option("--sweep-n", go.ns, "Population sizes")
      ->delimiter(',')
      ->required()
      ->check(CLI::Range(2, 100000000));
  gap->add_option("--strategy", go.strategy, "sapde, swmfe or both")
      ->check(CLI::IsMember({"sapde", "swmfe", "both"}));
  gap->add_option("--t0", go.t0s, "Start times")->delimiter(',');
  gap->add_option("--mc", go.mc, "Monte Carlo replications (0: none)")
      ->check(CLI::NonNegativeNumber);
  gap->add_option("--seed", go.seed, "Master seed");
  gap->add_option("--horizon", go.T, "Horizon T");
  gap->add_option("--discount", go.gamma, "Discount factor");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo simulation");
  add_common(sim, common);
  sim->add_option("--n", mo.n, "Number of players");
  sim->add_option("--reps", mo.reps, "Replications")->check(CLI::PositiveNumber);
  sim->add_option("--seed", mo.seed, "Master seed");
  sim->add_option("--profile", mo.profile, "spne, sapde, swmfe or zero")
      ->check(CLI::IsMember({"spne", "sapde", "swmfe", "zero"}));
  sim->add_option("--sampler", mo.sampler, "gaussian, uniform or zero")
      ->check(CLI::IsMember({"gaussian", "uniform", "zero"}));
  sim->add_option("--trajectories", mo.trajectories,
                  "Number of leading replications to dump")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--trajectory-out", mo.trajectory_out, "Trajectory CSV file");
  sim->add_option("--horizon", mo.T, "Horizon T");
  sim->add_option("--discount", mo.gamma, "Discount factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  Run run;
  run.common = common;
  run.started = utc_now();
  int code = kOk;
  try {
    const std::string text = read_file(common.model_path);
    dsg::ModelFile f;
    try {
      f = dsg::parse_model(Json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw dsg::input_error(common.model_path + ": " + e.what());
    }
    for (const auto& w : f.warnings) std::cerr << "warning: " << w << "\n";

    if (solve->parsed()) {
      run.command = "solve";
      run.options = {{"n", opt_json(so.n)},           {"alpha", opt_json(so.alpha)},
                     {"infinite", so.infinite},       {"social", so.social},
                     {"horizon", opt_json(so.T)},     {"discount", opt_json(so.gamma)}};
      run.resolve(text);
      code = cmd_solve(run, f, so);
    } else if (check->parsed()) {
      run.command = "check";
      run.options = {{"n", opt_json(co.n)},       {"grid", co.grid},
                     {"horizon", opt_json(co.T)}, {"discount", opt_json(co.gamma)}};
      run.resolve(text);
      code = cmd_check(run, f, co);
    } else if (gap->parsed()) {
      run.command = "gap";
      run.seed = go.seed;
      run.options = {{"sweep_n", go.ns},     {"strategy", go.strategy},
                     {"t0", go.t0s},         {"mc", go.mc},
                     {"seed", go.seed},      {"horizon", opt_json(go.T)},
                     {"discount", opt_json(go.gamma)}};
      run.resolve(text);
      code = cmd_gap(run, f, go);
    } else {
      run.command = "simulate";
      run.seed = mo.seed;
      run.options = {{"n", opt_json(mo.n)},         {"reps", mo.reps},
                     {"seed", mo.seed},             {"profile", mo.profile},
                     {"sampler", mo.sampler},       {"trajectories", mo.trajectories},
                     {"horizon", opt_json(mo.T)},   {"discount", opt_json(mo.gamma)}};
      run.resolve(text);
      code = cmd_simulate(run, f, mo);
    }
  } catch (const dsg::Error& e) {
    std::cerr << "dsg: " << e.what() << "\n";
    code = e.kind() == dsg::ErrorKind::Input       ? kUsage
           : e.kind() == dsg::ErrorKind::Instability ? kUnstable
                                                     : kMath;
  } catch (const std::exception& e) {
    std::cerr << "dsg: " << e.what() << "\n";
    code = kUsage;
  }
  if (!run.command.empty()) {
    try {
      run.finish(code);
    } catch (const dsg::Error& e) {
      std::cerr << "dsg: " << e.what() << "\n";
      if (code == kOk) code = kUsage;
    }
  }
  return code;
}
