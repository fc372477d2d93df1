#include "optcon/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "optcon/error.hpp"

namespace optcon::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static const auto instance = [] {
    auto lg = spdlog::get("optcon");
    if (!lg) lg = spdlog::stderr_logger_mt("optcon");
    lg->set_pattern("[%l] %v");
    lg->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SEED_SWARM_LOG"))
      lg->set_level(spdlog::level::from_str(env));
    return lg;
  }();
  return instance;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json state_json(const NetworkState& st) {
  json x = json::array();
  for (Eigen::Index i = 0; i < st.x.rows(); ++i) x.push_back(vec_json(st.x.row(i).transpose()));
  json lam = json::array();
  for (const auto& l : st.lam) lam.push_back(vec_json(l));
  return {{"t", st.t}, {"x", std::move(x)}, {"lambda", std::move(lam)}};
}

struct RunOutcome {
  int code = kOk;
  std::string error;
  json summary;
  fs::path dir;
  ConsensusError consensus;
  KktResiduals residuals;
  double max_control = 0.0;
};

RunOutcome execute_run(const Scenario& s, const fs::path& out_root, bool with_series) {
  RunOutcome out;
  const auto started = std::chrono::steady_clock::now();
  const auto hash = scenario_hash(s);

  const auto report = validate(s);
  for (const auto& w : report.warnings) logger()->warn("{}", w);
  if (!report.ok()) {
    out.code = kValidation;
    for (const auto& e : report.errors) out.error += e + "\n";
    return out;
  }

  Trajectory traj;
  try {
    traj = simulate(s);
  } catch (const IntegrationError& e) {
    out.code = kIntegration;
    out.error = fmt::format("integration failed at t = {} (agent {}, {}): {}\n", e.time(),
                            e.agent() + 1, e.quantity(), e.what());
    return out;
  }

  std::optional<KktSolution> sol;
  try {
    sol = solve_kkt(s);
  } catch (const OracleError& e) {
    logger()->warn("oracle unavailable, W and certificates omitted: {}", e.what());
  }
  const auto series = certificate_series(s, traj, sol ? &*sol : nullptr);

  out.dir = out_root / hash;
  fs::create_directories(out.dir);
  {
    std::ofstream csv(out.dir / "trajectory.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw Error(fmt::format("cannot write {}", (out.dir / "trajectory.csv").string()));
    write_trajectory_csv(csv, s, traj, series, with_series);
  }

  out.consensus = series.consensus.back();
  out.residuals = kkt_residuals(s, traj.back());
  for (const auto& r : traj.rates) out.max_control = std::max(out.max_control, r.max_control);

  json certificates = nullptr;
  if (sol) {
    certificates = json::object();
    for (const auto& c : certify(s, traj, *sol).checks) certificates[c.name] = c.passed;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  out.summary = {{"scenario_hash", hash},
                 {"run_dir", out.dir.string()},
                 {"step_count", traj.size() - 1},
                 {"terminal_state", state_json(traj.back())},
                 {"terminal_kkt_residuals", residuals_to_json(out.residuals)},
                 {"terminal_consensus_error",
                  {{"norm", out.consensus.norm},
                   {"per_coordinate", vec_json(out.consensus.per_coordinate)},
                   {"max_pairwise", out.consensus.max_pairwise}}},
                 {"max_control", out.max_control},
                 {"oracle", sol ? solution_to_json(*sol) : json(nullptr)},
                 {"certificates", certificates},
                 {"wall_time_s", wall}};
  std::ofstream js(out.dir / "summary.json", std::ios::binary | std::ios::trunc);
  js << out.summary.dump(2) << "\n";
  return out;
}

// Loads with overrides; reports failures as exit code 2 on `err`.
std::optional<Scenario> load_or_report(const std::string& path,
                                       const std::vector<std::string>& overrides,
                                       std::ostream& err) {
  try {
    return load_with_overrides(path, overrides);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return std::nullopt;
  }
}

struct Common {
  std::string scenario;
  std::vector<std::string> set;
  std::optional<double> dt;
  std::optional<double> t_final;
  std::optional<std::string> method;

  std::vector<std::string> overrides() const {
    auto all = set;
    if (dt) all.push_back(fmt::format("dt={:.17g}", *dt));
    if (t_final) all.push_back(fmt::format("t_final={:.17g}", *t_final));
    if (method) all.push_back(fmt::format("method={}", *method));
    return all;
  }
};

void add_common(CLI::App* cmd, Common& c, bool integration_flags) {
  cmd->add_option("scenario", c.scenario, "scenario JSON file")->required();
  cmd->add_option("--set", c.set, "dotted-path override key=value (repeatable)");
  if (integration_flags) {
    cmd->add_option("--dt", c.dt, "step size override");
    cmd->add_option("--t-final", c.t_final, "horizon override");
    cmd->add_option("--method", c.method, "euler|rk4")->check(CLI::IsMember({"euler", "rk4"}));
  }
}

bool validated(const Scenario& s, std::ostream& err) {
  const auto report = validate(s);
  for (const auto& w : report.warnings) logger()->warn("{}", w);
  if (report.ok()) return true;
  for (const auto& e : report.errors) err << "validation error: " << e << "\n";
  return false;
}

}  // namespace

Scenario load_with_overrides(const fs::path& path, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return load(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open scenario file '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  // Parse once for syntax diagnostics, then patch the document.
  parse_scenario(buf.str(), path.string());
  json doc = json::parse(buf.str());
  apply_overrides(doc, overrides);
  try {
    return scenario_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{} (after overrides): {}", path.string(), e.what()));
  }
}

std::vector<std::string> trajectory_columns(const Scenario& s, bool with_series) {
  std::vector<std::string> cols{"t"};
  for (std::size_t i = 0; i < s.agent_count(); ++i)
    for (Eigen::Index d = 0; d < s.dim; ++d) cols.push_back(fmt::format("x[{}][{}]", i + 1, d + 1));
  for (std::size_t i = 0; i < s.agent_count(); ++i)
    for (std::size_t k = 0; k < s.agents[i].constraint_count(); ++k)
      cols.push_back(fmt::format("lambda[{}][{}]", i + 1, k + 1));
  for (const char* c : {"consensus_error", "W", "V", "sigma"}) cols.emplace_back(c);
  if (with_series) {
    for (Eigen::Index d = 0; d < s.dim; ++d) cols.push_back(fmt::format("consensus_error[{}]", d + 1));
    cols.emplace_back("omega");
    cols.emplace_back("omega_running");
    cols.emplace_back("ultimate_bound");
  }
  return cols;
}

void write_trajectory_csv(std::ostream& out, const Scenario& s, const Trajectory& traj,
                          const CertificateSeries& series, bool with_series) {
  const auto cols = trajectory_columns(s, with_series);
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\r\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& st = traj.states[k];
    std::string row = num(traj.times[k]);
    for (Eigen::Index i = 0; i < st.x.rows(); ++i)
      for (Eigen::Index d = 0; d < st.x.cols(); ++d) row += "," + num(st.x(i, d));
    for (const auto& l : st.lam)
      for (Eigen::Index j = 0; j < l.size(); ++j) row += "," + num(l(j));
    row += "," + num(series.consensus[k].norm);
    row += "," + (series.W.empty() ? std::string() : num(series.W[k]));
    row += "," + num(series.V[k]);
    row += "," + std::to_string(sigma_bitmask(s, traj.sigma[k]));
    if (with_series) {
      for (Eigen::Index d = 0; d < s.dim; ++d) row += "," + num(series.consensus[k].per_coordinate(d));
      row += "," + num(series.omega[k]);
      row += "," + num(series.omega_running[k]);
      row += "," + num(series.v2 > 0.0 ? ultimate_bound(series.omega[k], s.alpha, s.beta,
                                                        series.v2, series.theta)
                                       : std::nan(""));
    }
    out << row << "\r\n";
  }
}

json solution_to_json(const KktSolution& sol) {
  json lam = json::array();
  for (const auto& l : sol.lambda_star) lam.push_back(vec_json(l));
  json active = json::array();
  for (const auto& r : sol.active_constraints)
    active.push_back({{"agent", r.agent + 1}, {"constraint", r.constraint + 1}});
  return {{"x_star", vec_json(sol.x_star)},
          {"lambda_star", std::move(lam)},
          {"active_constraints", std::move(active)},
          {"objective_value", sol.objective_value}};
}

json residuals_to_json(const KktResiduals& r) {
  return {{"stationarity", r.stationarity},
          {"aggregate_stationarity", r.aggregate_stationarity},
          {"primal_feasibility", r.primal_feasibility},
          {"dual_feasibility", r.dual_feasibility},
          {"complementarity", r.complementarity},
          {"consensus", r.consensus}};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("optcon");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed constrained optimal consensus: simulator, oracle and certificates"};
  app.require_subcommand(1);

  Common run_opts, solve_opts, check_opts, sweep_opts, graph_opts;
  std::string run_out = "runs", sweep_out = "sweeps";
  bool with_series = false;
  double theta = 0.5;
  std::string sweep_param;
  std::vector<double> sweep_values;

  auto* run_cmd = app.add_subcommand("run", "simulate and export trajectory.csv + summary.json");
  add_common(run_cmd, run_opts, true);
  run_cmd->add_option("--out", run_out, "output root directory");
  run_cmd->add_flag("--series", with_series, "append per-time certificate columns");

  auto* solve_cmd = app.add_subcommand("solve", "centralized KKT solution as JSON");
  add_common(solve_cmd, solve_opts, false);

  auto* check_cmd = app.add_subcommand("check", "simulate, solve and certify");
  add_common(check_cmd, check_opts, true);
  check_cmd->add_option("--theta", theta, "ultimate-bound parameter in (0, 1)")
      ->check(CLI::Range(0.0, 1.0));

  auto* sweep_cmd = app.add_subcommand("sweep", "run variants of one parameter concurrently");
  add_common(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--param", sweep_param, "alpha|beta|dt")
      ->required()
      ->check(CLI::IsMember({"alpha", "beta", "dt"}));
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->delimiter(',');
  sweep_cmd->add_option("--out", sweep_out, "output root directory");

  auto* graph_cmd = app.add_subcommand("graph-info", "topology and spectral summary");
  add_common(graph_cmd, graph_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kValidation;
  }

  try {
    if (*run_cmd) {
      auto s = load_or_report(run_opts.scenario, run_opts.overrides(), err);
      if (!s) return kValidation;
      auto res = execute_run(*s, run_out, with_series);
      if (res.code != kOk) {
        err << res.error;
        return res.code;
      }
      out << res.summary.dump(2) << "\n";
      return kOk;
    }

    if (*solve_cmd) {
      auto s = load_or_report(solve_opts.scenario, solve_opts.overrides(), err);
      if (!s) return kValidation;
      if (!validated(*s, err)) return kValidation;
      try {
        const auto sol = solve_kkt(*s);
        auto doc = solution_to_json(sol);
        doc["kkt_residuals"] = residuals_to_json(kkt_residuals(*s, replicate(*s, sol)));
        out << doc.dump(2) << "\n";
        return kOk;
      } catch (const OracleError& e) {
        err << "solve failed: " << e.what() << "\n";
        return kSolve;
      }
    }

    if (*check_cmd) {
      auto s = load_or_report(check_opts.scenario, check_opts.overrides(), err);
      if (!s) return kValidation;
      if (!validated(*s, err)) return kValidation;
      Trajectory traj;
      try {
        traj = simulate(*s);
      } catch (const IntegrationError& e) {
        err << fmt::format("integration failed at t = {} (agent {}, {}): {}\n", e.time(),
                           e.agent() + 1, e.quantity(), e.what());
        return kIntegration;
      }
      KktSolution sol;
      try {
        sol = solve_kkt(*s);
      } catch (const OracleError& e) {
        err << "solve failed: " << e.what() << "\n";
        return kSolve;
      }
      const auto report = certify(*s, traj, sol, {.theta = theta});
      auto doc = report_to_json(report);
      doc["scenario_hash"] = scenario_hash(*s);
      doc["oracle"] = solution_to_json(sol);
      doc["terminal_kkt_residuals"] = residuals_to_json(kkt_residuals(*s, traj.back()));
      out << doc.dump(2) << "\n";
      if (!report.all_passed()) {
        for (const auto& c : report.checks)
          if (!c.passed) err << "certificate failed: " << c.name << ": " << c.detail << "\n";
        return kCertificate;
      }
      return kOk;
    }

    if (*sweep_cmd) {
      if (sweep_values.empty()) {
        err << "error: sweep needs at least one value (--values v1,v2,...)\n";
        return kValidation;
      }
      auto base = load_or_report(sweep_opts.scenario, sweep_opts.overrides(), err);
      if (!base) return kValidation;
      const json base_doc = scenario_to_json(*base);

      std::vector<std::future<RunOutcome>> jobs;
      for (double v : sweep_values) {
        jobs.push_back(std::async(std::launch::async, [&, v] {
          RunOutcome res;
          try {
            json doc = base_doc;
            doc[sweep_param] = v;
            res = execute_run(scenario_from_json(doc), sweep_out, false);
          } catch (const Error& e) {
            res.code = kValidation;
            res.error = e.what();
          }
          return res;
        }));
      }
      fs::create_directories(sweep_out);
      std::ofstream csv(fs::path(sweep_out) / "sweep.csv", std::ios::binary | std::ios::trunc);
      csv << "param,value,status,consensus_error";
      for (Eigen::Index d = 0; d < base->dim; ++d) csv << ",consensus_error[" << d + 1 << "]";
      csv << ",stationarity,aggregate_stationarity,max_control,run_dir\r\n";
      json summary = json::array();
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        auto res = jobs[j].get();
        const char* status = res.code == kOk            ? "ok"
                             : res.code == kIntegration ? "integration_error"
                                                        : "validation_error";
        csv << sweep_param << "," << num(sweep_values[j]) << "," << status;
        if (res.code == kOk) {
          csv << "," << num(res.consensus.norm);
          for (Eigen::Index d = 0; d < base->dim; ++d) csv << "," << num(res.consensus.per_coordinate(d));
          csv << "," << num(res.residuals.stationarity) << ","
              << num(res.residuals.aggregate_stationarity) << "," << num(res.max_control) << ","
              << res.dir.string();
        } else {
          csv << ",";
          for (Eigen::Index d = 0; d < base->dim; ++d) csv << ",";
          csv << ",,,";
          logger()->warn("{}={} failed: {}", sweep_param, sweep_values[j], res.error);
        }
        csv << "\r\n";
        summary.push_back({{"value", sweep_values[j]}, {"status", status}});
      }
      out << json{{"param", sweep_param},
                  {"sweep_csv", (fs::path(sweep_out) / "sweep.csv").string()},
                  {"variants", summary}}
                 .dump(2)
          << "\n";
      return kOk;
    }

    if (*graph_cmd) {
      auto s = load_or_report(graph_opts.scenario, graph_opts.overrides(), err);
      if (!s) return kValidation;
      const auto& t = s->topology;
      const bool connected = t.is_connected();
      const Vec spectrum = laplacian_spectrum(t);
      const double lmax = largest_laplacian_eigenvalue(t);
      json doc = {{"nodes", t.node_count()},
                  {"edges", t.edge_count()},
                  {"weighted", t.weighted()},
                  {"connected", connected},
                  {"v2", connected && t.node_count() >= 2 ? json(spectrum(1)) : json(nullptr)},
                  {"spectrum", vec_json(spectrum)},
                  {"lambda_max", lmax},
                  {"beta", s->beta},
                  {"dt_max", lmax > 0.0 && s->beta > 0.0 ? json(2.0 / (s->beta * lmax))
                                                         : json(nullptr)}};
      out << doc.dump(2) << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kValidation;
}

}  // namespace optcon::cli
