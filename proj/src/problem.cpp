#include "optcon/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "optcon/error.hpp"

namespace optcon {

using nlohmann::json;

std::string_view to_string(Method m) { return m == Method::euler ? "euler" : "rk4"; }

Method parse_method(std::string_view name) {
  if (name == "euler") return Method::euler;
  if (name == "rk4") return Method::rk4;
  throw ParseError(fmt::format("unknown integration method '{}' (expected euler|rk4)", name));
}

std::size_t Scenario::constraint_count() const {
  std::size_t k = 0;
  for (const auto& a : agents) k += a.constraint_count();
  return k;
}

// Validation ---------------------------------------------------------------

namespace {

void check_field_psd(const ScalarField& f, const std::string& where,
                     std::vector<std::string>& errors) {
  if (const auto* q = std::get_if<Quadratic>(&f.repr())) {
    Eigen::SelfAdjointEigenSolver<Mat> es(q->Q, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -kPsdTolerance)
      errors.push_back(fmt::format("{}: quadratic Q is not PSD", where));
  } else if (const auto* s = std::get_if<Sum>(&f.repr())) {
    for (const auto& t : s->terms) check_field_psd(t, where, errors);
  }
}

}  // namespace

std::optional<Vec> find_slater_point(const Scenario& s) {
  std::vector<const ScalarField*> gs;
  for (const auto& a : s.agents)
    for (const auto& g : a.constraints)
      if (g.dim() == s.dim) gs.push_back(&g);

  Vec x = Vec::Zero(s.dim);
  std::size_t counted = 0;
  for (const auto& a : s.agents) {
    if (a.x0.size() != s.dim) continue;
    x += a.x0;
    ++counted;
  }
  if (counted > 0) x /= static_cast<double>(counted);

  auto strictly_feasible = [&](const Vec& p) {
    return std::all_of(gs.begin(), gs.end(), [&](const ScalarField* g) { return g->eval(p) < 0.0; });
  };
  if (strictly_feasible(x)) return x;

  for (double margin : {1.0, 0.1, 1e-2, 1e-3, 1e-4}) {
    auto penalty = [&](const Vec& p, Vec* grad) {
      double v = 0.0;
      if (grad) grad->setZero(s.dim);
      for (const auto* g : gs) {
        const double r = g->eval(p) + margin;
        if (r <= 0.0) continue;
        v += r * r;
        if (grad) *grad += 2.0 * r * g->grad(p);
      }
      return v;
    };
    Vec grad(s.dim);
    double value = penalty(x, &grad);
    for (int it = 0; it < 2000 && value > 0.0; ++it) {
      const double gn = grad.squaredNorm();
      if (gn == 0.0) break;
      double step = 1.0;
      Vec trial = x - step * grad;
      double trial_value = penalty(trial, nullptr);
      while (trial_value > value - 1e-4 * step * gn && step > 1e-14) {
        step *= 0.5;
        trial = x - step * grad;
        trial_value = penalty(trial, nullptr);
      }
      if (step <= 1e-14) break;
      x = trial;
      value = penalty(x, &grad);
    }
    if (strictly_feasible(x)) return x;
  }
  return std::nullopt;
}

ValidationReport validate(const Scenario& s) {
  ValidationReport rep;
  const auto n = s.topology.node_count();
  if (s.agents.size() != n)
    rep.errors.push_back(
        fmt::format("topology has {} nodes but {} agents are defined", n, s.agents.size()));
  if (s.dim < 1) rep.errors.push_back(fmt::format("dim must be positive, got {}", s.dim));

  if (!(s.alpha > 0.0)) rep.errors.push_back(fmt::format("alpha must be positive, got {}", s.alpha));
  if (!(s.beta > 0.0)) rep.errors.push_back(fmt::format("beta must be positive, got {}", s.beta));
  if (!(s.dt > 0.0)) rep.errors.push_back(fmt::format("dt must be positive, got {}", s.dt));
  if (!(s.t_final > 0.0))
    rep.errors.push_back(fmt::format("t_final must be positive, got {}", s.t_final));

  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& a = s.agents[i];
    const auto who = fmt::format("agent {}", i + 1);
    if (a.objective.dim() != s.dim)
      rep.errors.push_back(fmt::format("{}: objective has dimension {}, scenario dim is {}", who,
                                       a.objective.dim(), s.dim));
    check_field_psd(a.objective, who + " objective", rep.errors);
    for (std::size_t k = 0; k < a.constraints.size(); ++k) {
      if (a.constraints[k].dim() != s.dim)
        rep.errors.push_back(fmt::format("{}: constraint {} has dimension {}, scenario dim is {}",
                                         who, k + 1, a.constraints[k].dim(), s.dim));
      check_field_psd(a.constraints[k], fmt::format("{} constraint {}", who, k + 1), rep.errors);
    }
    if (a.x0.size() != s.dim)
      rep.errors.push_back(fmt::format("{}: x0 has {} entries, expected {}", who, a.x0.size(), s.dim));
    if (static_cast<std::size_t>(a.lambda0.size()) != a.constraints.size())
      rep.errors.push_back(fmt::format("{}: lambda0 has {} entries for {} constraints", who,
                                       a.lambda0.size(), a.constraints.size()));
    for (Eigen::Index k = 0; k < a.lambda0.size(); ++k)
      if (!(a.lambda0(k) >= 0.0))
        rep.errors.push_back(
            fmt::format("{}: lambda0[{}] = {} is negative", who, k + 1, a.lambda0(k)));
  }

  if (!s.topology.is_connected())
    rep.errors.push_back("communication graph is disconnected");
  if (s.topology.weighted())
    rep.warnings.push_back("edge weights other than 1 are an extension of the analyzed protocol");

  if (!rep.ok()) return rep;

  // Radial unboundedness of the aggregate objective. Catalog Hessians are
  // constant, so one evaluation is representative.
  const Vec origin = Vec::Zero(s.dim);
  Mat aggregate = Mat::Zero(s.dim, s.dim);
  for (const auto& a : s.agents) aggregate += a.objective.hess(origin);
  Eigen::SelfAdjointEigenSolver<Mat> es(aggregate, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) <= kPsdTolerance)
    rep.warnings.push_back(
        "aggregate objective is not strictly convex in every direction; radial unboundedness "
        "is not certified");

  const double lmax = largest_laplacian_eigenvalue(s.topology);
  if (lmax > 0.0 && s.dt >= 2.0 / (s.beta * lmax))
    rep.warnings.push_back(fmt::format(
        "dt = {} exceeds the explicit-Euler consensus stability bound 2/(beta*lambda_max) = {}",
        s.dt, 2.0 / (s.beta * lmax)));

  if (s.constraint_count() > 0) {
    rep.slater_point = find_slater_point(s);
    if (!rep.slater_point)
      rep.warnings.push_back("no strictly feasible point found; Slater's condition is unverified");
  } else {
    rep.slater_point = origin;
  }
  return rep;
}

void require_valid(const Scenario& s) {
  const auto rep = validate(s);
  if (rep.ok()) return;
  std::string msg = "invalid scenario:";
  for (const auto& e : rep.errors) msg += "\n  " + e;
  throw ValidationError(msg);
}

// JSON ---------------------------------------------------------------------

namespace {

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json mat_to_json(const Mat& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ParseError(fmt::format("{}: {}", path, what));
}

const json& member(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path, fmt::format("missing field '{}'", key));
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

Vec vec_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = number(j[i], fmt::format("{}[{}]", path, i));
  return v;
}

Mat mat_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = j.size();
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto rp = fmt::format("{}[{}]", path, r);
    if (!j[r].is_array() || j[r].size() != cols) fail(rp, "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(j[r][c], fmt::format("{}[{}]", rp, c));
  }
  return m;
}

template <class F>
auto with_context(const std::string& path, F&& make) {
  try {
    return make();
  } catch (const ParseError& e) {
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0) throw;
    throw ParseError(fmt::format("{}: {}", path, what));
  }
}

}  // namespace

json field_to_json(const ScalarField& f) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Quadratic>) {
          return {{"kind", "quadratic"}, {"Q", mat_to_json(v.Q)}, {"c", vec_to_json(v.c)},
                  {"b", vec_to_json(v.b)}, {"r", v.r}};
        } else if constexpr (std::is_same_v<T, Affine>) {
          return {{"kind", "affine"}, {"a", vec_to_json(v.a)}, {"b", v.b}};
        } else if constexpr (std::is_same_v<T, Ball>) {
          return {{"kind", "ball"}, {"c", vec_to_json(v.c)}, {"r", v.r}};
        } else {
          json terms = json::array();
          for (const auto& t : v.terms) terms.push_back(field_to_json(t));
          return {{"kind", "sum"}, {"terms", std::move(terms)}};
        }
      },
      f.repr());
}

ScalarField field_from_json(const json& j, const std::string& path) {
  const auto& kind_j = member(j, path, "kind");
  if (!kind_j.is_string()) fail(path + ".kind", "expected a string");
  const auto kind = kind_j.get<std::string>();
  return with_context(path, [&]() -> ScalarField {
    if (kind == "quadratic") {
      Mat Q = mat_from_json(member(j, path, "Q"), path + ".Q");
      const auto m = Q.cols();
      Vec c = j.contains("c") ? vec_from_json(j["c"], path + ".c") : Vec::Zero(m);
      Vec b = j.contains("b") ? vec_from_json(j["b"], path + ".b") : Vec::Zero(m);
      double r = j.contains("r") ? number(j["r"], path + ".r") : 0.0;
      return ScalarField::quadratic(std::move(Q), std::move(c), std::move(b), r);
    }
    if (kind == "affine") {
      Vec a = vec_from_json(member(j, path, "a"), path + ".a");
      double b = j.contains("b") ? number(j["b"], path + ".b") : 0.0;
      return ScalarField::affine(std::move(a), b);
    }
    if (kind == "ball") {
      Vec c = vec_from_json(member(j, path, "c"), path + ".c");
      return ScalarField::ball(std::move(c), number(member(j, path, "r"), path + ".r"));
    }
    if (kind == "sum") {
      const auto& terms_j = member(j, path, "terms");
      if (!terms_j.is_array()) fail(path + ".terms", "expected an array");
      std::vector<ScalarField> terms;
      for (std::size_t k = 0; k < terms_j.size(); ++k)
        terms.push_back(field_from_json(terms_j[k], fmt::format("{}.terms[{}]", path, k)));
      return ScalarField::sum(std::move(terms));
    }
    fail(path + ".kind", fmt::format("unknown field kind '{}'", kind));
  });
}

json scenario_to_json(const Scenario& s) {
  json edges = json::array();
  for (const auto& e : s.topology.edges()) edges.push_back({e.u + 1, e.v + 1, e.weight});
  json agents = json::array();
  for (const auto& a : s.agents) {
    json cons = json::array();
    for (const auto& g : a.constraints) cons.push_back(field_to_json(g));
    agents.push_back({{"objective", field_to_json(a.objective)},
                      {"constraints", std::move(cons)},
                      {"x0", vec_to_json(a.x0)},
                      {"lambda0", vec_to_json(a.lambda0)}});
  }
  return {{"nodes", s.topology.node_count()},
          {"edges", std::move(edges)},
          {"agents", std::move(agents)},
          {"alpha", s.alpha},
          {"beta", s.beta},
          {"dim", s.dim},
          {"dt", s.dt},
          {"t_final", s.t_final},
          {"method", std::string(to_string(s.method))},
          {"seed", s.seed}};
}

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) fail("scenario", "top level must be an object");
  static const char* known[] = {"nodes", "edges", "agents", "alpha", "beta",
                                "dim",   "dt",    "t_final", "method", "seed"};
  for (const auto& [key, _] : j.items())
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known))
      fail("scenario", fmt::format("unknown top-level key '{}'", key));

  const auto& nodes_j = member(j, "scenario", "nodes");
  if (!nodes_j.is_number_integer() || nodes_j.get<long long>() < 1)
    fail("nodes", "expected a positive integer");
  const auto n = nodes_j.get<std::size_t>();

  std::vector<Edge> edges;
  const auto& edges_j = member(j, "scenario", "edges");
  if (!edges_j.is_array()) fail("edges", "expected an array of [i, j(, w)]");
  for (std::size_t k = 0; k < edges_j.size(); ++k) {
    const auto path = fmt::format("edges[{}]", k);
    const auto& e = edges_j[k];
    if (!e.is_array() || e.size() < 2 || e.size() > 3) fail(path, "expected [i, j] or [i, j, w]");
    for (std::size_t c = 0; c < 2; ++c)
      if (!e[c].is_number_integer() || e[c].get<long long>() < 1)
        fail(path, "endpoints must be positive 1-based integers");
    edges.push_back({e[0].get<std::size_t>() - 1, e[1].get<std::size_t>() - 1,
                     e.size() == 3 ? number(e[2], path + "[2]") : 1.0});
  }
  auto topology = [&] {
    try {
      return Topology(n, std::move(edges));
    } catch (const ValidationError& e) {
      throw ParseError(fmt::format("edges: {}", e.what()));
    }
  }();

  const auto& dim_j = member(j, "scenario", "dim");
  if (!dim_j.is_number_integer() || dim_j.get<long long>() < 1)
    fail("dim", "expected a positive integer");
  const auto dim = dim_j.get<Eigen::Index>();

  std::vector<AgentSpec> agents;
  const auto& agents_j = member(j, "scenario", "agents");
  if (!agents_j.is_array()) fail("agents", "expected an array");
  for (std::size_t i = 0; i < agents_j.size(); ++i) {
    const auto path = fmt::format("agents[{}]", i);
    const auto& a = agents_j[i];
    auto objective = field_from_json(member(a, path, "objective"), path + ".objective");
    std::vector<ScalarField> cons;
    if (a.contains("constraints")) {
      const auto& cj = a["constraints"];
      if (!cj.is_array()) fail(path + ".constraints", "expected an array");
      for (std::size_t k = 0; k < cj.size(); ++k)
        cons.push_back(field_from_json(cj[k], fmt::format("{}.constraints[{}]", path, k)));
    }
    Vec x0 = vec_from_json(member(a, path, "x0"), path + ".x0");
    Vec lambda0 = a.contains("lambda0") ? vec_from_json(a["lambda0"], path + ".lambda0")
                                        : Vec::Zero(static_cast<Eigen::Index>(cons.size()));
    agents.push_back({std::move(objective), std::move(cons), std::move(x0), std::move(lambda0)});
  }

  Scenario s{.topology = std::move(topology), .agents = std::move(agents), .dim = dim};
  s.alpha = number(member(j, "scenario", "alpha"), "alpha");
  s.beta = number(member(j, "scenario", "beta"), "beta");
  if (j.contains("dt")) s.dt = number(j["dt"], "dt");
  if (j.contains("t_final")) s.t_final = number(j["t_final"], "t_final");
  if (j.contains("method")) {
    if (!j["method"].is_string()) fail("method", "expected a string");
    s.method = parse_method(j["method"].get<std::string>());
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) fail("seed", "expected a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  return s;
}

std::string canonical_text(const Scenario& s) { return scenario_to_json(s).dump(2) + "\n"; }

Scenario parse_scenario(std::string_view text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t k = 0; k < upto; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(fmt::format("{}:{}:{}: JSON syntax error: {}", origin, line, col, e.what()));
  }
  try {
    return scenario_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", origin, e.what()));
  }
}

Scenario load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot open scenario file '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

void save(const Scenario& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write scenario file '{}'", path.string()));
  out << canonical_text(s);
  if (!out) throw Error(fmt::format("write failed for '{}'", path.string()));
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParseError(fmt::format("override '{}' is not of the form key=value", item));
    const auto key = item.substr(0, eq);
    const auto raw = item.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    std::string pointer;
    std::stringstream parts(key);
    std::string part;
    while (std::getline(parts, part, '.')) pointer += "/" + part;
    try {
      const json::json_pointer ptr(pointer);
      if (!ptr.parent_pointer().empty() && !doc.contains(ptr.parent_pointer()))
        throw ParseError(fmt::format("override '{}': no such path", key));
      doc[ptr] = value;
    } catch (const json::exception& e) {
      throw ParseError(fmt::format("override '{}': {}", key, e.what()));
    }
  }
}

std::string scenario_hash(const Scenario& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(s)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace optcon
