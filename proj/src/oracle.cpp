#include "optcon/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "optcon/error.hpp"

namespace optcon {

namespace {

struct FlatConstraint {
  ConstraintRef ref;
  const ScalarField* g;
};

std::vector<FlatConstraint> flatten(const Scenario& s) {
  std::vector<FlatConstraint> out;
  for (std::size_t i = 0; i < s.agent_count(); ++i)
    for (std::size_t k = 0; k < s.agents[i].constraints.size(); ++k)
      out.push_back({{i, k}, &s.agents[i].constraints[k]});
  return out;
}

Vec aggregate_grad(const Scenario& s, const Vec& x) {
  Vec g = Vec::Zero(s.dim);
  for (const auto& a : s.agents) g += a.objective.grad(x);
  return g;
}

Mat aggregate_hess(const Scenario& s, const Vec& x) {
  Mat h = Mat::Zero(s.dim, s.dim);
  for (const auto& a : s.agents) h += a.objective.hess(x);
  return h;
}

Vec unconstrained_optimum(const Scenario& s) {
  Vec x = Vec::Zero(s.dim);
  for (int it = 0; it < 20; ++it) {
    const Vec g = aggregate_grad(s, x);
    if (g.lpNorm<Eigen::Infinity>() <= 1e-13) break;
    const Vec dx = aggregate_hess(s, x).completeOrthogonalDecomposition().solve(-g);
    if (!dx.allFinite()) break;
    x += dx;
  }
  return x;
}

struct Candidate {
  Vec x;
  Vec mu;
};

// Damped Newton on [grad F + sum mu_j grad g_j; g_j] = 0 over the active
// constraints. Returns nullopt on a singular Jacobian or non-convergence.
std::optional<Candidate> newton_active(const Scenario& s, const std::vector<const ScalarField*>& active,
                                       const Vec& x0, double mu0, int max_iter) {
  const auto m = s.dim;
  const auto a = static_cast<Eigen::Index>(active.size());
  Vec z(m + a);
  z.head(m) = x0;
  z.tail(a).setConstant(mu0);

  auto residual = [&](const Vec& zz) {
    const Vec x = zz.head(m);
    Vec r(m + a);
    r.head(m) = aggregate_grad(s, x);
    for (Eigen::Index j = 0; j < a; ++j) {
      r.head(m) += zz(m + j) * active[static_cast<std::size_t>(j)]->grad(x);
      r(m + j) = active[static_cast<std::size_t>(j)]->eval(x);
    }
    return r;
  };

  Vec r = residual(z);
  for (int it = 0; it < max_iter; ++it) {
    const double rn = r.norm();
    if (rn <= 1e-12 * std::max(1.0, z.lpNorm<Eigen::Infinity>())) return Candidate{z.head(m), z.tail(a)};

    const Vec x = z.head(m);
    Mat jac = Mat::Zero(m + a, m + a);
    jac.topLeftCorner(m, m) = aggregate_hess(s, x);
    for (Eigen::Index j = 0; j < a; ++j) {
      const auto* g = active[static_cast<std::size_t>(j)];
      jac.topLeftCorner(m, m) += z(m + j) * g->hess(x);
      const Vec gg = g->grad(x);
      jac.block(0, m + j, m, 1) = gg;
      jac.block(m + j, 0, 1, m) = gg.transpose();
    }
    Eigen::FullPivLU<Mat> lu(jac);
    lu.setThreshold(1e-12);
    if (lu.rank() < m + a) return std::nullopt;
    const Vec dz = lu.solve(-r);
    if (!dz.allFinite()) return std::nullopt;

    double step = 1.0;
    Vec trial = z + dz;
    Vec trial_r = residual(trial);
    int halvings = 0;
    while (!(trial_r.norm() < rn) && halvings < 40) {
      step *= 0.5;
      trial = z + step * dz;
      trial_r = residual(trial);
      ++halvings;
    }
    if (!(trial_r.norm() < rn)) {
      // No decrease possible: accept only if already at round-off level.
      if (rn <= 1e-9) return Candidate{z.head(m), z.tail(a)};
      return std::nullopt;
    }
    z = trial;
    r = trial_r;
  }
  if (r.norm() <= 1e-9) return Candidate{z.head(m), z.tail(a)};
  return std::nullopt;
}

}  // namespace

double aggregate_objective(const Scenario& s, const Vec& x) {
  double v = 0.0;
  for (const auto& a : s.agents) v += a.objective.eval(x);
  return v;
}

KktSolution solve_kkt(const Scenario& s, const KktOptions& opts) {
  const auto cons = flatten(s);
  const auto K = cons.size();
  if (K > opts.max_constraints)
    throw OracleError(fmt::format("{} constraints exceed the enumeration bound of {}", K,
                                  opts.max_constraints));

  const Vec x_u = unconstrained_optimum(s);
  const auto m = static_cast<std::size_t>(s.dim);

  // Enumerate subsets by increasing size so that ties favour smaller sets.
  std::vector<std::uint32_t> masks;
  for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << K); ++mask)
    if (static_cast<std::size_t>(std::popcount(mask)) <= m) masks.push_back(mask);
  std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
    return std::popcount(a) < std::popcount(b);
  });

  bool any_converged = false;
  std::optional<KktSolution> best;
  for (auto mask : masks) {
    std::vector<const ScalarField*> active;
    std::vector<ConstraintRef> refs;
    for (std::size_t j = 0; j < K; ++j)
      if (mask & (std::uint32_t{1} << j)) {
        active.push_back(cons[j].g);
        refs.push_back(cons[j].ref);
      }

    std::optional<Candidate> accepted;
    for (double mu0 : {0.0, 1.0, 10.0}) {
      if (active.empty() && mu0 != 0.0) break;
      auto cand = newton_active(s, active, x_u, mu0, opts.max_newton_iterations);
      if (!cand) continue;
      any_converged = true;
      bool ok = (cand->mu.array() >= -opts.tol).all();
      for (const auto& c : cons) ok = ok && c.g->eval(cand->x) <= opts.tol;
      if (ok) {
        accepted = std::move(cand);
        break;
      }
    }
    if (!accepted) continue;

    const double obj = aggregate_objective(s, accepted->x);
    if (best && !(obj < best->objective_value - 1e-12 * (1.0 + std::abs(best->objective_value))))
      continue;

    KktSolution sol;
    sol.x_star = accepted->x;
    sol.objective_value = obj;
    sol.active_constraints = refs;
    sol.lambda_star.reserve(s.agent_count());
    for (const auto& a : s.agents)
      sol.lambda_star.push_back(Vec::Zero(static_cast<Eigen::Index>(a.constraint_count())));
    for (std::size_t j = 0; j < refs.size(); ++j)
      sol.lambda_star[refs[j].agent](static_cast<Eigen::Index>(refs[j].constraint)) =
          std::max(0.0, accepted->mu(static_cast<Eigen::Index>(j)));
    best = std::move(sol);
  }

  if (!best) {
    if (!any_converged) throw OracleError("Newton iteration failed on every candidate active set");
    throw OracleError("no feasible KKT point: the constrained problem appears infeasible");
  }
  return *best;
}

GridSolution solve_grid(const Scenario& s, const Box& bounds, int levels) {
  const auto m = s.dim;
  if (m < 1 || m > 3) throw OracleError(fmt::format("grid oracle supports 1 <= m <= 3, got {}", m));
  if (bounds.lower.size() != m || bounds.upper.size() != m)
    throw std::invalid_argument("grid box dimension does not match the scenario");
  if (levels < 1) throw std::invalid_argument("grid oracle needs at least one level");

  const auto cons = flatten(s);
  Vec center = 0.5 * (bounds.lower + bounds.upper);
  Vec half = 0.5 * (bounds.upper - bounds.lower);
  constexpr int n = kGridPointsPerAxis;
  const int total = m == 1 ? n : (m == 2 ? n * n : n * n * n);

  Vec spacing = 2.0 * half / (n - 1);
  for (int level = 0; level < levels; ++level) {
    spacing = 2.0 * half / (n - 1);
    double best_value = std::numeric_limits<double>::infinity();
    std::optional<Vec> best;
    Vec p(m);
    for (int flat = 0; flat < total; ++flat) {
      int rest = flat;
      for (Eigen::Index d = 0; d < m; ++d) {
        const int idx = rest % n;
        rest /= n;
        p(d) = center(d) + (idx - (n - 1) / 2) * spacing(d);
      }
      bool feasible = true;
      for (const auto& c : cons)
        if (c.g->eval(p) > 0.0) {
          feasible = false;
          break;
        }
      if (!feasible) continue;
      const double v = aggregate_objective(s, p);
      if (v < best_value) {
        best_value = v;
        best = p;
      }
    }
    if (!best) {
      if (level == 0) throw OracleError("grid oracle found no feasible point in the search box");
      break;
    }
    center = *best;
    if (level + 1 < levels) half /= 4.0;
  }
  return {center, spacing};
}

double lagrangian(const Scenario& s, const Mat& x, const std::vector<Vec>& lam) {
  double v = 0.0;
  for (std::size_t i = 0; i < s.agent_count(); ++i) {
    const Vec xi = x.row(static_cast<Eigen::Index>(i)).transpose();
    const auto& a = s.agents[i];
    v += a.objective.eval(xi);
    for (std::size_t k = 0; k < a.constraints.size(); ++k)
      v += lam[i](static_cast<Eigen::Index>(k)) * a.constraints[k].eval(xi);
  }
  return v;
}

NetworkState replicate(const Scenario& s, const KktSolution& sol) {
  NetworkState st;
  st.x = sol.x_star.transpose().replicate(static_cast<Eigen::Index>(s.agent_count()), 1);
  st.lam = sol.lambda_star;
  return st;
}

KktResiduals kkt_residuals(const Scenario& s, const NetworkState& state) {
  KktResiduals r;
  const Vec mean = state.x.colwise().mean().transpose();
  Vec at_mean = Vec::Zero(s.dim);
  Vec aggregate = Vec::Zero(s.dim);
  for (std::size_t i = 0; i < s.agent_count(); ++i) {
    const auto& a = s.agents[i];
    const Vec xi = state.position(i);
    const Vec& li = state.lam[i];
    at_mean += node_lagrangian_grad(a, mean, li);
    aggregate += node_lagrangian_grad(a, xi, li);
    for (std::size_t k = 0; k < a.constraints.size(); ++k) {
      const double g = a.constraints[k].eval(xi);
      const double l = li(static_cast<Eigen::Index>(k));
      r.primal_feasibility = std::max(r.primal_feasibility, g);
      r.dual_feasibility = std::max(r.dual_feasibility, -l);
      r.complementarity = std::max(r.complementarity, std::abs(l * g));
    }
    for (std::size_t j = i + 1; j < s.agent_count(); ++j)
      r.consensus = std::max(r.consensus, (state.x.row(static_cast<Eigen::Index>(i)) -
                                           state.x.row(static_cast<Eigen::Index>(j)))
                                              .norm());
  }
  r.stationarity = at_mean.norm();
  r.aggregate_stationarity = aggregate.norm();
  return r;
}

}  // namespace optcon
