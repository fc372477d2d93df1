#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "optcon/integrator.hpp"
#include "optcon/oracle.hpp"

namespace optcon {

/// Deviation of the stacked state from its network average, Pi * x with
/// Pi = I - (1/N) 1 1^T.
struct ConsensusError {
  Vec per_coordinate;  // ||Pi x[:, d]|| for each coordinate d
  double norm = 0.0;   // Frobenius norm of Pi x
  double max_pairwise = 0.0;
};

ConsensusError consensus_error(const NetworkState& state);

/// W = (1/2 alpha) ||x - x*||^2 + (1/2) ||lam - lam*||^2 with x* replicated
/// to every agent.
double lyapunov_W(const Scenario& s, const NetworkState& state, const KktSolution& sol);

struct LyapunovV {
  double value = 0.0;
  ActiveSet sigma;
};

/// V = (1/2 alpha) sum_i ||u_i||^2 + (1/2) sum over constraints outside sigma
/// of lamdot^2.
LyapunovV lyapunov_V(const Scenario& s, const NetworkState& state);

/// max_ij ||grad_x L_i - grad_x L_j|| at the agents' own positions.
double omega_empirical(const Scenario& s, const NetworkState& state);

/// omega0 * alpha / (beta * v2 * theta).
double ultimate_bound(double omega0, double alpha, double beta, double v2, double theta);

struct CertificateSeries {
  std::vector<double> times;
  std::vector<ConsensusError> consensus;
  std::vector<double> W;  // empty when no oracle solution was supplied
  std::vector<double> V;
  std::vector<ActiveSet> sigma;
  std::vector<double> omega;          // per-time value
  std::vector<double> omega_running;  // running maximum
  double v2 = 0.0;
  double theta = 0.5;
  double ultimate_bound = 0.0;  // from the final running maximum of omega
};

CertificateSeries certificate_series(const Scenario& s, const Trajectory& traj,
                                     const KktSolution* sol, double theta = 0.5);

/// Per-step slack for a discrete monotonicity test: factor * max |second
/// difference| of `values` over index triples accepted by `same_mode`.
/// Equals factor * dt^2 * L where L is the sampled bound on the second
/// derivative.
double discrete_slack(const std::vector<double>& values, double factor,
                      const std::vector<ActiveSet>* modes = nullptr);

struct CertifyOptions {
  double theta = 0.5;
  double kkt_tolerance = 1e-3;
  double slack_factor = 10.0;
};

struct CertificateCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::size_t violations = 0;
  std::string detail;
};

struct CertificateReport {
  std::vector<CertificateCheck> checks;

  bool all_passed() const;
  const CertificateCheck& at(const std::string& name) const;
};

/// Runs the four certificates on a completed run:
///   consensus_bound  terminal ||Pi x|| <= ultimate bound,
///   lyapunov_W       W non-increasing up to the per-step slack,
///   lyapunov_V       V non-increasing within fixed-sigma intervals,
///                    continuous at sigma-shrink events, non-increasing
///                    at sigma-growth events,
///   kkt_terminal     terminal residuals <= kkt_tolerance.
/// Failures are report entries, never exceptions.
CertificateReport certify(const Scenario& s, const Trajectory& traj, const KktSolution& sol,
                          const CertifyOptions& opts = {});

/// Sample-level ultimate boundedness: counts steps where ||Pi x(t)|| is at
/// or above omega(t) * alpha / (beta v2 theta) and the next sample grows by
/// more than `slack`.
std::size_t consensus_boundedness_violations(const Scenario& s, const CertificateSeries& series,
                                             double slack);

nlohmann::json report_to_json(const CertificateReport& report);

}  // namespace optcon
