#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "lqtp/cell.hpp"
#include "lqtp/model.hpp"
#include "lqtp/riccati.hpp"
#include "lqtp/sde.hpp"

namespace lqtp {

struct Window {
  double lo = 0.0;
  double hi = 0.0;
};

/// value(t) ~ K exp(-lambda t), fitted by least squares on log(value).
struct DecayFit {
  double K = 0.0;
  double lambda = 0.0;
  double r_squared = 0.0;
  Window window;
  std::size_t points = 0;

  bool decaying() const { return lambda > 0.0; }
};

/// Throws FieldError for fewer than 8 points or a nonpositive value.
DecayFit fit_exponential(std::span<const double> ts, std::span<const double> values);

struct CoefficientFit {
  std::string name;             // "P", "p", "Theta", "theta"
  bool machine_precision = false;  // no deviation above round-off in the window
  DecayFit fit;
  bool pass = false;
};

struct CoefficientCertificate {
  std::array<CoefficientFit, 4> fits;
  double min_r_squared = 0.95;
  bool pass = false;
};

/// Deviations |P^T - P|, |p^T - p|, |Theta^T - Theta_bar|, |theta^T - theta_bar|
/// (Frobenius / Euclidean) fitted against s = T - t over s in [2, T/2].
CoefficientCertificate certify_coefficient_convergence(const FiniteHorizonSolution& fh,
                                                       const CellSolution& cell,
                                                       double min_r_squared = 0.95);

/// Deviation norms of one coefficient at every node, ordered by node.
std::vector<double> coefficient_deviation(const FiniteHorizonSolution& fh,
                                          const CellSolution& cell, int which);

/// tau = max(1, ln(2K / beta2) / lambda) with (K, lambda) from the Theta fit and
/// beta2 = eig_min(Q + S^T Theta_bar + Theta_bar^T S + Theta_bar^T R Theta_bar).
double default_tau(const LQModel& model, const CellSolution& cell,
                   const CoefficientCertificate& coefficients);

struct SideFit {
  bool required = true;
  bool at_floor = false;
  bool has_fit = false;
  DecayFit fit;
  bool pass = false;
  std::string note;
};

struct StateTurnpikeOptions {
  double edge_fraction = 0.1;
  double min_r_squared = 0.95;
  double se_factor = 2.0;
  double relative_floor = 1e-10;  // relative to E|Xbar|^2 + E|ubar|^2
};

struct StateTurnpikeCertificate {
  double tau = 0.0;
  bool two_sided = true;
  SideFit left;   // fitted against t
  SideFit right;  // fitted against T - t
  std::vector<double> times;
  std::vector<double> deviation;
  std::vector<double> noise_floor;
  bool pass = false;
};

/// Envelope fits of d(t) = E[|X^T - Xbar|^2 + |u^T - ubar|^2] on the two
/// halves of [0, T - tau]. The left side is only required when the loops
/// start from different states.
StateTurnpikeCertificate certify_state_turnpike(const TrajectoryBundle& bundle,
                                                double tau,
                                                const StateTurnpikeOptions& opts = {});

/// Trapezoid average of a curve over [lo, hi] (restricted to the samples there).
double time_average(std::span<const double> ts, std::span<const double> values,
                    double lo, double hi);

struct ErgodicRow {
  double T = 0.0;
  double value = 0.0;           // V^T(0, x)
  double value_over_T = 0.0;
  double scaled_error = 0.0;    // T |V^T / T - c0|
  Estimate cost_cell;           // J^T(x; ubar)
  Estimate cost_finite;         // J^T(x; u^T), Monte Carlo
  double gap = 0.0;             // J^T(x; ubar) - V^T(0, x)
  double gap_ci = 0.0;
};

struct ErgodicReport {
  double c0 = 0.0;
  double L_star = 0.0;
  std::vector<ErgodicRow> rows;
  bool value_converging = false;   // |V^T/T - c0| decreasing, T|.| within a factor 2
  bool gap_nonnegative = false;    // gap >= -ci
  bool gap_bounded = false;        // max(gap - ci) <= 2 min(gap + ci)
  bool c0_matches = false;         // |c0 - L(x*, u*)| <= 1e-9
  bool pass = false;
};

/// For each horizon: V^T(0,x)/T from the Riccati system (step h = cfg.dt)
/// and J^T(x; ubar) by Monte Carlo from cfg.x0 (used for both loops).
ErgodicReport ergodic_report(const LQModel& model, const CellSolution& cell,
                             std::span<const double> horizons, const SimConfig& cfg);

std::string coefficient_certificate_json(const CoefficientCertificate& cert);
std::string state_certificate_json(const StateTurnpikeCertificate& cert);
std::string ergodic_report_json(const ErgodicReport& report);

/// t, deviation, noise_floor, fit (fitted envelope where a side fit applies).
std::string state_certificate_csv(const StateTurnpikeCertificate& cert, double T);
/// T, V_T, V_over_T, scaled_error, J_bar, J_bar_se, J_T, J_T_se, gap, gap_ci.
std::string ergodic_csv(const ErgodicReport& report);

}  // namespace lqtp
