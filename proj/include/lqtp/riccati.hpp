#pragma once

#include <string>
#include <vector>

#include "lqtp/model.hpp"

namespace lqtp {

// Building blocks shared by the algebraic and differential equations.

/// R + D^T P D.
Mat gain_matrix(const LQModel& model, const Mat& P);

/// Theta(P) = -(R + D^T P D)^{-1} (B^T P + D^T P C + S).
Mat feedback_gain(const LQModel& model, const Mat& P);

/// theta(P, p) = -(R + D^T P D)^{-1} (B^T p + D^T P sigma + r).
Vec feedforward(const LQModel& model, const Mat& P, const Vec& p);

/// Left side of the algebraic Riccati equation:
/// PA + A^T P + C^T P C + Q - G^T (R + D^T P D)^{-1} G, G = B^T P + D^T P C + S.
Mat riccati_map(const LQModel& model, const Mat& P);

double are_residual(const LQModel& model, const Mat& P);

struct AreOptions {
  int max_iterations = 100;
  double step_tol = 1e-12;      // relative Frobenius change of P
  double residual_tol = 1e-10;  // ARE residual
};

struct AreSolution {
  Mat P;
  Mat Theta_bar;
  int newton_iters = 0;
  double final_residual = 0.0;
  std::vector<double> residual_history;  // ARE residual after each step
};

/// Newton-Kleinman iteration from a stabilizing gain. Each step solves the
/// generalized Lyapunov equation of the current closed loop; the gain is then
/// updated from the new P. Throws NumericalError when an iterate stops being
/// stabilizing or the iteration does not converge.
AreSolution solve_are_stabilizing(const LQModel& model, const Mat& Theta0,
                                  const AreOptions& opts = {});

/// find_stabilizer followed by solve_are_stabilizing.
AreSolution solve_are(const LQModel& model, const AreOptions& opts = {});

/// Uniform time grid of the backward Riccati system.
struct TimeGrid {
  double T = 0.0;
  double h = 0.0;
  std::size_t steps = 0;

  double at(std::size_t i) const {
    return i == steps ? T : static_cast<double>(i) * h;
  }
  std::size_t nodes() const { return steps + 1; }

  /// Throws FieldError unless h divides T (relative tolerance 1e-9).
  static TimeGrid make(double T, double h);
};

struct DreSolution {
  TimeGrid grid;
  std::vector<Mat> P;        // P^T(t_i)
  double halving_error = 0;  // max-norm of P_h - P_{h/2} over the coarse nodes
  double min_gain_eig = 0;   // min over nodes of eig_min(R + D^T P^T D)
  double delta = 0;          // threshold used for that check
};

struct DreOptions {
  bool step_halving = true;  // re-integrate at h/2 for an error estimate
  double delta = -1.0;       // definiteness floor; negative means eig_min(R)/2
};

/// Classical RK4 from P^T(T) = 0 backward to t = 0. Throws NumericalError
/// ("gain matrix lost definiteness at t") if R + D^T P D drops below delta
/// at any stage.
DreSolution integrate_dre(const LQModel& model, double T, double h,
                          const DreOptions& opts = {});

struct FiniteHorizonSolution {
  TimeGrid grid;
  std::vector<Mat> P;      // P^T
  std::vector<Vec> p;      // p^T
  std::vector<double> p0;  // p0^T
  std::vector<Mat> Theta;  // Theta^T
  std::vector<Vec> theta;  // theta^T
  double halving_error = 0;

  double T() const { return grid.T; }
  std::size_t nodes() const { return grid.nodes(); }

  /// Linear interpolation of the coefficients at time t in [0, T].
  Mat P_at(double t) const;
  Vec p_at(double t) const;
  double p0_at(double t) const;
  Mat Theta_at(double t) const;
  Vec theta_at(double t) const;
};

/// Gains on the nodes, p^T by backward RK4 along its linear ODE (stage
/// coefficients from cubic interpolation of the P^T / Theta^T nodes) and
/// p0^T by the composite trapezoid rule.
FiniteHorizonSolution complete_finite_horizon(const LQModel& model,
                                              const DreSolution& dre);

/// integrate_dre + complete_finite_horizon.
FiniteHorizonSolution solve_finite_horizon(const LQModel& model, double T,
                                           double h, const DreOptions& opts = {});

/// V^T(t, x) = 1/2 (<P^T x, x> + 2 <p^T, x> + p0^T).
double value_finite(const FiniteHorizonSolution& sol, double t, const Vec& x);

/// One row per node: t, vec(P) (column-major), p, p0, vec(Theta), theta.
std::string finite_horizon_csv(const FiniteHorizonSolution& sol);

}  // namespace lqtp
