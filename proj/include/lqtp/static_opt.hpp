#pragma once

#include "lqtp/cell.hpp"
#include "lqtp/model.hpp"

namespace lqtp {

/// Minimizer of L(x, u) = f(x, u) + 1/2 <P(Cx+Du+sigma), Cx+Du+sigma>
/// subject to Ax + Bu + b = 0, with its multiplier y.
struct StaticOptimum {
  Vec x_star;
  Vec u_star;
  Vec y_star;
  Vec sigma_star;  // C x* + D u* + sigma
  double L_value = 0.0;
};

double static_objective(const LQModel& model, const Mat& P, const Vec& x, const Vec& u);

/// Solves the (2n+m) x (2n+m) Lagrange system. Throws NumericalError with the
/// smallest singular value when it is singular.
StaticOptimum solve_static_kkt(const LQModel& model, const Mat& P);

/// Closed form through the cell coefficients:
/// x* = -(A + B Theta_bar)^{-1} (B theta_bar + b), u* = Theta_bar x* + theta_bar,
/// y* = P x* + p.
StaticOptimum static_from_cell(const LQModel& model, const CellSolution& cell);

/// Orthonormal basis of the null space of [A B]; columns are feasible
/// directions (dx; du) of the constraint.
Mat feasible_directions(const LQModel& model);

}  // namespace lqtp
