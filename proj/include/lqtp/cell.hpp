#pragma once

#include <span>
#include <string>
#include <vector>

#include "lqtp/model.hpp"
#include "lqtp/riccati.hpp"

namespace lqtp {

struct HamiltonianEval {
  double value = 0.0;  // H(x, p, P) = min over u
  Vec minimizer;       // u-hat
};

/// Full Hamiltonian <Ax+Bu+b, p> + 1/2 <P(Cx+Du+sigma), Cx+Du+sigma> + f(x,u).
double hamiltonian_at(const LQModel& model, const Vec& x, const Vec& p_vec,
                      const Mat& P_mat, const Vec& u);

/// Closed-form minimum over u. Throws NumericalError carrying the minimum
/// eigenvalue when R + D^T P D is not positive definite.
HamiltonianEval hamiltonian(const LQModel& model, const Vec& x, const Vec& p_vec,
                            const Mat& P_mat);

/// hamiltonian() with b = sigma = q = r = 0.
HamiltonianEval homogeneous_hamiltonian(const LQModel& model, const Vec& x,
                                        const Vec& p_vec, const Mat& P_mat);

/// Quadratic solution V(x) = 1/2 (<Px,x> + 2<p,x> + p0) of H(x, V_x, V_xx) = c0.
struct CellSolution {
  Mat P;
  Vec p;
  double p0 = 0.0;
  double c0 = 0.0;
  Mat Theta_bar;
  Vec theta_bar;
  bool stabilizing = false;
  double closed_loop_condition = 0.0;  // condition number of A + B Theta_bar

  double value(const Vec& x) const { return 0.5 * (x.dot(P * x) + 2.0 * p.dot(x) + p0); }
  Vec gradient(const Vec& x) const { return P * x + p; }
  Vec control(const Vec& x) const { return Theta_bar * x + theta_bar; }
};

/// Maximum condition number of A + B Theta_bar accepted by the cell solvers.
inline constexpr double kMaxClosedLoopCondition = 1e12;

/// Cell solution built around an arbitrary ARE solution P (not required to be
/// stabilizing). Throws NumericalError when A + B Theta_bar is numerically
/// singular.
CellSolution cell_from_riccati(const LQModel& model, const Mat& P);

/// Cell solution from the stabilizing ARE solution.
CellSolution solve_cell(const LQModel& model, const AreSolution& are);

/// max over xs of |H(x, Px + p, P) - c0|.
double cell_residual(const LQModel& model, const CellSolution& cell,
                     std::span<const Vec> xs);

/// All quadratic cell solutions of the structure B = R = I, C = D = S = 0,
/// A symmetric: P = A + Delta with Delta^2 = A^2 + Q, one per sign pattern
/// of the eigenvalues of Delta (2^n candidates, n <= 12). The entry with
/// P - A > 0 is the stabilizing one.
std::vector<CellSolution> enumerate_cell_solutions_special(
    const Mat& A_sym, const Mat& Q, const Vec& b, const Vec& sigma, const Vec& q,
    const Vec& r);

/// The model the enumeration above solves.
LQModel special_structure_model(const Mat& A_sym, const Mat& Q, const Vec& b,
                                const Vec& sigma, const Vec& q, const Vec& r);

std::string serialize_cell(const CellSolution& cell);
CellSolution load_cell(const std::string& text);

}  // namespace lqtp
