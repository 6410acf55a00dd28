#pragma once

#include <optional>

#include "lqtp/model.hpp"

namespace lqtp {

/// Homogeneous closed loop dX = Ahat X dt + Chat X dW.
struct ClosedLoopPair {
  Mat Ahat;
  Mat Chat;

  static ClosedLoopPair from_gain(const LQModel& model, const Mat& Theta);
};

struct StabilityCert {
  bool stable = false;
  double spectral_abscissa = 0.0;
  std::optional<Mat> lyapunov_P;  // solution for Lambda = I, when stable
  std::optional<double> min_eig_P;
};

/// Stability threshold on the spectral abscissa of the Lyapunov operator.
inline constexpr double kStabilityMargin = 1e-9;

/// Matrix of P -> Ahat^T P + P Ahat + Chat^T P Chat under column-stacking
/// vectorization: I (x) Ahat^T + Ahat^T (x) I + Chat^T (x) Chat^T.
Mat lyap_operator_matrix(const ClosedLoopPair& pair);

/// Solves Ahat^T P + P Ahat + Chat^T P Chat + Lambda = 0 by a dense
/// n^2 x n^2 solve. Throws NumericalError("Lyapunov operator singular")
/// carrying the smallest singular value of the operator matrix.
Mat solve_generalized_lyapunov(const ClosedLoopPair& pair, const Mat& Lambda);

/// L2-exponential stability of [Ahat, Chat]: the operator's spectral abscissa
/// is below -kStabilityMargin and the Lambda = I solution is positive
/// definite.
StabilityCert is_l2_exp_stable(const ClosedLoopPair& pair);

StabilityCert is_stabilizer(const LQModel& model, const Mat& Theta);

struct StabilizerSearchOptions {
  std::optional<Mat> candidate;  // tried first when present
  int max_steps = 4000;          // Riccati-flow steps from P = I
  double step = 0.05;            // damping of each step, scaled by model size
  int test_every = 5;
};

/// Best-effort search for Theta with [A + B Theta, C + D Theta] stable.
/// Never returns an uncertified gain; throws NumericalError("no stabilizer
/// found") when the bounded search fails.
Mat find_stabilizer(const LQModel& model, const StabilizerSearchOptions& opts = {});

}  // namespace lqtp
