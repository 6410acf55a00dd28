#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqtp/error.hpp"

namespace lqtp {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Problem data of the stochastic LQ problem with one noise channel:
///
///   dX = (A X + B u + b) dt + (C X + D u + sigma) dW
///   f(x, u) = 1/2 (<Qx,x> + 2<Sx,u> + <Ru,u> + 2<q,x> + 2<r,u>)
struct LQModel {
  Mat A, B, C, D;
  Vec b, sigma;
  Mat Q, S, R;
  Vec q, r;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }

  /// Zero model of the given dimensions (all matrices and vectors 0).
  static LQModel zeros(Eigen::Index n, Eigen::Index m);

  /// Same model with b = sigma = q = r = 0.
  LQModel homogeneous() const;

  bool has_offsets() const;

  friend bool operator==(const LQModel&, const LQModel&);
};

/// Throws FieldError naming the first field whose shape disagrees with
/// (n, m) = (A.rows(), B.cols()).
void check_dimensions(const LQModel& model);

struct ValidationReport {
  bool h1_ok = false;
  bool dimension_ok = false;
  double min_eig_Q = 0.0;
  double min_eig_R = 0.0;
  double min_eig_schur = 0.0;  // of Q - S^T R^{-1} S
  std::vector<std::string> messages;
};

/// Checks dimensions and the positivity hypothesis on Q, R and
/// Q - S^T R^{-1} S. Dimension mismatches throw FieldError.
ValidationReport validate_model(const LQModel& model, double tol = 1e-12);

/// Parses a model document (JSON object with keys n, m, A, B, C, D, b, sigma,
/// Q, S, R, q, r; matrices as row-major nested arrays). Unknown keys, missing
/// keys, shape mismatches and non-symmetric Q/R (abs tolerance 1e-12) throw
/// FieldError. Q and R are symmetrized as (M + M^T)/2.
LQModel load_model(const std::string& text);
LQModel load_model_file(const std::string& path);

/// Inverse of load_model; round-trips finite values bit-exactly.
std::string serialize_model(const LQModel& model);

/// Smallest eigenvalue of the symmetric part of M.
double min_sym_eigenvalue(const Mat& M);

}  // namespace lqtp
