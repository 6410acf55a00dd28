#include "lqtp/stability.hpp"

#include <cmath>
#include <optional>

#include "lqtp/riccati.hpp"

namespace lqtp {

ClosedLoopPair ClosedLoopPair::from_gain(const LQModel& model, const Mat& Theta) {
  check_dimensions(model);
  if (Theta.rows() != model.m() || Theta.cols() != model.n())
    throw FieldError("Theta", "expected " + std::to_string(model.m()) + "x" +
                                  std::to_string(model.n()));
  return {model.A + model.B * Theta, model.C + model.D * Theta};
}

namespace {

void check_pair(const ClosedLoopPair& pair) {
  const Eigen::Index n = pair.Ahat.rows();
  if (pair.Ahat.cols() != n) throw FieldError("Ahat", "must be square");
  if (pair.Chat.rows() != n || pair.Chat.cols() != n)
    throw FieldError("Chat", "must match Ahat");
}

}  // namespace

Mat lyap_operator_matrix(const ClosedLoopPair& pair) {
  check_pair(pair);
  const Eigen::Index n = pair.Ahat.rows();
  const Mat At = pair.Ahat.transpose();
  const Mat Ct = pair.Chat.transpose();
  Mat M = Mat::Zero(n * n, n * n);
  // Block (j, l) of the column-stacked operator acts on column l of P and
  // produces column j of the image.
  for (Eigen::Index j = 0; j < n; ++j) {
    M.block(j * n, j * n, n, n) += At;
    for (Eigen::Index l = 0; l < n; ++l) {
      M.block(j * n, l * n, n, n) += At(j, l) * Mat::Identity(n, n) + Ct(j, l) * Ct;
    }
  }
  return M;
}

Mat solve_generalized_lyapunov(const ClosedLoopPair& pair, const Mat& Lambda) {
  check_pair(pair);
  const Eigen::Index n = pair.Ahat.rows();
  if (Lambda.rows() != n || Lambda.cols() != n)
    throw FieldError("Lambda", "must match Ahat");

  const Mat M = lyap_operator_matrix(pair);
  Eigen::JacobiSVD<Mat> svd(M);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > 1e-13 * std::max(1.0, sv(0))))
    throw NumericalError("Lyapunov operator singular (smallest singular value " +
                             std::to_string(smallest) + ")",
                         smallest);

  const Vec rhs = -Eigen::Map<const Vec>(Lambda.data(), n * n);
  Vec x = M.fullPivLu().solve(rhs);
  // One step of iterative refinement keeps the residual at round-off level
  // for badly scaled operators.
  x += M.fullPivLu().solve(rhs - M * x);
  Mat P = Eigen::Map<const Mat>(x.data(), n, n);
  return 0.5 * (P + P.transpose());
}

StabilityCert is_l2_exp_stable(const ClosedLoopPair& pair) {
  const Mat M = lyap_operator_matrix(pair);
  Eigen::EigenSolver<Mat> eig(M, false);
  StabilityCert cert;
  cert.spectral_abscissa = eig.eigenvalues().real().maxCoeff();
  if (!(cert.spectral_abscissa < -kStabilityMargin)) return cert;

  const Eigen::Index n = pair.Ahat.rows();
  Mat P = solve_generalized_lyapunov(pair, Mat::Identity(n, n));
  cert.min_eig_P = min_sym_eigenvalue(P);
  cert.lyapunov_P = std::move(P);
  cert.stable = *cert.min_eig_P > 0.0;
  return cert;
}

StabilityCert is_stabilizer(const LQModel& model, const Mat& Theta) {
  return is_l2_exp_stable(ClosedLoopPair::from_gain(model, Theta));
}

Mat find_stabilizer(const LQModel& model, const StabilizerSearchOptions& opts) {
  check_dimensions(model);
  if (opts.candidate && is_stabilizer(model, *opts.candidate).stable)
    return *opts.candidate;

  // Damped explicit steps of the Riccati flow dP/ds = F(P) from P = I. The
  // flow is the time-reversed differential Riccati equation; its gains
  // become stabilizing once P approaches the stabilizing ARE solution.
  const double scale = 1.0 + model.A.norm() + model.C.squaredNorm() +
                       model.B.norm() + model.D.squaredNorm();
  const double h = opts.step / scale;
  const Eigen::Index n = model.n();
  // After the first certified gain the flow continues while the spectral
  // abscissa keeps decreasing, so a barely stable gain is not returned.
  Mat P = Mat::Identity(n, n);
  std::optional<Mat> best;
  double best_abscissa = 0.0;
  for (int k = 0; k <= opts.max_steps; ++k) {
    const Mat gain_matrix = model.R + model.D.transpose() * P * model.D;
    if (min_sym_eigenvalue(gain_matrix) <= 0.0) break;
    if (k % opts.test_every == 0) {
      Mat Theta = feedback_gain(model, P);
      const StabilityCert cert = is_stabilizer(model, Theta);
      if (cert.stable && cert.spectral_abscissa < best_abscissa) {
        best_abscissa = cert.spectral_abscissa;
        best = std::move(Theta);
      } else if (best) {
        break;
      }
    }
    P += h * riccati_map(model, P);
    P = (0.5 * (P + P.transpose())).eval();
    if (!P.allFinite() || P.norm() > 1e12) break;
  }
  if (best) return *best;
  throw NumericalError("no stabilizer found", static_cast<double>(opts.max_steps));
}

}  // namespace lqtp
