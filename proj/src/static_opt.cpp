#include "lqtp/static_opt.hpp"

#include <sstream>

namespace lqtp {

double static_objective(const LQModel& model, const Mat& P, const Vec& x, const Vec& u) {
  const Vec s = model.C * x + model.D * u + model.sigma;
  return 0.5 * (x.dot(model.Q * x) + 2.0 * u.dot(model.S * x) + u.dot(model.R * u) +
                2.0 * model.q.dot(x) + 2.0 * model.r.dot(u)) +
         0.5 * s.dot(P * s);
}

namespace {

StaticOptimum finish(const LQModel& model, const Mat& P, Vec x, Vec u, Vec y) {
  StaticOptimum out;
  out.sigma_star = model.C * x + model.D * u + model.sigma;
  out.L_value = static_objective(model, P, x, u);
  out.x_star = std::move(x);
  out.u_star = std::move(u);
  out.y_star = std::move(y);
  return out;
}

}  // namespace

StaticOptimum solve_static_kkt(const LQModel& model, const Mat& P) {
  check_dimensions(model);
  const Eigen::Index n = model.n();
  const Eigen::Index m = model.m();
  if (P.rows() != n || P.cols() != n) throw FieldError("P", "dimension mismatch");

  const Mat& A = model.A;
  const Mat& B = model.B;
  const Mat& C = model.C;
  const Mat& D = model.D;
  const Mat cross = model.S + D.transpose() * P * C;  // m x n

  Mat K = Mat::Zero(2 * n + m, 2 * n + m);
  K.block(0, 0, n, n) = model.Q + C.transpose() * P * C;
  K.block(0, n, n, m) = cross.transpose();
  K.block(0, n + m, n, n) = A.transpose();
  K.block(n, 0, m, n) = cross;
  K.block(n, n, m, m) = model.R + D.transpose() * P * D;
  K.block(n, n + m, m, n) = B.transpose();
  K.block(n + m, 0, n, n) = A;
  K.block(n + m, n, n, m) = B;

  Vec rhs(2 * n + m);
  rhs << -(model.q + C.transpose() * P * model.sigma),
      -(model.r + D.transpose() * P * model.sigma), -model.b;

  Eigen::JacobiSVD<Mat> svd(K);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > 1e-14 * std::max(1.0, sv(0)))) {
    std::ostringstream os;
    os << "KKT matrix singular (smallest singular value " << smallest << ")";
    throw NumericalError(os.str(), smallest);
  }
  const auto lu = K.fullPivLu();
  Vec z = lu.solve(rhs);
  z += lu.solve(rhs - K * z);
  return finish(model, P, z.head(n), z.segment(n, m), z.tail(n));
}

StaticOptimum static_from_cell(const LQModel& model, const CellSolution& cell) {
  check_dimensions(model);
  const Mat A_bar = model.A + model.B * cell.Theta_bar;
  const auto lu = A_bar.fullPivLu();
  if (!lu.isInvertible())
    throw NumericalError("A + B Theta_bar singular", cell.closed_loop_condition);
  Vec x = -lu.solve(model.B * cell.theta_bar + model.b);
  Vec u = cell.Theta_bar * x + cell.theta_bar;
  Vec y = cell.P * x + cell.p;
  return finish(model, cell.P, std::move(x), std::move(u), std::move(y));
}

Mat feasible_directions(const LQModel& model) {
  check_dimensions(model);
  Mat AB(model.n(), model.n() + model.m());
  AB << model.A, model.B;
  Eigen::FullPivLU<Mat> lu(AB);
  Mat kernel = lu.kernel();
  if (lu.rank() == AB.cols()) return Mat(AB.cols(), 0);
  Eigen::HouseholderQR<Mat> qr(kernel);
  return qr.householderQ() * Mat::Identity(kernel.rows(), kernel.cols());
}

}  // namespace lqtp
