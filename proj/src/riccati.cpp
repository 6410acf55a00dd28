#include "lqtp/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "csv.hpp"
#include "lqtp/stability.hpp"

namespace lqtp {

Mat gain_matrix(const LQModel& model, const Mat& P) {
  return model.R + model.D.transpose() * P * model.D;
}

Mat feedback_gain(const LQModel& model, const Mat& P) {
  const Mat G = model.B.transpose() * P + model.D.transpose() * P * model.C + model.S;
  return -gain_matrix(model, P).ldlt().solve(G);
}

Vec feedforward(const LQModel& model, const Mat& P, const Vec& p) {
  const Vec w = model.B.transpose() * p + model.D.transpose() * (P * model.sigma) + model.r;
  return -gain_matrix(model, P).ldlt().solve(w);
}

Mat riccati_map(const LQModel& model, const Mat& P) {
  const Mat G = model.B.transpose() * P + model.D.transpose() * P * model.C + model.S;
  const Mat K = gain_matrix(model, P).ldlt().solve(G);
  Mat F = P * model.A + model.A.transpose() * P +
          model.C.transpose() * P * model.C + model.Q - G.transpose() * K;
  return 0.5 * (F + F.transpose());
}

double are_residual(const LQModel& model, const Mat& P) {
  return riccati_map(model, P).norm();
}

AreSolution solve_are_stabilizing(const LQModel& model, const Mat& Theta0,
                                  const AreOptions& opts) {
  check_dimensions(model);
  if (!is_stabilizer(model, Theta0).stable)
    throw NumericalError("initial gain is not a stabilizer", 0.0);

  AreSolution out;
  Mat Theta = Theta0;
  Mat P_prev;
  double prev_residual = 0.0;
  bool polishing = false;
  for (int k = 1; k <= opts.max_iterations; ++k) {
    const ClosedLoopPair pair = ClosedLoopPair::from_gain(model, Theta);
    const Mat cost = model.Q + Theta.transpose() * model.S +
                     model.S.transpose() * Theta +
                     Theta.transpose() * model.R * Theta;
    Mat P = solve_generalized_lyapunov(pair, 0.5 * (cost + cost.transpose()));
    Theta = feedback_gain(model, P);

    const double residual = are_residual(model, P);
    if (polishing) {
      // One extra step once the tolerance is met; kept only if it helps.
      if (residual < prev_residual && is_stabilizer(model, Theta).stable) {
        P_prev = std::move(P);
        out.residual_history.push_back(residual);
        out.newton_iters = k;
      }
      break;
    }
    out.residual_history.push_back(residual);
    out.newton_iters = k;

    const bool small_step =
        k > 1 && (P - P_prev).norm() <= opts.step_tol * (1.0 + P_prev.norm());
    P_prev = std::move(P);
    prev_residual = residual;
    if (small_step) break;
    if (residual <= opts.residual_tol) {
      polishing = is_stabilizer(model, Theta).stable;
      if (!polishing) break;
      continue;
    }
    if (!is_stabilizer(model, Theta).stable)
      throw NumericalError("Newton step left stabilizing set", residual);
    if (k == opts.max_iterations) {
      std::ostringstream os;
      os << "ARE not converged after " << k << " iterations; residual history:";
      for (double r : out.residual_history) os << ' ' << r;
      throw NumericalError(os.str(), residual);
    }
  }

  out.P = std::move(P_prev);
  out.Theta_bar = feedback_gain(model, out.P);
  out.final_residual = are_residual(model, out.P);
  if (!is_stabilizer(model, out.Theta_bar).stable)
    throw NumericalError("Newton step left stabilizing set", out.final_residual);
  return out;
}

AreSolution solve_are(const LQModel& model, const AreOptions& opts) {
  return solve_are_stabilizing(model, find_stabilizer(model), opts);
}

// ---------------------------------------------------------------------------

TimeGrid TimeGrid::make(double T, double h) {
  if (!(T > 0.0)) throw FieldError("T", "horizon must be positive");
  if (!(h > 0.0)) throw FieldError("h", "step must be positive");
  const double ratio = T / h;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio))
    throw FieldError("h", "step must divide the horizon");
  return {T, T / steps, static_cast<std::size_t>(steps)};
}

namespace {

struct DefinitenessGuard {
  const LQModel& model;
  double delta;

  void check(const Mat& P, double t) const {
    if (!P.allFinite() ||
        !(min_sym_eigenvalue(gain_matrix(model, P)) >= delta)) {
      std::ostringstream os;
      os << "gain matrix lost definiteness at t=" << t;
      throw NumericalError(os.str(), t);
    }
  }
};

Mat symmetrized(const Mat& M) { return 0.5 * (M + M.transpose()); }

/// Backward RK4 of dP/ds = F(P), s = T - t, returning the node values.
std::vector<Mat> rk4_backward(const LQModel& model, const TimeGrid& grid,
                              const DefinitenessGuard& guard) {
  const Eigen::Index n = model.n();
  std::vector<Mat> P(grid.nodes());
  P[grid.steps] = Mat::Zero(n, n);
  const double h = grid.h;
  const bool guard_stages = !model.D.isZero(0.0);
  for (std::size_t i = grid.steps; i-- > 0;) {
    const Mat& y = P[i + 1];
    const double t = grid.at(i + 1);
    const Mat k1 = riccati_map(model, y);
    const Mat y2 = symmetrized(y + 0.5 * h * k1);
    if (guard_stages) guard.check(y2, t - 0.5 * h);
    const Mat k2 = riccati_map(model, y2);
    const Mat y3 = symmetrized(y + 0.5 * h * k2);
    if (guard_stages) guard.check(y3, t - 0.5 * h);
    const Mat k3 = riccati_map(model, y3);
    const Mat y4 = symmetrized(y + h * k3);
    if (guard_stages) guard.check(y4, t - h);
    const Mat k4 = riccati_map(model, y4);
    P[i] = symmetrized(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (!P[i].allFinite()) guard.check(P[i], grid.at(i));
  }
  return P;
}

}  // namespace

DreSolution integrate_dre(const LQModel& model, double T, double h,
                          const DreOptions& opts) {
  check_dimensions(model);
  DreSolution out;
  out.grid = TimeGrid::make(T, h);
  out.delta = opts.delta >= 0.0 ? opts.delta : 0.5 * min_sym_eigenvalue(model.R);
  const DefinitenessGuard guard{model, out.delta};

  out.P = rk4_backward(model, out.grid, guard);

  out.min_gain_eig = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.P.size(); ++i) {
    const double e = min_sym_eigenvalue(gain_matrix(model, out.P[i]));
    if (!(e >= out.delta)) guard.check(out.P[i], out.grid.at(i));
    out.min_gain_eig = std::min(out.min_gain_eig, e);
  }

  if (opts.step_halving) {
    TimeGrid fine{out.grid.T, out.grid.h / 2.0, out.grid.steps * 2};
    const std::vector<Mat> P_fine = rk4_backward(model, fine, guard);
    double err = 0.0;
    for (std::size_t i = 0; i < out.P.size(); ++i)
      err = std::max(err, (out.P[i] - P_fine[2 * i]).cwiseAbs().maxCoeff());
    out.halving_error = err;
  }
  return out;
}

namespace {

/// Cubic Lagrange interpolation of node values at the midpoint of
/// [t_i, t_{i+1}]; linear when fewer than four nodes exist.
template <typename T>
T midpoint_value(const std::vector<T>& nodes, std::size_t i) {
  const std::size_t count = nodes.size();
  if (count < 4) return T(0.5 * (nodes[i] + nodes[i + 1]));
  if (i == 0)
    return T(0.3125 * nodes[0] + 0.9375 * nodes[1] - 0.3125 * nodes[2] +
             0.0625 * nodes[3]);
  if (i + 2 >= count)
    return T(0.0625 * nodes[i - 2] - 0.3125 * nodes[i - 1] +
             0.9375 * nodes[i] + 0.3125 * nodes[i + 1]);
  return T(-0.0625 * nodes[i - 1] + 0.5625 * nodes[i] + 0.5625 * nodes[i + 1] -
           0.0625 * nodes[i + 2]);
}

/// Right side of dp/ds = (A + B Theta)^T p + (C + D Theta)^T P sigma + P b
/// + q + Theta^T r.
Vec p_rhs(const LQModel& model, const Mat& P, const Mat& Theta, const Vec& p) {
  return (model.A + model.B * Theta).transpose() * p +
         (model.C + model.D * Theta).transpose() * (P * model.sigma) +
         P * model.b + model.q + Theta.transpose() * model.r;
}

double p0_integrand(const LQModel& model, const Mat& P, const Vec& p) {
  const Vec w = model.B.transpose() * p + model.D.transpose() * (P * model.sigma) + model.r;
  return model.sigma.dot(P * model.sigma) + 2.0 * p.dot(model.b) -
         w.dot(gain_matrix(model, P).ldlt().solve(w));
}

}  // namespace

FiniteHorizonSolution complete_finite_horizon(const LQModel& model,
                                              const DreSolution& dre) {
  check_dimensions(model);
  FiniteHorizonSolution sol;
  sol.grid = dre.grid;
  sol.P = dre.P;
  sol.halving_error = dre.halving_error;
  const std::size_t N = sol.grid.steps;
  const double h = sol.grid.h;

  sol.Theta.resize(N + 1);
  for (std::size_t i = 0; i <= N; ++i) sol.Theta[i] = feedback_gain(model, sol.P[i]);

  sol.p.assign(N + 1, Vec::Zero(model.n()));
  for (std::size_t i = N; i-- > 0;) {
    const Mat P_mid = midpoint_value(sol.P, i);
    const Mat Theta_mid = midpoint_value(sol.Theta, i);
    const Vec& y = sol.p[i + 1];
    const Vec k1 = p_rhs(model, sol.P[i + 1], sol.Theta[i + 1], y);
    const Vec k2 = p_rhs(model, P_mid, Theta_mid, y + 0.5 * h * k1);
    const Vec k3 = p_rhs(model, P_mid, Theta_mid, y + 0.5 * h * k2);
    const Vec k4 = p_rhs(model, sol.P[i], sol.Theta[i], y + h * k3);
    sol.p[i] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  sol.theta.resize(N + 1);
  for (std::size_t i = 0; i <= N; ++i)
    sol.theta[i] = feedforward(model, sol.P[i], sol.p[i]);

  sol.p0.assign(N + 1, 0.0);
  double g_next = p0_integrand(model, sol.P[N], sol.p[N]);
  for (std::size_t i = N; i-- > 0;) {
    const double g = p0_integrand(model, sol.P[i], sol.p[i]);
    sol.p0[i] = sol.p0[i + 1] + 0.5 * h * (g + g_next);
    g_next = g;
  }
  return sol;
}

FiniteHorizonSolution solve_finite_horizon(const LQModel& model, double T,
                                           double h, const DreOptions& opts) {
  return complete_finite_horizon(model, integrate_dre(model, T, h, opts));
}

namespace {

struct Bracket {
  std::size_t i;
  double w;  // weight of node i + 1
};

Bracket locate(const TimeGrid& grid, double t) {
  if (!(t >= 0.0 && t <= grid.T)) {
    std::ostringstream os;
    os << "time " << t << " outside [0, " << grid.T << "]";
    throw FieldError("t", os.str());
  }
  if (grid.steps == 0) return {0, 0.0};
  auto i = static_cast<std::size_t>(std::floor(t / grid.h));
  if (i >= grid.steps) i = grid.steps - 1;
  const double w = std::clamp((t - grid.at(i)) / grid.h, 0.0, 1.0);
  return {i, w};
}

template <typename T>
T interpolate(const std::vector<T>& nodes, const TimeGrid& grid, double t) {
  const Bracket b = locate(grid, t);
  if (b.w == 0.0) return nodes[b.i];
  if (b.w == 1.0) return nodes[b.i + 1];
  return T((1.0 - b.w) * nodes[b.i] + b.w * nodes[b.i + 1]);
}

}  // namespace

Mat FiniteHorizonSolution::P_at(double t) const { return interpolate(P, grid, t); }
Vec FiniteHorizonSolution::p_at(double t) const { return interpolate(p, grid, t); }
double FiniteHorizonSolution::p0_at(double t) const { return interpolate(p0, grid, t); }
Mat FiniteHorizonSolution::Theta_at(double t) const { return interpolate(Theta, grid, t); }
Vec FiniteHorizonSolution::theta_at(double t) const { return interpolate(theta, grid, t); }

double value_finite(const FiniteHorizonSolution& sol, double t, const Vec& x) {
  if (x.size() != sol.P.front().rows()) throw FieldError("x", "dimension mismatch");
  const Mat P = sol.P_at(t);
  return 0.5 * (x.dot(P * x) + 2.0 * sol.p_at(t).dot(x) + sol.p0_at(t));
}

std::string finite_horizon_csv(const FiniteHorizonSolution& sol) {
  const Eigen::Index n = sol.P.front().rows();
  const Eigen::Index m = sol.Theta.front().rows();
  std::string out = "t";
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r)
      out += ",P_" + std::to_string(r) + "_" + std::to_string(c);
  for (Eigen::Index r = 0; r < n; ++r) out += ",p_" + std::to_string(r);
  out += ",p0";
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < m; ++r)
      out += ",Theta_" + std::to_string(r) + "_" + std::to_string(c);
  for (Eigen::Index r = 0; r < m; ++r) out += ",theta_" + std::to_string(r);
  out += '\n';

  for (std::size_t i = 0; i < sol.nodes(); ++i) {
    detail::append_number(out, sol.grid.at(i));
    auto put = [&](double v) {
      out += ',';
      detail::append_number(out, v);
    };
    for (Eigen::Index k = 0; k < n * n; ++k) put(sol.P[i].data()[k]);
    for (Eigen::Index k = 0; k < n; ++k) put(sol.p[i](k));
    put(sol.p0[i]);
    for (Eigen::Index k = 0; k < n * m; ++k) put(sol.Theta[i].data()[k]);
    for (Eigen::Index k = 0; k < m; ++k) put(sol.theta[i](k));
    out += '\n';
  }
  return out;
}

}  // namespace lqtp
