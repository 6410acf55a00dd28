#pragma once

#include <cmath>
#include <optional>
#include <random>

#include "lqtp/model.hpp"
#include "lqtp/stability.hpp"

namespace lqtp::test {

inline Mat m1(double v) { return Mat::Constant(1, 1, v); }
inline Vec v1(double v) { return Vec::Constant(1, v); }

struct Scalar {
  double A = 0, B = 0, C = 0, D = 0, b = 0, sigma = 0, Q = 1, S = 0, R = 1, q = 0, r = 0;

  LQModel model() const {
    LQModel out = LQModel::zeros(1, 1);
    out.A = m1(A);
    out.B = m1(B);
    out.C = m1(C);
    out.D = m1(D);
    out.b = v1(b);
    out.sigma = v1(sigma);
    out.Q = m1(Q);
    out.S = m1(S);
    out.R = m1(R);
    out.q = v1(q);
    out.r = v1(r);
    return out;
  }
};

/// A = -1, B = 1, Q = R = 1, b = 1, sigma = 0.5.
inline LQModel scalar_offset() {
  return Scalar{.A = -1, .B = 1, .b = 1, .sigma = 0.5}.model();
}

inline LQModel scalar_homogeneous() { return Scalar{.A = -1, .B = 1}.model(); }

/// Two-state model with real closed-loop modes and every term active.
inline LQModel real_modes_2x2() {
  LQModel m = LQModel::zeros(2, 2);
  m.A << -1.0, 0.3, 0.2, -2.0;
  m.B.setIdentity();
  m.C = 0.1 * Mat::Identity(2, 2);
  m.D << 0.1, 0.0, 0.0, 0.0;
  m.b << 1.0, -0.5;
  m.sigma << 0.4, 0.3;
  m.Q << 1.0, 0.0, 0.0, 2.0;
  m.R.setIdentity();
  m.q << 0.2, 0.0;
  m.r << 0.0, 0.1;
  return m;
}

inline Mat random_matrix(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  Mat out(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) out(i, j) = nd(gen);
  return out;
}

inline Vec random_vector(std::mt19937_64& gen, Eigen::Index n, double scale) {
  return random_matrix(gen, n, 1, scale);
}

inline Mat random_spd(std::mt19937_64& gen, Eigen::Index n, double floor) {
  const Mat G = random_matrix(gen, n, n, 0.5);
  const Mat M = G * G.transpose() + floor * Mat::Identity(n, n);
  return 0.5 * (M + M.transpose());
}

/// Random model satisfying (H1); multiplicative terms kept moderate.
inline LQModel random_model(std::mt19937_64& gen, Eigen::Index n, Eigen::Index m) {
  LQModel model = LQModel::zeros(n, m);
  model.A = random_matrix(gen, n, n, 0.7);
  model.B = random_matrix(gen, n, m, 1.0);
  model.C = random_matrix(gen, n, n, 0.25);
  model.D = random_matrix(gen, n, m, 0.25);
  model.b = random_vector(gen, n, 1.0);
  model.sigma = random_vector(gen, n, 0.5);
  model.R = random_spd(gen, m, 0.5);
  model.S = random_matrix(gen, m, n, 0.2);
  const Mat schur = random_spd(gen, n, 0.5);
  model.Q = schur + model.S.transpose() * model.R.inverse() * model.S;
  model.Q = (0.5 * (model.Q + model.Q.transpose())).eval();
  model.q = random_vector(gen, n, 0.5);
  model.r = random_vector(gen, m, 0.5);
  return model;
}

/// Random (H1) model whose stabilizer search succeeds with a moderate gain.
/// Nearly uncontrollable draws need gains so large that the Riccati solution
/// leaves the range where absolute residual tolerances are attainable.
inline LQModel random_stabilizable_model(std::mt19937_64& gen, Eigen::Index n,
                                         Eigen::Index m, double max_gain = 100.0) {
  for (;;) {
    LQModel model = random_model(gen, n, m);
    try {
      if (find_stabilizer(model).norm() <= max_gain) return model;
    } catch (const std::exception&) {
    }
  }
}

inline std::vector<Vec> random_points(std::mt19937_64& gen, Eigen::Index n, std::size_t count,
                                      double radius) {
  std::uniform_real_distribution<double> ud(-radius, radius);
  std::vector<Vec> out;
  for (std::size_t i = 0; i < count; ++i) {
    Vec x(n);
    for (Eigen::Index k = 0; k < n; ++k) x(k) = ud(gen);
    out.push_back(x);
  }
  return out;
}

}  // namespace lqtp::test
