#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "lqtp/sde.hpp"
#include "lqtp/stability.hpp"
#include "lqtp/turnpike.hpp"
#include "support.hpp"

using namespace lqtp;
using lqtp::test::m1;
using lqtp::test::Scalar;

namespace {

ClosedLoopPair scalar_pair(double a, double c) { return {m1(a), m1(c)}; }

Mat vec_as_mat(const Vec& v, Eigen::Index n) { return Eigen::Map<const Mat>(v.data(), n, n); }

Vec vec_of(const Mat& M) { return Eigen::Map<const Vec>(M.data(), M.size()); }

Mat direct_lyapunov(const ClosedLoopPair& pair, const Mat& P) {
  return pair.Ahat.transpose() * P + P * pair.Ahat + pair.Chat.transpose() * P * pair.Chat;
}

/// Growth factor of tr E[XX^T] between t = 20 and t = 40 for the second-moment
/// ODE dM/dt = Ahat M + M Ahat^T + Chat M Chat^T, M(0) = I (RK4, step 1e-3).
double moment_growth(const ClosedLoopPair& pair) {
  const Eigen::Index n = pair.Ahat.rows();
  auto rhs = [&](const Mat& M) {
    return Mat(pair.Ahat * M + M * pair.Ahat.transpose() +
               pair.Chat * M * pair.Chat.transpose());
  };
  Mat M = Mat::Identity(n, n);
  const double h = 1e-3;
  double at20 = 0.0;
  for (int i = 1; i <= 40000; ++i) {
    const Mat k1 = rhs(M);
    const Mat k2 = rhs(M + 0.5 * h * k1);
    const Mat k3 = rhs(M + 0.5 * h * k2);
    const Mat k4 = rhs(M + h * k3);
    M += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (i == 20000) at20 = M.trace();
  }
  return M.trace() / at20;
}

}  // namespace

TEST_CASE("operator matrix: scalar cases") {
  CHECK(lyap_operator_matrix(scalar_pair(-1, 0))(0, 0) == doctest::Approx(-2.0));
  CHECK(lyap_operator_matrix(scalar_pair(-1, 1))(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("operator matrix matches direct evaluation and is linear") {
  std::mt19937_64 gen(1);
  for (Eigen::Index n : {2, 3}) {
    const ClosedLoopPair pair{lqtp::test::random_matrix(gen, n, n, 1.0),
                              lqtp::test::random_matrix(gen, n, n, 0.5)};
    const Mat M = lyap_operator_matrix(pair);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      Mat P = lqtp::test::random_matrix(gen, n, n, 1.0);
      P = (0.5 * (P + P.transpose())).eval();
      const Mat applied = vec_as_mat(M * vec_of(P), n);
      worst = std::max(worst, (applied - direct_lyapunov(pair, P)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-12);

    const Mat P1 = lqtp::test::random_spd(gen, n, 0.1);
    const Mat P2 = lqtp::test::random_spd(gen, n, 0.1);
    const double alpha = -1.7;
    const Vec lhs = M * vec_of(alpha * P1 + P2);
    const Vec rhs = alpha * (M * vec_of(P1)) + M * vec_of(P2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("generalized Lyapunov solve: closed-form cases") {
  CHECK(solve_generalized_lyapunov(scalar_pair(-1, 1), m1(1))(0, 0) == doctest::Approx(1.0));
  CHECK(solve_generalized_lyapunov(scalar_pair(-1, 0), m1(1))(0, 0) == doctest::Approx(0.5));
  const ClosedLoopPair pair{-Mat::Identity(2, 2), Mat::Zero(2, 2)};
  const Mat P = solve_generalized_lyapunov(pair, Mat::Identity(2, 2));
  CHECK((P - 0.5 * Mat::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("generalized Lyapunov solve: residual and symmetry") {
  std::mt19937_64 gen(2);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index n = 1 + k % 4;
    const ClosedLoopPair pair{lqtp::test::random_matrix(gen, n, n, 1.0) -
                                  2.0 * Mat::Identity(n, n),
                              lqtp::test::random_matrix(gen, n, n, 0.3)};
    const Mat Lambda = lqtp::test::random_spd(gen, n, 0.2);
    const Mat P = solve_generalized_lyapunov(pair, Lambda);
    CHECK((direct_lyapunov(pair, P) + Lambda).norm() <= 1e-10 * (1.0 + Lambda.norm()));
    CHECK((P - P.transpose()).norm() == 0.0);
  }
}

TEST_CASE("generalized Lyapunov solve: singular operator") {
  try {
    solve_generalized_lyapunov(scalar_pair(0, 0), m1(1));
    FAIL("singular operator accepted");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("Lyapunov operator singular") != std::string::npos);
    CHECK(e.value() < 1e-12);
  }
}

TEST_CASE("stability certificate: scalar cases") {
  auto stable = is_l2_exp_stable(scalar_pair(-1, 0));
  CHECK(stable.stable);
  CHECK(stable.spectral_abscissa == doctest::Approx(-2.0));
  REQUIRE(stable.lyapunov_P.has_value());
  CHECK((*stable.lyapunov_P)(0, 0) == doctest::Approx(0.5));
  CHECK(*stable.min_eig_P > 0.0);

  auto unstable = is_l2_exp_stable(scalar_pair(0.5, 0));
  CHECK_FALSE(unstable.stable);
  CHECK(unstable.spectral_abscissa == doctest::Approx(1.0));

  auto noisy = is_l2_exp_stable(scalar_pair(-1, 1.5));
  CHECK_FALSE(noisy.stable);
  CHECK(noisy.spectral_abscissa == doctest::Approx(0.25));
}

TEST_CASE("stability agrees with the second-moment ODE on random pairs") {
  std::mt19937_64 gen(3);
  int stable_seen = 0, unstable_seen = 0;
  while (stable_seen < 50 || unstable_seen < 50) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(gen() % 2);
    const ClosedLoopPair pair{lqtp::test::random_matrix(gen, n, n, 1.0) -
                                  0.6 * Mat::Identity(n, n),
                              lqtp::test::random_matrix(gen, n, n, 0.8)};
    const double growth = moment_growth(pair);
    const bool clearly_stable = growth < 1e-2;
    const bool clearly_unstable = growth > 1.0;
    if (clearly_stable && stable_seen < 50) {
      ++stable_seen;
      const auto cert = is_l2_exp_stable(pair);
      CHECK(cert.stable);
      const Mat P = solve_generalized_lyapunov(pair, Mat::Identity(n, n));
      CHECK(min_sym_eigenvalue(P) > 0.0);
    } else if (clearly_unstable && unstable_seen < 50) {
      ++unstable_seen;
      CHECK_FALSE(is_l2_exp_stable(pair).stable);
      bool rejected = false;
      try {
        const Mat P = solve_generalized_lyapunov(pair, Mat::Identity(n, n));
        rejected = min_sym_eigenvalue(P) <= 0.0;
      } catch (const NumericalError&) {
        rejected = true;
      }
      CHECK(rejected);
    }
  }
}

TEST_CASE("Monte Carlo second moment decays for a stable pair") {
  const AffineCoefficients c{m1(-1.0), m1(0.5), lqtp::test::v1(0.0), lqtp::test::v1(0.0)};
  REQUIRE(is_l2_exp_stable({c.Ahat, c.Chat}).stable);
  std::vector<double> ts, m2;
  for (int k = 1; k <= 8; ++k) {
    const double t = 0.25 * k;
    const Mat X = simulate_affine_endpoints(c, lqtp::test::v1(1.0), t, 1e-3, 4000, 17);
    ts.push_back(t);
    m2.push_back(X.array().square().mean());
  }
  const DecayFit fit = fit_exponential(ts, m2);
  CHECK(fit.lambda > 0.0);
}

TEST_CASE("is_stabilizer: scalar cases") {
  CHECK(is_stabilizer(Scalar{.A = -1, .B = 1}.model(), m1(0)).stable);
  CHECK(is_stabilizer(Scalar{.A = 1, .B = 1}.model(), m1(-2)).stable);
  const auto cert = is_stabilizer(Scalar{.A = 1, .B = 1, .D = 1}.model(), m1(-2));
  CHECK_FALSE(cert.stable);
  CHECK(cert.spectral_abscissa == doctest::Approx(2.0));
}

TEST_CASE("is_stabilizer: dimension mismatch") {
  CHECK_THROWS_AS(is_stabilizer(lqtp::test::real_modes_2x2(), Mat::Zero(1, 2)), FieldError);
}

TEST_CASE("find_stabilizer: scalar cases") {
  const Mat trivial = find_stabilizer(Scalar{.A = -1}.model());
  CHECK(trivial(0, 0) == 0.0);

  const LQModel unstable = Scalar{.A = 1, .B = 1}.model();
  const Mat Theta = find_stabilizer(unstable);
  CHECK(Theta(0, 0) < -1.0);
  CHECK(is_stabilizer(unstable, Theta).stable);

  try {
    find_stabilizer(Scalar{.A = 1}.model());
    FAIL("unstabilizable model accepted");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("no stabilizer found") != std::string::npos);
  }
}

TEST_CASE("find_stabilizer: user candidate is tried first") {
  const LQModel model = Scalar{.A = 1, .B = 1}.model();
  StabilizerSearchOptions opts;
  opts.candidate = m1(-5.0);
  CHECK(find_stabilizer(model, opts)(0, 0) == -5.0);
}

TEST_CASE("find_stabilizer: returned gains are certified on random models") {
  std::mt19937_64 gen(4);
  int found = 0;
  for (int k = 0; k < 40; ++k) {
    const LQModel model = lqtp::test::random_model(gen, 1 + k % 4, 1 + k % 3);
    try {
      const Mat Theta = find_stabilizer(model);
      ++found;
      CHECK(is_stabilizer(model, Theta).stable);
    } catch (const NumericalError&) {
    }
  }
  CHECK(found > 20);
}
