#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "lqtp/cell.hpp"
#include "lqtp/riccati.hpp"
#include "lqtp/rng.hpp"
#include "lqtp/sde.hpp"
#include "lqtp/static_opt.hpp"
#include "lqtp/turnpike.hpp"
#include "support.hpp"

using namespace lqtp;
using lqtp::test::m1;
using lqtp::test::Scalar;
using lqtp::test::v1;

namespace {

struct Setup {
  LQModel model;
  FiniteHorizonSolution fh;
  CellSolution cell;
};

Setup setup(const LQModel& model, double T, double h) {
  return {model, solve_finite_horizon(model, T, h), solve_cell(model, solve_are(model))};
}

SimConfig config(const Setup& s, double dt, std::size_t paths, std::uint64_t seed, double x0,
                 double xbar0) {
  SimConfig cfg;
  cfg.T = s.fh.T();
  cfg.dt = dt;
  cfg.n_paths = paths;
  cfg.seed = seed;
  cfg.x0 = Vec::Constant(s.model.n(), x0);
  cfg.xbar0 = Vec::Constant(s.model.n(), xbar0);
  cfg.threads = 1;
  return cfg;
}

bool same_records(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!(a[k].rows() == b[k].rows() && a[k].cols() == b[k].cols() && a[k] == b[k]))
      return false;
  return true;
}

bool same_bundles(const TrajectoryBundle& a, const TrajectoryBundle& b) {
  bool same = a.times == b.times && same_records(a.XT, b.XT) && same_records(a.uT, b.uT) &&
              same_records(a.Xbar, b.Xbar) && same_records(a.ubar, b.ubar);
  for (std::size_t k = 0; same && k < a.JT.size(); ++k)
    same = a.JT[k] == b.JT[k] && a.Jbar[k] == b.Jbar[k];
  return same;
}

EmpiricalMeasure normal_sample(std::uint64_t seed, std::size_t count, double shift) {
  EmpiricalMeasure out{Mat(1, static_cast<Eigen::Index>(count))};
  for (std::size_t i = 0; i < count; ++i)
    out.samples(0, static_cast<Eigen::Index>(i)) =
        shift + rng::normal_pair(seed, rng::Stream::kNoise, i, 0)[0];
  return out;
}

}  // namespace

TEST_CASE("rng: counter-based draws are pure functions of their counter") {
  CHECK(noise_increment(5, 3, 7, 0.01) == noise_increment(5, 3, 7, 0.01));
  CHECK(noise_increment(5, 3, 7, 0.01) != noise_increment(5, 3, 8, 0.01));
  CHECK(noise_increment(5, 3, 7, 0.01) != noise_increment(6, 3, 7, 0.01));
  const auto path = NoisePath::generate(5, 3, 20, 0.01);
  REQUIRE(path.increments.size() == 20);
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(path.increments[i] == noise_increment(5, 3, i, 0.01));

  std::vector<double> draws;
  for (std::uint64_t i = 0; i < 200000; ++i) draws.push_back(noise_increment(1, i, 0, 1.0));
  const Estimate e = estimate(draws.data(), draws.size());
  CHECK(std::abs(e.mean) < 4.0 * e.se);
  double var = 0.0;
  for (double d : draws) var += d * d;
  var /= static_cast<double>(draws.size());
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("estimate: mean and standard error") {
  const std::vector<double> v{1.0, 2.0, 3.0};
  const Estimate e = estimate(v.data(), v.size());
  CHECK(e.mean == doctest::Approx(2.0));
  CHECK(e.se == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(e.ci95() == doctest::Approx(1.96 / std::sqrt(3.0)));
}

TEST_CASE("simulation config validation") {
  const Setup s = setup(lqtp::test::scalar_offset(), 1.0, 0.01);
  SimConfig cfg = config(s, 0.01, 4, 1, 0.0, 0.0);
  CHECK_NOTHROW(cfg.validate(1));
  cfg.dt = 0.3;
  CHECK_THROWS_AS(cfg.validate(1), FieldError);
  cfg = config(s, 0.01, 0, 1, 0.0, 0.0);
  CHECK_THROWS_AS(cfg.validate(1), FieldError);
  cfg = config(s, 0.01, 4, 1, 0.0, 0.0);
  CHECK_THROWS_AS(cfg.validate(2), FieldError);
  cfg.T = 2.0;
  CHECK_THROWS_AS(simulate_coupled_ensemble(s.model, s.fh, s.cell, cfg), FieldError);
}

TEST_CASE("affine closed loop: constant path") {
  const AffineCoefficients zero{Mat::Zero(2, 2), Mat::Zero(2, 2), Vec::Zero(2), Vec::Zero(2)};
  Vec x0(2);
  x0 << 1.5, -2.0;
  const auto path = simulate_affine_closed_loop(zero, x0, NoisePath::generate(1, 0, 100, 0.01));
  REQUIRE(path.size() == 101);
  for (const Vec& x : path) CHECK(x == x0);
}

TEST_CASE("affine closed loop: exponential decay without noise") {
  const AffineCoefficients c{m1(-1), m1(0), v1(0), v1(0)};
  const auto path = simulate_affine_closed_loop(c, v1(1), NoisePath::zero(10000, 1e-4));
  CHECK(std::abs(path.back()(0) - std::exp(-1.0)) < 1e-4);
  CHECK(path.back()(0) == doctest::Approx(std::pow(1.0 - 1e-4, 10000)).epsilon(1e-12));
}

TEST_CASE("affine closed loop: time-varying coefficients") {
  const CoefficientFn fn = [](double t) {
    return AffineCoefficients{m1(0), m1(0), v1(2.0 * t), v1(0)};
  };
  const auto path = simulate_affine_closed_loop(fn, v1(0), NoisePath::zero(1000, 1e-3));
  CHECK(path.back()(0) == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("affine closed loop: divergence is reported") {
  const AffineCoefficients c{m1(1e6), m1(0), v1(0), v1(0)};
  try {
    simulate_affine_closed_loop(c, v1(1), NoisePath::zero(200, 1.0));
    FAIL("overflow not detected");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("trajectory diverged at step") != std::string::npos);
  }
}

TEST_CASE("geometric noise: second moment follows the moment ODE") {
  const AffineCoefficients c{m1(0), m1(1), v1(0), v1(0)};
  const Mat X = simulate_affine_endpoints(c, v1(1.0), 1.0, 1e-3, 100000, 3);
  std::vector<double> sq(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) sq[static_cast<std::size_t>(j)] = X(0, j) * X(0, j);
  const Estimate e = estimate(sq.data(), sq.size());
  CHECK(std::abs(e.mean - std::exp(1.0)) <= 3.0 * e.se);
}

TEST_CASE("uncontrolled unstable dynamics: moment growth detected") {
  const AffineCoefficients c{m1(1), m1(0), v1(0), v1(0.3)};
  std::vector<double> ts, m2;
  for (int k = 1; k <= 8; ++k) {
    ts.push_back(0.25 * k);
    const Mat X = simulate_affine_endpoints(c, v1(1.0), 0.25 * k, 1e-3, 2000, 4);
    m2.push_back(X.array().square().mean());
  }
  const DecayFit fit = fit_exponential(ts, m2);
  CHECK(fit.lambda < -1.5);
}

TEST_CASE("coupled ensemble: both loops consume the same increments") {
  const Setup s = setup(lqtp::test::scalar_offset(), 2.0, 1e-2);
  const SimConfig cfg = config(s, 1e-2, 70, 9, 1.0, -1.0);
  const auto bundle = simulate_coupled_ensemble(s.model, s.fh, s.cell, cfg);
  REQUIRE(bundle.records() == 201);
  const double Ab = s.model.A(0, 0) + s.model.B(0, 0) * s.cell.Theta_bar(0, 0);
  const double bb = s.model.B(0, 0) * s.cell.theta_bar(0) + s.model.b(0);
  const double sig = s.model.sigma(0);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < bundle.records(); ++k) {
    const double AT = s.model.A(0, 0) + s.model.B(0, 0) * s.fh.Theta[k](0, 0);
    const double bT = s.model.B(0, 0) * s.fh.theta[k](0) + s.model.b(0);
    for (Eigen::Index j : {0, 33, 64, 69}) {
      const double expected = noise_increment(cfg.seed, static_cast<std::uint64_t>(j), k, cfg.dt);
      const double xb = bundle.Xbar[k](0, j), xb1 = bundle.Xbar[k + 1](0, j);
      const double x = bundle.XT[k](0, j), x1 = bundle.XT[k + 1](0, j);
      const double from_cell = (xb1 - xb - (Ab * xb + bb) * cfg.dt) / sig;
      const double from_finite = (x1 - x - (AT * x + bT) * cfg.dt) / sig;
      worst = std::max({worst, std::abs(from_cell - expected), std::abs(from_finite - expected)});
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("coupled ensemble: deterministic and independent of threading") {
  const Setup s = setup(lqtp::test::real_modes_2x2(), 2.0, 1e-2);
  SimConfig one = config(s, 1e-2, 1, 77, 1.0, 0.0);
  CHECK(same_bundles(simulate_coupled_ensemble(s.model, s.fh, s.cell, one),
                     simulate_coupled_ensemble(s.model, s.fh, s.cell, one)));
  SimConfig many = config(s, 5e-3, 300, 77, 1.0, 0.0);
  many.record_stride = 7;
  const auto serial = simulate_coupled_ensemble(s.model, s.fh, s.cell, many);
  many.threads = 3;
  const auto threaded = simulate_coupled_ensemble(s.model, s.fh, s.cell, many);
  CHECK(same_bundles(serial, threaded));
  CHECK(bundle_csv(serial) == bundle_csv(threaded));
  CHECK(serial.times.back() == 2.0);
  CHECK(serial.steps.back() == 400);
}

TEST_CASE("coupled ensemble: record lookup") {
  const Setup s = setup(lqtp::test::scalar_offset(), 1.0, 1e-2);
  SimConfig cfg = config(s, 1e-2, 8, 1, 0.0, 0.0);
  cfg.record_stride = 10;
  const auto bundle = simulate_coupled_ensemble(s.model, s.fh, s.cell, cfg);
  CHECK(bundle.record_at(0.5) == 5);
  CHECK(bundle.record_at(1.0) == 10);
  CHECK_THROWS_AS(bundle.record_at(0.55), FieldError);
  CHECK_THROWS_AS(cost_along(bundle, Branch::kCell, 0.33), FieldError);
}

TEST_CASE("static processes: means sit at the static optimum") {
  const Setup s = setup(lqtp::test::real_modes_2x2(), 10.0, 1e-2);
  SimConfig cfg = config(s, 1e-2, 4000, 5, 0.0, 0.0);
  cfg.with_static_processes = true;
  cfg.record_stride = 50;
  const auto bundle = simulate_coupled_ensemble(s.model, s.fh, s.cell, cfg);
  REQUIRE(bundle.has_static());
  const auto opt = static_from_cell(s.model, s.cell);
  for (Eigen::Index a = 0; a < 2; ++a) {
    const auto xm = component_mean(bundle.Xs, a);
    const auto um = component_mean(bundle.us, a);
    const auto ym = component_mean(bundle.Ys, a);
    for (std::size_t k = 0; k < xm.size(); ++k) {
      CHECK(std::abs(xm[k].mean - opt.x_star(a)) <= 4.0 * xm[k].se + 1e-12);
      CHECK(std::abs(um[k].mean - opt.u_star(a)) <= 4.0 * um[k].se + 1e-12);
      CHECK(std::abs(ym[k].mean - opt.y_star(a)) <= 4.0 * ym[k].se + 1e-12);
    }
  }
}

TEST_CASE("moments: zero dynamics keep |x0|^2") {
  const Setup s = setup(lqtp::test::scalar_homogeneous(), 1.0, 1e-2);
  SimConfig cfg = config(s, 1e-2, 16, 1, 1.5, 1.5);
  Setup frozen = s;
  frozen.model.A = m1(0);
  frozen.model.B = m1(0);
  const auto bundle = simulate_coupled_ensemble(frozen.model, frozen.fh, frozen.cell, cfg);
  for (const auto& e : moment_curve(bundle, Process::kCell, 2)) CHECK(e.mean == 2.25);
  for (const auto& e : moment_curve(bundle, Process::kFinite, 4)) CHECK(e.mean == 2.25 * 2.25);
  CHECK_THROWS_AS(moment_curve(bundle, Process::kCell, 3), FieldError);
  CHECK_THROWS_AS(moment_curve(bundle, Process::kStatic, 2), FieldError);
}

TEST_CASE("moments: cell loop second moment is stationary after burn-in") {
  const Setup s = setup(lqtp::test::scalar_offset(), 20.0, 1e-2);
  SimConfig cfg = config(s, 1e-3, 4000, 6, 0.0, 0.0);
  cfg.record_stride = 500;
  const auto bundle = simulate_coupled_ensemble(s.model, s.fh, s.cell, cfg);
  const double Ab = -std::sqrt(2.0);
  const double stationary = 0.25 + 0.25 / (2.0 * std::abs(Ab));
  const auto curve = moment_curve(bundle, Process::kCell, 2);
  std::vector<double> ts, ms;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (bundle.times[k] < 5.0) continue;
    CHECK(std::abs(curve[k].mean - stationary) <= 4.0 * curve[k].se + 2e-3);
    ts.push_back(bundle.times[k]);
    ms.push_back(curve[k].mean);
  }
  const double tm = std::accumulate(ts.begin(), ts.end(), 0.0) / ts.size();
  const double mm = std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    sxy += (ts[k] - tm) * (ms[k] - mm);
    sxx += (ts[k] - tm) * (ts[k] - tm);
  }
  const double drift_over_window = std::abs(sxy / sxx) * (ts.back() - ts.front());
  CHECK(drift_over_window <= 4.0 * curve.back().se);
}

TEST_CASE("costs: zero cost for a zero running cost") {
  Setup s = setup(lqtp::test::scalar_offset(), 1.0, 1e-2);
  s.model.Q = m1(0);
  s.model.R = m1(0);
  const auto bundle = simulate_coupled_ensemble(s.model, s.fh, s.cell, config(s, 1e-2, 32, 1, 1, 2));
  CHECK(cost_along(bundle, Branch::kFinite, 1.0).mean == 0.0);
  CHECK(cost_along(bundle, Branch::kCell, 1.0).mean == 0.0);
}

TEST_CASE("costs: finite-horizon cost matches the value function") {
  LQModel homog = Scalar{.A = -0.5, .B = 1, .C = 0.4, .D = 0.2, .Q = 1.5, .R = 1}.model();
  const Setup h = setup(homog, 2.0, 1e-3);
  SimConfig ch = config(h, 1e-3, 20000, 8, 1, 1);
  ch.record_stride = ch.steps();
  const auto bh = simulate_coupled_ensemble(h.model, h.fh, h.cell, ch);
  const Estimate Jh = cost_along(bh, Branch::kFinite, 2.0);
  CHECK(std::abs(Jh.mean - value_finite(h.fh, 0.0, v1(1.0))) <= 3.0 * Jh.se);

  const Setup o = setup(lqtp::test::scalar_offset(), 5.0, 1e-3);
  SimConfig co = config(o, 1e-3, 20000, 8, 0, 0);
  co.record_stride = co.steps();
  const auto bo = simulate_coupled_ensemble(o.model, o.fh, o.cell, co);
  const Estimate Jo = cost_along(bo, Branch::kFinite, 5.0);
  CHECK(std::abs(Jo.mean - value_finite(o.fh, 0.0, v1(0.0))) <= 3.0 * Jo.se + 1e-3);
  const Estimate Jbar = cost_along(bo, Branch::kCell, 5.0);
  CHECK(Jbar.mean >= Jo.mean - 3.0 * Jo.se);
}

TEST_CASE("Wasserstein: closed-form cases") {
  const EmpiricalMeasure a = normal_sample(1, 1000, 0.0);
  CHECK(wasserstein2_estimate(a, a) == 0.0);

  const EmpiricalMeasure zeros{Mat::Zero(1, 50)}, ones{Mat::Ones(1, 50)};
  CHECK(wasserstein2_estimate(zeros, ones) == doctest::Approx(1.0));

  const EmpiricalMeasure n0 = normal_sample(2, 100000, 0.0);
  const EmpiricalMeasure n1 = normal_sample(3, 100000, 0.5);
  CHECK(std::abs(wasserstein2_estimate(n0, n1) - 0.5) < 0.02);

  CHECK_THROWS_AS(wasserstein2_estimate(EmpiricalMeasure{Mat(1, 0)}, a), FieldError);
  CHECK_THROWS_AS(wasserstein2_estimate(EmpiricalMeasure{Mat::Zero(2, 5)}, a), FieldError);
}

TEST_CASE("Wasserstein: sliced estimate in two dimensions") {
  const Eigen::Index count = 20000;
  EmpiricalMeasure a{Mat(2, count)}, b{Mat(2, count)};
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto za = rng::normal_pair(10, rng::Stream::kNoise, static_cast<std::uint64_t>(i), 0);
    const auto zb = rng::normal_pair(11, rng::Stream::kNoise, static_cast<std::uint64_t>(i), 0);
    a.samples.col(i) << za[0], za[1];
    b.samples.col(i) << zb[0] + 0.5, zb[1];
  }
  const double w = wasserstein2_estimate(a, b, 64, 1);
  CHECK(w == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(0.15));
  CHECK(w == wasserstein2_estimate(a, b, 64, 1));
  CHECK(wasserstein2_noise_floor(a, 64, 1) < 0.05);

  EmpiricalMeasure big{Mat(2, 2 * count)};
  big.samples << b.samples, b.samples;
  CHECK(wasserstein2_estimate(a, big, 64, 1) == doctest::Approx(w).epsilon(0.2));
}

TEST_CASE("stationarity: reconstructed residual vanishes along the optimal control") {
  for (const LQModel& model : {lqtp::test::scalar_homogeneous(), lqtp::test::scalar_offset(),
                               lqtp::test::real_modes_2x2()}) {
    const Setup s = setup(model, 2.0, 1e-2);
    SimConfig cfg = config(s, 1e-2, 200, 12, 1.0, 0.0);
    cfg.with_adjoint = true;
    const auto bundle = simulate_coupled_ensemble(s.model, s.fh, s.cell, cfg);
    const auto prof = stationarity_residual(s.model, bundle);
    const double bound = model.has_offsets() ? 1e-8 : 1e-10;
    for (double v : prof.max_abs) CHECK(v <= bound);

    Setup detuned = s;
    for (Mat& Theta : detuned.fh.Theta) Theta.array() += 0.1;
    const auto bad = simulate_coupled_ensemble(s.model, detuned.fh, s.cell, cfg);
    const auto bad_prof = stationarity_residual(s.model, bad);
    CHECK(*std::max_element(bad_prof.mean_abs.begin(), bad_prof.mean_abs.end()) > 1e-2);
  }
  const Setup s = setup(lqtp::test::scalar_offset(), 1.0, 1e-2);
  const auto plain = simulate_coupled_ensemble(s.model, s.fh, s.cell, config(s, 1e-2, 4, 1, 0, 0));
  CHECK_THROWS_AS(stationarity_residual(s.model, plain), FieldError);
}

TEST_CASE("coupled deviation: mid-interval deviation far below the terminal layer") {
  const Setup s = setup(lqtp::test::scalar_offset(), 20.0, 1e-2);
  SimConfig cfg = config(s, 1e-2, 500, 2, 0.0, 0.0);
  cfg.record_stride = 10;
  const auto bundle = simulate_coupled_ensemble(s.model, s.fh, s.cell, cfg);
  const auto dev = deviation_curve(bundle);
  const double mid = dev[bundle.record_at(10.0)].mean;
  const double late = dev[bundle.record_at(19.0)].mean;
  CHECK(mid < 1e-3 * late);
  const auto dx = state_deviation_curve(bundle);
  const auto du = control_deviation_curve(bundle);
  for (std::size_t k = 0; k < dev.size(); k += 17)
    CHECK(dev[k].mean == doctest::Approx(dx[k].mean + du[k].mean).epsilon(1e-12));
}

TEST_CASE("bundle CSV layout") {
  const Setup s = setup(lqtp::test::scalar_offset(), 1.0, 1e-2);
  SimConfig cfg = config(s, 1e-2, 20, 1, 1.0, 0.0);
  cfg.record_stride = 10;
  const auto bundle = simulate_coupled_ensemble(s.model, s.fh, s.cell, cfg);
  std::istringstream in(bundle_csv(bundle));
  std::string header, line;
  std::getline(in, header);
  CHECK(header ==
        "t,dev,dev_se,dev_x,dev_u,m2_xbar,m2_xbar_se,J_T,J_T_se,J_bar,J_bar_se,w2_bar_to_final");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 11);
  }
  CHECK(rows == 11);
}
