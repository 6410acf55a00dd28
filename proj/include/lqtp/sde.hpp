#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lqtp/cell.hpp"
#include "lqtp/model.hpp"
#include "lqtp/riccati.hpp"

namespace lqtp {

struct SimConfig {
  double T = 1.0;
  double dt = 1e-3;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  Vec x0;     // initial state of the finite-horizon loop
  Vec xbar0;  // initial state of the cell loop

  std::size_t record_stride = 1;       // record every k-th step (the last step always)
  bool with_static_processes = false;  // X*, u*, Y*, Z* around the static optimum
  bool with_adjoint = false;           // Y^T, Z^T
  unsigned threads = 0;                // 0: hardware concurrency

  /// Throws FieldError on a bad field. n is the state dimension.
  void validate(std::size_t n) const;
  std::size_t steps() const;
};

/// N(0, dt) increment of a path at a step; depends only on (seed, path, step).
double noise_increment(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                       double dt);

struct NoisePath {
  double dt = 0.0;
  std::vector<double> increments;

  static NoisePath generate(std::uint64_t seed, std::uint64_t path,
                            std::size_t steps, double dt);
  static NoisePath zero(std::size_t steps, double dt);
};

/// Coefficients of dX = (Ahat X + bhat) dt + (Chat X + sighat) dW.
struct AffineCoefficients {
  Mat Ahat;
  Mat Chat;
  Vec bhat;
  Vec sighat;
};
using CoefficientFn = std::function<AffineCoefficients(double t)>;

/// Euler-Maruyama on the grid of the noise path. Returns the state at every
/// node. Throws NumericalError("trajectory diverged at step i").
std::vector<Vec> simulate_affine_closed_loop(const CoefficientFn& coefficients,
                                             const Vec& x0, const NoisePath& noise);
std::vector<Vec> simulate_affine_closed_loop(const AffineCoefficients& coefficients,
                                             const Vec& x0, const NoisePath& noise);

/// Final states of n_paths independent constant-coefficient paths.
Mat simulate_affine_endpoints(const AffineCoefficients& coefficients, const Vec& x0,
                              double T, double dt, std::size_t n_paths,
                              std::uint64_t seed);

/// Each record holds one column per path.
struct TrajectoryBundle {
  std::size_t n = 0, m = 0, n_paths = 0;
  double T = 0.0, dt = 0.0;
  std::vector<double> times;
  std::vector<std::size_t> steps;

  std::vector<Mat> XT, uT;      // finite-horizon loop
  std::vector<Mat> Xbar, ubar;  // cell loop
  std::vector<Vec> JT, Jbar;    // running cost integrated up to the record time

  std::vector<Mat> YT, ZT;                  // with_adjoint
  std::vector<Mat> Xs, us, Ys, Zs;          // with_static_processes (bold X*, ...)

  std::size_t records() const { return times.size(); }
  bool has_adjoint() const { return !YT.empty(); }
  bool has_static() const { return !Xs.empty(); }
  /// Index of the record at time t; throws FieldError when t is not a record time.
  std::size_t record_at(double t) const;
};

/// One shared noise path per trajectory drives both closed loops:
/// X^T with (Theta^T(t), theta^T(t)) from x0 and Xbar with the constant cell
/// gains from xbar0. Gains between Riccati nodes are linearly interpolated.
TrajectoryBundle simulate_coupled_ensemble(const LQModel& model,
                                           const FiniteHorizonSolution& fh,
                                           const CellSolution& cell,
                                           const SimConfig& cfg);

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
  double ci95() const { return 1.96 * se; }
};

/// Compensated mean and standard error of a sample.
Estimate estimate(const double* values, std::size_t count);

enum class Process { kFinite, kCell, kStatic };
enum class Branch { kFinite, kCell };

/// Cost of the branch from 0 to `upto` (a record time).
Estimate cost_along(const TrajectoryBundle& bundle, Branch which, double upto);

/// E|X(t)|^order per record.
std::vector<Estimate> moment_curve(const TrajectoryBundle& bundle, Process which,
                                   int order);

/// d(t) = E[|X^T - Xbar|^2 + |u^T - ubar|^2] per record.
std::vector<Estimate> deviation_curve(const TrajectoryBundle& bundle);
std::vector<Estimate> state_deviation_curve(const TrajectoryBundle& bundle);
std::vector<Estimate> control_deviation_curve(const TrajectoryBundle& bundle);

/// Per-record mean of one component of a recorded process.
std::vector<Estimate> component_mean(const std::vector<Mat>& records, Eigen::Index row);

/// (X(t), u(t)) samples, one column per path.
struct EmpiricalMeasure {
  Mat samples;
  Eigen::Index dim() const { return samples.rows(); }
  Eigen::Index size() const { return samples.cols(); }
};

EmpiricalMeasure snapshot(const TrajectoryBundle& bundle, Process which,
                          std::size_t record);

/// Sliced 2-Wasserstein distance; the exact sorted-sample distance in one
/// dimension. The larger sample is subsampled to the size of the smaller.
double wasserstein2_estimate(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                             int n_slices = 64, std::uint64_t seed = 0);

/// Estimator value between the even and odd halves of one sample, rescaled
/// to the size of the full sample.
double wasserstein2_noise_floor(const EmpiricalMeasure& a, int n_slices = 64,
                                std::uint64_t seed = 0);

struct StationarityProfile {
  std::vector<double> times;
  std::vector<double> mean_abs;  // E|B^T Y + D^T Z + S X + R u + r|
  std::vector<double> max_abs;
};

StationarityProfile stationarity_residual(const LQModel& model,
                                          const TrajectoryBundle& bundle);

struct BundleCsvOptions {
  std::size_t w2_every = 0;  // 0: about 20 evaluations
  int w2_slices = 64;
  std::uint64_t w2_seed = 0;
};

/// Columns: t, dev, dev_se, dev_x, dev_u, m2_xbar, m2_xbar_se, J_T, J_T_se,
/// J_bar, J_bar_se, w2_bar_to_final (empty where not evaluated).
std::string bundle_csv(const TrajectoryBundle& bundle, const BundleCsvOptions& opts = {});

}  // namespace lqtp
