#include "lqtp/sde.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "lqtp/error.hpp"
#include "lqtp/rng.hpp"
#include "lqtp/static_opt.hpp"

namespace lqtp {

namespace {

std::size_t checked_steps(double T, double dt) {
  if (!(T > 0.0) || !std::isfinite(T)) throw FieldError("T", "horizon must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw FieldError("dt", "step must be positive");
  const double ratio = T / dt;
  const double steps = std::round(ratio);
  if (steps < 1.0 || std::abs(ratio - steps) > 1e-12 * std::max(1.0, ratio))
    throw FieldError("dt", "step must divide the horizon");
  return static_cast<std::size_t>(steps);
}

[[noreturn]] void diverged(std::size_t step, std::size_t path) {
  std::ostringstream os;
  os << "trajectory diverged at step " << step;
  if (path != static_cast<std::size_t>(-1)) os << " (path " << path << ")";
  throw NumericalError(os.str(), static_cast<double>(step));
}

// Neumaier-compensated accumulator.
struct Accumulator {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace

void SimConfig::validate(std::size_t n) const {
  checked_steps(T, dt);
  if (n_paths < 1) throw FieldError("n_paths", "must be at least 1");
  if (record_stride < 1) throw FieldError("record_stride", "must be at least 1");
  if (static_cast<std::size_t>(x0.size()) != n) throw FieldError("x0", "dimension mismatch");
  if (static_cast<std::size_t>(xbar0.size()) != n)
    throw FieldError("xbar0", "dimension mismatch");
  if (!x0.allFinite()) throw FieldError("x0", "non-finite entry");
  if (!xbar0.allFinite()) throw FieldError("xbar0", "non-finite entry");
}

std::size_t SimConfig::steps() const { return checked_steps(T, dt); }

double noise_increment(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                       double dt) {
  const auto pair = rng::normal_pair(seed, rng::Stream::kNoise, path,
                                     static_cast<std::uint32_t>(step / 2));
  return std::sqrt(dt) * pair[step % 2];
}

NoisePath NoisePath::generate(std::uint64_t seed, std::uint64_t path, std::size_t steps,
                              double dt) {
  NoisePath out{dt, std::vector<double>(steps)};
  const double scale = std::sqrt(dt);
  for (std::size_t i = 0; i < steps; i += 2) {
    const auto pair = rng::normal_pair(seed, rng::Stream::kNoise, path,
                                       static_cast<std::uint32_t>(i / 2));
    out.increments[i] = scale * pair[0];
    if (i + 1 < steps) out.increments[i + 1] = scale * pair[1];
  }
  return out;
}

NoisePath NoisePath::zero(std::size_t steps, double dt) {
  return {dt, std::vector<double>(steps, 0.0)};
}

std::vector<Vec> simulate_affine_closed_loop(const CoefficientFn& coefficients,
                                             const Vec& x0, const NoisePath& noise) {
  const std::size_t steps = noise.increments.size();
  std::vector<Vec> path;
  path.reserve(steps + 1);
  path.push_back(x0);
  for (std::size_t i = 0; i < steps; ++i) {
    const AffineCoefficients c = coefficients(static_cast<double>(i) * noise.dt);
    const Vec& x = path.back();
    Vec next = x + (c.Ahat * x + c.bhat) * noise.dt +
               (c.Chat * x + c.sighat) * noise.increments[i];
    if (!next.allFinite()) diverged(i, static_cast<std::size_t>(-1));
    path.push_back(std::move(next));
  }
  return path;
}

std::vector<Vec> simulate_affine_closed_loop(const AffineCoefficients& c, const Vec& x0,
                                             const NoisePath& noise) {
  const std::size_t steps = noise.increments.size();
  std::vector<Vec> path;
  path.reserve(steps + 1);
  path.push_back(x0);
  Vec drift(x0.size()), diffusion(x0.size());
  for (std::size_t i = 0; i < steps; ++i) {
    const Vec& x = path.back();
    drift.noalias() = c.Ahat * x;
    drift += c.bhat;
    diffusion.noalias() = c.Chat * x;
    diffusion += c.sighat;
    Vec next = x + drift * noise.dt + diffusion * noise.increments[i];
    if (!next.allFinite()) diverged(i, static_cast<std::size_t>(-1));
    path.push_back(std::move(next));
  }
  return path;
}

Mat simulate_affine_endpoints(const AffineCoefficients& c, const Vec& x0, double T,
                              double dt, std::size_t n_paths, std::uint64_t seed) {
  const std::size_t steps = checked_steps(T, dt);
  const Eigen::Index n = x0.size();
  Mat out(n, static_cast<Eigen::Index>(n_paths));
  Vec x(n), drift(n), diffusion(n);
  for (std::size_t j = 0; j < n_paths; ++j) {
    x = x0;
    for (std::size_t i = 0; i < steps; ++i) {
      drift.noalias() = c.Ahat * x;
      drift += c.bhat;
      diffusion.noalias() = c.Chat * x;
      diffusion += c.sighat;
      x += drift * dt + diffusion * noise_increment(seed, j, i, dt);
    }
    if (!x.allFinite()) diverged(steps, j);
    out.col(static_cast<Eigen::Index>(j)) = x;
  }
  return out;
}

std::size_t TrajectoryBundle::record_at(double t) const {
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - t) <= 1e-9 * std::max(1.0, T)) return k;
  std::ostringstream os;
  os << "time " << t << " is not a record time";
  throw FieldError("upto", os.str());
}

namespace {

// Paths advance together in blocks of this many; each block row holds one
// coordinate for every path of the block.
constexpr std::size_t kBlock = 64;

// Row-major copy of a matrix.
struct Dense {
  std::vector<double> a;
  Eigen::Index rows = 0, cols = 0;

  explicit Dense(const Mat& m)
      : a(static_cast<std::size_t>(m.size())), rows(m.rows()), cols(m.cols()) {
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        a[static_cast<std::size_t>(i * cols + j)] = m(i, j);
  }
};

// out (rows x w) = M in (cols x w), or += when accumulating.
void block_matvec(const double* M, Eigen::Index rows, Eigen::Index cols, const double* in,
                  double* out, std::size_t w, bool accumulate) {
  for (Eigen::Index r = 0; r < rows; ++r) {
    double* o = out + static_cast<std::size_t>(r) * w;
    if (!accumulate) std::fill(o, o + w, 0.0);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double coef = M[r * cols + c];
      if (coef == 0.0) continue;
      const double* v = in + static_cast<std::size_t>(c) * w;
      for (std::size_t p = 0; p < w; ++p) o[p] += coef * v[p];
    }
  }
}

void block_matvec(const Dense& M, const double* in, double* out, std::size_t w,
                  bool accumulate) {
  block_matvec(M.a.data(), M.rows, M.cols, in, out, w, accumulate);
}

// u = Theta x + theta with (Theta row-major, theta) packed contiguously.
void block_feedback(const double* packed, Eigen::Index n, Eigen::Index m, const double* x,
                    double* u, std::size_t w) {
  block_matvec(packed, m, n, x, u, w, false);
  const double* offset = packed + m * n;
  for (Eigen::Index i = 0; i < m; ++i) {
    double* row = u + static_cast<std::size_t>(i) * w;
    for (std::size_t p = 0; p < w; ++p) row[p] += offset[i];
  }
}

void pack_gain(const Mat& Theta, const Vec& theta, double* out) {
  const Eigen::Index m = Theta.rows(), n = Theta.cols();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out[i * n + j] = Theta(i, j);
  for (Eigen::Index i = 0; i < m; ++i) out[m * n + i] = theta(i);
}

std::vector<double> packed_gain(const Mat& Theta, const Vec& theta) {
  std::vector<double> out(static_cast<std::size_t>(Theta.size() + theta.size()));
  pack_gain(Theta, theta, out.data());
  return out;
}

struct BlockKernel {
  Dense A, B, C, D, Q, S, R;
  Vec b, sigma, q, r;
  Eigen::Index n, m;

  explicit BlockKernel(const LQModel& model)
      : A(model.A), B(model.B), C(model.C), D(model.D), Q(model.Q), S(model.S),
        R(model.R), b(model.b), sigma(model.sigma), q(model.q), r(model.r),
        n(model.n()), m(model.m()) {}

  // f(x, u) = 1/2 (x'Qx + 2 u'Sx + u'Ru + 2 q'x + 2 r'u) for every path.
  void cost(const double* x, const double* u, double* f, double* work, std::size_t w) const {
    std::fill(f, f + w, 0.0);
    block_matvec(Q, x, work, w, false);
    for (Eigen::Index a = 0; a < n; ++a) {
      const double* xa = x + a * w;
      const double* qa = work + a * w;
      for (std::size_t p = 0; p < w; ++p) f[p] += xa[p] * (qa[p] + 2.0 * q[a]);
    }
    block_matvec(S, x, work, w, false);
    for (Eigen::Index a = 0; a < m; ++a) {
      const double* ua = u + a * w;
      const double* sa = work + a * w;
      for (std::size_t p = 0; p < w; ++p) f[p] += 2.0 * ua[p] * sa[p];
    }
    block_matvec(R, u, work, w, false);
    for (Eigen::Index a = 0; a < m; ++a) {
      const double* ua = u + a * w;
      const double* ra = work + a * w;
      for (std::size_t p = 0; p < w; ++p) f[p] += ua[p] * (ra[p] + 2.0 * r[a]);
    }
    for (std::size_t p = 0; p < w; ++p) f[p] *= 0.5;
  }

  // Cx + Du + sigma
  void diffusion(const double* x, const double* u, double* out, std::size_t w) const {
    block_matvec(C, x, out, w, false);
    block_matvec(D, u, out, w, true);
    for (Eigen::Index a = 0; a < n; ++a) {
      double* row = out + a * w;
      for (std::size_t p = 0; p < w; ++p) row[p] += sigma[a];
    }
  }

  // x <- x + (Ax + Bu + b) dt + (Cx + Du + sigma) dw
  void step(double* x, const double* u, double dt, const double* dw, double* drift,
            double* diff, std::size_t w) const {
    block_matvec(A, x, drift, w, false);
    block_matvec(B, u, drift, w, true);
    diffusion(x, u, diff, w);
    for (Eigen::Index a = 0; a < n; ++a) {
      double* xa = x + a * w;
      const double* da = drift + a * w;
      const double* sa = diff + a * w;
      for (std::size_t p = 0; p < w; ++p) xa[p] += (da[p] + b[a]) * dt + sa[p] * dw[p];
    }
  }
};

// Lowest path of the block with a non-finite coordinate, or w.
std::size_t first_nonfinite(const double* x, Eigen::Index n, std::size_t w) {
  std::size_t worst = w;
  for (Eigen::Index a = 0; a < n; ++a)
    for (std::size_t p = 0; p < w && p < worst; ++p)
      if (!std::isfinite(x[a * w + p])) worst = p;
  return worst;
}

void allocate(std::vector<Mat>& records, std::size_t count, Eigen::Index rows,
              std::size_t paths) {
  records.assign(count, Mat(rows, static_cast<Eigen::Index>(paths)));
}

void store(Mat& record, const double* block, std::size_t first, std::size_t w) {
  for (Eigen::Index a = 0; a < record.rows(); ++a)
    for (std::size_t p = 0; p < w; ++p)
      record(a, static_cast<Eigen::Index>(first + p)) = block[a * w + p];
}

}  // namespace

TrajectoryBundle simulate_coupled_ensemble(const LQModel& model,
                                           const FiniteHorizonSolution& fh,
                                           const CellSolution& cell,
                                           const SimConfig& cfg) {
  const Eigen::Index n = model.n(), m = model.m();
  cfg.validate(static_cast<std::size_t>(n));
  if (std::abs(fh.T() - cfg.T) > 1e-12 * std::max(1.0, cfg.T))
    throw FieldError("T", "finite-horizon solution and simulation horizons differ");
  if (fh.P.front().rows() != n || cell.P.rows() != n)
    throw FieldError("model", "solutions do not match the model dimensions");
  const std::size_t steps = cfg.steps();
  const double dt = cfg.T / static_cast<double>(steps);
  const double sqrt_dt = std::sqrt(dt);

  TrajectoryBundle bundle;
  bundle.n = static_cast<std::size_t>(n);
  bundle.m = static_cast<std::size_t>(m);
  bundle.n_paths = cfg.n_paths;
  bundle.T = cfg.T;
  bundle.dt = dt;
  for (std::size_t i = 0; i <= steps; i += cfg.record_stride) bundle.steps.push_back(i);
  if (bundle.steps.back() != steps) bundle.steps.push_back(steps);
  for (std::size_t i : bundle.steps)
    bundle.times.push_back(i == steps ? cfg.T : static_cast<double>(i) * dt);
  const std::size_t records = bundle.steps.size();

  allocate(bundle.XT, records, n, cfg.n_paths);
  allocate(bundle.uT, records, m, cfg.n_paths);
  allocate(bundle.Xbar, records, n, cfg.n_paths);
  allocate(bundle.ubar, records, m, cfg.n_paths);
  bundle.JT.assign(records, Vec(static_cast<Eigen::Index>(cfg.n_paths)));
  bundle.Jbar.assign(records, Vec(static_cast<Eigen::Index>(cfg.n_paths)));
  if (cfg.with_adjoint) {
    allocate(bundle.YT, records, n, cfg.n_paths);
    allocate(bundle.ZT, records, n, cfg.n_paths);
  }

  // Finite-horizon gains at every simulation step.
  const auto gain_size = static_cast<std::size_t>(m * n + m);
  std::vector<double> finite_gain((steps + 1) * gain_size);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = i == steps ? cfg.T : static_cast<double>(i) * dt;
    pack_gain(fh.Theta_at(t), fh.theta_at(t), finite_gain.data() + i * gain_size);
  }
  std::vector<std::vector<double>> adjoint;  // (P^T, p^T) at each record
  if (cfg.with_adjoint)
    for (double t : bundle.times) adjoint.push_back(packed_gain(fh.P_at(t), fh.p_at(t)));
  const std::vector<double> cell_gain = packed_gain(cell.Theta_bar, cell.theta_bar);

  // Static-point processes: X* from 0 with drift Abar X* and diffusion
  // Cbar X* + sigma*.
  StaticOptimum opt;
  LQModel static_model = model;
  if (cfg.with_static_processes) {
    opt = static_from_cell(model, cell);
    static_model.b.setZero();
    static_model.sigma = opt.sigma_star;
    allocate(bundle.Xs, records, n, cfg.n_paths);
    allocate(bundle.us, records, m, cfg.n_paths);
    allocate(bundle.Ys, records, n, cfg.n_paths);
    allocate(bundle.Zs, records, n, cfg.n_paths);
  }
  const std::vector<double> static_gain = packed_gain(cell.Theta_bar, Vec::Zero(m));
  const Dense cell_P(cell.P);

  const BlockKernel kernel(model);
  const BlockKernel static_kernel(static_model);

  auto run_block = [&](std::size_t first, std::size_t w) {
    const auto nw = static_cast<std::size_t>(n) * w, mw = static_cast<std::size_t>(m) * w;
    const std::size_t ww = std::max(nw, mw);
    std::vector<double> x(nw), xb(nw), xs(nw, 0.0), u(mw), ub(mw), us(mw);
    std::vector<double> w1(ww), w2(ww), w3(ww);
    std::vector<double> f(w), fb(w), f_prev(w), fb_prev(w), J(w, 0.0), Jb(w, 0.0);
    std::vector<double> z0(w), z1(w), dw(w);
    for (Eigen::Index a = 0; a < n; ++a)
      for (std::size_t p = 0; p < w; ++p) {
        x[a * w + p] = cfg.x0(a);
        xb[a * w + p] = cfg.xbar0(a);
      }

    std::size_t next_record = 0;
    for (std::size_t i = 0;; ++i) {
      block_feedback(finite_gain.data() + i * gain_size, n, m, x.data(), u.data(), w);
      block_feedback(cell_gain.data(), n, m, xb.data(), ub.data(), w);
      kernel.cost(x.data(), u.data(), f.data(), w1.data(), w);
      kernel.cost(xb.data(), ub.data(), fb.data(), w1.data(), w);
      if (i > 0)
        for (std::size_t p = 0; p < w; ++p) {
          J[p] += 0.5 * dt * (f_prev[p] + f[p]);
          Jb[p] += 0.5 * dt * (fb_prev[p] + fb[p]);
        }
      std::swap(f, f_prev);
      std::swap(fb, fb_prev);
      if (cfg.with_static_processes)
        block_feedback(static_gain.data(), n, m, xs.data(), us.data(), w);

      if (next_record < records && bundle.steps[next_record] == i) {
        const std::size_t k = next_record++;
        store(bundle.XT[k], x.data(), first, w);
        store(bundle.uT[k], u.data(), first, w);
        store(bundle.Xbar[k], xb.data(), first, w);
        store(bundle.ubar[k], ub.data(), first, w);
        for (std::size_t p = 0; p < w; ++p) {
          bundle.JT[k](static_cast<Eigen::Index>(first + p)) = J[p];
          bundle.Jbar[k](static_cast<Eigen::Index>(first + p)) = Jb[p];
        }
        if (cfg.with_adjoint) {
          block_feedback(adjoint[k].data(), n, n, x.data(), w1.data(), w);  // P x + p
          store(bundle.YT[k], w1.data(), first, w);
          kernel.diffusion(x.data(), u.data(), w2.data(), w);
          block_matvec(adjoint[k].data(), n, n, w2.data(), w3.data(), w, false);
          store(bundle.ZT[k], w3.data(), first, w);
        }
        if (cfg.with_static_processes) {
          block_matvec(cell_P, xs.data(), w1.data(), w, false);
          static_kernel.diffusion(xs.data(), us.data(), w2.data(), w);
          block_matvec(cell_P, w2.data(), w3.data(), w, false);
          store(bundle.Zs[k], w3.data(), first, w);
          for (Eigen::Index a = 0; a < n; ++a)
            for (std::size_t p = 0; p < w; ++p) {
              const auto col = static_cast<Eigen::Index>(first + p);
              bundle.Xs[k](a, col) = xs[a * w + p] + opt.x_star(a);
              bundle.Ys[k](a, col) = w1[a * w + p] + opt.y_star(a);
            }
          for (Eigen::Index a = 0; a < m; ++a)
            for (std::size_t p = 0; p < w; ++p)
              bundle.us[k](a, static_cast<Eigen::Index>(first + p)) =
                  us[a * w + p] + opt.u_star(a);
        }
      }
      if (i == steps) break;

      if (i % 2 == 0)
        for (std::size_t p = 0; p < w; ++p) {
          const auto pair = rng::normal_pair(cfg.seed, rng::Stream::kNoise, first + p,
                                             static_cast<std::uint32_t>(i / 2));
          z0[p] = pair[0];
          z1[p] = pair[1];
        }
      const std::vector<double>& z = i % 2 == 0 ? z0 : z1;
      for (std::size_t p = 0; p < w; ++p) dw[p] = sqrt_dt * z[p];

      kernel.step(x.data(), u.data(), dt, dw.data(), w1.data(), w2.data(), w);
      kernel.step(xb.data(), ub.data(), dt, dw.data(), w1.data(), w2.data(), w);
      if (cfg.with_static_processes)
        static_kernel.step(xs.data(), us.data(), dt, dw.data(), w1.data(), w2.data(), w);
      const std::size_t bad = std::min({first_nonfinite(x.data(), n, w),
                                        first_nonfinite(xb.data(), n, w),
                                        first_nonfinite(xs.data(), n, w)});
      if (bad < w) diverged(i, first + bad);
    }
  };

  const std::size_t blocks = (cfg.n_paths + kBlock - 1) / kBlock;
  auto run_blocks = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t blk = lo; blk < hi; ++blk) {
      const std::size_t first = blk * kBlock;
      run_block(first, std::min(kBlock, cfg.n_paths - first));
    }
  };
  unsigned threads = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
  if (threads == 1) {
    run_blocks(0, blocks);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t lo = blocks * t / threads, hi = blocks * (t + 1) / threads;
      pool.emplace_back([&, t, lo, hi] {
        try {
          run_blocks(lo, hi);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return bundle;
}

Estimate estimate(const double* values, std::size_t count) {
  if (count == 0) return {};
  Accumulator sum;
  for (std::size_t i = 0; i < count; ++i) sum.add(values[i]);
  const double mean = sum.value() / static_cast<double>(count);
  if (count == 1) return {mean, 0.0};
  Accumulator sq;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = values[i] - mean;
    sq.add(d * d);
  }
  const double var = sq.value() / static_cast<double>(count - 1);
  return {mean, std::sqrt(var / static_cast<double>(count))};
}

Estimate cost_along(const TrajectoryBundle& bundle, Branch which, double upto) {
  const std::size_t k = bundle.record_at(upto);
  const Vec& J = which == Branch::kFinite ? bundle.JT[k] : bundle.Jbar[k];
  return estimate(J.data(), static_cast<std::size_t>(J.size()));
}

namespace {

const std::vector<Mat>& states_of(const TrajectoryBundle& bundle, Process which) {
  switch (which) {
    case Process::kFinite: return bundle.XT;
    case Process::kCell: return bundle.Xbar;
    case Process::kStatic:
      if (!bundle.has_static()) throw FieldError("process", "bundle has no static processes");
      return bundle.Xs;
  }
  return bundle.XT;
}

const std::vector<Mat>& controls_of(const TrajectoryBundle& bundle, Process which) {
  switch (which) {
    case Process::kFinite: return bundle.uT;
    case Process::kCell: return bundle.ubar;
    case Process::kStatic:
      if (!bundle.has_static()) throw FieldError("process", "bundle has no static processes");
      return bundle.us;
  }
  return bundle.uT;
}

template <typename PerPath>
std::vector<Estimate> per_record(const TrajectoryBundle& bundle, PerPath per_path) {
  std::vector<Estimate> out;
  out.reserve(bundle.records());
  std::vector<double> values(bundle.n_paths);
  for (std::size_t k = 0; k < bundle.records(); ++k) {
    for (std::size_t j = 0; j < bundle.n_paths; ++j)
      values[j] = per_path(k, static_cast<Eigen::Index>(j));
    out.push_back(estimate(values.data(), values.size()));
  }
  return out;
}

}  // namespace

std::vector<Estimate> moment_curve(const TrajectoryBundle& bundle, Process which,
                                   int order) {
  if (order != 2 && order != 4) throw FieldError("order", "must be 2 or 4");
  const auto& X = states_of(bundle, which);
  return per_record(bundle, [&](std::size_t k, Eigen::Index j) {
    const double sq = X[k].col(j).squaredNorm();
    return order == 2 ? sq : sq * sq;
  });
}

std::vector<Estimate> state_deviation_curve(const TrajectoryBundle& bundle) {
  return per_record(bundle, [&](std::size_t k, Eigen::Index j) {
    return (bundle.XT[k].col(j) - bundle.Xbar[k].col(j)).squaredNorm();
  });
}

std::vector<Estimate> control_deviation_curve(const TrajectoryBundle& bundle) {
  return per_record(bundle, [&](std::size_t k, Eigen::Index j) {
    return (bundle.uT[k].col(j) - bundle.ubar[k].col(j)).squaredNorm();
  });
}

std::vector<Estimate> deviation_curve(const TrajectoryBundle& bundle) {
  return per_record(bundle, [&](std::size_t k, Eigen::Index j) {
    return (bundle.XT[k].col(j) - bundle.Xbar[k].col(j)).squaredNorm() +
           (bundle.uT[k].col(j) - bundle.ubar[k].col(j)).squaredNorm();
  });
}

std::vector<Estimate> component_mean(const std::vector<Mat>& records, Eigen::Index row) {
  std::vector<Estimate> out;
  out.reserve(records.size());
  for (const Mat& rec : records) {
    if (row < 0 || row >= rec.rows()) throw FieldError("row", "out of range");
    const Vec values = rec.row(row).transpose();
    out.push_back(estimate(values.data(), static_cast<std::size_t>(values.size())));
  }
  return out;
}

EmpiricalMeasure snapshot(const TrajectoryBundle& bundle, Process which,
                          std::size_t record) {
  if (record >= bundle.records()) throw FieldError("record", "out of range");
  const Mat& X = states_of(bundle, which)[record];
  const Mat& U = controls_of(bundle, which)[record];
  EmpiricalMeasure out;
  out.samples.resize(X.rows() + U.rows(), X.cols());
  out.samples.topRows(X.rows()) = X;
  out.samples.bottomRows(U.rows()) = U;
  return out;
}

namespace {

double sorted_w2(std::vector<double>& a, std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  Accumulator sum;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum.add(d * d);
  }
  return sum.value() / static_cast<double>(a.size());
}

// Deterministic subsample of `count` columns.
Mat subsample(const Mat& samples, Eigen::Index count, std::uint64_t seed) {
  std::vector<Eigen::Index> index(static_cast<std::size_t>(samples.cols()));
  std::iota(index.begin(), index.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < count; ++i) {
    const double u = rng::uniform(seed, rng::Stream::kSubsample,
                                  static_cast<std::uint64_t>(i), 0);
    const auto span = static_cast<double>(samples.cols() - i);
    const Eigen::Index pick = i + std::min<Eigen::Index>(
        static_cast<Eigen::Index>(u * span), samples.cols() - i - 1);
    std::swap(index[static_cast<std::size_t>(i)], index[static_cast<std::size_t>(pick)]);
  }
  std::sort(index.begin(), index.begin() + count);
  Mat out(samples.rows(), count);
  for (Eigen::Index i = 0; i < count; ++i)
    out.col(i) = samples.col(index[static_cast<std::size_t>(i)]);
  return out;
}

double w2_equal(const Mat& a, const Mat& b, int n_slices, std::uint64_t seed) {
  const Eigen::Index dim = a.rows();
  const auto count = static_cast<std::size_t>(a.cols());
  std::vector<double> pa(count), pb(count);
  if (dim == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      pa[i] = a(0, static_cast<Eigen::Index>(i));
      pb[i] = b(0, static_cast<Eigen::Index>(i));
    }
    return std::sqrt(sorted_w2(pa, pb));
  }
  if (n_slices < 1) throw FieldError("n_slices", "must be at least 1");
  Accumulator total;
  Vec direction(dim);
  for (int s = 0; s < n_slices; ++s) {
    for (Eigen::Index k = 0; k < dim; ++k)
      direction(k) = rng::normal_pair(seed, rng::Stream::kDirections,
                                      static_cast<std::uint64_t>(s),
                                      static_cast<std::uint32_t>(k / 2))[k % 2];
    direction.normalize();
    for (std::size_t i = 0; i < count; ++i) {
      pa[i] = direction.dot(a.col(static_cast<Eigen::Index>(i)));
      pb[i] = direction.dot(b.col(static_cast<Eigen::Index>(i)));
    }
    total.add(sorted_w2(pa, pb));
  }
  return std::sqrt(total.value() / n_slices);
}

}  // namespace

double wasserstein2_estimate(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                             int n_slices, std::uint64_t seed) {
  if (a.size() == 0 || b.size() == 0) throw FieldError("measure", "empty measure");
  if (a.dim() != b.dim()) throw FieldError("measure", "dimension mismatch");
  if (a.size() == b.size()) return w2_equal(a.samples, b.samples, n_slices, seed);
  if (a.size() > b.size())
    return w2_equal(subsample(a.samples, b.size(), seed), b.samples, n_slices, seed);
  return w2_equal(a.samples, subsample(b.samples, a.size(), seed), n_slices, seed);
}

double wasserstein2_noise_floor(const EmpiricalMeasure& a, int n_slices,
                                std::uint64_t seed) {
  if (a.size() < 2) throw FieldError("measure", "need at least two samples");
  const Eigen::Index half = a.size() / 2;
  Mat even(a.dim(), half), odd(a.dim(), half);
  for (Eigen::Index i = 0; i < half; ++i) {
    even.col(i) = a.samples.col(2 * i);
    odd.col(i) = a.samples.col(2 * i + 1);
  }
  return w2_equal(even, odd, n_slices, seed) / std::sqrt(2.0);
}

StationarityProfile stationarity_residual(const LQModel& model,
                                          const TrajectoryBundle& bundle) {
  if (!bundle.has_adjoint()) throw FieldError("bundle", "no Y^T, Z^T records");
  StationarityProfile out;
  out.times = bundle.times;
  const Mat Bt = model.B.transpose(), Dt = model.D.transpose();
  std::vector<double> norms(bundle.n_paths);
  for (std::size_t k = 0; k < bundle.records(); ++k) {
    Mat res = Bt * bundle.YT[k] + Dt * bundle.ZT[k] + model.S * bundle.XT[k] +
              model.R * bundle.uT[k];
    res.colwise() += model.r;
    double worst = 0.0;
    for (std::size_t j = 0; j < bundle.n_paths; ++j) {
      norms[j] = res.col(static_cast<Eigen::Index>(j)).norm();
      worst = std::max(worst, norms[j]);
    }
    out.mean_abs.push_back(estimate(norms.data(), norms.size()).mean);
    out.max_abs.push_back(worst);
  }
  return out;
}

std::string bundle_csv(const TrajectoryBundle& bundle, const BundleCsvOptions& opts) {
  const auto dev = deviation_curve(bundle);
  const auto dev_x = state_deviation_curve(bundle);
  const auto dev_u = control_deviation_curve(bundle);
  const auto m2 = moment_curve(bundle, Process::kCell, 2);
  const std::size_t records = bundle.records();
  const std::size_t every =
      opts.w2_every ? opts.w2_every : std::max<std::size_t>(1, (records + 19) / 20);
  const EmpiricalMeasure final_measure = snapshot(bundle, Process::kCell, records - 1);

  std::string out =
      "t,dev,dev_se,dev_x,dev_u,m2_xbar,m2_xbar_se,J_T,J_T_se,J_bar,J_bar_se,"
      "w2_bar_to_final\n";
  for (std::size_t k = 0; k < records; ++k) {
    const Estimate J = estimate(bundle.JT[k].data(), bundle.n_paths);
    const Estimate Jb = estimate(bundle.Jbar[k].data(), bundle.n_paths);
    const double row[] = {bundle.times[k], dev[k].mean, dev[k].se, dev_x[k].mean,
                          dev_u[k].mean, m2[k].mean, m2[k].se, J.mean, J.se,
                          Jb.mean, Jb.se};
    for (std::size_t c = 0; c < std::size(row); ++c) {
      if (c) out += ',';
      detail::append_number(out, row[c]);
    }
    out += ',';
    if (k % every == 0 || k + 1 == records)
      detail::append_number(out, wasserstein2_estimate(snapshot(bundle, Process::kCell, k),
                                                       final_measure, opts.w2_slices,
                                                       opts.w2_seed));
    out += '\n';
  }
  return out;
}

}  // namespace lqtp
