#include "lqtp/turnpike.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csv.hpp"
#include "json_eigen.hpp"
#include "lqtp/error.hpp"
#include "lqtp/static_opt.hpp"

namespace lqtp {

DecayFit fit_exponential(std::span<const double> ts, std::span<const double> values) {
  if (ts.size() != values.size()) throw FieldError("values", "length differs from times");
  if (values.size() < 8) throw FieldError("values", "need at least 8 points");
  const std::size_t count = values.size();
  std::vector<double> y(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i]))
      throw FieldError("values", "nonpositive value in window");
    y[i] = std::log(values[i]);
  }
  double t_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    t_mean += ts[i];
    y_mean += y[i];
  }
  t_mean /= static_cast<double>(count);
  y_mean /= static_cast<double>(count);
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double dt = ts[i] - t_mean, dy = y[i] - y_mean;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (!(stt > 0.0)) throw FieldError("ts", "times must not all coincide");
  const double slope = sty / stt;
  const double intercept = y_mean - slope * t_mean;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double e = y[i] - (intercept + slope * ts[i]);
    ss_res += e * e;
  }
  DecayFit fit;
  fit.K = std::exp(intercept);
  fit.lambda = -slope;
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  const auto [lo, hi] = std::minmax_element(ts.begin(), ts.end());
  fit.window = {*lo, *hi};
  fit.points = count;
  return fit;
}

std::vector<double> coefficient_deviation(const FiniteHorizonSolution& fh,
                                          const CellSolution& cell, int which) {
  std::vector<double> out(fh.nodes());
  for (std::size_t i = 0; i < fh.nodes(); ++i) {
    switch (which) {
      case 0: out[i] = (fh.P[i] - cell.P).norm(); break;
      case 1: out[i] = (fh.p[i] - cell.p).norm(); break;
      case 2: out[i] = (fh.Theta[i] - cell.Theta_bar).norm(); break;
      case 3: out[i] = (fh.theta[i] - cell.theta_bar).norm(); break;
      default: throw FieldError("which", "must be 0..3");
    }
  }
  return out;
}

CoefficientCertificate certify_coefficient_convergence(const FiniteHorizonSolution& fh,
                                                       const CellSolution& cell,
                                                       double min_r_squared) {
  static const char* kNames[4] = {"P", "p", "Theta", "theta"};
  const double references[4] = {cell.P.norm(), cell.p.norm(), cell.Theta_bar.norm(),
                                cell.theta_bar.norm()};
  CoefficientCertificate cert;
  cert.min_r_squared = min_r_squared;
  cert.pass = true;
  const double T = fh.T();
  for (int c = 0; c < 4; ++c) {
    CoefficientFit& out = cert.fits[static_cast<std::size_t>(c)];
    out.name = kNames[c];
    const auto dev = coefficient_deviation(fh, cell, c);
    const double floor = 1e-12 * (1.0 + references[c]);
    std::vector<double> s, v;
    for (std::size_t i = 0; i < fh.nodes(); ++i) {
      const double remaining = T - fh.grid.at(i);
      if (remaining < 2.0 || remaining > 0.5 * T) continue;
      if (dev[i] > floor) {
        s.push_back(remaining);
        v.push_back(dev[i]);
      }
    }
    if (s.size() < 8) {
      out.machine_precision = true;
      out.pass = true;
      continue;
    }
    out.fit = fit_exponential(s, v);
    out.pass = out.fit.lambda > 0.0 && out.fit.r_squared >= min_r_squared;
    cert.pass = cert.pass && out.pass;
  }
  return cert;
}

double default_tau(const LQModel& model, const CellSolution& cell,
                   const CoefficientCertificate& coefficients) {
  const CoefficientFit& theta = coefficients.fits[2];
  if (theta.machine_precision || !(theta.fit.lambda > 0.0)) return 1.0;
  const Mat& Th = cell.Theta_bar;
  const Mat Lambda = model.Q + model.S.transpose() * Th + Th.transpose() * model.S +
                     Th.transpose() * model.R * Th;
  const double beta2 = min_sym_eigenvalue(0.5 * (Lambda + Lambda.transpose()));
  if (!(beta2 > 0.0)) return 1.0;
  const double tau = std::log(2.0 * theta.fit.K / beta2) / theta.fit.lambda;
  return std::max(1.0, tau);
}

namespace {

void fit_side(SideFit& side, const std::vector<double>& ts, const std::vector<double>& dev,
              const std::vector<double>& floor, const std::vector<std::size_t>& index,
              double min_r_squared) {
  std::vector<double> s, v;
  for (std::size_t k : index) {
    if (dev[k] > floor[k]) {
      s.push_back(ts[k]);
      v.push_back(dev[k]);
    }
  }
  if (s.size() < 8) {
    side.at_floor = true;
    side.pass = true;
    side.note = "deviation at noise floor";
    return;
  }
  side.has_fit = true;
  side.fit = fit_exponential(s, v);
  side.pass = side.fit.lambda > 0.0 && side.fit.r_squared >= min_r_squared;
  if (!side.pass)
    side.note = side.fit.lambda > 0.0 ? "poor exponential fit" : "no decay";
}

}  // namespace

StateTurnpikeCertificate certify_state_turnpike(const TrajectoryBundle& bundle,
                                                double tau,
                                                const StateTurnpikeOptions& opts) {
  const double T = bundle.T;
  const double end = T - tau;
  if (!(tau >= 0.0) || !(end > 0.0)) throw FieldError("tau", "margin must lie in [0, T)");

  StateTurnpikeCertificate cert;
  cert.tau = tau;
  cert.times = bundle.times;
  const auto dev = deviation_curve(bundle);
  const std::size_t records = bundle.records();
  for (std::size_t k = 0; k < records; ++k) {
    double scale = 0.0;
    for (std::size_t j = 0; j < bundle.n_paths; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      scale += bundle.Xbar[k].col(col).squaredNorm() + bundle.ubar[k].col(col).squaredNorm();
    }
    scale /= static_cast<double>(bundle.n_paths);
    cert.deviation.push_back(dev[k].mean);
    cert.noise_floor.push_back(
        std::max(opts.se_factor * dev[k].se, opts.relative_floor * scale));
  }
  cert.two_sided = (bundle.XT.front() - bundle.Xbar.front()).norm() > 0.0;

  const double mid = 0.5 * end;
  const double margin = opts.edge_fraction * mid;
  std::vector<std::size_t> left, right;
  for (std::size_t k = 0; k < records; ++k) {
    const double t = bundle.times[k];
    if (t >= margin && t <= mid - margin) left.push_back(k);
    if (t >= mid + margin && t <= end - margin) right.push_back(k);
  }
  std::vector<double> remaining(records);
  for (std::size_t k = 0; k < records; ++k) remaining[k] = T - bundle.times[k];

  cert.left.required = cert.two_sided;
  cert.right.required = true;
  fit_side(cert.left, cert.times, cert.deviation, cert.noise_floor, left, opts.min_r_squared);
  fit_side(cert.right, remaining, cert.deviation, cert.noise_floor, right,
           opts.min_r_squared);
  cert.pass = cert.right.pass && (cert.left.pass || !cert.left.required);
  return cert;
}

double time_average(std::span<const double> ts, std::span<const double> values, double lo,
                    double hi) {
  double area = 0.0, first = std::numeric_limits<double>::quiet_NaN(), last = first;
  bool started = false;
  double prev_t = 0.0, prev_v = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] < lo || ts[i] > hi) continue;
    if (started) area += 0.5 * (ts[i] - prev_t) * (values[i] + prev_v);
    else first = ts[i];
    started = true;
    prev_t = ts[i];
    prev_v = values[i];
    last = ts[i];
  }
  if (!started || !(last > first)) throw FieldError("window", "fewer than two samples");
  return area / (last - first);
}

ErgodicReport ergodic_report(const LQModel& model, const CellSolution& cell,
                             std::span<const double> horizons, const SimConfig& cfg) {
  if (horizons.empty()) throw FieldError("horizons", "empty list");
  for (std::size_t i = 1; i < horizons.size(); ++i)
    if (!(horizons[i] > horizons[i - 1])) throw FieldError("horizons", "must be increasing");

  ErgodicReport report;
  report.c0 = cell.c0;
  report.L_star = static_from_cell(model, cell).L_value;
  report.c0_matches = std::abs(report.c0 - report.L_star) <= 1e-9;

  DreOptions dre;
  dre.step_halving = false;
  for (double T : horizons) {
    const FiniteHorizonSolution fh = solve_finite_horizon(model, T, cfg.dt, dre);
    SimConfig run = cfg;
    run.T = T;
    run.xbar0 = cfg.x0;
    run.with_adjoint = false;
    run.with_static_processes = false;
    run.record_stride = run.steps();
    const TrajectoryBundle bundle = simulate_coupled_ensemble(model, fh, cell, run);

    ErgodicRow row;
    row.T = T;
    row.value = value_finite(fh, 0.0, cfg.x0);
    row.value_over_T = row.value / T;
    row.scaled_error = T * std::abs(row.value_over_T - report.c0);
    row.cost_cell = cost_along(bundle, Branch::kCell, T);
    row.cost_finite = cost_along(bundle, Branch::kFinite, T);
    row.gap = row.cost_cell.mean - row.value;
    row.gap_ci = row.cost_cell.ci95();
    report.rows.push_back(row);
  }

  const double tol = 1e-12 * (1.0 + std::abs(report.c0));
  bool converged = true, decreasing = true;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const ErgodicRow& row = report.rows[i];
    const double err = row.scaled_error / row.T;
    converged = converged && err <= tol;
    if (i > 0 && !(err < report.rows[i - 1].scaled_error / report.rows[i - 1].T))
      decreasing = false;
    lo = std::min(lo, row.scaled_error);
    hi = std::max(hi, row.scaled_error);
  }
  report.value_converging = converged || (decreasing && hi <= 2.0 * lo);

  double gap_hi = -std::numeric_limits<double>::infinity();
  double gap_lo = std::numeric_limits<double>::infinity();
  report.gap_nonnegative = true;
  for (const ErgodicRow& row : report.rows) {
    report.gap_nonnegative = report.gap_nonnegative && row.gap >= -row.gap_ci;
    gap_hi = std::max(gap_hi, row.gap - row.gap_ci);
    gap_lo = std::min(gap_lo, row.gap + row.gap_ci);
  }
  report.gap_bounded = gap_hi <= 2.0 * gap_lo;
  report.pass = report.value_converging && report.gap_nonnegative && report.gap_bounded &&
                report.c0_matches;
  return report;
}

namespace {

using detail::json;

json fit_json(const DecayFit& fit) {
  return {{"K", fit.K},
          {"lambda", fit.lambda},
          {"r_squared", fit.r_squared},
          {"window", {fit.window.lo, fit.window.hi}},
          {"points", fit.points}};
}

json side_json(const SideFit& side) {
  json out = {{"required", side.required},
              {"at_floor", side.at_floor},
              {"pass", side.pass},
              {"note", side.note}};
  if (side.has_fit) out["fit"] = fit_json(side.fit);
  return out;
}

}  // namespace

std::string coefficient_certificate_json(const CoefficientCertificate& cert) {
  json fits = json::array();
  for (const CoefficientFit& f : cert.fits) {
    json entry = {{"name", f.name},
                  {"machine_precision", f.machine_precision},
                  {"pass", f.pass}};
    if (!f.machine_precision) entry["fit"] = fit_json(f.fit);
    fits.push_back(std::move(entry));
  }
  const json doc = {{"fits", fits}, {"min_r_squared", cert.min_r_squared}, {"pass", cert.pass}};
  return doc.dump(2);
}

std::string state_certificate_json(const StateTurnpikeCertificate& cert) {
  const json doc = {{"tau", cert.tau},
                    {"two_sided", cert.two_sided},
                    {"left", side_json(cert.left)},
                    {"right", side_json(cert.right)},
                    {"pass", cert.pass}};
  return doc.dump(2);
}

std::string ergodic_report_json(const ErgodicReport& report) {
  json rows = json::array();
  for (const ErgodicRow& row : report.rows) {
    rows.push_back({{"T", row.T},
                    {"V_T", row.value},
                    {"V_over_T", row.value_over_T},
                    {"scaled_error", row.scaled_error},
                    {"J_bar", row.cost_cell.mean},
                    {"J_bar_se", row.cost_cell.se},
                    {"J_T", row.cost_finite.mean},
                    {"J_T_se", row.cost_finite.se},
                    {"gap", row.gap},
                    {"gap_ci", row.gap_ci}});
  }
  const json doc = {{"c0", report.c0},
                    {"L_star", report.L_star},
                    {"rows", rows},
                    {"value_converging", report.value_converging},
                    {"gap_nonnegative", report.gap_nonnegative},
                    {"gap_bounded", report.gap_bounded},
                    {"c0_matches", report.c0_matches},
                    {"pass", report.pass}};
  return doc.dump(2);
}

std::string state_certificate_csv(const StateTurnpikeCertificate& cert, double T) {
  std::string out = "t,deviation,noise_floor,fit\n";
  for (std::size_t k = 0; k < cert.times.size(); ++k) {
    const double t = cert.times[k];
    detail::append_number(out, t);
    out += ',';
    detail::append_number(out, cert.deviation[k]);
    out += ',';
    detail::append_number(out, cert.noise_floor[k]);
    out += ',';
    const SideFit* side = nullptr;
    double arg = 0.0;
    if (cert.left.has_fit && t >= cert.left.fit.window.lo && t <= cert.left.fit.window.hi) {
      side = &cert.left;
      arg = t;
    } else if (cert.right.has_fit && T - t >= cert.right.fit.window.lo &&
               T - t <= cert.right.fit.window.hi) {
      side = &cert.right;
      arg = T - t;
    }
    if (side) detail::append_number(out, side->fit.K * std::exp(-side->fit.lambda * arg));
    out += '\n';
  }
  return out;
}

std::string ergodic_csv(const ErgodicReport& report) {
  std::string out = "T,V_T,V_over_T,scaled_error,J_bar,J_bar_se,J_T,J_T_se,gap,gap_ci\n";
  for (const ErgodicRow& row : report.rows) {
    const double values[] = {row.T, row.value, row.value_over_T, row.scaled_error,
                             row.cost_cell.mean, row.cost_cell.se, row.cost_finite.mean,
                             row.cost_finite.se, row.gap, row.gap_ci};
    for (std::size_t c = 0; c < std::size(values); ++c) {
      if (c) out += ',';
      detail::append_number(out, values[c]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace lqtp
