// lqtp: experiment runner. Each subcommand writes manifest.json, result.json,
// summary.txt (also printed) and its CSV files into --out.
//
// Exit codes: 0 pass, 1 input error, 2 certificate failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lqtp/cell.hpp"
#include "lqtp/error.hpp"
#include "lqtp/model.hpp"
#include "lqtp/riccati.hpp"
#include "lqtp/rng.hpp"
#include "lqtp/sde.hpp"
#include "lqtp/stability.hpp"
#include "lqtp/static_opt.hpp"
#include "lqtp/turnpike.hpp"

#ifndef LQTP_VERSION
#define LQTP_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lqtp;

namespace {

constexpr int kPass = 0;
constexpr int kInputError = 1;
constexpr int kCertificateFailure = 2;

struct Options {
  std::string command;
  std::string model_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  double dt = 1e-3;
  std::size_t paths = 1000;
  double horizon = 20.0;
  std::vector<double> horizons{10.0, 20.0, 40.0};
  std::string x0_text;
  std::string xbar0_text;
  std::string gain_path;
  std::size_t stride = 0;
  std::size_t probes = 100;
  double tau = -1.0;
  unsigned threads = 0;
};

json to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec parse_vector(const std::string& text, Eigen::Index n, const char* field) {
  if (text.empty()) return Vec::Zero(n);
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw FieldError(field, "not a number: '" + item + "'");
    }
  }
  if (values.size() == 1 && n > 1) return Vec::Constant(n, values[0]);
  if (static_cast<Eigen::Index>(values.size()) != n)
    throw FieldError(field, "expected " + std::to_string(n) + " entries");
  return Eigen::Map<const Vec>(values.data(), n);
}

class Experiment {
 public:
  explicit Experiment(const Options& opts) : opts_(opts) {
    fs::create_directories(opts_.out_dir);
  }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(fs::path(opts_.out_dir) / name, std::ios::binary);
    if (!out) throw FieldError("out", "cannot write " + name);
    out << content;
  }

  void line(const std::string& text) { summary_ << text << '\n'; }

  int finish(const json& result, bool pass, const json& manifest) {
    json doc = result;
    doc["pass"] = pass;
    write("result.json", doc.dump(2) + "\n");
    write("manifest.json", manifest.dump(2) + "\n");
    line(std::string("verdict: ") + (pass ? "PASS" : "FAIL"));
    write("summary.txt", summary_.str());
    std::cout << summary_.str();
    return pass ? kPass : kCertificateFailure;
  }

 private:
  const Options& opts_;
  std::ostringstream summary_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

json manifest_for(const Options& o, const LQModel* model) {
  json m = {{"tool", "lqtp"},
            {"version", LQTP_VERSION},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"command", o.command},
            {"model_path", o.model_path},
            {"seed", o.seed},
            {"dt", o.dt},
            {"paths", o.paths},
            {"horizon", o.horizon},
            {"horizons", o.horizons},
            {"x0", o.x0_text},
            {"xbar0", o.xbar0_text},
            {"stride", o.stride},
            {"tau", o.tau}};
  if (model) m["model"] = json::parse(serialize_model(*model));
  return m;
}

std::vector<Vec> probe_points(std::uint64_t seed, Eigen::Index n, std::size_t count,
                              double radius) {
  std::vector<Vec> xs;
  for (std::size_t i = 0; i < count; ++i) {
    Vec x(n);
    for (Eigen::Index k = 0; k < n; ++k)
      x(k) = radius * (2.0 * rng::uniform(seed, rng::Stream::kSubsample, i,
                                          static_cast<std::uint32_t>(k + 1)) - 1.0);
    xs.push_back(x);
  }
  return xs;
}

std::size_t default_stride(const Options& o, double T) {
  if (o.stride) return o.stride;
  const auto steps = static_cast<std::size_t>(std::llround(T / o.dt));
  return std::max<std::size_t>(1, steps / 200);
}

int cmd_validate(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const ValidationReport rep = validate_model(model);
  Experiment ex(o);
  ex.line("model: " + o.model_path + " (n=" + std::to_string(model.n()) +
          ", m=" + std::to_string(model.m()) + ")");
  ex.line(std::string("h1_ok: ") + (rep.h1_ok ? "true" : "false"));
  ex.line("min eig Q: " + fmt(rep.min_eig_Q) + ", R: " + fmt(rep.min_eig_R) +
          ", Q - S^T R^-1 S: " + fmt(rep.min_eig_schur));
  for (const auto& msg : rep.messages) ex.line("note: " + msg);
  const json result = {{"h1_ok", rep.h1_ok},
                       {"dimension_ok", rep.dimension_ok},
                       {"min_eig_Q", rep.min_eig_Q},
                       {"min_eig_R", rep.min_eig_R},
                       {"min_eig_schur", rep.min_eig_schur},
                       {"messages", rep.messages}};
  return ex.finish(result, rep.h1_ok && rep.dimension_ok, manifest_for(o, &model));
}

json cert_json(const StabilityCert& c) {
  json out = {{"stable", c.stable}, {"spectral_abscissa", c.spectral_abscissa}};
  if (c.lyapunov_P) out["lyapunov_P"] = to_json(*c.lyapunov_P);
  if (c.min_eig_P) out["min_eig_P"] = *c.min_eig_P;
  return out;
}

int cmd_stability(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  Mat Theta = Mat::Zero(model.m(), model.n());
  if (!o.gain_path.empty()) {
    std::ifstream in(o.gain_path);
    if (!in) throw FieldError("gain", "cannot open " + o.gain_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const json doc = json::parse(ss.str());
    if (!doc.is_array() || static_cast<Eigen::Index>(doc.size()) != model.m())
      throw FieldError("gain", "expected an m x n nested array");
    for (Eigen::Index i = 0; i < model.m(); ++i) {
      if (!doc[i].is_array() || static_cast<Eigen::Index>(doc[i].size()) != model.n())
        throw FieldError("gain", "expected an m x n nested array");
      for (Eigen::Index j = 0; j < model.n(); ++j) Theta(i, j) = doc[i][j].get<double>();
    }
  }
  Experiment ex(o);
  const StabilityCert given = is_stabilizer(model, Theta);
  json result = {{"gain", to_json(Theta)}, {"certificate", cert_json(given)}};
  ex.line("gain certificate: " + std::string(given.stable ? "stable" : "not stable") +
          " (spectral abscissa " + fmt(given.spectral_abscissa) + ")");
  bool pass = given.stable;
  if (!given.stable) {
    try {
      const Mat found = find_stabilizer(model);
      result["stabilizer"] = to_json(found);
      result["stabilizer_certificate"] = cert_json(is_stabilizer(model, found));
      ex.line("stabilizer found; system is L2-exponentially stabilizable");
      pass = true;
    } catch (const NumericalError& e) {
      result["stabilizer_error"] = e.what();
      ex.line(std::string("stabilizer search failed: ") + e.what());
    }
  }
  return ex.finish(result, pass, manifest_for(o, &model));
}

int cmd_are(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const AreSolution are = solve_are(model);
  const StabilityCert cert = is_stabilizer(model, are.Theta_bar);
  Experiment ex(o);
  ex.line("Newton iterations: " + std::to_string(are.newton_iters));
  ex.line("ARE residual: " + fmt(are.final_residual));
  ex.line("closed-loop spectral abscissa: " + fmt(cert.spectral_abscissa));
  const json result = {{"P", to_json(are.P)},
                       {"Theta_bar", to_json(are.Theta_bar)},
                       {"newton_iters", are.newton_iters},
                       {"final_residual", are.final_residual},
                       {"residual_history", are.residual_history},
                       {"closed_loop", cert_json(cert)}};
  return ex.finish(result, cert.stable && are.final_residual <= 1e-9,
                   manifest_for(o, &model));
}

int cmd_finite(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const Vec x0 = parse_vector(o.x0_text, model.n(), "x0");
  const FiniteHorizonSolution fh = solve_finite_horizon(model, o.horizon, o.dt);
  Experiment ex(o);
  ex.write("finite.csv", finite_horizon_csv(fh));
  const double V = value_finite(fh, 0.0, x0);
  ex.line("T: " + fmt(o.horizon) + ", h: " + fmt(fh.grid.h) + ", nodes: " +
          std::to_string(fh.nodes()));
  ex.line("step-halving error: " + fmt(fh.halving_error));
  ex.line("V^T(0, x0): " + fmt(V) + ", V^T/T: " + fmt(V / o.horizon));
  const json result = {{"T", o.horizon},
                       {"h", fh.grid.h},
                       {"P0", to_json(fh.P.front())},
                       {"p0_vec", to_json(fh.p.front())},
                       {"p0", fh.p0.front()},
                       {"halving_error", fh.halving_error},
                       {"value_at_x0", V}};
  return ex.finish(result, true, manifest_for(o, &model));
}

int cmd_cell(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const CellSolution cell = solve_cell(model, solve_are(model));
  const auto xs = probe_points(o.seed, model.n(), o.probes, 5.0);
  const double residual = cell_residual(model, cell, xs);
  Experiment ex(o);
  ex.write("cell.json", serialize_cell(cell) + "\n");
  ex.line("c0: " + fmt(cell.c0));
  ex.line("cell residual on " + std::to_string(xs.size()) + " probes: " + fmt(residual));
  const json result = {{"cell", json::parse(serialize_cell(cell))},
                       {"residual", residual},
                       {"probes", xs.size()}};
  return ex.finish(result, cell.stabilizing && residual <= 1e-8, manifest_for(o, &model));
}

int cmd_cell_enum(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const LQModel special = special_structure_model(model.A, model.Q, model.b, model.sigma,
                                                  model.q, model.r);
  if (!(special == model))
    throw FieldError("model", "enumeration needs B = R = I and C = D = S = 0");
  const auto sols = enumerate_cell_solutions_special(model.A, model.Q, model.b,
                                                     model.sigma, model.q, model.r);
  const auto xs = probe_points(o.seed, model.n(), o.probes, 5.0);
  Experiment ex(o);
  std::string csv = "index,stabilizing,c0,residual";
  const Eigen::Index n = model.n();
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r)
      csv += ",P_" + std::to_string(r) + "_" + std::to_string(c);
  for (Eigen::Index i = 0; i < n; ++i) csv += ",p_" + std::to_string(i);
  csv += "\n";
  json rows = json::array();
  int stabilizing = 0;
  bool residuals_ok = true;
  for (std::size_t k = 0; k < sols.size(); ++k) {
    const CellSolution& s = sols[k];
    const double res = cell_residual(model, s, xs);
    residuals_ok = residuals_ok && res <= 1e-8;
    stabilizing += s.stabilizing ? 1 : 0;
    char buf[64];
    csv += std::to_string(k) + "," + (s.stabilizing ? "1" : "0");
    for (double v : {s.c0, res}) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      csv += buf;
    }
    for (Eigen::Index i = 0; i < s.P.size(); ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", s.P.data()[i]);
      csv += buf;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), ",%.17g", s.p(i));
      csv += buf;
    }
    csv += "\n";
    rows.push_back({{"stabilizing", s.stabilizing},
                    {"c0", s.c0},
                    {"residual", res},
                    {"P", to_json(s.P)},
                    {"p", to_json(s.p)}});
    ex.line("solution " + std::to_string(k) + ": c0 = " + fmt(s.c0) +
            (s.stabilizing ? " (stabilizing)" : "") + ", residual " + fmt(res));
  }
  ex.write("cell_enum.csv", csv);
  const json result = {{"solutions", rows}, {"stabilizing_count", stabilizing}};
  return ex.finish(result, stabilizing == 1 && residuals_ok, manifest_for(o, &model));
}

json optimum_json(const StaticOptimum& s) {
  return {{"x_star", to_json(s.x_star)},
          {"u_star", to_json(s.u_star)},
          {"y_star", to_json(s.y_star)},
          {"L", s.L_value}};
}

int cmd_static(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const CellSolution cell = solve_cell(model, solve_are(model));
  const StaticOptimum kkt = solve_static_kkt(model, cell.P);
  const StaticOptimum closed = static_from_cell(model, cell);
  const double agreement = std::max({(kkt.x_star - closed.x_star).lpNorm<Eigen::Infinity>(),
                                     (kkt.u_star - closed.u_star).lpNorm<Eigen::Infinity>(),
                                     (kkt.y_star - closed.y_star).lpNorm<Eigen::Infinity>()});
  const double c0_gap = std::abs(closed.L_value - cell.c0);
  Experiment ex(o);
  ex.line("KKT vs closed form (max abs difference): " + fmt(agreement));
  ex.line("L(x*, u*): " + fmt(closed.L_value) + ", c0: " + fmt(cell.c0));
  const json result = {{"kkt", optimum_json(kkt)},
                       {"closed_form", optimum_json(closed)},
                       {"agreement", agreement},
                       {"c0", cell.c0},
                       {"c0_gap", c0_gap}};
  return ex.finish(result, agreement <= 1e-9 && c0_gap <= 1e-9, manifest_for(o, &model));
}

SimConfig sim_config(const Options& o, const LQModel& model, double T) {
  SimConfig cfg;
  cfg.T = T;
  cfg.dt = o.dt;
  cfg.n_paths = o.paths;
  cfg.seed = o.seed;
  cfg.x0 = parse_vector(o.x0_text, model.n(), "x0");
  cfg.xbar0 = parse_vector(o.xbar0_text, model.n(), "xbar0");
  cfg.record_stride = default_stride(o, T);
  cfg.threads = o.threads;
  return cfg;
}

int cmd_simulate(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const CellSolution cell = solve_cell(model, solve_are(model));
  const FiniteHorizonSolution fh = solve_finite_horizon(model, o.horizon, o.dt);
  SimConfig cfg = sim_config(o, model, o.horizon);
  cfg.with_adjoint = true;
  std::cerr << "simulating " << cfg.n_paths << " paths, T=" << cfg.T << ", dt=" << cfg.dt
            << "\n";
  const TrajectoryBundle bundle = simulate_coupled_ensemble(model, fh, cell, cfg);
  Experiment ex(o);
  ex.write("bundle.csv", bundle_csv(bundle));
  const Estimate J = cost_along(bundle, Branch::kFinite, cfg.T);
  const Estimate Jb = cost_along(bundle, Branch::kCell, cfg.T);
  const StationarityProfile st = stationarity_residual(model, bundle);
  const double st_max = *std::max_element(st.max_abs.begin(), st.max_abs.end());
  ex.line("J^T(x0; u^T): " + fmt(J.mean) + " +- " + fmt(J.ci95()));
  ex.line("J^T(xbar0; ubar): " + fmt(Jb.mean) + " +- " + fmt(Jb.ci95()));
  ex.line("V^T(0, x0): " + fmt(value_finite(fh, 0.0, cfg.x0)));
  ex.line("max stationarity residual: " + fmt(st_max));
  const json result = {{"J_T", J.mean},
                       {"J_T_ci95", J.ci95()},
                       {"J_bar", Jb.mean},
                       {"J_bar_ci95", Jb.ci95()},
                       {"value_at_x0", value_finite(fh, 0.0, cfg.x0)},
                       {"stationarity_max", st_max},
                       {"records", bundle.records()}};
  return ex.finish(result, true, manifest_for(o, &model));
}

int cmd_turnpike(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const CellSolution cell = solve_cell(model, solve_are(model));
  const FiniteHorizonSolution fh = solve_finite_horizon(model, o.horizon, o.dt);
  const CoefficientCertificate coef = certify_coefficient_convergence(fh, cell);
  const double tau = o.tau >= 0.0 ? o.tau : default_tau(model, cell, coef);
  const SimConfig cfg = sim_config(o, model, o.horizon);
  std::cerr << "simulating " << cfg.n_paths << " coupled paths, T=" << cfg.T
            << ", dt=" << cfg.dt << "\n";
  const TrajectoryBundle bundle = simulate_coupled_ensemble(model, fh, cell, cfg);
  const StateTurnpikeCertificate state = certify_state_turnpike(bundle, tau);

  Experiment ex(o);
  std::string coef_csv = "t,dev_P,dev_p,dev_Theta,dev_theta\n";
  std::vector<std::vector<double>> dev;
  for (int c = 0; c < 4; ++c) dev.push_back(coefficient_deviation(fh, cell, c));
  const std::size_t every = std::max<std::size_t>(1, fh.nodes() / 1000);
  for (std::size_t i = 0; i < fh.nodes(); i += every) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", fh.grid.at(i));
    coef_csv += buf;
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof(buf), ",%.17g", dev[static_cast<std::size_t>(c)][i]);
      coef_csv += buf;
    }
    coef_csv += "\n";
  }
  ex.write("coefficients.csv", coef_csv);
  ex.write("turnpike_state.csv", state_certificate_csv(state, o.horizon));
  ex.write("bundle.csv", bundle_csv(bundle));

  for (const auto& f : coef.fits) {
    if (f.machine_precision)
      ex.line("|" + f.name + "^T - " + f.name + "|: converged to machine precision");
    else
      ex.line("|" + f.name + "^T - " + f.name + "|: lambda " + fmt(f.fit.lambda) + ", R^2 " +
              fmt(f.fit.r_squared));
  }
  ex.line("tau: " + fmt(tau));
  auto side = [&](const char* name, const SideFit& s) {
    std::string text = std::string(name) + ": ";
    if (s.has_fit)
      text += "lambda " + fmt(s.fit.lambda) + ", R^2 " + fmt(s.fit.r_squared);
    if (!s.note.empty()) text += (s.has_fit ? " " : "") + s.note;
    if (!s.required) text += " (not required)";
    ex.line(text);
  };
  side("state/control left", state.left);
  side("state/control right", state.right);
  const json result = {{"coefficients", json::parse(coefficient_certificate_json(coef))},
                       {"state", json::parse(state_certificate_json(state))}};
  return ex.finish(result, coef.pass && state.pass, manifest_for(o, &model));
}

int cmd_ergodic(const Options& o) {
  const LQModel model = load_model_file(o.model_path);
  const CellSolution cell = solve_cell(model, solve_are(model));
  SimConfig cfg = sim_config(o, model, o.horizons.front());
  std::cerr << "ergodic sweep over " << o.horizons.size() << " horizons, " << cfg.n_paths
            << " paths\n";
  const ErgodicReport rep = ergodic_report(model, cell, o.horizons, cfg);
  Experiment ex(o);
  ex.write("ergodic.csv", ergodic_csv(rep));
  ex.line("c0: " + fmt(rep.c0) + ", L(x*, u*): " + fmt(rep.L_star));
  ex.line("T | V^T/T | T|V^T/T - c0| | J^T(x;ubar) | gap +- ci");
  for (const auto& row : rep.rows)
    ex.line(fmt(row.T) + " | " + fmt(row.value_over_T) + " | " + fmt(row.scaled_error) +
            " | " + fmt(row.cost_cell.mean) + " | " + fmt(row.gap) + " +- " +
            fmt(row.gap_ci));
  return ex.finish(json::parse(ergodic_report_json(rep)), rep.pass, manifest_for(o, &model));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic LQ turnpike toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LQTP_VERSION);
  Options o;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"validate", "check dimensions and positivity assumptions", cmd_validate},
      {"stability", "mean-square stability certificate of a feedback gain", cmd_stability},
      {"are", "stabilizing solution of the algebraic Riccati equation", cmd_are},
      {"finite", "finite-horizon Riccati system on a grid", cmd_finite},
      {"cell", "cell problem solution and residual", cmd_cell},
      {"cell-enum", "all quadratic cell solutions of a special-structure model",
       cmd_cell_enum},
      {"static", "static optimum by KKT and closed form", cmd_static},
      {"simulate", "coupled Monte Carlo bundle", cmd_simulate},
      {"turnpike", "coefficient and state/control turnpike certificate", cmd_turnpike},
      {"ergodic", "long-run average cost sweep over horizons", cmd_ergodic},
  };
  int (*selected)(const Options&) = nullptr;
  for (const Command& s : commands) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--model", o.model_path, "model JSON file")->required()->check(
        CLI::ExistingFile);
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--dt", o.dt, "time step (Riccati grid and simulation)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--paths", o.paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
    sub->add_option("--horizon", o.horizon, "horizon T")->check(CLI::PositiveNumber);
    sub->add_option("--x0", o.x0_text, "initial state, comma separated");
    sub->add_option("--xbar0", o.xbar0_text, "initial state of the cell loop");
    sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
    sub->add_option("--stride", o.stride, "record every k-th step");
    if (std::string(s.name) == "stability")
      sub->add_option("--gain", o.gain_path, "feedback gain JSON (m x n nested array)");
    if (std::string(s.name) == "cell" || std::string(s.name) == "cell-enum")
      sub->add_option("--probes", o.probes, "number of residual probe points");
    if (std::string(s.name) == "turnpike")
      sub->add_option("--tau", o.tau, "right-end margin (default from coefficient fits)");
    if (std::string(s.name) == "ergodic")
      sub->add_option("--horizons", o.horizons, "comma-separated horizons")
          ->delimiter(',')
          ->check(CLI::PositiveNumber);
    sub->callback([&o, &selected, s] {
      o.command = s.name;
      selected = s.run;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kInputError;
  }

  try {
    return selected(o);
  } catch (const NumericalError& e) {
    std::cerr << "lqtp: " << e.what() << "\n";
    return kCertificateFailure;
  } catch (const std::exception& e) {
    std::cerr << "lqtp: " << e.what() << "\n";
    return kInputError;
  }
}
