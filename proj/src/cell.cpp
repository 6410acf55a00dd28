#include "lqtp/cell.hpp"

#include <cmath>
#include <sstream>

#include "json_eigen.hpp"
#include "lqtp/stability.hpp"

namespace lqtp {

namespace {

Eigen::LDLT<Mat> definite_gain(const LQModel& model, const Mat& P_mat) {
  const Mat G = gain_matrix(model, P_mat);
  const double e = min_sym_eigenvalue(G);
  if (!(e > 0.0)) {
    std::ostringstream os;
    os << "R + D^T P D not positive definite (min eigenvalue " << e << ")";
    throw NumericalError(os.str(), e);
  }
  return G.ldlt();
}

void check_hamiltonian_args(const LQModel& model, const Vec& x, const Vec& p_vec,
                            const Mat& P_mat) {
  check_dimensions(model);
  const Eigen::Index n = model.n();
  if (x.size() != n) throw FieldError("x", "dimension mismatch");
  if (p_vec.size() != n) throw FieldError("p", "dimension mismatch");
  if (P_mat.rows() != n || P_mat.cols() != n) throw FieldError("P", "dimension mismatch");
}

}  // namespace

double hamiltonian_at(const LQModel& model, const Vec& x, const Vec& p_vec,
                      const Mat& P_mat, const Vec& u) {
  check_hamiltonian_args(model, x, p_vec, P_mat);
  const Vec drift = model.A * x + model.B * u + model.b;
  const Vec diffusion = model.C * x + model.D * u + model.sigma;
  const double running = 0.5 * (x.dot(model.Q * x) + 2.0 * u.dot(model.S * x) +
                                u.dot(model.R * u) + 2.0 * model.q.dot(x) +
                                2.0 * model.r.dot(u));
  return drift.dot(p_vec) + 0.5 * diffusion.dot(P_mat * diffusion) + running;
}

HamiltonianEval hamiltonian(const LQModel& model, const Vec& x, const Vec& p_vec,
                            const Mat& P_mat) {
  check_hamiltonian_args(model, x, p_vec, P_mat);
  const auto gain = definite_gain(model, P_mat);
  const Vec P_sigma = P_mat * model.sigma;
  const Vec w = (model.D.transpose() * P_mat * model.C + model.S) * x +
                model.D.transpose() * P_sigma + model.B.transpose() * p_vec + model.r;
  const Vec solved = gain.solve(w);

  HamiltonianEval out;
  out.minimizer = -solved;
  out.value = (model.A.transpose() * p_vec).dot(x) + p_vec.dot(model.b) +
              0.5 * (x.dot((model.C.transpose() * P_mat * model.C + model.Q) * x) +
                     2.0 * x.dot(model.C.transpose() * P_sigma + model.q) +
                     P_sigma.dot(model.sigma) - w.dot(solved));
  return out;
}

HamiltonianEval homogeneous_hamiltonian(const LQModel& model, const Vec& x,
                                        const Vec& p_vec, const Mat& P_mat) {
  return hamiltonian(model.homogeneous(), x, p_vec, P_mat);
}

CellSolution cell_from_riccati(const LQModel& model, const Mat& P) {
  check_dimensions(model);
  const auto gain = definite_gain(model, P);

  CellSolution cell;
  cell.P = 0.5 * (P + P.transpose());
  cell.Theta_bar = feedback_gain(model, cell.P);
  const Mat A_bar = model.A + model.B * cell.Theta_bar;
  const Mat C_bar = model.C + model.D * cell.Theta_bar;

  Eigen::JacobiSVD<Mat> svd(A_bar);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  cell.closed_loop_condition =
      smallest > 0.0 ? sv(0) / smallest : std::numeric_limits<double>::infinity();
  if (!(cell.closed_loop_condition <= kMaxClosedLoopCondition)) {
    std::ostringstream os;
    os << "A + B Theta_bar numerically singular (condition number "
       << cell.closed_loop_condition << ")";
    throw NumericalError(os.str(), cell.closed_loop_condition);
  }

  const Vec P_sigma = cell.P * model.sigma;
  const Vec forcing = cell.P * model.b + C_bar.transpose() * P_sigma + model.q +
                      cell.Theta_bar.transpose() * model.r;
  cell.p = -A_bar.transpose().fullPivLu().solve(forcing);
  const Vec w = model.B.transpose() * cell.p + model.D.transpose() * P_sigma + model.r;
  const Vec solved = gain.solve(w);
  cell.theta_bar = -solved;
  cell.c0 = 0.5 * (2.0 * cell.p.dot(model.b) + P_sigma.dot(model.sigma) - w.dot(solved));
  cell.p0 = 0.0;
  cell.stabilizing = is_stabilizer(model, cell.Theta_bar).stable;
  return cell;
}

CellSolution solve_cell(const LQModel& model, const AreSolution& are) {
  CellSolution cell = cell_from_riccati(model, are.P);
  if (!cell.stabilizing)
    throw NumericalError("ARE solution passed to solve_cell is not stabilizing",
                         are.final_residual);
  return cell;
}

double cell_residual(const LQModel& model, const CellSolution& cell,
                     std::span<const Vec> xs) {
  double worst = 0.0;
  for (const Vec& x : xs) {
    const double H = hamiltonian(model, x, cell.gradient(x), cell.P).value;
    worst = std::max(worst, std::abs(H - cell.c0));
  }
  return worst;
}

LQModel special_structure_model(const Mat& A_sym, const Mat& Q, const Vec& b,
                                const Vec& sigma, const Vec& q, const Vec& r) {
  const Eigen::Index n = A_sym.rows();
  LQModel model = LQModel::zeros(n, n);
  model.A = A_sym;
  model.B = Mat::Identity(n, n);
  model.R = Mat::Identity(n, n);
  model.Q = Q;
  model.b = b;
  model.sigma = sigma;
  model.q = q;
  model.r = r;
  check_dimensions(model);
  return model;
}

std::vector<CellSolution> enumerate_cell_solutions_special(
    const Mat& A_sym, const Mat& Q, const Vec& b, const Vec& sigma, const Vec& q,
    const Vec& r) {
  const Eigen::Index n = A_sym.rows();
  if (A_sym.cols() != n) throw FieldError("A", "must be square");
  if (n > 12) throw FieldError("A", "enumeration limited to n <= 12");
  if ((A_sym - A_sym.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw FieldError("A", "must be symmetric");
  const LQModel model = special_structure_model(A_sym, Q, b, sigma, q, r);

  const Mat square = A_sym * A_sym + Q;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (square + square.transpose()));
  const Vec lambda = eig.eigenvalues();
  if (!(lambda.minCoeff() > 0.0))
    throw NumericalError("A^2 + Q is not positive definite", lambda.minCoeff());
  const Mat& U = eig.eigenvectors();
  const Vec roots = lambda.cwiseSqrt();

  std::vector<CellSolution> out;
  const unsigned patterns = 1u << n;
  for (unsigned mask = 0; mask < patterns; ++mask) {
    Vec signed_roots = roots;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (1u << i)) signed_roots(i) = -signed_roots(i);
    const Mat Delta = U * signed_roots.asDiagonal() * U.transpose();
    if (signed_roots.cwiseAbs().minCoeff() <= 0.0) continue;  // Delta singular

    CellSolution cell;
    cell.P = A_sym + 0.5 * (Delta + Delta.transpose());
    cell.P = (0.5 * (cell.P + cell.P.transpose())).eval();
    const Mat Delta_inv = U * signed_roots.cwiseInverse().asDiagonal() * U.transpose();
    cell.p = Delta_inv * (cell.P * b - cell.P * r + q);
    cell.p0 = 0.0;
    cell.Theta_bar = -cell.P;
    cell.theta_bar = -(cell.p + r);
    // c0 with R + D^T P D = I and D = 0.
    const Vec w = cell.p + r;
    cell.c0 = 0.5 * (2.0 * cell.p.dot(b) + sigma.dot(cell.P * sigma) - w.dot(w));
    Eigen::JacobiSVD<Mat> svd(Delta);
    const auto& sv = svd.singularValues();
    cell.closed_loop_condition = sv(0) / sv(sv.size() - 1);
    cell.stabilizing = min_sym_eigenvalue(Delta) > 0.0 &&
                       is_stabilizer(model, cell.Theta_bar).stable;
    out.push_back(std::move(cell));
  }
  return out;
}

std::string serialize_cell(const CellSolution& cell) {
  using detail::to_json;
  detail::json doc;
  doc["P"] = to_json(cell.P);
  doc["p"] = to_json(cell.p);
  doc["p0"] = cell.p0;
  doc["c0"] = cell.c0;
  doc["Theta_bar"] = to_json(cell.Theta_bar);
  doc["theta_bar"] = to_json(cell.theta_bar);
  doc["stabilizing"] = cell.stabilizing;
  doc["closed_loop_condition"] = cell.closed_loop_condition;
  return doc.dump(2);
}

CellSolution load_cell(const std::string& text) {
  const auto doc = detail::json::parse(text);
  for (const char* key : {"P", "p", "p0", "c0", "Theta_bar", "theta_bar", "stabilizing"})
    if (!doc.contains(key)) throw FieldError(key, "missing field");
  CellSolution cell;
  const auto n = static_cast<Eigen::Index>(doc.at("P").size());
  const auto m = static_cast<Eigen::Index>(doc.at("theta_bar").size());
  cell.P = detail::matrix_from_json(doc.at("P"), "P", n, n);
  cell.p = detail::vector_from_json(doc.at("p"), "p", n);
  cell.p0 = detail::number_at(doc.at("p0"), "p0");
  cell.c0 = detail::number_at(doc.at("c0"), "c0");
  cell.Theta_bar = detail::matrix_from_json(doc.at("Theta_bar"), "Theta_bar", m, n);
  cell.theta_bar = detail::vector_from_json(doc.at("theta_bar"), "theta_bar", m);
  cell.stabilizing = doc.at("stabilizing").get<bool>();
  if (doc.contains("closed_loop_condition"))
    cell.closed_loop_condition = doc.at("closed_loop_condition").get<double>();
  return cell;
}

}  // namespace lqtp
