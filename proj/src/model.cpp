#include "lqtp/model.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <sstream>

#include "json_eigen.hpp"

namespace lqtp {

namespace {

void expect_shape(const Mat& M, const char* name, Eigen::Index rows,
                  Eigen::Index cols) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream os;
    os << "expected " << rows << "x" << cols << ", got " << M.rows() << "x"
       << M.cols();
    throw FieldError(name, os.str());
  }
}

void expect_size(const Vec& v, const char* name, Eigen::Index size) {
  if (v.size() != size) {
    std::ostringstream os;
    os << "expected length " << size << ", got " << v.size();
    throw FieldError(name, os.str());
  }
}

constexpr std::array<const char*, 13> kKeys = {
    "n", "m", "A", "B", "C", "D", "b", "sigma", "Q", "S", "R", "q", "r"};

Mat symmetric_field(const detail::json& doc, const char* name,
                    Eigen::Index size) {
  Mat M = detail::matrix_from_json(doc.at(name), name, size, size);
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) {
    std::ostringstream os;
    os << name << " not symmetric (max |M - M^T| = " << asym << ")";
    throw FieldError(name, os.str());
  }
  return 0.5 * (M + M.transpose());
}

}  // namespace

LQModel LQModel::zeros(Eigen::Index n, Eigen::Index m) {
  LQModel model;
  model.A = Mat::Zero(n, n);
  model.B = Mat::Zero(n, m);
  model.C = Mat::Zero(n, n);
  model.D = Mat::Zero(n, m);
  model.b = Vec::Zero(n);
  model.sigma = Vec::Zero(n);
  model.Q = Mat::Zero(n, n);
  model.S = Mat::Zero(m, n);
  model.R = Mat::Zero(m, m);
  model.q = Vec::Zero(n);
  model.r = Vec::Zero(m);
  return model;
}

LQModel LQModel::homogeneous() const {
  LQModel out = *this;
  out.b.setZero();
  out.sigma.setZero();
  out.q.setZero();
  out.r.setZero();
  return out;
}

bool LQModel::has_offsets() const {
  return !(b.isZero(0.0) && sigma.isZero(0.0) && q.isZero(0.0) &&
           r.isZero(0.0));
}

bool operator==(const LQModel& x, const LQModel& y) {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return same(x.A, y.A) && same(x.B, y.B) && same(x.C, y.C) &&
         same(x.D, y.D) && same(x.b, y.b) && same(x.sigma, y.sigma) &&
         same(x.Q, y.Q) && same(x.S, y.S) && same(x.R, y.R) &&
         same(x.q, y.q) && same(x.r, y.r);
}

void check_dimensions(const LQModel& model) {
  const Eigen::Index n = model.A.rows();
  const Eigen::Index m = model.B.cols();
  if (n < 1) throw FieldError("A", "state dimension must be positive");
  if (m < 1) throw FieldError("B", "control dimension must be positive");
  expect_shape(model.A, "A", n, n);
  expect_shape(model.B, "B", n, m);
  expect_shape(model.C, "C", n, n);
  expect_shape(model.D, "D", n, m);
  expect_size(model.b, "b", n);
  expect_size(model.sigma, "sigma", n);
  expect_shape(model.Q, "Q", n, n);
  expect_shape(model.S, "S", m, n);
  expect_shape(model.R, "R", m, m);
  expect_size(model.q, "q", n);
  expect_size(model.r, "r", m);
}

double min_sym_eigenvalue(const Mat& M) {
  const Mat sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

ValidationReport validate_model(const LQModel& model, double tol) {
  check_dimensions(model);
  ValidationReport report;
  report.dimension_ok = true;

  report.min_eig_Q = min_sym_eigenvalue(model.Q);
  report.min_eig_R = min_sym_eigenvalue(model.R);
  if (report.min_eig_R > 0.0) {
    const Mat schur = model.Q - model.S.transpose() * model.R.ldlt().solve(model.S);
    report.min_eig_schur = min_sym_eigenvalue(schur);
  } else {
    report.min_eig_schur = -std::numeric_limits<double>::infinity();
    report.messages.emplace_back("R singular or indefinite; Schur complement undefined");
  }

  auto check = [&](double value, const char* what) {
    if (value > tol) return true;
    std::ostringstream os;
    os << what << " not positive definite (min eigenvalue " << value << ")";
    report.messages.push_back(os.str());
    return false;
  };
  const bool q_ok = check(report.min_eig_Q, "Q");
  const bool r_ok = check(report.min_eig_R, "R");
  const bool s_ok = check(report.min_eig_schur, "Q - S^T R^-1 S");
  report.h1_ok = q_ok && r_ok && s_ok;
  return report;
}

LQModel load_model(const std::string& text) {
  detail::json doc;
  try {
    doc = detail::json::parse(text);
  } catch (const detail::json::parse_error& e) {
    throw FieldError("<document>", e.what());
  }
  if (!doc.is_object()) throw FieldError("<document>", "expected an object");

  for (const auto& item : doc.items()) {
    if (std::find(kKeys.begin(), kKeys.end(), item.key()) == kKeys.end())
      throw FieldError(item.key(), "unknown key");
  }
  for (const char* key : kKeys) {
    if (!doc.contains(key)) throw FieldError(key, "missing field");
  }

  auto dimension = [&](const char* key) {
    const auto& j = doc.at(key);
    if (!j.is_number_integer() || j.get<long long>() < 1)
      throw FieldError(key, "expected a positive integer");
    return static_cast<Eigen::Index>(j.get<long long>());
  };
  const Eigen::Index n = dimension("n");
  const Eigen::Index m = dimension("m");

  using detail::matrix_from_json;
  using detail::vector_from_json;
  LQModel model;
  model.A = matrix_from_json(doc.at("A"), "A", n, n);
  model.B = matrix_from_json(doc.at("B"), "B", n, m);
  model.C = matrix_from_json(doc.at("C"), "C", n, n);
  model.D = matrix_from_json(doc.at("D"), "D", n, m);
  model.b = vector_from_json(doc.at("b"), "b", n);
  model.sigma = vector_from_json(doc.at("sigma"), "sigma", n);
  model.Q = symmetric_field(doc, "Q", n);
  model.S = matrix_from_json(doc.at("S"), "S", m, n);
  model.R = symmetric_field(doc, "R", m);
  model.q = vector_from_json(doc.at("q"), "q", n);
  model.r = vector_from_json(doc.at("r"), "r", m);
  return model;
}

LQModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FieldError(path, "cannot open model file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_model(buffer.str());
}

std::string serialize_model(const LQModel& model) {
  check_dimensions(model);
  using detail::to_json;
  detail::json doc;
  doc["n"] = model.n();
  doc["m"] = model.m();
  doc["A"] = to_json(model.A);
  doc["B"] = to_json(model.B);
  doc["C"] = to_json(model.C);
  doc["D"] = to_json(model.D);
  doc["b"] = to_json(model.b);
  doc["sigma"] = to_json(model.sigma);
  doc["Q"] = to_json(model.Q);
  doc["S"] = to_json(model.S);
  doc["R"] = to_json(model.R);
  doc["q"] = to_json(model.q);
  doc["r"] = to_json(model.r);
  return doc.dump(2);
}

}  // namespace lqtp
