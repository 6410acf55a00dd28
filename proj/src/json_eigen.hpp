#pragma once

// Conversions between Eigen objects and row-major nested JSON arrays.

#include <string>

#include <nlohmann/json.hpp>

#include "lqtp/model.hpp"

namespace lqtp::detail {

using json = nlohmann::json;

inline json to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) throw FieldError(path, "expected a number");
  return j.get<double>();
}

inline Mat matrix_from_json(const json& j, const std::string& field,
                            Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw FieldError(field, "expected " + std::to_string(rows) + " rows");
  Mat M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const std::string row_path = field + "[" + std::to_string(i) + "]";
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw FieldError(row_path,
                       "expected " + std::to_string(cols) + " columns");
    for (Eigen::Index k = 0; k < cols; ++k)
      M(i, k) = number_at(row[static_cast<std::size_t>(k)],
                          row_path + "[" + std::to_string(k) + "]");
  }
  return M;
}

inline Vec vector_from_json(const json& j, const std::string& field,
                            Eigen::Index size) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw FieldError(field, "expected " + std::to_string(size) + " entries");
  Vec v(size);
  for (Eigen::Index i = 0; i < size; ++i)
    v(i) = number_at(j[static_cast<std::size_t>(i)],
                     field + "[" + std::to_string(i) + "]");
  return v;
}

}  // namespace lqtp::detail
