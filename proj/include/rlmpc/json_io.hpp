#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rlmpc/types.hpp"

namespace rlmpc::json_io {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array())
    throw std::runtime_error(name + ": expected array of rows");
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const nlohmann::json& row = j.at(static_cast<size_t>(i));
    if (static_cast<Index>(row.size()) != cols)
      throw std::runtime_error(name + ": ragged rows");
    for (Index c = 0; c < cols; ++c)
      m(i, c) = row.at(static_cast<size_t>(c)).get<double>();
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array()) throw std::runtime_error(name + ": expected array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v[i] = j.at(static_cast<size_t>(i)).get<double>();
  return v;
}

}  // namespace rlmpc::json_io
