#pragma once

#include "smelab/numerics.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <vector>

namespace smelab {

/// Row-major nested arrays.
inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("matrix json: empty matrix");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) {
      throw std::invalid_argument("matrix json: rows have unequal length");
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  return m;
}

}  // namespace smelab
