#pragma once

#include "klgauss/potential.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace test_support {

/// Reference values produced by tests/oracles/generate_oracles.py.
inline const nlohmann::json& oracles() {
  static const nlohmann::json j = [] {
    std::ifstream in(KLGAUSS_ORACLE_FILE);
    if (!in) throw std::runtime_error("cannot open oracle file " KLGAUSS_ORACLE_FILE);
    return nlohmann::json::parse(in);
  }();
  return j;
}

inline klgauss::Vector vec(std::initializer_list<double> xs) {
  klgauss::Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline klgauss::Matrix mat1(double x) { return klgauss::Matrix::Constant(1, 1, x); }

inline klgauss::Vector vec(const nlohmann::json& j) {
  const auto raw = j.get<std::vector<double>>();
  return Eigen::Map<const klgauss::Vector>(raw.data(), static_cast<Eigen::Index>(raw.size()));
}

inline klgauss::Matrix mat(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  klgauss::Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  return m;
}

}  // namespace test_support
