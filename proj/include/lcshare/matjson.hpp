#pragma once

#include <Eigen/Dense>
#include <string>

#include "json.hpp"
#include "lcshare/errors.hpp"

namespace lcshare {

using nlohmann::json;

// Matrices travel as {"rows": r, "cols": c, "data": [...]} with row-major data.
inline json mat_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = data;
  return j;
}

inline Eigen::MatrixXd mat_from_json(const json& j) {
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw ValidationError("matrix json needs rows/cols/data");
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw ValidationError("matrix json data length does not match rows*cols");
  Eigen::MatrixXd m(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[idx++].get<double>();
  return m;
}

inline json vec_to_json(const Eigen::VectorXd& v) {
  std::vector<double> data(v.data(), v.data() + v.size());
  return json(data);
}

inline Eigen::VectorXd vec_from_json(const json& j) {
  std::vector<double> data = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

}  // namespace lcshare
