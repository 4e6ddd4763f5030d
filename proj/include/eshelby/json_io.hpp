#pragma once

// JSON forms of the core value types.
//   SymMat:       {"d": 3, "entries": [[...], [...], [...]]}
//   Tensor4:      {"d": 3, "coeffs": [[...] x 6]}   (basis coordinates)
//   MaterialPair: {"lambda", "mu", "lambda_tilde", "mu_tilde"}

#include <Eigen/Dense>
#include <fstream>
#include <sstream>
#include <string>

#include "eshelby/error.hpp"
#include "eshelby/tensor_core.hpp"
#include "json.hpp"

namespace eshelby {

using Json = nlohmann::ordered_json;

template <class Derived>
Json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ValidationError(what + ": expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError(what + ": expected " + std::to_string(cols) + " columns");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ValidationError(what + ": non-numeric entry");
      m(i, c) = v.get<double>();
    }
  }
  return m;
}

template <int D>
Json to_json(const SymMat<D>& s) {
  return Json{{"d", D}, {"entries", matrix_to_json(s.matrix())}};
}

template <int D>
Json to_json(const Tensor4<D>& t) {
  return Json{{"d", D}, {"coeffs", matrix_to_json(t.coeffs())}};
}

inline Json to_json(const MaterialPair& p) {
  return Json{{"lambda", p.lambda}, {"mu", p.mu}, {"lambda_tilde", p.lambda_t}, {"mu_tilde", p.mu_t}};
}

inline int json_dimension(const Json& j, int expected, const std::string& what) {
  if (!j.is_object() || !j.contains("d") || !j["d"].is_number_integer())
    throw ValidationError(what + ": missing integer field \"d\"");
  const int d = j["d"].get<int>();
  if (d != expected) throw ValidationError(what + ": expected d = " + std::to_string(expected));
  return d;
}

template <int D>
SymMat<D> symmat_from_json(const Json& j) {
  json_dimension(j, D, "SymMat");
  if (!j.contains("entries")) throw ValidationError("SymMat: missing \"entries\"");
  const Eigen::Matrix<double, D, D> m = matrix_from_json(j["entries"], D, D, "SymMat");
  return SymMat<D>::from_matrix(m);
}

template <int D>
Tensor4<D> tensor4_from_json(const Json& j) {
  json_dimension(j, D, "Tensor4");
  if (!j.contains("coeffs")) throw ValidationError("Tensor4: missing \"coeffs\"");
  constexpr int n = sym_dim<D>;
  return Tensor4<D>(matrix_from_json(j["coeffs"], n, n, "Tensor4"));
}

inline MaterialPair pair_from_json(const Json& j, int dim = 3) {
  if (!j.is_object()) throw ValidationError("material pair must be a JSON object");
  auto get = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) throw ValidationError(std::string("material pair: missing number \"") + key + "\"");
    return j[key].get<double>();
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "lambda" && k != "mu" && k != "lambda_tilde" && k != "mu_tilde")
      throw ValidationError("material pair: unknown key \"" + k + "\"");
  }
  return MaterialPair(get("lambda"), get("mu"), get("lambda_tilde"), get("mu_tilde"), dim);
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(what + ": invalid JSON (" + e.what() + ")");
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

/// Inline JSON when the text starts with '{', otherwise a file path.
inline MaterialPair parse_pair(const std::string& text, int dim = 3) {
  const auto first = text.find_first_not_of(" \t\n");
  if (first != std::string::npos && text[first] == '{') return pair_from_json(parse_json_text(text, "--pair"), dim);
  return pair_from_json(read_json_file(text), dim);
}

/// 3 x 3 symmetric matrix from a nested JSON array.
inline Mat3 parse_matrix3(const std::string& text, const std::string& what) {
  const Mat3 m = matrix_from_json(parse_json_text(text, what), 3, 3, what);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw ValidationError(what + " is not symmetric");
  return m;
}

/// Loading grammar: "hydro" = I, "shear:ij" = sqrt(2) sym(e_i e_j) (i != j,
/// indices 1..3), or an inline 3 x 3 JSON array.
inline Mat3 parse_loading(const std::string& text) {
  if (text == "hydro") return Mat3::Identity();
  if (text.rfind("shear:", 0) == 0) {
    const std::string ij = text.substr(6);
    if (ij.size() != 2 || ij[0] < '1' || ij[0] > '3' || ij[1] < '1' || ij[1] > '3' || ij[0] == ij[1])
      throw ValidationError("loading '" + text + "': expected shear:ij with distinct i, j in 1..3");
    const int i = ij[0] - '1', j = ij[1] - '1';
    Mat3 m = Mat3::Zero();
    m(i, j) = m(j, i) = 1.0 / std::sqrt(2.0);
    return m;
  }
  return parse_matrix3(text, "loading");
}

}  // namespace eshelby
