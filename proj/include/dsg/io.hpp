// SPDX-License-Identifier: MIT
//
// Model files (JSON) and deterministic serialization of results.
//
// Model document:
//   {
//     "schema": "dsg.model/1",             optional, checked when present
//     "name": "...", "description": "...", optional
//     "d_x": 1, "d_u": 1,
//     "horizon": 50                       or "stationary": true
//     "discount": 0.9,                    optional
//     "matrices": { "A": M, "B": M, ... } each M is a matrix (array of rows)
//                                         or an array of `horizon` matrices
//     "weights": { "type": "homogeneous" [, "n": 10] }
//              | { "type": "positive", "values": [...] }
//              | { "type": "vanishing", "gamma": [...], "gamma_max": g },
//     "noise": {
//       "initial_mean": v | [v, ...],
//       "initial_cov": C, "noise_cov": C | { "sequence": [C, ...] },
//       "iid": true
//     }
//   }
// with C a matrix shared by all players, { "blocks": [M, ...] } or
// { "joint": M }. Matrix names: A Abar B Bbar Q Sx Qbar Gx R Su Rbar Gu;
// A and B are required, the rest default to zero. Unknown fields are errors.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsg/model.hpp"

namespace dsg {

using Json = nlohmann::ordered_json;

inline constexpr const char* kModelSchema = "dsg.model/1";
inline constexpr double kSymWarn = 1e-8;
inline constexpr double kSymError = 1e-4;

struct NoiseSpec {
  Json initial_mean;  // vector or array of vectors
  Json initial_cov;   // null means zero
  Json noise_cov;     // null means zero
  std::optional<bool> iid;
};

struct WeightSpec {
  std::string type = "homogeneous";
  std::optional<int> n;
  std::vector<double> values, gamma;
  double gamma_max = 1.0;
};

struct ModelFile {
  std::string name, description;
  GameModel model;
  WeightSpec weights;
  NoiseSpec noise;
  std::vector<std::string> warnings;
};

namespace detail {

inline void reject_unknown(const Json& j, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw input_error(where + ": unknown field '" + it.key() + "'");
  }
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw input_error(where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw input_error(where + ": non-finite number");
  return v;
}

inline bool is_matrix(const Json& j) {
  return j.is_array() && !j.empty() && j.front().is_array() &&
         (j.front().empty() || j.front().front().is_number());
}

inline Matrix parse_matrix(const Json& j, const std::string& where) {
  if (!is_matrix(j))
    throw input_error(where + ": expected a matrix (array of rows)");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.front().size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw input_error(where + ": ragged matrix rows");
    for (int c = 0; c < cols; ++c)
      m(r, c) = number(row[static_cast<size_t>(c)], where);
  }
  return m;
}

inline Vector parse_vector(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty())
    throw input_error(where + ": expected a vector");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (size_t k = 0; k < j.size(); ++k) v(k) = number(j[k], where);
  return v;
}

// Symmetrizes with a warning for small asymmetry; rejects large asymmetry.
inline Matrix symmetric(const Matrix& m, const std::string& where,
                        std::vector<std::string>* warnings) {
  if (m.rows() != m.cols()) throw input_error(where + ": not square");
  const double a = asymmetry(m);
  if (a > kSymError) {
    std::ostringstream os;
    os << where << ": asymmetric (max |M - M'| = " << a << ")";
    throw input_error(os.str());
  }
  if (a > kSymWarn && warnings) {
    std::ostringstream os;
    os << where << ": symmetrized (max |M - M'| = " << a << ")";
    warnings->push_back(os.str());
  }
  return sym(m);
}

inline void check_dims(const Matrix& m, int r, int c, const std::string& w) {
  if (m.rows() != r || m.cols() != c) {
    std::ostringstream os;
    os << w << ": expected " << r << "x" << c << ", got " << m.rows() << "x"
       << m.cols();
    throw input_error(os.str());
  }
}

inline Covariance parse_cov(const Json& j, int n, int dx,
                            const std::string& where,
                            std::vector<std::string>* warnings) {
  if (j.is_null())
    return Covariance::shared(n, Matrix::Zero(dx, dx));
  if (is_matrix(j)) {
    const Matrix m = symmetric(parse_matrix(j, where), where, warnings);
    check_dims(m, dx, dx, where);
    return Covariance::shared(n, m);
  }
  if (!j.is_object()) throw input_error(where + ": expected matrix or object");
  reject_unknown(j, where, {"blocks", "joint"});
  if (j.contains("blocks") == j.contains("joint"))
    throw input_error(where + ": give exactly one of 'blocks' or 'joint'");
  if (j.contains("joint")) {
    const Matrix m =
        symmetric(parse_matrix(j["joint"], where + ".joint"), where, warnings);
    check_dims(m, n * dx, n * dx, where + ".joint");
    return Covariance::full(m);
  }
  const Json& b = j["blocks"];
  if (!b.is_array() || static_cast<int>(b.size()) != n) {
    std::ostringstream os;
    os << where << ".blocks: expected " << n << " blocks";
    throw input_error(os.str());
  }
  std::vector<Matrix> blocks;
  for (size_t k = 0; k < b.size(); ++k) {
    const std::string w = where + ".blocks[" + std::to_string(k) + "]";
    blocks.push_back(symmetric(parse_matrix(b[k], w), w, warnings));
    check_dims(blocks.back(), dx, dx, w);
  }
  return Covariance::independent(std::move(blocks));
}

inline bool shared_noise(const NoiseSpec& s) {
  const auto shared = [](const Json& c) { return c.is_null() || is_matrix(c); };
  const bool mean_shared =
      s.initial_mean.is_null() ||
      (s.initial_mean.is_array() && !s.initial_mean.empty() &&
       s.initial_mean.front().is_number());
  bool noise_shared = shared(s.noise_cov);
  if (s.noise_cov.is_object() && s.noise_cov.contains("sequence")) {
    noise_shared = true;
    for (const auto& c : s.noise_cov["sequence"])
      noise_shared = noise_shared && shared(c);
  }
  return mean_shared && shared(s.initial_cov) && noise_shared;
}

}  // namespace detail

// Number of players fixed by the noise or weight section, if any.
inline std::optional<int> implied_players(const ModelFile& f) {
  if (f.weights.type == "positive") return static_cast<int>(f.weights.values.size());
  if (f.weights.type == "vanishing") return static_cast<int>(f.weights.gamma.size());
  if (f.weights.n) return f.weights.n;
  const Json& mu = f.noise.initial_mean;
  if (mu.is_array() && !mu.empty() && mu.front().is_array())
    return static_cast<int>(mu.size());
  return std::nullopt;
}

inline WeightProfile instantiate_weights(const ModelFile& f, int n) {
  const auto& w = f.weights;
  if (w.type == "homogeneous") return WeightProfile::homogeneous(n);
  if (static_cast<int>(implied_players(f).value_or(n)) != n)
    throw input_error("weights fix a different number of players");
  if (w.type == "positive") return WeightProfile::positive(w.values);
  return WeightProfile::vanishing(w.gamma, w.gamma_max);
}

inline NoiseModel instantiate_noise(const ModelFile& f, int n,
                                    std::vector<std::string>* warnings = nullptr) {
  const int dx = f.model.d_x;
  const NoiseSpec& s = f.noise;
  NoiseModel nm;
  const Json& mu = s.initial_mean;
  if (mu.is_null()) {
    nm.initial_mean.assign(static_cast<size_t>(n), Vector::Zero(dx));
  } else if (mu.is_array() && !mu.empty() && mu.front().is_number()) {
    const Vector v = detail::parse_vector(mu, "noise.initial_mean");
    if (v.size() != dx) throw input_error("noise.initial_mean: wrong size");
    nm.initial_mean.assign(static_cast<size_t>(n), v);
  } else {
    if (!mu.is_array() || static_cast<int>(mu.size()) != n)
      throw input_error("noise.initial_mean: expected one vector per player");
    for (size_t k = 0; k < mu.size(); ++k) {
      nm.initial_mean.push_back(detail::parse_vector(
          mu[k], "noise.initial_mean[" + std::to_string(k) + "]"));
      if (nm.initial_mean.back().size() != dx)
        throw input_error("noise.initial_mean: wrong size");
    }
  }
  nm.initial_cov =
      detail::parse_cov(s.initial_cov, n, dx, "noise.initial_cov", warnings);
  if (s.noise_cov.is_object() && s.noise_cov.contains("sequence")) {
    detail::reject_unknown(s.noise_cov, "noise.noise_cov", {"sequence"});
    const Json& seq = s.noise_cov["sequence"];
    if (!seq.is_array() || seq.empty())
      throw input_error("noise.noise_cov.sequence: expected a non-empty array");
    for (size_t k = 0; k < seq.size(); ++k)
      nm.noise_cov.push_back(detail::parse_cov(
          seq[k], n, dx, "noise.noise_cov.sequence[" + std::to_string(k) + "]",
          warnings));
  } else {
    nm.noise_cov.push_back(
        detail::parse_cov(s.noise_cov, n, dx, "noise.noise_cov", warnings));
  }
  nm.iid = s.iid.value_or(detail::shared_noise(s));
  return nm;
}

inline ModelFile parse_model(const Json& j) {
  if (!j.is_object()) throw input_error("model: expected a JSON object");
  detail::reject_unknown(j, "model",
                         {"schema", "name", "description", "d_x", "d_u",
                          "horizon", "stationary", "discount", "matrices",
                          "weights", "noise"});
  ModelFile f;
  if (j.contains("schema") && j["schema"] != kModelSchema)
    throw input_error(std::string("model: unsupported schema, expected ") +
                      kModelSchema);
  if (j.contains("name")) f.name = j["name"].get<std::string>();
  if (j.contains("description"))
    f.description = j["description"].get<std::string>();
  for (const char* k : {"d_x", "d_u", "matrices"})
    if (!j.contains(k)) throw input_error(std::string("model: missing '") + k + "'");
  if (!j["d_x"].is_number_integer() || !j["d_u"].is_number_integer())
    throw input_error("model: d_x and d_u must be integers");
  GameModel& m = f.model;
  m.d_x = j["d_x"].get<int>();
  m.d_u = j["d_u"].get<int>();
  if (m.d_x < 1 || m.d_u < 1) throw input_error("model: dimensions must be positive");

  const bool has_h = j.contains("horizon");
  const bool stat = j.contains("stationary") && j["stationary"].get<bool>();
  if (has_h == stat)
    throw input_error("model: give exactly one of 'horizon' or 'stationary': true");
  if (has_h) {
    if (!j["horizon"].is_number_integer() || j["horizon"].get<int>() < 1)
      throw input_error("model: horizon must be a positive integer");
    m.horizon = j["horizon"].get<int>();
  }
  if (j.contains("discount")) {
    m.discount = detail::number(j["discount"], "model.discount");
    if (!(*m.discount > 0.0 && *m.discount < 1.0))
      throw input_error("model: discount must lie in (0,1)");
  }

  const Json& mats = j["matrices"];
  if (!mats.is_object()) throw input_error("matrices: expected an object");
  detail::reject_unknown(mats, "matrices",
                         {"A", "Abar", "B", "Bbar", "Q", "Sx", "Qbar", "Gx",
                          "R", "Su", "Rbar", "Gu"});
  if (!mats.contains("A") || !mats.contains("B"))
    throw input_error("matrices: 'A' and 'B' are required");
  const int T = m.horizon.value_or(1);
  m.stages.assign(static_cast<size_t>(T), StageMatrices::zero(m.d_x, m.d_u));
  struct Slot {
    const char* name;
    Matrix StageMatrices::*field;
    int rows, cols;
    bool symmetric;
  };
  const int dx = m.d_x, du = m.d_u;
  const Slot slots[] = {
      {"A", &StageMatrices::A, dx, dx, false},
      {"Abar", &StageMatrices::Abar, dx, dx, false},
      {"B", &StageMatrices::B, dx, du, false},
      {"Bbar", &StageMatrices::Bbar, dx, du, false},
      {"Q", &StageMatrices::Q, dx, dx, true},
      {"Sx", &StageMatrices::Sx, dx, dx, true},
      {"Qbar", &StageMatrices::Qbar, dx, dx, true},
      {"Gx", &StageMatrices::Gx, dx, dx, true},
      {"R", &StageMatrices::R, du, du, true},
      {"Su", &StageMatrices::Su, du, du, true},
      {"Rbar", &StageMatrices::Rbar, du, du, true},
      {"Gu", &StageMatrices::Gu, du, du, true}};
  for (const auto& sl : slots) {
    if (!mats.contains(sl.name)) continue;
    const Json& v = mats[sl.name];
    const std::string w = std::string("matrices.") + sl.name;
    std::vector<Matrix> seq;
    if (detail::is_matrix(v)) {
      seq.push_back(detail::parse_matrix(v, w));
    } else if (v.is_array() && !v.empty() && detail::is_matrix(v.front())) {
      if (!m.horizon || static_cast<int>(v.size()) != T)
        throw input_error(w + ": time-varying sequences need one matrix per step");
      for (size_t k = 0; k < v.size(); ++k)
        seq.push_back(detail::parse_matrix(v[k], w + "[" + std::to_string(k) + "]"));
    } else {
      throw input_error(w + ": expected a matrix or a sequence of matrices");
    }
    for (auto& mat : seq) {
      detail::check_dims(mat, sl.rows, sl.cols, w);
      if (sl.symmetric) mat = detail::symmetric(mat, w, &f.warnings);
    }
    for (int t = 0; t < T; ++t)
      m.stages[static_cast<size_t>(t)].*sl.field =
          seq.size() == 1 ? seq.front() : seq[static_cast<size_t>(t)];
  }

  if (j.contains("weights")) {
    const Json& w = j["weights"];
    if (!w.is_object() || !w.contains("type"))
      throw input_error("weights: expected an object with 'type'");
    f.weights.type = w["type"].get<std::string>();
    if (f.weights.type == "homogeneous") {
      detail::reject_unknown(w, "weights", {"type", "n"});
      if (w.contains("n")) f.weights.n = w["n"].get<int>();
    } else if (f.weights.type == "positive") {
      detail::reject_unknown(w, "weights", {"type", "values"});
      f.weights.values = w.at("values").get<std::vector<double>>();
    } else if (f.weights.type == "vanishing") {
      detail::reject_unknown(w, "weights", {"type", "gamma", "gamma_max"});
      f.weights.gamma = w.at("gamma").get<std::vector<double>>();
      f.weights.gamma_max = detail::number(w.at("gamma_max"), "weights.gamma_max");
    } else {
      throw input_error("weights: unknown type '" + f.weights.type + "'");
    }
  }

  if (j.contains("noise")) {
    const Json& nz = j["noise"];
    if (!nz.is_object()) throw input_error("noise: expected an object");
    detail::reject_unknown(nz, "noise",
                           {"initial_mean", "initial_cov", "noise_cov", "iid"});
    if (nz.contains("initial_mean")) f.noise.initial_mean = nz["initial_mean"];
    if (nz.contains("initial_cov")) f.noise.initial_cov = nz["initial_cov"];
    if (nz.contains("noise_cov")) f.noise.noise_cov = nz["noise_cov"];
    if (nz.contains("iid")) f.noise.iid = nz["iid"].get<bool>();
  }
  return f;
}

inline ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open model file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw input_error("model file '" + path + "': " + e.what());
  }
  try {
    return parse_model(j);
  } catch (const nlohmann::json::exception& e) {
    throw input_error("model file '" + path + "': " + e.what());
  }
}

// Deterministic JSON text: keys in insertion order, doubles as %.17g,
// non-finite doubles as null.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_json(std::ostream& os, const Json& j, int indent = 0) {
  const std::string pad(static_cast<size_t>(indent + 2), ' ');
  const std::string end(static_cast<size_t>(indent), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      size_t k = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++k) {
        os << pad << Json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent + 2);
        os << (k + 1 < j.size() ? ",\n" : "\n");
      }
      os << end << "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      if (flat) {
        os << "[";
        for (size_t k = 0; k < j.size(); ++k) {
          if (k) os << ", ";
          write_json(os, j[k], indent);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (size_t k = 0; k < j.size(); ++k) {
        os << pad;
        write_json(os, j[k], indent + 2);
        os << (k + 1 < j.size() ? ",\n" : "\n");
      }
      os << end << "]";
      return;
    }
    case Json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

inline std::string to_text(const Json& j) {
  std::ostringstream os;
  write_json(os, j);
  os << "\n";
  return os.str();
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (int k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

// FNV-1a over a byte string.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dsg
