#pragma once

// JSON problem and POVM files, deterministic report text, input digests.
//
// Complex entries are [re, im]; a bare number is read as a real entry.
// Numbers are written with 17 significant digits so that output is
// byte-stable and parse(emit(x)) reproduces every double exactly.

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qmm/error.hpp"
#include "qmm/linalg.hpp"
#include "qmm/model.hpp"
#include "qmm/restricted.hpp"

namespace qmm::io {

using Json = nlohmann::ordered_json;

struct ProblemFile {
  DecisionProblem problem;
  std::optional<Prior> prior;
  PovmClass cls = AllPovms{};
};

// ---------------------------------------------------------------- writing

inline std::string format_number(double x) {
  if (!std::isfinite(x)) return "null";
  if (x == 0.0) return std::signbit(x) ? "-0.0" : "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline void write_json(std::string& out, const Json& j, int indent, int depth) {
  const auto newline = [&](int level) {
    out += '\n';
    out.append(static_cast<std::size_t>(indent * level), ' ');
  };
  // Arrays of scalars or of [re, im] pairs stay on one line, so a matrix
  // prints one row per line.
  const auto scalar = [](const Json& e) { return !e.is_structured(); };
  const auto flat = [&](const Json& a) {
    for (const auto& e : a) {
      if (scalar(e)) continue;
      if (e.is_array() && e.size() == 2 && scalar(e[0]) && scalar(e[1])) continue;
      return false;
    }
    return true;
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(k).dump();
        out += ": ";
        write_json(out, v, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty() || flat(j)) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          write_json(out, j[i], indent, depth + 1);
        }
        out += ']';
        return;
      }
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        newline(depth + 1);
        write_json(out, j[i], indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      out += format_number(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace detail

// Pretty JSON with fixed-precision floats and insertion-ordered keys.
inline std::string to_text(const Json& j) {
  std::string out;
  detail::write_json(out, j, 2, 0);
  out += '\n';
  return out;
}

inline Json matrix_to_json(const ComplexMatrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(Json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json matrix_to_json(const HermitianMatrix& m) { return matrix_to_json(m.matrix()); }

inline Json reals_to_json(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline Json povm_to_json(const Povm& m) {
  Json elements = Json::array();
  for (const auto& e : m.elements()) elements.push_back(matrix_to_json(e));
  return Json{{"outcomes", m.outcome_labels()}, {"elements", std::move(elements)}};
}

inline Json problem_to_json(const ProblemFile& pf) {
  const DecisionProblem& p = pf.problem;
  Json states = Json::array();
  for (std::size_t t = 0; t < p.num_states(); ++t)
    states.push_back(Json{{"label", p.family().labels()[t]}, {"matrix", matrix_to_json(p.family()[t].op())}});
  Json loss = Json::array();
  for (std::size_t t = 0; t < p.num_states(); ++t) {
    Json row = Json::array();
    for (std::size_t u = 0; u < p.num_decisions(); ++u) row.push_back(p.loss()(t, u));
    loss.push_back(std::move(row));
  }
  Json j{{"dimension", p.dim()}, {"states", std::move(states)}, {"decisions", p.decisions()}, {"loss", std::move(loss)}};
  if (pf.prior) j["prior"] = reals_to_json(pf.prior->weights());
  if (const auto* hull = std::get_if<ConvexHull>(&pf.cls)) {
    Json gens = Json::array();
    for (const auto& g : hull->generators()) gens.push_back(povm_to_json(g));
    j["class"] = Json{{"type", "convex_hull"}, {"generators", std::move(gens)}};
  }
  return j;
}

inline std::string emit_problem(const ProblemFile& pf) { return to_text(problem_to_json(pf)); }
inline std::string emit_povm(const Povm& m) { return to_text(povm_to_json(m)); }

// ---------------------------------------------------------------- reading

namespace detail {

inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }
inline std::string at(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

inline const Json& require(const Json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ValidationError("expected an object", path.empty() ? "<root>" : path);
  const auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError("missing required field", at(path, key));
  return *it;
}

inline const Json& require_array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError("expected an array", path);
  return j;
}

inline double real_of(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError("expected a number", path);
  return j.get<double>();
}

inline std::string string_of(const Json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  throw ValidationError("expected a string", path);
}

inline std::size_t count_of(const Json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw ValidationError("expected a nonnegative integer", path);
  return j.get<std::size_t>();
}

inline Complex complex_of(const Json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {real_of(j[0], at(path, std::size_t{0})), real_of(j[1], at(path, std::size_t{1}))};
  throw ValidationError("expected a number or a [re, im] pair", path);
}

inline ComplexMatrix matrix_of(const Json& j, std::size_t dim, const std::string& path) {
  require_array(j, path);
  if (j.size() != dim) throw ValidationError("expected " + std::to_string(dim) + " rows", path);
  ComplexMatrix m(dim);
  for (std::size_t r = 0; r < dim; ++r) {
    const std::string rp = at(path, r);
    const Json& row = require_array(j[r], rp);
    if (row.size() != dim) throw ValidationError("expected " + std::to_string(dim) + " entries", rp);
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = complex_of(row[c], at(rp, c));
  }
  return m;
}

inline std::vector<std::string> labels_of(const Json& j, const std::string& path) {
  require_array(j, path);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(string_of(j[i], at(path, i)));
  return out;
}

inline Json parse_text(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Report a line number, which the byte offset alone does not give.
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size() + 1);
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < byte; ++i)
      if (text[i] == '\n') ++line;
    throw ValidationError("JSON syntax error: " + std::string(e.what()), "line " + std::to_string(line));
  }
}

// Element matrices are hermitized on the way in, like states.
inline Povm povm_of(const Json& j, std::size_t dim, const std::vector<std::string>* default_labels,
                    const std::string& path) {
  const Json& elements = require_array(require(j, "elements", path), at(path, "elements"));
  std::vector<std::string> labels;
  if (j.contains("outcomes")) {
    labels = labels_of(j["outcomes"], at(path, "outcomes"));
  } else if (default_labels) {
    labels = *default_labels;
  } else {
    throw ValidationError("missing required field", at(path, "outcomes"));
  }
  std::vector<HermitianMatrix> el;
  for (std::size_t u = 0; u < elements.size(); ++u)
    el.push_back(hermitize(matrix_of(elements[u], dim, at(at(path, "elements"), u))));
  try {
    return Povm(std::move(labels), std::move(el));
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), path.empty() ? "povm" : path);
  }
}

}  // namespace detail

inline ProblemFile parse_problem(std::string_view text) {
  using namespace detail;
  const Json root = parse_text(text);
  const std::size_t dim = count_of(require(root, "dimension", ""), "dimension");
  if (dim == 0) throw ValidationError("must be positive", "dimension");

  const Json& states = require_array(require(root, "states", ""), "states");
  std::vector<std::string> labels;
  std::vector<DensityMatrix> rhos;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::string sp = at("states", i);
    std::string label = string_of(require(states[i], "label", sp), at(sp, "label"));
    const ComplexMatrix m = matrix_of(require(states[i], "matrix", sp), dim, at(sp, "matrix"));
    rhos.push_back(DensityMatrix::make(m, "state '" + label + "'"));
    labels.push_back(std::move(label));
  }
  StateFamily family(std::move(labels), std::move(rhos));

  std::vector<std::string> decisions = labels_of(require(root, "decisions", ""), "decisions");

  const Json& loss_rows = require_array(require(root, "loss", ""), "loss");
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < loss_rows.size(); ++t) {
    const std::string rp = at("loss", t);
    const Json& row = require_array(loss_rows[t], rp);
    std::vector<double> r;
    for (std::size_t u = 0; u < row.size(); ++u) r.push_back(real_of(row[u], at(rp, u)));
    rows.push_back(std::move(r));
  }
  ProblemFile pf{DecisionProblem(std::move(family), decisions, LossMatrix::from_rows(rows)), std::nullopt,
                   AllPovms{}};

  if (root.contains("prior") && !root["prior"].is_null()) {
    const Json& pj = require_array(root["prior"], "prior");
    std::vector<double> w;
    for (std::size_t i = 0; i < pj.size(); ++i) w.push_back(real_of(pj[i], at("prior", i)));
    if (w.size() != pf.problem.num_states())
      throw ValidationError("expected " + std::to_string(pf.problem.num_states()) + " weights", "prior");
    pf.prior = Prior::normalized(std::move(w));
  }

  if (root.contains("class") && !root["class"].is_null()) {
    const Json& cj = root["class"];
    const std::string type = string_of(require(cj, "type", "class"), "class.type");
    if (type == "convex_hull") {
      const Json& gens = require_array(require(cj, "generators", "class"), "class.generators");
      std::vector<Povm> povms;
      for (std::size_t k = 0; k < gens.size(); ++k)
        povms.push_back(povm_of(gens[k], dim, &decisions, at("class.generators", k)));
      pf.cls = ConvexHull(std::move(povms));
      check_class(pf.problem, pf.cls);
    } else if (type != "all") {
      throw ValidationError("unknown class type '" + type + "' (expected \"all\" or \"convex_hull\")", "class.type");
    }
  }
  return pf;
}

inline Povm parse_povm(std::string_view text, std::size_t dim) {
  return detail::povm_of(detail::parse_text(text), dim, nullptr, "");
}

// Comma-separated weights, e.g. "0.5,0.5,0". Sums within 1e-8 of one are repaired.
inline Prior parse_prior_list(std::string_view text) {
  std::vector<double> w;
  std::string item;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size() || item.empty()) throw ValidationError("not a number: '" + item + "'", "--prior");
    w.push_back(x);
  }
  try {
    return Prior::normalized(std::move(w));
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), "--prior");
  }
}

// ---------------------------------------------------------------- files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

}  // namespace qmm::io
