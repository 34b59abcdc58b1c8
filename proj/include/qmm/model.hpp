#pragma once

// Finite quantum statistical decision problems: a family of density
// matrices indexed by Theta, a finite decision set U, a loss matrix
// w(theta, u), measurements (POVMs) with outcomes in U, and priors on Theta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qmm/error.hpp"
#include "qmm/linalg.hpp"

namespace qmm {

namespace tol {
inline constexpr double kPsd = 1e-9;            // PSD slack for states and POVM elements
inline constexpr double kTrace = 1e-9;          // |Tr rho - 1| accepted as-is
inline constexpr double kTraceRepair = 1e-8;    // |Tr rho - 1| repaired by renormalizing
inline constexpr double kCompleteness = 1e-9;   // max-abs of sum(M_u) - I
inline constexpr double kPrior = 1e-12;         // |sum(pi) - 1|
inline constexpr double kPriorRepair = 1e-8;
inline constexpr double kIdentifiable = 1e-9;   // min trace distance between states
inline constexpr double kBornClamp = 1e-12;     // negative Born dust clamped to zero
inline constexpr double kBornSum = 1e-9;
}  // namespace tol

class DensityMatrix {
 public:
  // Hermitizes, renormalizes a trace within 1e-8 of one, and rejects
  // anything else that is not a state. Traces within 1e-9 of one are kept
  // as-is so that parsing a serialized state is idempotent. `name` only
  // decorates errors.
  static DensityMatrix make(const ComplexMatrix& m, const std::string& name = {}) {
    HermitianMatrix h = hermitize(m);
    if (h.dim() == 0) throw ValidationError("density matrix is empty", name);
    const double tr = h.trace();
    if (std::abs(tr - 1.0) > tol::kTraceRepair) {
      throw ValidationError("trace is " + std::to_string(tr) + ", expected 1", name);
    }
    if (std::abs(tr - 1.0) > tol::kTrace) h *= 1.0 / tr;
    const double lmin = min_eigenvalue(h);
    if (lmin < -tol::kPsd) {
      throw ValidationError("not positive semidefinite (min eigenvalue " + std::to_string(lmin) + ")",
                            name);
    }
    return DensityMatrix(std::move(h));
  }
  static DensityMatrix make(const HermitianMatrix& h, const std::string& name = {}) {
    return make(h.matrix(), name);
  }

  const HermitianMatrix& op() const noexcept { return op_; }
  std::size_t dim() const noexcept { return op_.dim(); }

  friend bool operator==(const DensityMatrix&, const DensityMatrix&) = default;

 private:
  explicit DensityMatrix(HermitianMatrix h) : op_(std::move(h)) {}
  HermitianMatrix op_;
};

class StateFamily {
 public:
  StateFamily(std::vector<std::string> labels, std::vector<DensityMatrix> states)
      : labels_(std::move(labels)), states_(std::move(states)) {
    if (states_.empty()) throw ValidationError("state family is empty", "states");
    if (labels_.size() != states_.size())
      throw ValidationError("label count differs from state count", "states");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < states_.size(); ++i) {
      if (!seen.insert(labels_[i]).second)
        throw ValidationError("duplicate state label", labels_[i]);
      if (states_[i].dim() != states_[0].dim())
        throw ValidationError("dimension differs from the first state", labels_[i]);
    }
    for (std::size_t i = 0; i < states_.size(); ++i)
      for (std::size_t j = i + 1; j < states_.size(); ++j) {
        const double dist = trace_norm(states_[i].op() - states_[j].op());
        if (dist <= tol::kIdentifiable) {
          throw ValidationError("not identifiable: trace distance to '" + labels_[i] + "' is " +
                                    std::to_string(dist),
                                labels_[j]);
        }
      }
  }

  std::size_t size() const noexcept { return states_.size(); }
  std::size_t dim() const noexcept { return states_.front().dim(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<DensityMatrix>& states() const noexcept { return states_; }
  const DensityMatrix& operator[](std::size_t i) const { return states_[i]; }

  friend bool operator==(const StateFamily&, const StateFamily&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<DensityMatrix> states_;
};

class LossMatrix {
 public:
  LossMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw ValidationError("loss matrix has wrong entry count", "loss");
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const double v = values_[k];
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("entry (" + std::to_string(k / cols_) + "," + std::to_string(k % cols_) +
                                  ") must be finite and nonnegative",
                              "loss");
      }
    }
  }
  static LossMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    std::vector<double> flat;
    flat.reserve(r * c);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != c)
        throw ValidationError("row " + std::to_string(i) + " has the wrong length", "loss");
      flat.insert(flat.end(), rows[i].begin(), rows[i].end());
    }
    return LossMatrix(r, c, std::move(flat));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t theta, std::size_t u) const { return values_[theta * cols_ + u]; }
  std::span<const double> values() const noexcept { return values_; }
  double max_entry() const {
    return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
  }

  friend bool operator==(const LossMatrix&, const LossMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

class Povm {
 public:
  // Validates PSD elements and completeness; hermitizes nothing (elements are
  // already Hermitian by type).
  Povm(std::vector<std::string> outcome_labels, std::vector<HermitianMatrix> elements)
      : labels_(std::move(outcome_labels)), elements_(std::move(elements)) {
    if (elements_.empty()) throw ValidationError("POVM has no elements", "povm");
    if (labels_.size() != elements_.size())
      throw ValidationError("outcome label count differs from element count", "povm");
    const std::size_t d = elements_.front().dim();
    HermitianMatrix sum = HermitianMatrix::zero(d);
    for (std::size_t u = 0; u < elements_.size(); ++u) {
      if (elements_[u].dim() != d) throw ValidationError("element dimension mismatch", labels_[u]);
      const double lmin = min_eigenvalue(elements_[u]);
      if (lmin < -tol::kPsd) {
        throw ValidationError("POVM element not PSD (min eigenvalue " + std::to_string(lmin) + ")",
                              labels_[u]);
      }
      sum += elements_[u];
    }
    const double dev = max_abs_diff(sum.matrix(), ComplexMatrix::identity(d));
    if (dev > tol::kCompleteness) {
      throw ValidationError("elements do not sum to identity (max deviation " + std::to_string(dev) + ")",
                            "povm");
    }
  }

  // The single-outcome POVM {I}.
  static Povm trivial(std::size_t dim, std::string label) {
    return Povm({std::move(label)}, {HermitianMatrix::identity(dim)});
  }
  // M_u = I / |U|.
  static Povm uniform(std::size_t dim, std::vector<std::string> labels) {
    const double w = 1.0 / static_cast<double>(labels.size());
    std::vector<HermitianMatrix> el(labels.size(), HermitianMatrix::identity(dim) * w);
    return Povm(std::move(labels), std::move(el));
  }

  std::size_t size() const noexcept { return elements_.size(); }
  std::size_t dim() const noexcept { return elements_.front().dim(); }
  const std::vector<std::string>& outcome_labels() const noexcept { return labels_; }
  const std::vector<HermitianMatrix>& elements() const noexcept { return elements_; }
  const HermitianMatrix& operator[](std::size_t u) const { return elements_[u]; }

  friend bool operator==(const Povm&, const Povm&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<HermitianMatrix> elements_;
};

class Prior {
 public:
  explicit Prior(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.empty()) throw ValidationError("prior is empty", "prior");
    double s = 0.0;
    for (double x : w_) {
      if (!std::isfinite(x) || x < 0.0) throw ValidationError("weights must be finite and >= 0", "prior");
      s += x;
    }
    if (std::abs(s - 1.0) > tol::kPrior)
      throw ValidationError("weights sum to " + std::to_string(s) + ", expected 1", "prior");
  }

  // Accepts weights whose sum is within 1e-8 of one and rescales them.
  static Prior normalized(std::vector<double> weights) {
    double s = 0.0;
    for (double x : weights) s += x;
    if (!std::isfinite(s) || std::abs(s - 1.0) > tol::kPriorRepair)
      throw ValidationError("weights sum to " + std::to_string(s) + ", expected 1", "prior");
    // Sums already within 1e-12 are kept so that re-parsing is idempotent.
    if (std::abs(s - 1.0) > tol::kPrior)
      for (double& x : weights) x /= s;
    return Prior(std::move(weights));
  }
  static Prior uniform(std::size_t n) {
    return Prior(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }
  static Prior point_mass(std::size_t n, std::size_t k) {
    std::vector<double> w(n, 0.0);
    w.at(k) = 1.0;
    return Prior(std::move(w));
  }

  std::size_t size() const noexcept { return w_.size(); }
  std::span<const double> weights() const noexcept { return w_; }
  double operator[](std::size_t i) const { return w_[i]; }

  friend bool operator==(const Prior&, const Prior&) = default;

 private:
  std::vector<double> w_;
};

class DecisionProblem {
 public:
  DecisionProblem(StateFamily family, std::vector<std::string> decisions, LossMatrix loss)
      : family_(std::move(family)), decisions_(std::move(decisions)), loss_(std::move(loss)) {
    if (decisions_.empty()) throw ValidationError("decision set is empty", "decisions");
    std::set<std::string> seen;
    for (const auto& d : decisions_)
      if (!seen.insert(d).second) throw ValidationError("duplicate decision label", d);
    if (loss_.rows() != family_.size() || loss_.cols() != decisions_.size()) {
      throw ValidationError("loss is " + std::to_string(loss_.rows()) + "x" + std::to_string(loss_.cols()) +
                                ", expected " + std::to_string(family_.size()) + "x" +
                                std::to_string(decisions_.size()),
                            "loss");
    }
  }

  const StateFamily& family() const noexcept { return family_; }
  const std::vector<std::string>& decisions() const noexcept { return decisions_; }
  const LossMatrix& loss() const noexcept { return loss_; }
  std::size_t num_states() const noexcept { return family_.size(); }
  std::size_t num_decisions() const noexcept { return decisions_.size(); }
  std::size_t dim() const noexcept { return family_.dim(); }

  friend bool operator==(const DecisionProblem&, const DecisionProblem&) = default;

 private:
  StateFamily family_;
  std::vector<std::string> decisions_;
  LossMatrix loss_;
};

struct RiskVector {
  std::vector<double> values;
  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

// Born rule: p(u) = Tr rho M_u, with floating-point dust clamped to zero.
inline std::vector<double> outcome_distribution(const DensityMatrix& rho, const Povm& m) {
  if (rho.dim() != m.dim()) throw ValidationError("state and POVM dimensions differ");
  std::vector<double> p(m.size());
  double sum = 0.0;
  for (std::size_t u = 0; u < m.size(); ++u) {
    double v = trace_product(rho.op(), m[u]);
    if (v < 0.0) {
      if (v < -tol::kBornClamp)
        throw ValidationError("negative outcome probability " + std::to_string(v), m.outcome_labels()[u]);
      v = 0.0;
    }
    p[u] = v;
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol::kBornSum)
    throw ValidationError("outcome probabilities sum to " + std::to_string(sum));
  return p;
}

inline void check_compatible(const DecisionProblem& p, const Povm& m) {
  if (m.dim() != p.dim()) throw ValidationError("POVM dimension differs from the problem", "povm");
  if (m.outcome_labels() != p.decisions())
    throw ValidationError("POVM outcome labels differ from the problem decisions", "povm");
}

// R(theta) = sum_u w(theta, u) Tr rho(theta) M_u
inline RiskVector risk_vector(const DecisionProblem& p, const Povm& m) {
  check_compatible(p, m);
  RiskVector r;
  r.values.resize(p.num_states());
  for (std::size_t t = 0; t < p.num_states(); ++t) {
    const auto dist = outcome_distribution(p.family()[t], m);
    double acc = 0.0;
    for (std::size_t u = 0; u < dist.size(); ++u) acc += p.loss()(t, u) * dist[u];
    r.values[t] = acc;
  }
  return r;
}

inline double average_risk(const RiskVector& r, const Prior& pi) {
  if (r.size() != pi.size()) throw ValidationError("risk vector and prior lengths differ", "prior");
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) acc += r[i] * pi[i];
  return acc;
}

inline double worst_case_risk(const RiskVector& r) {
  if (r.values.empty()) throw ValidationError("empty risk vector");
  return *std::max_element(r.values.begin(), r.values.end());
}

// Element-wise convex combination of POVMs sharing outcomes and dimension.
inline Povm mix_povms(std::span<const Povm> ms, std::span<const double> weights) {
  if (ms.empty() || ms.size() != weights.size())
    throw ValidationError("mix_povms: need one weight per POVM");
  double s = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("mix_povms: negative weight");
    s += w;
  }
  if (std::abs(s - 1.0) > 1e-9) throw ValidationError("mix_povms: weights do not sum to 1");
  const Povm& first = ms.front();
  std::vector<HermitianMatrix> el(first.size(), HermitianMatrix::zero(first.dim()));
  for (std::size_t k = 0; k < ms.size(); ++k) {
    if (ms[k].outcome_labels() != first.outcome_labels() || ms[k].dim() != first.dim())
      throw ValidationError("mix_povms: mismatched outcome sets");
    if (weights[k] == 0.0) continue;
    for (std::size_t u = 0; u < first.size(); ++u) el[u] += ms[k][u] * (weights[k] / s);
  }
  return Povm(first.outcome_labels(), std::move(el));
}

// ---------------------------------------------------------------------------
// Generators

inline LossMatrix zero_one_loss(std::size_t n) {
  if (n == 0) throw ValidationError("zero_one_loss: n must be >= 1");
  std::vector<double> v(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 0.0;
  return LossMatrix(n, n, std::move(v));
}

inline LossMatrix squared_error_loss(std::span<const double> theta_values, std::span<const double> u_values) {
  std::vector<double> v;
  v.reserve(theta_values.size() * u_values.size());
  for (double t : theta_values)
    for (double u : u_values) v.push_back((t - u) * (t - u));
  return LossMatrix(theta_values.size(), u_values.size(), std::move(v));
}

// w(theta, u) = Tr rho log rho - Tr rho log sigma. A pair whose support
// inclusion fails has infinite loss and is rejected.
inline LossMatrix relative_entropy_loss(const StateFamily& targets, std::span<const DensityMatrix> candidates,
                                        double rank_tol = 1e-10) {
  std::vector<double> v;
  v.reserve(targets.size() * candidates.size());
  std::vector<Spectrum> cand_spectra;
  for (const auto& s : candidates) {
    if (s.dim() != targets.dim()) throw ValidationError("candidate dimension differs from targets");
    cand_spectra.push_back(eig_hermitian(s.op()));
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const HermitianMatrix& rho = targets[t].op();
    double neg_entropy = 0.0;
    for (double l : eig_hermitian(rho).eigenvalues)
      if (l > rank_tol) neg_entropy += l * std::log(l);
    for (std::size_t u = 0; u < candidates.size(); ++u) {
      const Spectrum& sp = cand_spectra[u];
      const double cut = rank_tol * std::max(sp.eigenvalues.back(), 0.0);
      double cross = 0.0;
      for (std::size_t k = 0; k < sp.eigenvalues.size(); ++k) {
        const auto vk = sp.eigenvector(k);
        double weight = 0.0;  // <v_k| rho |v_k>
        for (std::size_t i = 0; i < vk.size(); ++i)
          for (std::size_t j = 0; j < vk.size(); ++j) weight += (std::conj(vk[i]) * rho(i, j) * vk[j]).real();
        if (sp.eigenvalues[k] <= cut) {
          if (weight > rank_tol) {
            throw ValidationError("infinite loss entry: support of target '" + targets.labels()[t] +
                                      "' is not contained in the support of candidate " + std::to_string(u),
                                  "loss");
          }
          continue;
        }
        cross += weight * std::log(sp.eigenvalues[k]);
      }
      v.push_back(std::max(0.0, neg_entropy - cross));
    }
  }
  return LossMatrix(targets.size(), candidates.size(), std::move(v));
}

inline std::string format_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// rho(theta) = 1/2 [[1, theta], [theta, 1]] for each grid point.
inline StateFamily qubit_family(std::span<const double> grid) {
  std::vector<std::string> labels;
  std::vector<DensityMatrix> states;
  std::set<double> seen;
  for (double th : grid) {
    if (!(th >= -1.0 && th <= 1.0)) throw ValidationError("grid value outside [-1, 1]", format_label(th));
    if (!seen.insert(th).second) throw ValidationError("duplicate grid value", format_label(th));
    ComplexMatrix m(2);
    m(0, 0) = 0.5;
    m(1, 1) = 0.5;
    m(0, 1) = 0.5 * th;
    m(1, 0) = 0.5 * th;
    labels.push_back(format_label(th));
    states.push_back(DensityMatrix::make(m, labels.back()));
  }
  return StateFamily(std::move(labels), std::move(states));
}

// Projectors E_{+1}, E_{-1} onto (|0> +- |1>)/sqrt 2.
inline Povm qubit_x_basis_povm() {
  const double h = 0.5;
  ComplexMatrix ep(2), em(2);
  ep(0, 0) = ep(0, 1) = ep(1, 0) = ep(1, 1) = h;
  em(0, 0) = em(1, 1) = h;
  em(0, 1) = em(1, 0) = -h;
  return Povm({"1", "-1"}, {hermitize(ep), hermitize(em)});
}

// Two-copy counting measurement: outcome u in {0, 1/2, 1} records the
// fraction of +1 results when E_{+-1} is measured on both copies.
inline Povm two_copy_counting_povm() {
  const Povm e = qubit_x_basis_povm();
  const HermitianMatrix& p = e[0];
  const HermitianMatrix& m = e[1];
  return Povm({"0", "0.5", "1"}, {kron(m, m), kron(p, m) + kron(m, p), kron(p, p)});
}

inline constexpr std::size_t kMaxTensorDim = 64;

inline StateFamily tensor_power(const StateFamily& f, std::size_t n) {
  if (n == 0) throw ValidationError("tensor_power: n must be >= 1");
  std::size_t d = 1;
  for (std::size_t k = 0; k < n; ++k) {
    d *= f.dim();
    if (d > kMaxTensorDim)
      throw ValidationError("tensor_power: dimension exceeds " + std::to_string(kMaxTensorDim));
  }
  std::vector<DensityMatrix> states;
  for (std::size_t i = 0; i < f.size(); ++i) {
    HermitianMatrix acc = f[i].op();
    for (std::size_t k = 1; k < n; ++k) acc = kron(acc, f[i].op());
    states.push_back(DensityMatrix::make(acc, f.labels()[i]));
  }
  return StateFamily(f.labels(), std::move(states));
}

inline std::vector<std::string> index_labels(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i + 1));
  return out;
}

inline constexpr std::size_t kMaxRandomDim = 8;

// Ginibre-random states rho = G G^dagger / Tr, deterministic given the seed.
// Loss is 0-1 when |Theta| = |U|, otherwise uniform on [0, 1].
inline DecisionProblem random_problem(std::size_t dim, std::size_t n_states, std::size_t n_decisions,
                                      std::uint64_t seed) {
  if (dim == 0 || dim > kMaxRandomDim)
    throw ValidationError("random_problem: dim must be in [1, " + std::to_string(kMaxRandomDim) + "]");
  if (n_states == 0 || n_decisions == 0) throw ValidationError("random_problem: empty Theta or U");
  if (dim == 1 && n_states > 1) throw ValidationError("random_problem: dimension 1 admits only one state");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw_state = [&] {
    ComplexMatrix g(dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        const double re = normal(rng);
        const double im = normal(rng);
        g(i, j) = Complex(re, im);
      }
    HermitianMatrix rho = hermitize(g * g.adjoint());
    rho *= 1.0 / rho.trace();
    return DensityMatrix::make(rho);
  };
  std::vector<DensityMatrix> states;
  while (states.size() < n_states) {
    DensityMatrix cand = draw_state();
    const bool distinct = std::all_of(states.begin(), states.end(), [&](const DensityMatrix& s) {
      return trace_norm(s.op() - cand.op()) > tol::kIdentifiable;
    });
    if (distinct) states.push_back(std::move(cand));
  }
  StateFamily family(index_labels(n_states), std::move(states));
  if (n_states == n_decisions)
    return DecisionProblem(std::move(family), index_labels(n_decisions), zero_one_loss(n_states));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> loss(n_states * n_decisions);
  for (double& x : loss) x = unif(rng);
  return DecisionProblem(std::move(family), index_labels(n_decisions),
                         LossMatrix(n_states, n_decisions, std::move(loss)));
}

// Instance k of a seeded batch: shapes sweep the grid
// 2..max_dim x 2..max_states x 2..max_decisions, seed = base_seed + k.
inline DecisionProblem batch_problem(std::size_t k, std::uint64_t base_seed, std::size_t max_dim,
                                     std::size_t max_states, std::size_t max_decisions) {
  if (max_dim < 2 || max_states < 2 || max_decisions < 2)
    throw ValidationError("batch_problem: size limits must be at least 2");
  const std::size_t d = 2 + k % (max_dim - 1);
  const std::size_t n = 2 + k % (max_states - 1);
  const std::size_t m = 2 + (k / (max_dim - 1)) % (max_decisions - 1);
  return random_problem(d, n, m, base_seed + k);
}

}  // namespace qmm
