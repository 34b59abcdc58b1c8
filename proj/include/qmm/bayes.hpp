#pragma once

// Bayes POVM with respect to a prior.
//
// The average risk of a POVM M regroups as sum_u Tr W_u M_u with posterior
// operators W_u = sum_theta pi(theta) w(theta, u) rho(theta). Minimizing it
// over POVMs is a small semidefinite program whose Lagrange dual is
//
//     maximize Tr L  subject to  L <= W_u  for every u.
//
// Stage one is the gain-operator fixed-point iteration
// M_u <- S^{-1/2} G_u M_u G_u S^{-1/2}, G_u = C I - W_u, S = sum_u G_u M_u G_u.
// It is fast when the optimum is strictly complementary and stalls (the gap
// decays sublinearly) when two decisions tie on a shared direction, which is
// exactly what happens near a least favorable prior. Stage two, entered only
// when stage one stalls, follows the central path of the log-det barrier on
// the dual. Neither stage is trusted: every reported gap comes from a
// dual-feasible L built from the returned POVM.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmm/error.hpp"
#include "qmm/linalg.hpp"
#include "qmm/model.hpp"

namespace qmm {

struct PosteriorOperators {
  std::vector<HermitianMatrix> w;  // one per decision
};

inline PosteriorOperators assemble_w(const DecisionProblem& p, const Prior& pi) {
  if (pi.size() != p.num_states()) throw ValidationError("prior length differs from |Theta|", "prior");
  PosteriorOperators out;
  out.w.assign(p.num_decisions(), HermitianMatrix::zero(p.dim()));
  for (std::size_t u = 0; u < p.num_decisions(); ++u)
    for (std::size_t t = 0; t < p.num_states(); ++t) {
      const double c = pi[t] * p.loss()(t, u);
      if (c != 0.0) out.w[u] += p.family()[t].op() * c;
    }
  return out;
}

// sum_u Tr W_u M_u
inline double bayes_objective(const PosteriorOperators& w, std::span<const HermitianMatrix> m) {
  if (w.w.size() != m.size()) throw ValidationError("posterior operators and POVM sizes differ");
  double acc = 0.0;
  for (std::size_t u = 0; u < m.size(); ++u) acc += trace_product(w.w[u], m[u]);
  return acc;
}

struct DualCertificate {
  HermitianMatrix lambda;
  double lower_bound = 0.0;
  double shift = 0.0;  // max(s, 0): how far hermitize(sum W_u M_u) was lowered
};

// L = hermitize(sum_u W_u M_u) - max(s, 0) I with s = max_u lambda_max(L - W_u).
// L <= W_u for all u, so Tr L is a lower bound on the Bayes risk.
inline DualCertificate dual_certificate(const PosteriorOperators& w, std::span<const HermitianMatrix> m) {
  if (w.w.empty() || w.w.size() != m.size())
    throw ValidationError("dual_certificate: posterior operators and POVM sizes differ");
  const std::size_t d = w.w.front().dim();
  ComplexMatrix acc(d);
  for (std::size_t u = 0; u < m.size(); ++u) acc += w.w[u].matrix() * m[u].matrix();
  HermitianMatrix lam = hermitize(acc);
  double s = -std::numeric_limits<double>::infinity();
  for (const auto& wu : w.w) s = std::max(s, max_eigenvalue(lam - wu));
  const double shift = std::max(s, 0.0);
  if (shift > 0.0) lam -= HermitianMatrix::identity(d) * shift;
  DualCertificate out;
  out.lower_bound = lam.trace();
  out.lambda = std::move(lam);
  out.shift = shift;
  return out;
}

inline DualCertificate dual_certificate(const PosteriorOperators& w, const Povm& m) {
  return dual_certificate(w, m.elements());
}

struct BayesOptions {
  double tol = 1e-7;
  int max_iter = 5000;  // fixed-point sweeps plus barrier Newton steps
  // Fixed-point sweeps allowed before handing over to the barrier stage.
  int fixed_point_sweeps = 300;
  // With the fallback off, only the fixed-point iteration runs (up to max_iter).
  bool barrier_fallback = true;
  // Called after every fixed-point sweep with (sweep, primal, gap).
  std::function<void(int, double, double)> on_sweep;
};

struct BayesSolution {
  Povm povm;
  double primal = 0.0;
  double dual_bound = 0.0;
  double gap = 0.0;
  int iterations = 0;
  HermitianMatrix certificate;
};

// Iteration budget exhausted; `best()` holds the best iterate and its honest gap.
class MaxIterationsExceeded : public Error {
 public:
  explicit MaxIterationsExceeded(BayesSolution best)
      : Error("Bayes solver stopped with gap " + short_number(best.gap) + " after " +
              std::to_string(best.iterations) + " iterations"),
        best_(std::move(best)) {}
  const BayesSolution& best() const noexcept { return best_; }

 private:
  BayesSolution best_;
};

namespace detail {

inline constexpr int kStagnationWindow = 50;
inline constexpr double kStagnationImprovement = 1e-12;
inline constexpr int kMaxPerturbations = 3;
inline constexpr double kPerturbMix = 0.01;
inline constexpr double kDescentAbort = 1e-8;

// A candidate answer: POVM elements plus the best dual-feasible L known for it.
struct BayesCandidate {
  std::vector<HermitianMatrix> m;
  HermitianMatrix lambda;
  double primal = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  double gap() const { return primal - lower; }
};

// The fixed-point update leaves sum_u M_u equal to the support projector of
// S; share the kernel out evenly so the iterate stays on the POVM set.
inline void complete_povm(std::vector<HermitianMatrix>& m) {
  const std::size_t d = m.front().dim();
  HermitianMatrix sum = HermitianMatrix::zero(d);
  for (const auto& mu : m) sum += mu;
  const HermitianMatrix missing = HermitianMatrix::identity(d) - sum;
  if (missing.max_abs() == 0.0) return;
  const double share = 1.0 / static_cast<double>(m.size());
  for (auto& mu : m) mu += missing * share;
}

// Stage one. Returns the best iterate; `converged` is set when its gap <= tol
// and `sweeps` receives the number of sweeps performed.
inline BayesCandidate fixed_point_stage(const PosteriorOperators& w, const BayesOptions& opts, int budget,
                                        bool& converged, int& sweeps) {
  const std::size_t nu = w.w.size();
  const std::size_t d = w.w.front().dim();
  double shift = 0.0;
  for (const auto& wu : w.w) shift = std::max(shift, max_eigenvalue(wu));
  std::vector<HermitianMatrix> gain;
  gain.reserve(nu);
  for (const auto& wu : w.w) gain.push_back(HermitianMatrix::identity(d) * shift - wu);

  const HermitianMatrix flat = HermitianMatrix::identity(d) * (1.0 / static_cast<double>(nu));
  std::vector<HermitianMatrix> m(nu, flat);

  BayesCandidate best;
  double window_start_gap = std::numeric_limits<double>::infinity();
  int window_start = 0;
  int perturbations = 0;
  double prev_primal = std::numeric_limits<double>::infinity();
  converged = false;

  for (int it = 0;; ++it) {
    sweeps = it;
    DualCertificate cert = dual_certificate(w, m);
    const double primal = bayes_objective(w, m);
    const double gap = primal - cert.lower_bound;
    if (opts.on_sweep) opts.on_sweep(it, primal, gap);
    if (!std::isfinite(primal) || !std::isfinite(gap)) {
      throw NumericalError("Bayes fixed-point iteration produced non-finite values at sweep " + std::to_string(it) +
                           " (loss scale too large?)");
    }
    if (primal > prev_primal + kDescentAbort) {
      throw NumericalError("Bayes fixed-point iteration increased the average risk from " +
                           short_number(prev_primal) + " to " + short_number(primal) + " at sweep " +
                           std::to_string(it));
    }
    prev_primal = primal;
    if (gap < best.gap()) best = {m, std::move(cert.lambda), primal, cert.lower_bound, it};
    if (gap <= opts.tol) {
      converged = true;
      return best;
    }
    if (it >= budget) return best;

    if (it - window_start >= kStagnationWindow) {
      if (window_start_gap - best.gap() < kStagnationImprovement) {
        if (perturbations == kMaxPerturbations) return best;
        ++perturbations;
        for (auto& mu : m) mu = mu * (1.0 - kPerturbMix) + flat * kPerturbMix;
        prev_primal = std::numeric_limits<double>::infinity();
      }
      window_start = it;
      window_start_gap = best.gap();
    }

    HermitianMatrix s = HermitianMatrix::zero(d);
    std::vector<HermitianMatrix> gmg(nu);
    for (std::size_t u = 0; u < nu; ++u) {
      gmg[u] = sandwich(gain[u], m[u]);
      s += gmg[u];
    }
    const HermitianMatrix s_inv_sqrt = support_inv_sqrt(s);
    for (std::size_t u = 0; u < nu; ++u) m[u] = sandwich(s_inv_sqrt, gmg[u]);
    complete_povm(m);
  }
}

inline constexpr double kBarrierShrink = 0.2;
inline constexpr double kCentered = 1e-9;  // half squared Newton decrement
inline constexpr double kArmijo = 0.25;

struct BarrierPoint {
  HermitianMatrix lambda;
  std::vector<HermitianMatrix> z_inv;  // (W_u - L)^{-1}
  double value = 0.0;                  // Tr L + mu sum_u log det(W_u - L)
};

inline std::optional<BarrierPoint> barrier_eval(const PosteriorOperators& w, const HermitianMatrix& lambda,
                                                double mu) {
  BarrierPoint pt;
  pt.lambda = lambda;
  double logdet = 0.0;
  for (const auto& wu : w.w) {
    const Spectrum sp = eig_hermitian(wu - lambda);
    if (!(sp.eigenvalues.front() > 0.0)) return std::nullopt;
    for (double l : sp.eigenvalues) logdet += std::log(l);
    pt.z_inv.push_back(spectral_apply(sp, [](double l) { return 1.0 / l; }));
  }
  pt.value = lambda.trace() + mu * logdet;
  return pt;
}

// POVM read off a barrier point with pending Newton step dL:
// mu Z_u^{-1} (Z_u + dL) Z_u^{-1}, Z_u = W_u - L. The Newton equations make
// these sum to I; clipping the small negative part and renormalizing keeps
// the result a POVM.
inline std::vector<HermitianMatrix> barrier_povm(const PosteriorOperators& w, const BarrierPoint& pt,
                                                 const HermitianMatrix& step) {
  const std::size_t d = pt.lambda.dim();
  std::vector<HermitianMatrix> m;
  HermitianMatrix s = HermitianMatrix::zero(d);
  for (std::size_t u = 0; u < w.w.size(); ++u) {
    const HermitianMatrix est = sandwich(pt.z_inv[u], w.w[u] - pt.lambda + step);
    m.push_back(spectral_apply(eig_hermitian(est), [](double l) { return std::max(l, 0.0); }));
    s += m.back();
  }
  const HermitianMatrix norm = support_inv_sqrt(s);
  for (auto& mu : m) mu = sandwich(norm, mu);
  complete_povm(m);
  return m;
}

// Stage two: damped Newton on Tr L + mu sum_u log det(W_u - L) for a
// decreasing sequence of mu. At a centered point mu (W_u - L)^{-1} is a
// POVM with duality gap mu d |U|.
// Candidates found here are numbered from first_step on.
inline BayesCandidate barrier_stage(const PosteriorOperators& w, const BayesOptions& opts, int first_step, int budget,
                                    BayesCandidate best, bool& converged) {
  const std::size_t nu = w.w.size();
  const std::size_t d = w.w.front().dim();
  const HermitianCoordinates coords(d);
  const std::size_t n = coords.size();

  double wmin = std::numeric_limits<double>::infinity();
  for (const auto& wu : w.w) wmin = std::min(wmin, min_eigenvalue(wu));
  double mu = 1.0 / static_cast<double>(nu);
  std::optional<BarrierPoint> pt = barrier_eval(w, HermitianMatrix::identity(d) * (wmin - 1.0), mu);
  converged = false;
  if (!pt) return best;

  const double mu_floor = 1e-3 * opts.tol / static_cast<double>(d * nu);
  const int base = first_step;
  int steps = 0;
  while (steps < budget) {
    HermitianMatrix grad = HermitianMatrix::identity(d);
    for (const auto& zi : pt->z_inv) grad -= zi * mu;
    const std::vector<double> g = coords.to_vec(grad);

    // Negated Hessian: X -> mu sum_u Z_u^{-1} X Z_u^{-1}.
    std::vector<double> hess(n * n);
    std::vector<double> e(n, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
      e[l] = 1.0;
      const HermitianMatrix el = coords.from_vec(e);
      e[l] = 0.0;
      HermitianMatrix col = HermitianMatrix::zero(d);
      for (const auto& zi : pt->z_inv) col += sandwich(zi, el);
      const std::vector<double> c = coords.to_vec(col);
      for (std::size_t k = 0; k < n; ++k) hess[k * n + l] = mu * c[k];
    }
    const std::vector<double> step = cholesky_solve(std::move(hess), g);
    double decrement = 0.0;
    for (std::size_t k = 0; k < n; ++k) decrement += g[k] * step[k];

    const HermitianMatrix dir = coords.from_vec(step);
    bool centered = !(decrement > 2.0 * kCentered);
    if (!centered) {
      double t = 1.0;
      std::optional<BarrierPoint> next;
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        next = barrier_eval(w, pt->lambda + dir * t, mu);
        if (next && next->value >= pt->value + kArmijo * t * decrement) break;
        next.reset();
      }
      ++steps;
      if (next) {
        pt = std::move(next);
      } else {
        centered = true;  // no ascent left at this precision
      }
    }
    if (centered) {
      std::vector<HermitianMatrix> m = barrier_povm(w, *pt, dir);
      DualCertificate cert = dual_certificate(w, m);
      const double primal = bayes_objective(w, m);
      const double barrier_lower = pt->lambda.trace();
      const bool use_cert = cert.lower_bound >= barrier_lower;
      BayesCandidate cand{std::move(m), use_cert ? std::move(cert.lambda) : pt->lambda, primal,
                          std::max(cert.lower_bound, barrier_lower), base + steps};
      if (cand.gap() < best.gap()) best = std::move(cand);
      if (best.gap() <= opts.tol) {
        converged = true;
        return best;
      }
      if (mu <= mu_floor) return best;
      mu *= kBarrierShrink;
      pt = barrier_eval(w, pt->lambda, mu);
      if (!pt) return best;
    }
  }
  return best;
}

}  // namespace detail

inline BayesSolution solve_bayes(const DecisionProblem& p, const Prior& pi, const BayesOptions& opts = {}) {
  const PosteriorOperators w = assemble_w(p, pi);
  const std::size_t d = p.dim();

  auto package = [&](const detail::BayesCandidate& c) {
    Povm povm(p.decisions(), c.m);
    // Report the risk through the Born rule so it matches risk_vector exactly.
    const double primal = average_risk(risk_vector(p, povm), pi);
    return BayesSolution{std::move(povm), primal, c.lower, primal - c.lower, c.iterations, c.lambda};
  };

  if (p.num_decisions() == 1) {
    std::vector<HermitianMatrix> m{HermitianMatrix::identity(d)};
    DualCertificate cert = dual_certificate(w, m);
    return package({m, cert.lambda, bayes_objective(w, m), cert.lower_bound, 0});
  }

  bool converged = false;
  int sweeps = 0;
  const int first_budget = opts.barrier_fallback ? std::min(opts.max_iter, opts.fixed_point_sweeps) : opts.max_iter;
  detail::BayesCandidate best = detail::fixed_point_stage(w, opts, first_budget, converged, sweeps);
  if (converged) return package(best);
  const int remaining = opts.max_iter - sweeps;
  if (opts.barrier_fallback && remaining > 0) {
    best = detail::barrier_stage(w, opts, sweeps, remaining, std::move(best), converged);
    if (converged) return package(best);
  }
  throw MaxIterationsExceeded(package(best));
}

}  // namespace qmm
