#pragma once

// Least favorable priors and near-minimax POVMs by Kelley's cutting-plane
// method on the prior simplex.
//
// The Bayes envelope psi(pi) = min_M pi . R_M is concave and each Bayes POVM
// M_r found at a prior pi_r contributes the supporting cut pi -> pi . R_{M_r}.
// The master LP over the cuts gives the next prior, and its duals give a
// mixture of the cut POVMs whose worst-case risk equals the LP value. So
// every round yields a two-sided bracket on the minimax value:
//
//     max_r (psi(pi_r) - bayes gap_r)  <=  V  <=  min_r sup_theta R_{mix_r}(theta)

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qmm/bayes.hpp"
#include "qmm/error.hpp"
#include "qmm/model.hpp"
#include "qmm/simplex.hpp"

namespace qmm {

struct Cut {
  RiskVector risk;
  std::size_t povm_index = 0;
};

struct LfpRound {
  double lower = 0.0;
  double upper = 0.0;
  double lp_value = 0.0;
  double mixture_residual = 0.0;  // max |R_mix - sum_k mu_k R_k|
};

struct LfpSolution {
  Prior prior;
  Povm minimax_povm;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double gap = 0.0;
  int cuts_used = 0;
  int rounds = 0;
  std::vector<LfpRound> history;
};

class MaxRoundsExceeded : public Error {
 public:
  explicit MaxRoundsExceeded(LfpSolution best)
      : Error("cutting-plane search stopped with gap " + short_number(best.gap) + " after " +
              std::to_string(best.rounds) + " rounds"),
        best_(std::move(best)) {}
  const LfpSolution& best() const noexcept { return best_; }

 private:
  LfpSolution best_;
};

struct LfpOptions {
  double tol = 1e-6;
  int max_rounds = 300;
  std::optional<double> bayes_tol;  // defaults to tol / 10
  int bayes_max_iter = 5000;
  // After the bracket closes to tol, keep cutting for up to polish_rounds
  // more rounds aiming at tol * polish_factor. The envelope is flat near its
  // maximum, so the value converges much faster than the prior does; this
  // buys prior accuracy without changing the stopping rule. 0 disables it.
  int polish_rounds = 40;
  double polish_factor = 1e-3;
};

// Output of one Bayes step inside the cutting-plane loop.
struct BayesStep {
  Povm povm;
  double primal = 0.0;
  double gap = 0.0;
};

// Called as f(pi, tol): a Bayes step at prior pi with requested gap tol.
template <class F>
concept BayesOracle = requires(F f, const Prior& pi, double tol) {
  { f(pi, tol) } -> std::convertible_to<BayesStep>;
};

namespace detail {

inline constexpr double kDuplicateCut = 1e-12;
inline constexpr double kPriorFloor = 1e-10;

inline Prior clean_prior(const Prior& pi) {
  std::vector<double> w(pi.weights().begin(), pi.weights().end());
  for (double& x : w)
    if (x < kPriorFloor) x = 0.0;
  double s = 0.0;
  for (double x : w) s += x;
  for (double& x : w) x /= s;
  return Prior(std::move(w));
}

inline double linf(const RiskVector& a, const RiskVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace detail

// The cutting-plane loop with a caller-supplied Bayes step.
template <BayesOracle Oracle>
LfpSolution find_lfp_with(const DecisionProblem& p, Oracle&& bayes, const LfpOptions& opts = {}) {
  std::vector<Povm> povms;
  std::vector<Cut> cuts;
  std::vector<RiskVector> cut_risks;

  auto add_cut = [&](const Povm& m) {
    RiskVector r = risk_vector(p, m);
    for (const auto& c : cut_risks)
      if (detail::linf(c, r) < detail::kDuplicateCut) return;
    povms.push_back(m);
    cuts.push_back({r, povms.size() - 1});
    cut_risks.push_back(std::move(r));
  };

  const double bayes_tol = opts.bayes_tol.value_or(opts.tol / 10.0);
  const Prior start = Prior::uniform(p.num_states());
  BayesStep first = bayes(start, bayes_tol);
  double lower = first.primal - first.gap;
  Prior best_prior = start;
  double upper = worst_case_risk(risk_vector(p, first.povm));
  Povm best_povm = first.povm;
  add_cut(first.povm);

  std::vector<LfpRound> history;
  int rounds = 0;
  auto package = [&]() {
    LfpSolution s{detail::clean_prior(best_prior), best_povm, 0.0, lower, upper, upper - lower,
                  static_cast<int>(cuts.size()), rounds, history};
    s.value = std::clamp(0.5 * (lower + upper), std::min(lower, upper), upper);
    return s;
  };

  // One cutting-plane round; returns false when no new cut was produced.
  auto round = [&](double inner_tol) {
    const MaximinResult lp = solve_lp_maximin(cut_risks);

    const Povm mixture = mix_povms(povms, lp.mu);
    const RiskVector mix_risk = risk_vector(p, mixture);
    double residual = 0.0;
    for (std::size_t t = 0; t < p.num_states(); ++t) {
      double expect = 0.0;
      for (std::size_t k = 0; k < cuts.size(); ++k) expect += lp.mu[k] * cut_risks[k][t];
      residual = std::max(residual, std::abs(expect - mix_risk[t]));
    }
    const double mix_worst = worst_case_risk(mix_risk);
    if (mix_worst < upper) {
      upper = mix_worst;
      best_povm = mixture;
    }

    BayesStep step = bayes(lp.prior, inner_tol);
    const double candidate = step.primal - step.gap;
    if (candidate > lower) {
      lower = candidate;
      best_prior = lp.prior;
    }
    const std::size_t before = cuts.size();
    add_cut(step.povm);
    ++rounds;
    history.push_back({lower, upper, lp.value, residual});
    return cuts.size() > before;
  };

  while (upper - lower > opts.tol) {
    if (rounds == opts.max_rounds) throw MaxRoundsExceeded(package());
    round(bayes_tol);
  }

  const double polish_tol = opts.tol * opts.polish_factor;
  const double polish_bayes_tol = std::min(bayes_tol, polish_tol / 10.0);
  for (int k = 0; k < opts.polish_rounds && upper - lower > polish_tol; ++k)
    if (!round(polish_bayes_tol)) break;
  return package();
}

inline BayesOptions inner_bayes_options(const LfpOptions& opts) {
  BayesOptions b;
  b.tol = opts.bayes_tol.value_or(opts.tol / 10.0);
  b.max_iter = opts.bayes_max_iter;
  return b;
}

// Bayes step over all POVMs. An exhausted iteration budget still yields a
// usable cut and an honest lower bound, so it is absorbed here.
inline BayesStep unrestricted_bayes_step(const DecisionProblem& p, const Prior& pi, const BayesOptions& b) {
  try {
    BayesSolution s = solve_bayes(p, pi, b);
    return {std::move(s.povm), s.primal, s.gap};
  } catch (const MaxIterationsExceeded& e) {
    return {e.best().povm, e.best().primal, e.best().gap};
  }
}

inline LfpSolution find_lfp(const DecisionProblem& p, const LfpOptions& opts = {}) {
  const BayesOptions base = inner_bayes_options(opts);
  return find_lfp_with(
      p,
      [&](const Prior& pi, double tol) {
        BayesOptions b = base;
        b.tol = tol;
        return unrestricted_bayes_step(p, pi, b);
      },
      opts);
}

struct MinimaxCertificate {
  double sup_risk = 0.0;
  double avg_risk = 0.0;
  double diff = 0.0;
};

// sup_theta R_M(theta) - r_M(pi). Zero means M is minimax and pi least
// favorable at the same time; small values bound how far either is off.
inline MinimaxCertificate certify_minimax(const DecisionProblem& p, const Povm& m, const Prior& pi) {
  if (pi.size() != p.num_states()) throw ValidationError("prior length differs from |Theta|", "prior");
  const RiskVector r = risk_vector(p, m);
  MinimaxCertificate c;
  c.sup_risk = worst_case_risk(r);
  c.avg_risk = average_risk(r, pi);
  c.diff = c.sup_risk - c.avg_risk;
  return c;
}

struct EqualityWitness {
  double lhs_upper = 0.0;  // inf_M sup_theta, as achieved by a POVM
  double rhs_lower = 0.0;  // sup_pi inf_M, as certified by a prior
  double gap = 0.0;
  bool converged = false;
  LfpSolution solution;
};

inline EqualityWitness verify_minimax_equality(const DecisionProblem& p, const LfpOptions& opts = {}) {
  auto wrap = [](LfpSolution s, bool ok) {
    EqualityWitness w{s.upper, s.lower, s.upper - s.lower, ok, std::move(s)};
    return w;
  };
  try {
    return wrap(find_lfp(p, opts), true);
  } catch (const MaxRoundsExceeded& e) {
    return wrap(e.best(), false);
  }
}

}  // namespace qmm
