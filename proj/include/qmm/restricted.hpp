#pragma once

// Decision making over a restricted, convex class of measurements given as
// the convex hull of finitely many generator POVMs. Risk is linear in the
// POVM, so the Bayes problem over a hull is a linear function on the weight
// simplex and is minimized at a generator.

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qmm/bayes.hpp"
#include "qmm/error.hpp"
#include "qmm/lfp.hpp"
#include "qmm/model.hpp"

namespace qmm {

struct AllPovms {
  friend bool operator==(const AllPovms&, const AllPovms&) = default;
};

class ConvexHull {
 public:
  explicit ConvexHull(std::vector<Povm> generators) : generators_(std::move(generators)) {
    if (generators_.empty()) throw ValidationError("convex hull needs at least one generator", "class");
    for (std::size_t k = 1; k < generators_.size(); ++k) {
      if (generators_[k].outcome_labels() != generators_[0].outcome_labels() ||
          generators_[k].dim() != generators_[0].dim()) {
        throw ValidationError("generator " + std::to_string(k) + " differs from generator 0 in outcomes or dimension",
                              "class");
      }
    }
  }
  const std::vector<Povm>& generators() const noexcept { return generators_; }
  friend bool operator==(const ConvexHull&, const ConvexHull&) = default;

 private:
  std::vector<Povm> generators_;
};

using PovmClass = std::variant<AllPovms, ConvexHull>;

inline void check_class(const DecisionProblem& p, const PovmClass& cls) {
  if (const auto* hull = std::get_if<ConvexHull>(&cls)) check_compatible(p, hull->generators().front());
}

struct RestrictedBayesSolution {
  std::vector<double> weights;  // over generators; {1} for the unrestricted class
  Povm povm;
  double primal = 0.0;
  double dual_bound = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

inline RestrictedBayesSolution solve_bayes_restricted(const DecisionProblem& p, const Prior& pi, const PovmClass& cls,
                                                      const BayesOptions& opts = {}) {
  check_class(p, cls);
  if (std::holds_alternative<AllPovms>(cls)) {
    BayesSolution s = solve_bayes(p, pi, opts);
    return {{1.0}, std::move(s.povm), s.primal, s.dual_bound, s.gap, s.iterations};
  }
  const auto& gens = std::get<ConvexHull>(cls).generators();
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t k = 0; k < gens.size(); ++k) {
    const double v = average_risk(risk_vector(p, gens[k]), pi);
    if (k == 0 || v < best_value) {  // strict: lowest index wins ties
      best = k;
      best_value = v;
    }
  }
  std::vector<double> weights(gens.size(), 0.0);
  weights[best] = 1.0;
  return {std::move(weights), gens[best], best_value, best_value, 0.0, 0};
}

inline LfpSolution find_lfp_restricted(const DecisionProblem& p, const PovmClass& cls, const LfpOptions& opts = {}) {
  check_class(p, cls);
  if (std::holds_alternative<AllPovms>(cls)) return find_lfp(p, opts);
  return find_lfp_with(
      p,
      [&](const Prior& pi, double) {
        RestrictedBayesSolution s = solve_bayes_restricted(p, pi, cls);
        return BayesStep{std::move(s.povm), s.primal, s.gap};
      },
      opts);
}

}  // namespace qmm
