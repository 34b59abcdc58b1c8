#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qmm/bayes.hpp"
#include "qmm/io.hpp"
#include "qmm/oracles.hpp"
#include "support.hpp"

using namespace qmm;
using namespace qmm::testing;

namespace {

DecisionProblem orthogonal_pair() {
  StateFamily f({"a", "b"}, {DensityMatrix::make(HermitianMatrix::diagonal({1.0, 0.0})),
                             DensityMatrix::make(HermitianMatrix::diagonal({0.0, 1.0}))});
  return DecisionProblem(f, {"a", "b"}, zero_one_loss(2));
}

// Same family twice under different labels is not identifiable, so
// "identical states" is modeled by a one-state family with two decisions.
DecisionProblem identical_pair_as_loss(double p) {
  // States rho, rho with prior (p, 1-p) and 0-1 loss collapse to one state
  // with loss row (1-p, p): deciding "a" costs 1-p, "b" costs p.
  std::mt19937_64 rng(77);
  StateFamily f({"rho"}, {random_state(2, rng)});
  return DecisionProblem(f, {"a", "b"}, LossMatrix(1, 2, {1.0 - p, p}));
}

void expect_solution_invariants(const DecisionProblem& p, const Prior& pi, const BayesSolution& s) {
  EXPECT_GE(s.gap, -1e-10);
  EXPECT_LE(s.dual_bound, s.primal + 1e-10);
  EXPECT_NEAR(s.primal, average_risk(risk_vector(p, s.povm), pi), 1e-10);
  const PosteriorOperators w = assemble_w(p, pi);
  for (const auto& wu : w.w) EXPECT_LE(max_eigenvalue(s.certificate - wu), 1e-9);
  EXPECT_NEAR(s.certificate.trace(), s.dual_bound, 1e-12);
}

}  // namespace

TEST(AssembleW, ZeroOneUniform) {
  const DecisionProblem p = random_problem(3, 4, 4, 1);
  const PosteriorOperators w = assemble_w(p, Prior::uniform(4));
  for (std::size_t u = 0; u < 4; ++u) {
    HermitianMatrix expect = HermitianMatrix::zero(3);
    for (std::size_t t = 0; t < 4; ++t)
      if (t != u) expect += p.family()[t].op() * 0.25;
    EXPECT_LE(max_abs_diff(w.w[u].matrix(), expect.matrix()), 1e-15);
  }
}

TEST(AssembleW, ThreeStateAtHalfHalfZero) {
  const DecisionProblem p = three_state_problem();
  const PosteriorOperators w = assemble_w(p, Prior({0.5, 0.5, 0.0}));
  const auto& r = p.family();
  EXPECT_LE(max_abs_diff(w.w[0].matrix(), (r[1].op() * 0.5).matrix()), 1e-15);
  EXPECT_LE(max_abs_diff(w.w[1].matrix(), (r[0].op() * 0.5).matrix()), 1e-15);
  EXPECT_LE(max_abs_diff(w.w[2].matrix(), ((r[0].op() + r[1].op()) * 0.5).matrix()), 1e-15);
}

TEST(AssembleW, PointMass) {
  const DecisionProblem p = random_problem(2, 3, 2, 2);
  const PosteriorOperators w = assemble_w(p, Prior::point_mass(3, 1));
  for (std::size_t u = 0; u < 2; ++u)
    EXPECT_LE(max_abs_diff(w.w[u].matrix(), (p.family()[1].op() * p.loss()(1, u)).matrix()), 1e-15);
}

TEST(AssembleW, ObjectiveEqualsAverageRisk) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const DecisionProblem p = random_problem(2 + k % 3, 2 + k % 3, 2 + k % 4, 40 + k);
    const Prior pi = random_prior(p.num_states(), rng);
    const Povm m = random_povm(p.dim(), p.decisions(), rng);
    EXPECT_NEAR(bayes_objective(assemble_w(p, pi), m.elements()), average_risk(risk_vector(p, m), pi), 1e-12);
  }
}

TEST(AssembleW, ShapeMismatch) {
  EXPECT_THROW(assemble_w(three_state_problem(), Prior::uniform(2)), ValidationError);
}

TEST(SolveBayes, OrthogonalStatesAnyPrior) {
  const DecisionProblem p = orthogonal_pair();
  BayesOptions o;
  o.tol = 1e-10;
  for (double a : {0.5, 0.1, 0.9, 0.0}) {
    const Prior pi({a, 1 - a});
    const BayesSolution s = solve_bayes(p, pi, o);
    EXPECT_NEAR(s.primal, 0.0, 1e-10);
    EXPECT_LE(s.gap, 1e-10);
    expect_solution_invariants(p, pi, s);
  }
}

TEST(SolveBayes, IndistinguishableStatesGiveMinPrior) {
  for (double a : {0.2, 0.5, 0.7}) {
    const DecisionProblem p = identical_pair_as_loss(a);
    const BayesSolution s = solve_bayes(p, Prior({1.0}));
    EXPECT_NEAR(s.primal, std::min(a, 1 - a), 1e-7);
  }
}

TEST(SolveBayes, ThreeStateAtLeastFavorablePrior) {
  const DecisionProblem p = three_state_problem();
  const Prior pi({0.5, 0.5, 0.0});
  const BayesSolution s = solve_bayes(p, pi);
  EXPECT_NEAR(s.primal, kThreeStateValue, 1e-7);
  EXPECT_LE(s.dual_bound, kThreeStateValue + 1e-12);
  EXPECT_LE(s.gap, 1e-7);
  expect_solution_invariants(p, pi, s);
}

TEST(SolveBayes, SingleDecisionReturnsIdentity) {
  std::mt19937_64 rng(8);
  StateFamily f({"a", "b"}, {random_state(2, rng), random_state(2, rng)});
  const DecisionProblem p(f, {"only"}, LossMatrix(2, 1, {0.3, 0.8}));
  const Prior pi({0.25, 0.75});
  const BayesSolution s = solve_bayes(p, pi);
  EXPECT_EQ(s.povm, Povm::trivial(2, "only"));
  EXPECT_NEAR(s.primal, 0.25 * 0.3 + 0.75 * 0.8, 1e-15);
  EXPECT_NEAR(s.dual_bound, s.primal, 1e-15);
}

TEST(SolveBayes, BudgetExhaustionCarriesBestSolution) {
  const DecisionProblem p = random_problem(3, 3, 3, 12);
  BayesOptions o;
  o.tol = 1e-15;
  o.max_iter = 5;
  try {
    solve_bayes(p, Prior::uniform(3), o);
    FAIL() << "expected MaxIterationsExceeded";
  } catch (const MaxIterationsExceeded& e) {
    EXPECT_GT(e.best().gap, 0.0);
    expect_solution_invariants(p, Prior::uniform(3), e.best());
  }
}

// Archived instance on which the plain fixed-point iteration stalls.
TEST(SolveBayes, FixedPointStallIsRecoveredByBarrierStage) {
  const io::ProblemFile pf = io::parse_problem(io::read_file(QMM_TEST_FIXTURES "/fixed_point_stall.json"));
  ASSERT_TRUE(pf.prior.has_value());
  BayesOptions plain;
  plain.barrier_fallback = false;
  EXPECT_THROW(solve_bayes(pf.problem, *pf.prior, plain), MaxIterationsExceeded);
  const BayesSolution s = solve_bayes(pf.problem, *pf.prior);
  EXPECT_LE(s.gap, 1e-7);
  expect_solution_invariants(pf.problem, *pf.prior, s);
}

TEST(SolveBayes, FixedPointPrimalIsMonotone) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 30; ++k) {
    const DecisionProblem p = random_problem(2 + k % 3, 2 + k % 4, 2 + k % 3, 70 + k);
    double prev = INFINITY;
    int last = -1;
    BayesOptions o;
    o.on_sweep = [&](int sweep, double primal, double) {
      // The stagnation perturbation may raise the primal; it restarts the count.
      if (sweep == last + 1) {
        EXPECT_LE(primal, prev + 1e-10) << "sweep " << sweep;
      }
      prev = primal;
      last = sweep;
    };
    o.barrier_fallback = false;
    o.max_iter = 300;
    try {
      solve_bayes(p, random_prior(p.num_states(), rng), o);
    } catch (const MaxIterationsExceeded&) {
    }
  }
}

TEST(DualCertificate, OrthogonalStatesAtOptimum) {
  const DecisionProblem p = orthogonal_pair();
  const PosteriorOperators w = assemble_w(p, Prior({0.4, 0.6}));
  const Povm m({"a", "b"}, {HermitianMatrix::diagonal({1.0, 0.0}), HermitianMatrix::diagonal({0.0, 1.0})});
  const DualCertificate c = dual_certificate(w, m);
  EXPECT_LE(c.shift, 1e-10);
  EXPECT_NEAR(c.lower_bound, bayes_objective(w, m.elements()), 1e-15);
}

TEST(DualCertificate, UniformPovmOnThreeStateIsBelowValue) {
  const DecisionProblem p = three_state_problem();
  const PosteriorOperators w = assemble_w(p, Prior({0.5, 0.5, 0.0}));
  EXPECT_LE(dual_certificate(w, Povm::uniform(3, {"1", "2", "3"})).lower_bound, kThreeStateValue);
}

TEST(DualCertificate, SingleDecisionIsExact) {
  std::mt19937_64 rng(10);
  StateFamily f({"a", "b"}, {random_state(3, rng), random_state(3, rng)});
  const DecisionProblem p(f, {"u"}, LossMatrix(2, 1, {0.5, 2.0}));
  const PosteriorOperators w = assemble_w(p, Prior({0.3, 0.7}));
  const DualCertificate c = dual_certificate(w, Povm::trivial(3, "u"));
  EXPECT_NEAR(c.lower_bound, w.w[0].trace(), 1e-15);
  EXPECT_NEAR(c.lower_bound, bayes_objective(w, Povm::trivial(3, "u").elements()), 1e-15);
}

TEST(Properties, WeakDuality) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    const DecisionProblem p = random_problem(2 + k % 4, 2 + k % 3, 2 + k % 4, 3000 + k);
    const Prior pi = random_prior(p.num_states(), rng);
    const PosteriorOperators w = assemble_w(p, pi);
    const Povm m = random_povm(p.dim(), p.decisions(), rng);
    const Povm probe = random_povm(p.dim(), p.decisions(), rng);
    const DualCertificate c = dual_certificate(w, probe);
    for (const auto& wu : w.w) EXPECT_LE(max_eigenvalue(c.lambda - wu), 1e-9);
    EXPECT_LE(c.lower_bound, average_risk(risk_vector(p, m), pi) + 1e-10);
  }
}

TEST(Helstrom, Examples) {
  const DensityMatrix a = DensityMatrix::make(HermitianMatrix::diagonal({1.0, 0.0}));
  const DensityMatrix b = DensityMatrix::make(HermitianMatrix::diagonal({0.0, 1.0}));
  EXPECT_NEAR(helstrom_bayes(a, b, 0.5), 0.0, 1e-15);
  std::mt19937_64 rng(12);
  const DensityMatrix r = random_state(3, rng);
  for (double p : {0.1, 0.5, 0.8}) EXPECT_NEAR(helstrom_bayes(r, r, p), std::min(p, 1 - p), 1e-14);
  const DecisionProblem t = three_state_problem();
  EXPECT_NEAR(helstrom_bayes(t.family()[0], t.family()[1], 0.5), kThreeStateValue, 1e-14);
}

TEST(Properties, HelstromAgreement) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const DecisionProblem p = random_qubit_pair(rng);
    const double a = unif(rng);
    const Prior pi({a, 1 - a});
    const BayesSolution s = solve_bayes(p, pi);
    EXPECT_NEAR(s.primal, helstrom_bayes(p.family()[0], p.family()[1], a), 1e-6);
    EXPECT_LE(s.gap, 1e-7);
  }
}

TEST(Properties, HelstromAgreementHigherDimension) {
  std::mt19937_64 rng(14);
  for (int k = 0; k < 30; ++k) {
    const std::size_t d = 3 + k % 3;
    StateFamily f({"1", "2"}, {random_state(d, rng, 1 + k % d), random_state(d, rng)});
    const DecisionProblem p(f, {"1", "2"}, zero_one_loss(2));
    const Prior pi = random_prior(2, rng);
    EXPECT_NEAR(solve_bayes(p, pi).primal, helstrom_bayes(f[0], f[1], pi[0]), 1e-6);
  }
}

TEST(Properties, BayesRiskIsConcaveInPrior) {
  std::mt19937_64 rng(15);
  for (int k = 0; k < 100; ++k) {
    const DecisionProblem p = random_problem(2 + k % 3, 2 + k % 3, 2 + k % 3, 4000 + k);
    const Prior a = random_prior(p.num_states(), rng), b = random_prior(p.num_states(), rng);
    std::vector<double> mid(p.num_states());
    for (std::size_t t = 0; t < mid.size(); ++t) mid[t] = 0.5 * (a[t] + b[t]);
    // Certified to 1e-10, well inside the 1e-8 slack.
    BayesOptions o;
    o.tol = 1e-10;
    const double pa = solve_bayes(p, a, o).primal, pb = solve_bayes(p, b, o).primal;
    const double pm = solve_bayes(p, Prior::normalized(mid), o).primal;
    EXPECT_GE(pm, 0.5 * (pa + pb) - 1e-8);
  }
}

TEST(BruteForce, OrthogonalStatesNearZero) {
  EXPECT_NEAR(brute_force_bayes(orthogonal_pair(), Prior::uniform(2), 50), 0.0, 1e-12);
}

TEST(BruteForce, IndistinguishableStatesGiveMinPrior) {
  for (double a : {0.2, 0.5, 0.7}) EXPECT_NEAR(brute_force_bayes(identical_pair_as_loss(a), Prior({1.0}), 20), std::min(a, 1 - a), 1e-15);
}

TEST(BruteForce, BracketsHelstrom) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 10; ++k) {
    const DecisionProblem p = random_qubit_pair(rng);
    const Prior pi = random_prior(2, rng);
    const double h = helstrom_bayes(p.family()[0], p.family()[1], pi[0]);
    const double bf = brute_force_bayes(p, pi, 100);
    EXPECT_GE(bf, h - 1e-12);
    EXPECT_LE(bf, h + 2e-2);
  }
}

TEST(BruteForce, UnsupportedShape) {
  EXPECT_THROW(brute_force_bayes(three_state_problem(), Prior::uniform(3), 10), ValidationError);
}
