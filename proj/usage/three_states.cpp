// Builds the three-state discrimination problem in code, finds its least
// favorable prior and checks the resulting POVM against that prior.

#include <cstdio>

#include "qmm/lfp.hpp"

int main() {
  using namespace qmm;

  ComplexMatrix r1(3), r2(3), r3(3);
  r1(0, 0) = 1.0;
  r2(0, 0) = r2(0, 1) = r2(1, 0) = r2(1, 1) = 0.5;
  r3(2, 2) = 1.0;
  StateFamily family({"1", "2", "3"}, {DensityMatrix::make(r1), DensityMatrix::make(r2), DensityMatrix::make(r3)});
  const DecisionProblem problem(family, {"1", "2", "3"}, zero_one_loss(3));

  const LfpSolution lfp = find_lfp(problem);
  std::printf("least favorable prior: %.6f %.6f %.6f\n", lfp.prior[0], lfp.prior[1], lfp.prior[2]);
  std::printf("minimax risk in [%.9f, %.9f]\n", lfp.lower, lfp.upper);

  const MinimaxCertificate cert = certify_minimax(problem, lfp.minimax_povm, lfp.prior);
  std::printf("sup risk - average risk = %.3g\n", cert.diff);

  const BayesSolution bayes = solve_bayes(problem, lfp.prior);
  std::printf("Bayes risk at that prior: %.9f (gap %.2g)\n", bayes.primal, bayes.gap);
  return 0;
}
