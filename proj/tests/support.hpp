#pragma once

// Fixtures and random generators shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qmm/linalg.hpp"
#include "qmm/model.hpp"

namespace qmm::testing {

inline const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
// (1 - 1/sqrt 2) / 2
inline const double kThreeStateValue = 0.5 * (1.0 - kInvSqrt2);

inline ComplexMatrix three_state_rho(int k) {
  ComplexMatrix m(3);
  if (k == 1) m(0, 0) = 1.0;
  if (k == 2) m(0, 0) = m(0, 1) = m(1, 0) = m(1, 1) = 0.5;
  if (k == 3) m(2, 2) = 1.0;
  return m;
}

// Three states on C^3: |0>, |+> in the first two coordinates, and |2>;
// 0-1 loss on three decisions.
inline DecisionProblem three_state_problem() {
  StateFamily f({"1", "2", "3"}, {DensityMatrix::make(three_state_rho(1)), DensityMatrix::make(three_state_rho(2)),
                                  DensityMatrix::make(three_state_rho(3))});
  return DecisionProblem(f, {"1", "2", "3"}, zero_one_loss(3));
}

// The Bayes POVM of the three-state problem at prior (1/2, 1/2, 0).
inline Povm three_state_povm() {
  const double a = kInvSqrt2;
  ComplexMatrix m1(3), m2(3), m3(3);
  m1(0, 0) = 0.5 * (1 + a);
  m1(0, 1) = m1(1, 0) = -0.5 * a;
  m1(1, 1) = 0.5 * (1 - a);
  m2(0, 0) = 0.5 * (1 - a);
  m2(0, 1) = m2(1, 0) = 0.5 * a;
  m2(1, 1) = 0.5 * (1 + a);
  m3(2, 2) = 1.0;
  return Povm({"1", "2", "3"}, {hermitize(m1), hermitize(m2), hermitize(m3)});
}

inline ComplexMatrix random_complex(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix g(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) g(i, j) = Complex(n(rng), n(rng));
  return g;
}

inline HermitianMatrix random_hermitian(std::size_t d, std::mt19937_64& rng) {
  return hermitize(random_complex(d, rng));
}

// Random PSD matrix of the given rank (full rank by default).
inline HermitianMatrix random_psd(std::size_t d, std::mt19937_64& rng, std::size_t rank = 0) {
  if (rank == 0) rank = d;
  ComplexMatrix g = random_complex(d, rng);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = rank; j < d; ++j) g(i, j) = 0.0;
  return hermitize(g * g.adjoint());
}

inline DensityMatrix random_state(std::size_t d, std::mt19937_64& rng, std::size_t rank = 0) {
  HermitianMatrix p = random_psd(d, rng, rank);
  p *= 1.0 / p.trace();
  return DensityMatrix::make(p);
}

// M_u = S^{-1/2} A_u S^{-1/2} with random PSD A_u.
inline Povm random_povm(std::size_t d, std::vector<std::string> labels, std::mt19937_64& rng) {
  std::vector<HermitianMatrix> a;
  HermitianMatrix s = HermitianMatrix::zero(d);
  for (std::size_t u = 0; u < labels.size(); ++u) {
    a.push_back(random_psd(d, rng));
    s += a.back();
  }
  const HermitianMatrix n = support_inv_sqrt(s);
  for (auto& x : a) x = sandwich(n, x);
  return Povm(std::move(labels), std::move(a));
}

inline Prior random_prior(std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (double& x : w) s += (x = e(rng));
  for (double& x : w) x /= s;
  return Prior::normalized(std::move(w));
}

// Two random qubit states, 0-1 loss.
inline DecisionProblem random_qubit_pair(std::mt19937_64& rng) {
  StateFamily f({"1", "2"}, {random_state(2, rng), random_state(2, rng)});
  return DecisionProblem(f, {"1", "2"}, zero_one_loss(2));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace qmm::testing
