#pragma once

// Reference values for the Bayes risk that do not go through the fixed-point
// solver: the closed form for two states under 0-1 loss, and an exhaustive
// grid over two-outcome qubit measurements.

#include <algorithm>
#include <cmath>
#include <limits>

#include "qmm/error.hpp"
#include "qmm/linalg.hpp"
#include "qmm/model.hpp"

namespace qmm {

// Minimum error probability for telling rho1 (prior p) from rho2 (prior 1-p):
// (1 - || p rho1 - (1-p) rho2 ||_1) / 2.
inline double helstrom_bayes(const DensityMatrix& rho1, const DensityMatrix& rho2, double p) {
  if (rho1.dim() != rho2.dim()) throw ValidationError("helstrom_bayes: dimensions differ");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("helstrom_bayes: p outside [0, 1]");
  return 0.5 * (1.0 - trace_norm(rho1.op() * p - rho2.op() * (1.0 - p)));
}

// Minimum average risk over M_1 = (c I + x X + y Y + z Z) / 2, M_2 = I - M_1,
// with c gridded on [0, 2] and x, y, z on [-1, 1] at `resolution` steps,
// keeping only points with 0 <= M_1 <= I. Every grid point is a valid POVM,
// so the result is an upper bound on the true Bayes risk.
inline double brute_force_bayes(const DecisionProblem& p, const Prior& pi, int resolution) {
  if (p.dim() != 2 || p.num_decisions() != 2)
    throw ValidationError("brute_force_bayes: needs a qubit problem with two decisions");
  if (resolution < 1) throw ValidationError("brute_force_bayes: resolution must be >= 1");
  if (pi.size() != p.num_states()) throw ValidationError("brute_force_bayes: prior length differs");

  // Average risk = Tr W_2 + Tr (W_1 - W_2) M_1; expand W_1 - W_2 in Paulis.
  ComplexMatrix w1(2), w2(2);
  for (std::size_t t = 0; t < p.num_states(); ++t) {
    const HermitianMatrix& rho = p.family()[t].op();
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        w1(i, j) += pi[t] * p.loss()(t, 0) * rho(i, j);
        w2(i, j) += pi[t] * p.loss()(t, 1) * rho(i, j);
      }
  }
  const ComplexMatrix dm = w1 - w2;
  const double base = w2.trace().real();
  // Tr(D M_1) = (a0 c + ax x + ay y + az z) / 2 with D = (a0 I + a . sigma) / 2.
  const double a0 = (dm(0, 0) + dm(1, 1)).real();
  const double ax = 2.0 * dm(0, 1).real();
  const double ay = -2.0 * dm(0, 1).imag();
  const double az = (dm(0, 0) - dm(1, 1)).real();

  const double step = 2.0 / resolution;
  double best = std::numeric_limits<double>::infinity();
  for (int ic = 0; ic <= resolution; ++ic) {
    const double c = ic * step;
    const double rmax = std::min(c, 2.0 - c);  // eigenvalues (c +- r)/2 in [0, 1]
    const double rmax2 = rmax * rmax + 1e-12;
    for (int ix = 0; ix <= resolution; ++ix) {
      const double x = -1.0 + ix * step;
      if (x * x > rmax2) continue;
      for (int iy = 0; iy <= resolution; ++iy) {
        const double y = -1.0 + iy * step;
        const double rxy2 = x * x + y * y;
        if (rxy2 > rmax2) continue;
        const double zmax = std::sqrt(rmax2 - rxy2);
        const int lo = std::max(0, static_cast<int>(std::floor((1.0 - zmax) / step)));
        const int hi = std::min(resolution, static_cast<int>(std::ceil((1.0 + zmax) / step)));
        for (int iz = lo; iz <= hi; ++iz) {
          const double z = -1.0 + iz * step;
          if (rxy2 + z * z > rmax2) continue;
          const double v = base + 0.5 * (a0 * c + ax * x + ay * y + az * z);
          best = std::min(best, v);
        }
      }
    }
  }
  return best;
}

}  // namespace qmm
