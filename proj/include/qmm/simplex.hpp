#pragma once

// Dense two-phase tableau simplex with Bland's rule. Sized for the cutting
// plane master problem (tens of variables, hundreds of rows); no attempt at
// sparsity or numerical refactorization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qmm/error.hpp"
#include "qmm/model.hpp"

namespace qmm {

enum class RowSense { kLessEqual, kEqual };

// maximize c.x  subject to  a_i . x (<= | =) b_i,  x >= 0
struct LinearProgram {
  std::vector<double> c;
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  std::vector<RowSense> sense;
};

struct LpResult {
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> duals;  // one per row; >= 0 on <= rows
  int pivots = 0;
};

struct LpOptions {
  double eps = 1e-11;
  int max_pivots = 200000;
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_((rows + 1) * (cols + 1), 0.0) {}

  double& at(std::size_t i, std::size_t j) { return t_[i * (cols_ + 1) + j]; }
  double at(std::size_t i, std::size_t j) const { return t_[i * (cols_ + 1) + j]; }
  double& rhs(std::size_t i) { return at(i, cols_); }
  double& obj(std::size_t j) { return at(rows_, j); }

  void pivot(std::size_t r, std::size_t s) {
    const double piv = at(r, s);
    for (std::size_t j = 0; j <= cols_; ++j) at(r, j) /= piv;
    at(r, s) = 1.0;
    for (std::size_t i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      const double f = at(i, s);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) at(i, j) -= f * at(r, j);
      at(i, s) = 0.0;
    }
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> t_;
};

}  // namespace detail

inline LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts = {}) {
  const std::size_t m = lp.a.size();
  const std::size_t n = lp.c.size();
  if (lp.b.size() != m || lp.sense.size() != m) throw ValidationError("solve_lp: row data sizes differ");
  for (const auto& row : lp.a)
    if (row.size() != n) throw ValidationError("solve_lp: constraint row has wrong length");

  // Column layout: [ x (n) | slack/surplus (one per <= row) | artificial (as needed) ]
  std::vector<double> sign(m, 1.0);
  std::vector<std::size_t> slack_col(m, SIZE_MAX);
  std::size_t cols = n;
  for (std::size_t i = 0; i < m; ++i) {
    if (lp.b[i] < 0.0) sign[i] = -1.0;
    if (lp.sense[i] == RowSense::kLessEqual) slack_col[i] = cols++;
  }
  const std::size_t first_art = cols;
  std::vector<std::size_t> id_col(m);  // column that starts as e_i
  for (std::size_t i = 0; i < m; ++i) {
    const bool slack_is_identity = lp.sense[i] == RowSense::kLessEqual && sign[i] > 0.0;
    id_col[i] = slack_is_identity ? slack_col[i] : cols++;
  }

  detail::Tableau tab(m, cols);
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) tab.at(i, j) = sign[i] * lp.a[i][j];
    if (slack_col[i] != SIZE_MAX) tab.at(i, slack_col[i]) = sign[i];
    tab.at(i, id_col[i]) = 1.0;
    tab.rhs(i) = sign[i] * lp.b[i];
    basis[i] = id_col[i];
  }

  int pivots = 0;
  // Bland: lowest entering index with positive reduced cost; ratio ties go to
  // the lowest basic variable index.
  auto run = [&](std::size_t allowed_cols) {
    for (;;) {
      std::size_t enter = SIZE_MAX;
      for (std::size_t j = 0; j < allowed_cols; ++j)
        if (tab.obj(j) > opts.eps) {
          enter = j;
          break;
        }
      if (enter == SIZE_MAX) return;
      std::size_t leave = SIZE_MAX;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        const double aij = tab.at(i, enter);
        if (aij <= opts.eps) continue;
        const double ratio = tab.rhs(i) / aij;
        if (leave == SIZE_MAX || ratio < best - 1e-14) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-14 && basis[i] < basis[leave]) {
          leave = i;
        }
      }
      if (leave == SIZE_MAX) throw NumericalError("solve_lp: objective is unbounded");
      tab.pivot(leave, enter);
      basis[leave] = enter;
      if (++pivots > opts.max_pivots)
        throw NumericalError("solve_lp: pivot guard of " + std::to_string(opts.max_pivots) + " exceeded");
    }
  };

  auto load_objective = [&](const std::vector<double>& cost) {
    for (std::size_t j = 0; j <= cols; ++j) tab.obj(j) = j < cols ? cost[j] : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double cb = cost[basis[i]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j <= cols; ++j) tab.obj(j) -= cb * tab.at(i, j);
    }
  };

  if (first_art < cols) {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t j = first_art; j < cols; ++j) phase1[j] = -1.0;
    load_objective(phase1);
    run(cols);
    double infeas = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      if (basis[i] >= first_art) infeas += tab.rhs(i);
    if (infeas > 1e-9) throw NumericalError("solve_lp: problem is infeasible");
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < first_art) continue;
      for (std::size_t j = 0; j < first_art; ++j)
        if (std::abs(tab.at(i, j)) > opts.eps) {
          tab.pivot(i, j);
          basis[i] = j;
          break;
        }
    }
  }

  std::vector<double> cost(cols, 0.0);
  std::copy(lp.c.begin(), lp.c.end(), cost.begin());
  load_objective(cost);
  run(first_art);

  LpResult res;
  res.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) res.x[basis[i]] = tab.rhs(i);
  res.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) res.objective += lp.c[j] * res.x[j];
  res.duals.resize(m);
  for (std::size_t i = 0; i < m; ++i) res.duals[i] = -sign[i] * tab.obj(id_col[i]);
  res.pivots = pivots;
  return res;
}

struct MaximinResult {
  Prior prior;
  double value = 0.0;        // t
  std::vector<double> mu;    // weights over cuts
};

// max_{pi, t} t  s.t.  t <= pi . R_k for all k, pi on the simplex.
// The duals of the cut rows are the minimizing mixture over cuts.
inline MaximinResult solve_lp_maximin(std::span<const RiskVector> cuts, const LpOptions& opts = {}) {
  if (cuts.empty()) throw ValidationError("solve_lp_maximin: need at least one cut");
  const std::size_t nt = cuts.front().size();
  double rmin = std::numeric_limits<double>::infinity();
  for (const auto& c : cuts) {
    if (c.size() != nt) throw ValidationError("solve_lp_maximin: risk vectors differ in length");
    for (double v : c.values) rmin = std::min(rmin, v);
  }
  // Shift so every entry is >= 1; then t > 0 at the optimum, t stays basic,
  // and the cut duals sum to one.
  const double offset = 1.0 - rmin;

  LinearProgram lp;
  lp.c.assign(nt + 1, 0.0);
  lp.c[nt] = 1.0;
  for (const auto& cut : cuts) {
    std::vector<double> row(nt + 1);
    for (std::size_t t = 0; t < nt; ++t) row[t] = -(cut[t] + offset);
    row[nt] = 1.0;
    lp.a.push_back(std::move(row));
    lp.b.push_back(0.0);
    lp.sense.push_back(RowSense::kLessEqual);
  }
  std::vector<double> ones(nt + 1, 1.0);
  ones[nt] = 0.0;
  lp.a.push_back(std::move(ones));
  lp.b.push_back(1.0);
  lp.sense.push_back(RowSense::kEqual);

  const LpResult res = solve_lp(lp, opts);

  std::vector<double> pi(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(nt));
  for (double& v : pi) v = std::max(v, 0.0);
  std::vector<double> mu(res.duals.begin(), res.duals.begin() + static_cast<std::ptrdiff_t>(cuts.size()));
  double mu_sum = 0.0;
  for (double& v : mu) {
    v = std::max(v, 0.0);
    mu_sum += v;
  }
  if (!(mu_sum > 0.0)) throw NumericalError("solve_lp_maximin: degenerate dual weights");
  for (double& v : mu) v /= mu_sum;

  return {Prior::normalized(std::move(pi)), res.objective - offset, std::move(mu)};
}

}  // namespace qmm
