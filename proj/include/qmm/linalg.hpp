#pragma once

// Dense complex Hermitian linear algebra. Sizes in this library are small
// (d <= 64), so everything is a row-major std::vector of std::complex.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qmm/error.hpp"

namespace qmm {

using Complex = std::complex<double>;

class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t dim) : ComplexMatrix(dim, dim) {}
  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols) {}

  static ComplexMatrix identity(std::size_t dim) {
    ComplexMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  // Rows must all have the same length.
  static ComplexMatrix from_rows(const std::vector<std::vector<Complex>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    ComplexMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != c) {
        throw ValidationError("ragged matrix: row " + std::to_string(i) + " has " +
                              std::to_string(rows[i].size()) + " entries, expected " +
                              std::to_string(c));
      }
      std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + i * c);
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }
  std::size_t dim() const noexcept { return rows_; }

  Complex& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const Complex> entries() const noexcept { return data_; }

  ComplexMatrix adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
  }

  Complex trace() const {
    Complex t = 0.0;
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& z : data_) m = std::max(m, std::abs(z));
    return m;
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  ComplexMatrix& operator*=(Complex s) {
    for (auto& z : data_) z *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
  friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_) throw ValidationError("matrix product: inner dimensions differ");
    ComplexMatrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const Complex aik = a(i, k);
        if (aik == Complex{}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
      }
    return out;
  }

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  void check_same_shape(const ComplexMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw ValidationError("matrix shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

// Max-abs entry of a - b.
inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).max_abs();
}

// A complex matrix equal to its own adjoint up to rounding. Every
// constructor hermitizes, so the stored entries satisfy A == A^dagger exactly
// and the diagonal is real.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;

  static HermitianMatrix hermitized(const ComplexMatrix& a) {
    if (!a.is_square()) {
      throw ValidationError("hermitize: matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", not square");
    }
    HermitianMatrix h;
    h.m_ = ComplexMatrix(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i) {
      h.m_(i, i) = a(i, i).real();
      for (std::size_t j = i + 1; j < a.dim(); ++j) {
        const Complex v = 0.5 * (a(i, j) + std::conj(a(j, i)));
        h.m_(i, j) = v;
        h.m_(j, i) = std::conj(v);
      }
    }
    return h;
  }

  static HermitianMatrix zero(std::size_t dim) {
    HermitianMatrix h;
    h.m_ = ComplexMatrix(dim);
    return h;
  }
  static HermitianMatrix identity(std::size_t dim) {
    HermitianMatrix h;
    h.m_ = ComplexMatrix::identity(dim);
    return h;
  }
  static HermitianMatrix diagonal(std::span<const double> diag) {
    HermitianMatrix h = zero(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) h.m_(i, i) = diag[i];
    return h;
  }
  static HermitianMatrix diagonal(std::initializer_list<double> diag) {
    return diagonal(std::span<const double>(diag.begin(), diag.size()));
  }
  // |v><v|
  static HermitianMatrix outer(std::span<const Complex> v) {
    HermitianMatrix h = zero(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j) h.m_(i, j) = v[i] * std::conj(v[j]);
    for (std::size_t i = 0; i < v.size(); ++i) h.m_(i, i) = h.m_(i, i).real();
    return h;
  }

  std::size_t dim() const noexcept { return m_.dim(); }
  const ComplexMatrix& matrix() const noexcept { return m_; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

  double trace() const { return m_.trace().real(); }
  double max_abs() const { return m_.max_abs(); }

  HermitianMatrix& operator+=(const HermitianMatrix& o) {
    m_ += o.m_;
    return *this;
  }
  HermitianMatrix& operator-=(const HermitianMatrix& o) {
    m_ -= o.m_;
    return *this;
  }
  HermitianMatrix& operator*=(double s) {
    m_ *= s;
    return *this;
  }
  friend HermitianMatrix operator+(HermitianMatrix a, const HermitianMatrix& b) { return a += b; }
  friend HermitianMatrix operator-(HermitianMatrix a, const HermitianMatrix& b) { return a -= b; }
  friend HermitianMatrix operator*(HermitianMatrix a, double s) { return a *= s; }
  friend HermitianMatrix operator*(double s, HermitianMatrix a) { return a *= s; }

  friend bool operator==(const HermitianMatrix&, const HermitianMatrix&) = default;

 private:
  ComplexMatrix m_;
};

// (a + a^dagger) / 2
inline HermitianMatrix hermitize(const ComplexMatrix& a) { return HermitianMatrix::hermitized(a); }

// Re Tr(a b). Exact trace of the product for Hermitian a, b.
inline double trace_product(const HermitianMatrix& a, const HermitianMatrix& b) {
  if (a.dim() != b.dim()) throw ValidationError("trace_product: dimensions differ");
  double t = 0.0;
  const std::size_t d = a.dim();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) t += (a(i, j) * b(j, i)).real();
  return t;
}

// outer * inner * outer, hermitized.
inline HermitianMatrix sandwich(const HermitianMatrix& outer, const HermitianMatrix& inner) {
  return hermitize(outer.matrix() * inner.matrix() * outer.matrix());
}

inline HermitianMatrix kron(const HermitianMatrix& a, const HermitianMatrix& b) {
  const std::size_t da = a.dim();
  const std::size_t db = b.dim();
  ComplexMatrix out(da * db);
  for (std::size_t i = 0; i < da; ++i)
    for (std::size_t j = 0; j < da; ++j)
      for (std::size_t k = 0; k < db; ++k)
        for (std::size_t l = 0; l < db; ++l) out(i * db + k, j * db + l) = a(i, j) * b(k, l);
  return hermitize(out);
}

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  ComplexMatrix eigenvectors;       // column k belongs to eigenvalues[k]

  std::vector<Complex> eigenvector(std::size_t k) const {
    std::vector<Complex> v(eigenvectors.rows());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = eigenvectors(i, k);
    return v;
  }
};

struct EigenOptions {
  int max_sweeps = 100;
};

// Cyclic Jacobi. Each rotation first removes the phase of the pivot entry
// and then applies the classical real rotation, so the iteration is the real
// algorithm run in a rephased basis.
inline Spectrum eig_hermitian(const HermitianMatrix& h, EigenOptions opts = {}) {
  const std::size_t d = h.dim();
  ComplexMatrix a = h.matrix();
  ComplexMatrix v = ComplexMatrix::identity(d);
  constexpr double eps = std::numeric_limits<double>::epsilon();

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (i != j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };
  double frob = 0.0;
  for (const auto& z : a.entries()) frob += std::norm(z);
  frob = std::sqrt(frob);

  bool converged = d <= 1;
  for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
    const double off = off_norm();
    if (off == 0.0 || off <= 4.0 * eps * frob) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const Complex apq = a(p, q);
        const double g = std::abs(apq);
        if (g == 0.0) continue;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        if (sweep > 3 && 100.0 * g + std::abs(app) == std::abs(app) &&
            100.0 * g + std::abs(aqq) == std::abs(aqq)) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        const Complex phase = apq / g;
        const double theta = (aqq - app) / (2.0 * g);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // Rotation J acting on coordinates (p, q).
        const Complex jpp = c;
        const Complex jpq = s;
        const Complex jqp = -s * std::conj(phase);
        const Complex jqq = c * std::conj(phase);

        for (std::size_t k = 0; k < d; ++k) {  // a <- a J
          const Complex akp = a(k, p);
          const Complex akq = a(k, q);
          a(k, p) = akp * jpp + akq * jqp;
          a(k, q) = akp * jpq + akq * jqq;
        }
        for (std::size_t k = 0; k < d; ++k) {  // a <- J^dagger a
          const Complex apk = a(p, k);
          const Complex aqk = a(q, k);
          a(p, k) = std::conj(jpp) * apk + std::conj(jqp) * aqk;
          a(q, k) = std::conj(jpq) * apk + std::conj(jqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = app - t * g;
        a(q, q) = aqq + t * g;
        for (std::size_t k = 0; k < d; ++k) {  // v <- v J
          const Complex vkp = v(k, p);
          const Complex vkq = v(k, q);
          v(k, p) = vkp * jpp + vkq * jqp;
          v(k, q) = vkp * jpq + vkq * jqq;
        }
      }
    }
  }
  if (!converged) {
    const double off = off_norm();
    converged = off == 0.0 || off <= 4.0 * eps * frob;
  }
  if (!converged) {
    throw NumericalError("eig_hermitian: Jacobi iteration did not converge in " +
                         std::to_string(opts.max_sweeps) + " sweeps");
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a(i, i).real() < a(j, j).real();
  });
  Spectrum out;
  out.eigenvalues.resize(d);
  out.eigenvectors = ComplexMatrix(d);
  for (std::size_t k = 0; k < d; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]).real();
    for (std::size_t i = 0; i < d; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  return out;
}

// sum_k f(lambda_k) v_k v_k^dagger
inline HermitianMatrix spectral_apply(const Spectrum& sp, const std::function<double(double)>& f) {
  const std::size_t d = sp.eigenvalues.size();
  ComplexMatrix out(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double fk = f(sp.eigenvalues[k]);
    if (fk == 0.0) continue;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out(i, j) += fk * sp.eigenvectors(i, k) * std::conj(sp.eigenvectors(j, k));
  }
  return hermitize(out);
}

inline double trace_norm(const HermitianMatrix& h) {
  double s = 0.0;
  for (double l : eig_hermitian(h).eigenvalues) s += std::abs(l);
  return s;
}

inline double min_eigenvalue(const HermitianMatrix& h) {
  if (h.dim() == 0) return 0.0;
  return eig_hermitian(h).eigenvalues.front();
}

inline double max_eigenvalue(const HermitianMatrix& h) {
  if (h.dim() == 0) return 0.0;
  return eig_hermitian(h).eigenvalues.back();
}

inline bool psd_check(const HermitianMatrix& h, double tol) { return min_eigenvalue(h) >= -tol; }

// Inverse square root on the support of a PSD matrix, zero on its kernel.
// Eigenvalues at or below rank_tol * lambda_max count as kernel.
inline HermitianMatrix support_inv_sqrt(const HermitianMatrix& h, double rank_tol = 1e-10) {
  const Spectrum sp = eig_hermitian(h);
  if (sp.eigenvalues.empty()) return h;
  const double scale = std::max(std::abs(sp.eigenvalues.front()), std::abs(sp.eigenvalues.back()));
  if (sp.eigenvalues.front() < -rank_tol * std::max(scale, 1.0)) {
    throw ValidationError("support_inv_sqrt: matrix is not PSD (min eigenvalue " +
                          std::to_string(sp.eigenvalues.front()) + ")");
  }
  const double cut = rank_tol * scale;
  return spectral_apply(sp, [cut](double l) { return l > cut ? 1.0 / std::sqrt(l) : 0.0; });
}

// Orthogonal projector onto the eigenvectors with eigenvalue > rank_tol * lambda_max.
inline HermitianMatrix support_projector(const HermitianMatrix& h, double rank_tol = 1e-10) {
  const Spectrum sp = eig_hermitian(h);
  if (sp.eigenvalues.empty()) return h;
  const double scale = std::max(std::abs(sp.eigenvalues.front()), std::abs(sp.eigenvalues.back()));
  const double cut = rank_tol * scale;
  return spectral_apply(sp, [cut](double l) { return l > cut ? 1.0 : 0.0; });
}

}  // namespace qmm

namespace qmm {

// Solves a x = b for a real symmetric positive definite a (row-major n x n).
// Pivots that collapse below a relative floor are lifted, so a nearly
// singular system still returns a finite direction.
inline std::vector<double> cholesky_solve(std::vector<double> a, std::span<const double> b) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw ValidationError("cholesky_solve: matrix and right-hand side sizes differ");
  double diag_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_max = std::max(diag_max, std::abs(a[i * n + i]));
  const double floor = std::max(diag_max, std::numeric_limits<double>::min()) * 1e-15;
  for (std::size_t j = 0; j < n; ++j) {
    double s = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) s -= a[j * n + k] * a[j * n + k];
    const double l = std::sqrt(std::max(s, floor));
    a[j * n + j] = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) t -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = t / l;
    }
  }
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= a[i * n + k] * x[k];
    x[i] /= a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) x[i] -= a[k * n + i] * x[k];
    x[i] /= a[i * n + i];
  }
  return x;
}

// Coordinates of d x d Hermitian matrices in an orthonormal basis for the
// real inner product Re Tr(A B): diagonal entries, then sqrt2 Re and sqrt2 Im
// of each strictly upper entry.
class HermitianCoordinates {
 public:
  explicit HermitianCoordinates(std::size_t dim) : d_(dim) {}
  std::size_t size() const noexcept { return d_ * d_; }

  std::vector<double> to_vec(const HermitianMatrix& h) const {
    std::vector<double> x;
    x.reserve(size());
    for (std::size_t i = 0; i < d_; ++i) x.push_back(h(i, i).real());
    for (std::size_t i = 0; i < d_; ++i)
      for (std::size_t j = i + 1; j < d_; ++j) {
        x.push_back(kSqrt2 * h(i, j).real());
        x.push_back(kSqrt2 * h(i, j).imag());
      }
    return x;
  }

  HermitianMatrix from_vec(std::span<const double> x) const {
    ComplexMatrix m(d_);
    std::size_t k = 0;
    for (std::size_t i = 0; i < d_; ++i) m(i, i) = x[k++];
    for (std::size_t i = 0; i < d_; ++i)
      for (std::size_t j = i + 1; j < d_; ++j) {
        const Complex v(x[k] / kSqrt2, x[k + 1] / kSqrt2);
        k += 2;
        m(i, j) = v;
        m(j, i) = std::conj(v);
      }
    return hermitize(m);
  }

 private:
  static constexpr double kSqrt2 = 1.4142135623730950488;
  std::size_t d_;
};

}  // namespace qmm
