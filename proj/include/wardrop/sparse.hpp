#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace wardrop {

/// Compressed-row sparse matrix with sorted, duplicate-free column indices.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  std::size_t rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  std::span<const std::size_t> row_offsets() const { return row_ptr_; }
  std::span<const std::size_t> column_indices() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  /// Entry (i, j), zero when not stored.
  double operator()(std::size_t i, std::size_t j) const {
    const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    return (it != last && *it == j) ? values_[static_cast<std::size_t>(it - col_idx_.begin())] : 0.0;
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    const std::size_t n = rows();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[i] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(rows());
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(rows(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i) d[i] = (*this)(i, i);
    return d;
  }

  /// max |A_ij - A_ji| over stored entries.
  double asymmetry() const {
    double m = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        m = std::max(m, std::abs(values_[k] - (*this)(col_idx_[k], i)));
      }
    }
    return m;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  template <class Triplets>
  friend SparseMatrix assemble_csr(std::size_t n_rows, std::size_t n_cols, Triplets&& t);

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Sums duplicate (row, col) entries in insertion order, which keeps
/// symmetric element contributions bitwise symmetric after assembly.
template <class Triplets>
SparseMatrix assemble_csr(std::size_t n_rows, std::size_t n_cols, Triplets&& t) {
  std::vector<Triplet> trip(std::begin(t), std::end(t));
  std::stable_sort(trip.begin(), trip.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m;
  m.cols_ = n_cols;
  m.row_ptr_.assign(n_rows + 1, 0);
  for (std::size_t i = 0; i < trip.size();) {
    const auto& head = trip[i];
    if (head.row >= n_rows || head.col >= n_cols) throw std::out_of_range("triplet index out of range");
    double s = 0.0;
    std::size_t j = i;
    for (; j < trip.size() && trip[j].row == head.row && trip[j].col == head.col; ++j) s += trip[j].value;
    m.col_idx_.push_back(head.col);
    m.values_.push_back(s);
    ++m.row_ptr_[head.row + 1];
    i = j;
  }
  std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
  return m;
}

struct SolveReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;  ///< ||A x - b|| / ||b||
  bool breakdown = false;          ///< tolerance not reached (or CG broke down)
  std::vector<double> restart_residuals;  ///< true relative residual at the start and after each pass
};

struct CgOptions {
  double tol = 1e-10;
  std::size_t max_iterations = 0;  ///< 0 means 10 * dimension
  bool project_constants = false;  ///< work in the complement of the constant vector
};

namespace detail {
inline double dotv(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double mean(std::span<const double> a) {
  return a.empty() ? 0.0 : std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
}
inline void remove_mean(std::span<double> a) {
  const double m = mean(a);
  for (double& v : a) v -= m;
}
}  // namespace detail

/// Jacobi-preconditioned conjugate gradient for a symmetric positive (semi)definite
/// operator. `Op` provides rows(), diagonal() and multiply(x, y).
///
/// `x` holds the initial guess on entry and the solution on return. With
/// `project_constants`, b must have zero mean (|mean| <= 1e-8 max(1, max|b|));
/// all iterates stay in the zero-mean subspace, which is where the Neumann
/// stiffness operator is definite.
template <class Op>
SolveReport cg_solve_operator(const Op& A, std::span<const double> b_in, std::span<double> x,
                              const CgOptions& opt = {}) {
  const std::size_t n = A.rows();
  if (b_in.size() != n || x.size() != n) throw std::invalid_argument("cg_solve: dimension mismatch");
  std::vector<double> b(b_in.begin(), b_in.end());
  if (opt.project_constants) {
    double bmax = 0.0;
    for (double v : b) bmax = std::max(bmax, std::abs(v));
    if (std::abs(detail::mean(b)) > 1e-8 * std::max(1.0, bmax)) {
      throw std::invalid_argument("cg_solve: right-hand side must have zero mean");
    }
    detail::remove_mean(b);
    detail::remove_mean(x);
  }
  SolveReport rep;
  const double bnorm = std::sqrt(detail::dotv(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return rep;
  }
  const std::size_t maxit = opt.max_iterations ? opt.max_iterations : 10 * n;
  std::vector<double> dinv = A.diagonal();
  for (double& d : dinv) d = d > 0.0 ? 1.0 / d : 1.0;

  std::vector<double> r(n), z(n), p(n), ap(n);
  auto true_residual = [&] {
    A.multiply(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    if (opt.project_constants) detail::remove_mean(r);
    return std::sqrt(detail::dotv(r, r));
  };
  auto precondition = [&] {
    for (std::size_t i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    if (opt.project_constants) detail::remove_mean(z);
  };

  std::size_t it = 0;
  double rnorm = true_residual();
  rep.restart_residuals.push_back(rnorm / bnorm);
  // Each pass is a fresh CG run from the current iterate; a pass ends when the
  // recursive residual meets the tolerance, and the true residual is then rechecked.
  while (rnorm > opt.tol * bnorm && it < maxit) {
    precondition();
    p = z;
    double rz = detail::dotv(r, z);
    while (rnorm > opt.tol * bnorm && it < maxit) {
      A.multiply(p, ap);
      const double pap = detail::dotv(p, ap);
      if (!(pap > 0.0)) break;
      const double alpha = rz / pap;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      ++it;
      if (opt.project_constants) detail::remove_mean(r);
      rnorm = std::sqrt(detail::dotv(r, r));
      precondition();
      const double rz_new = detail::dotv(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (opt.project_constants) detail::remove_mean(x);
    const double previous = rnorm;
    rnorm = true_residual();
    rep.restart_residuals.push_back(rnorm / bnorm);
    if (rnorm > opt.tol * bnorm && rnorm >= previous && previous > opt.tol * bnorm) break;  // stagnation
  }
  if (opt.project_constants) detail::remove_mean(x);
  rep.iterations = it;
  rep.relative_residual = true_residual() / bnorm;
  rep.breakdown = rep.relative_residual > opt.tol;
  return rep;
}

inline SolveReport cg_solve(const SparseMatrix& A, std::span<const double> b, std::span<double> x,
                            const CgOptions& opt = {}) {
  return cg_solve_operator(A, b, x, opt);
}

}  // namespace wardrop
