#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "plspoly/matrix.hpp"

namespace plspoly {

// Thin SVD extended to full orthonormal factors: left_vectors is n x n,
// right_vectors is p x p, singular_values has min(n, p) entries in
// descending order. rank counts values above rel_threshold * largest.
struct SvdResult {
  Matrix left_vectors;
  Matrix right_vectors;
  std::vector<double> singular_values;
  std::size_t rank = 0;
};

// One-sided Jacobi SVD. Column rotations orthogonalize the (possibly
// transposed) input; singular vectors get a deterministic sign: the
// largest-magnitude entry of each left vector is positive.
SvdResult svd(const Matrix& m, double rel_threshold = 1e-12);

// prod_{a<b} (v_a - v_b)^2, accumulated in the log domain so moderate
// problem sizes cannot overflow intermediate products. Exactly 0 when two
// entries tie, 1 for fewer than two entries.
double vandermonde_sq(std::span<const double> values);

// log of vandermonde_sq; -infinity when two entries tie.
double log_vandermonde_sq(std::span<const double> values);

// Determinant by partially pivoted elimination; sign tracked exactly
// through row swaps. Square inputs of dimension <= 30.
double determinant(const Matrix& m);

// Determinant split as sign * exp(log_abs), evaluated after row and column
// max-magnitude equilibration to delay overflow and loss on graded
// matrices. pivot_loss = |largest pivot| / |smallest pivot| on the
// equilibrated matrix; callers treat > 1e6 as a conditioning warning.
struct SignedLogDet {
  double log_abs = -std::numeric_limits<double>::infinity();
  int sign = 0;  // 0 means the determinant is exactly zero
  double pivot_loss = 1.0;
  double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
};
SignedLogDet scaled_log_determinant(const Matrix& m);

// Least-norm solution of g x = b for symmetric positive semidefinite g,
// via eigendecomposition with relative cutoff 1e-12. Asymmetry beyond
// 1e-8 relative is an InputError.
std::vector<double> solve_spd(const Matrix& g, const std::vector<double>& b);

// Eigendecomposition of a symmetric matrix (cyclic Jacobi rotations).
// values ascending; vectors' column i pairs with values[i].
struct SymEig {
  std::vector<double> values;
  Matrix vectors;
};
SymEig sym_eig(const Matrix& a);

// Accumulates log(sum of non-negative terms) from the terms' logs without
// leaving the log domain (streaming log-sum-exp).
class LogSum {
 public:
  void add_log(double log_term) {
    if (log_term == -std::numeric_limits<double>::infinity()) return;
    if (max_log_ == -std::numeric_limits<double>::infinity()) {
      max_log_ = log_term;
      scaled_sum_ = 1.0;
    } else if (log_term <= max_log_) {
      scaled_sum_ += std::exp(log_term - max_log_);
    } else {
      scaled_sum_ = scaled_sum_ * std::exp(max_log_ - log_term) + 1.0;
      max_log_ = log_term;
    }
  }
  // log of the accumulated sum; -infinity when nothing (or only zeros) was added.
  double log_value() const {
    if (max_log_ == -std::numeric_limits<double>::infinity()) return max_log_;
    return max_log_ + std::log(scaled_sum_);
  }
  double value() const { return std::exp(log_value()); }

 private:
  double max_log_ = -std::numeric_limits<double>::infinity();
  double scaled_sum_ = 0.0;
};

// Kahan compensated accumulator for signed sums with cancellation.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }

}  // namespace plspoly
