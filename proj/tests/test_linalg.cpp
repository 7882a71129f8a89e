#include <cmath>
#include <vector>

#include "doctest.h"
#include "plspoly/errors.hpp"
#include "plspoly/linalg.hpp"
#include "plspoly/matrix.hpp"
#include "plspoly/rng.hpp"

using namespace plspoly;

namespace {

Matrix random_matrix(std::size_t n, std::size_t p, Rng& rng) {
  Matrix m(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) m(i, j) = rng.gaussian();
  return m;
}

double max_abs_offdiag_gram(const Matrix& q) {
  // max |Q^T Q - I| entry
  double worst = 0.0;
  for (std::size_t a = 0; a < q.cols(); ++a)
    for (std::size_t b = 0; b < q.cols(); ++b) {
      double d = 0.0;
      for (std::size_t k = 0; k < q.rows(); ++k) d += q(k, a) * q(k, b);
      worst = std::max(worst, std::abs(d - (a == b ? 1.0 : 0.0)));
    }
  return worst;
}

double frob(const Matrix& m) {
  double s = 0.0;
  for (double x : m.data()) s += x * x;
  return std::sqrt(s);
}

// Oracle: determinant by cofactor expansion, exponential cost, fine to 7x7.
double cofactor_det(const Matrix& m) {
  const std::size_t n = m.rows();
  if (n == 1) return m(0, 0);
  double acc = 0.0;
  double sign = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    Matrix minor(n - 1, n - 1);
    for (std::size_t r = 1; r < n; ++r) {
      std::size_t cc = 0;
      for (std::size_t c = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    }
    acc += sign * m(0, j) * cofactor_det(minor);
    sign = -sign;
  }
  return acc;
}

// Oracle: explicit inverse by Gauss-Jordan with partial pivoting.
Matrix gauss_jordan_inverse(const Matrix& m) {
  const std::size_t n = m.rows();
  Matrix a = m;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t k = col + 1; k < n; ++k)
      if (std::abs(a(k, col)) > std::abs(a(piv, col))) piv = k;
    REQUIRE(a(piv, col) != 0.0);
    if (piv != col)
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    const double d = a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (k == col) continue;
      const double f = a(k, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(k, j) -= f * a(col, j);
        inv(k, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

}  // namespace

TEST_CASE("svd of a diagonal design is exact") {
  Matrix x(2, 2);
  x(0, 0) = std::sqrt(2.0);
  x(1, 1) = 1.0;
  const SvdResult s = svd(x);
  REQUIRE(s.singular_values.size() == 2);
  CHECK(s.singular_values[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(s.singular_values[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.rank == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(s.left_vectors(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-14));
      CHECK(s.right_vectors(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-14));
    }
}

TEST_CASE("svd of the zero matrix has rank 0 and orthonormal factors") {
  Matrix x(3, 2);
  const SvdResult s = svd(x);
  CHECK(s.rank == 0);
  REQUIRE(s.singular_values.size() == 2);
  CHECK(s.singular_values[0] == 0.0);
  CHECK(s.singular_values[1] == 0.0);
  CHECK(max_abs_offdiag_gram(s.left_vectors) < 1e-12);
  CHECK(max_abs_offdiag_gram(s.right_vectors) < 1e-12);
}

TEST_CASE("svd invariants hold on 100 random shapes") {
  Rng rng(90210);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const std::size_t p = 1 + rng.below(20);
    const Matrix x = random_matrix(n, p, rng);
    const SvdResult s = svd(x);

    REQUIRE(s.left_vectors.rows() == n);
    REQUIRE(s.left_vectors.cols() == n);
    REQUIRE(s.right_vectors.rows() == p);
    REQUIRE(s.right_vectors.cols() == p);
    REQUIRE(s.singular_values.size() == std::min(n, p));

    CHECK(max_abs_offdiag_gram(s.left_vectors) < 1e-11);
    CHECK(max_abs_offdiag_gram(s.right_vectors) < 1e-11);
    for (std::size_t j = 0; j + 1 < s.singular_values.size(); ++j)
      CHECK(s.singular_values[j] >= s.singular_values[j + 1]);

    // Reconstruction: X = U diag(sigma) V^T
    Matrix recon(n, p);
    for (std::size_t l = 0; l < s.singular_values.size(); ++l) {
      const double sig = s.singular_values[l];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
          recon(i, j) += sig * s.left_vectors(i, l) * s.right_vectors(j, l);
    }
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        const double d = recon(i, j) - x(i, j);
        err += d * d;
      }
    CHECK(std::sqrt(err) <= 1e-10 * std::max(1e-300, frob(x)));

    // Sign convention: largest-magnitude entry of each left vector positive.
    for (std::size_t j = 0; j < n; ++j) {
      double best = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (std::abs(s.left_vectors(k, j)) > std::abs(best)) best = s.left_vectors(k, j);
      CHECK(best > 0.0);
    }
  }
}

TEST_CASE("svd rank matches known low-rank construction") {
  Rng rng(777);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng.below(12);
    const std::size_t p = 4 + rng.below(12);
    const std::size_t r = 1 + rng.below(std::min({n, p, std::size_t{6}}));
    const Matrix a = random_matrix(n, r, rng);
    const Matrix b = random_matrix(r, p, rng);
    const SvdResult s = svd(matmul(a, b));
    CHECK(s.rank == r);
  }
}

TEST_CASE("svd rejects non-finite input") {
  Matrix x(2, 2);
  x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(svd(x), InputError);
}

TEST_CASE("vandermonde_sq basics") {
  const std::vector<double> two{2.0, 1.0};
  CHECK(vandermonde_sq(two) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> one{5.0};
  CHECK(vandermonde_sq(one) == 1.0);
  const std::vector<double> tied{3.0, 3.0, 1.0};
  CHECK(vandermonde_sq(tied) == 0.0);
  CHECK(log_vandermonde_sq(tied) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("vandermonde_sq is permutation invariant") {
  Rng rng(4242);
  std::vector<double> v(6);
  for (double& x : v) x = rng.uniform01() * 10.0;
  const double base = vandermonde_sq(v);
  for (int shuffle = 0; shuffle < 10; ++shuffle) {
    std::swap(v[rng.below(6)], v[rng.below(6)]);
    CHECK(vandermonde_sq(v) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("determinant matches cofactor expansion on random 5x5") {
  Rng rng(1331);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix m = random_matrix(5, 5, rng);
    const double oracle = cofactor_det(m);
    CHECK(determinant(m) == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("determinant is multiplicative") {
  Rng rng(555);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_matrix(6, 6, rng);
    const Matrix b = random_matrix(6, 6, rng);
    CHECK(determinant(matmul(a, b)) ==
          doctest::Approx(determinant(a) * determinant(b)).epsilon(1e-9));
  }
}

TEST_CASE("determinant contract errors") {
  CHECK_THROWS_AS(determinant(Matrix(2, 3)), InputError);
  CHECK_THROWS_AS(determinant(Matrix(31, 31)), InputError);
  Matrix singular(3, 3);
  singular(0, 0) = 1.0;
  singular(1, 1) = 1.0;  // third row zero
  CHECK(determinant(singular) == 0.0);
}

TEST_CASE("scaled_log_determinant agrees with plain determinant") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(6, 6, rng);
    const double plain = determinant(m);
    const SignedLogDet sld = scaled_log_determinant(m);
    REQUIRE(sld.sign != 0);
    CHECK(sld.sign == (plain > 0.0 ? 1 : -1));
    CHECK(sld.value() == doctest::Approx(plain).epsilon(1e-10));
  }
  Matrix zero_col(3, 3);
  zero_col(0, 0) = 1.0;
  zero_col(1, 1) = 1.0;
  CHECK(scaled_log_determinant(zero_col).sign == 0);
  CHECK(scaled_log_determinant(zero_col).value() == 0.0);
}

TEST_CASE("scaled_log_determinant survives magnitudes plain products cannot") {
  // diag spanning 1e200..1e-200: product overflows/underflows pairwise,
  // but the log form keeps the exponent.
  Matrix m = Matrix::identity(4);
  m(0, 0) = 1e200;
  m(1, 1) = 1e200;
  m(2, 2) = 1e-150;
  m(3, 3) = 1e-150;
  const SignedLogDet sld = scaled_log_determinant(m);
  CHECK(sld.sign == 1);
  CHECK(sld.log_abs == doctest::Approx(std::log(1e200) * 2 + std::log(1e-150) * 2).epsilon(1e-12));
}

TEST_CASE("solve_spd identity and least-norm behaviour") {
  Matrix eye = Matrix::identity(3);
  const std::vector<double> b{1.0, -2.0, 3.0};
  const std::vector<double> x = solve_spd(eye, b);
  for (std::size_t i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(b[i]).epsilon(1e-13));

  Matrix g(2, 2);
  g(0, 0) = 4.0;  // second diagonal entry zero: least-norm drops that direction
  const std::vector<double> ln = solve_spd(g, {8.0, 0.0});
  CHECK(ln[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ln[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("solve_spd matches explicit inverse on random SPD") {
  Rng rng(2024);
  for (int trial = 0; trial < 15; ++trial) {
    const Matrix a = random_matrix(6, 6, rng);
    Matrix g = matmul(a.transposed(), a);
    for (std::size_t i = 0; i < 6; ++i) g(i, i) += 0.5;  // keep well conditioned
    std::vector<double> b(6);
    for (double& v : b) v = rng.gaussian();
    const Matrix inv = gauss_jordan_inverse(g);
    const std::vector<double> oracle = inv.apply(b);
    const std::vector<double> x = solve_spd(g, b);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(x[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
  }
}

TEST_CASE("solve_spd rejects asymmetric input") {
  Matrix g = Matrix::identity(2);
  g(0, 1) = 0.5;
  CHECK_THROWS_AS(solve_spd(g, {1.0, 1.0}), InputError);
}

TEST_CASE("sym_eig reproduces the discrete Laplacian spectrum") {
  // tridiag(-1, 2, -1) of order n has eigenvalues 2 - 2 cos(k pi / (n+1)).
  const std::size_t n = 9;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 2.0;
    if (i + 1 < n) {
      a(i, i + 1) = -1.0;
      a(i + 1, i) = -1.0;
    }
  }
  const SymEig eig = sym_eig(a);
  for (std::size_t k = 1; k <= n; ++k) {
    const double expected = 2.0 - 2.0 * std::cos(k * 3.141592653589793238 / (n + 1));
    CHECK(eig.values[k - 1] == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(max_abs_offdiag_gram(eig.vectors) < 1e-12);
}

TEST_CASE("LogSum tracks sums whose terms overflow a double") {
  LogSum ls;
  ls.add_log(800.0);  // e^800 overflows a double on its own
  ls.add_log(800.0 + std::log(2.0));
  CHECK(ls.log_value() == doctest::Approx(800.0 + std::log(3.0)).epsilon(1e-14));

  LogSum small;
  small.add_log(std::log(0.25));
  small.add_log(std::log(0.75));
  small.add_log(-std::numeric_limits<double>::infinity());  // zero term, no effect
  CHECK(small.value() == doctest::Approx(1.0).epsilon(1e-14));

  LogSum empty;
  CHECK(empty.log_value() == -std::numeric_limits<double>::infinity());
  CHECK(empty.value() == 0.0);
}

TEST_CASE("KahanSum keeps cancellation under control") {
  KahanSum ks;
  ks.add(1.0);
  for (int i = 0; i < 10; ++i) ks.add(1e-16);
  ks.add(-1.0);
  CHECK(ks.value() == doctest::Approx(1e-15).epsilon(1e-10));
}
