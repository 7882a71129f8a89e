#include "plspoly/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plspoly/errors.hpp"

namespace plspoly {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(const Matrix& m, const char* who) {
  if (m.rows() == 0 || m.cols() == 0) throw InputError(std::string(who) + ": empty matrix");
  for (double x : m.data())
    if (!std::isfinite(x)) throw InputError(std::string(who) + ": non-finite entry");
}

// Orthogonalizes the columns of a tall copy of the input by two-sided
// plane rotations applied on the right. On return the columns of w are
// mutually orthogonal and v holds the accumulated rotations.
void jacobi_orthogonalize(Matrix& w, Matrix& v) {
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < cols; ++i) {
      for (std::size_t j = i + 1; j < cols; ++j) {
        double a = 0.0, b = 0.0, c = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
          const double wi = w(k, i);
          const double wj = w(k, j);
          a += wi * wi;
          b += wj * wj;
          c += wi * wj;
        }
        if (a == 0.0 || b == 0.0) continue;
        if (std::abs(c) <= 1e-15 * std::sqrt(a * b)) continue;
        rotated = true;
        const double zeta = (b - a) / (2.0 * c);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t k = 0; k < rows; ++k) {
          const double wi = w(k, i);
          const double wj = w(k, j);
          w(k, i) = cs * wi - sn * wj;
          w(k, j) = sn * wi + cs * wj;
        }
        for (std::size_t k = 0; k < cols; ++k) {
          const double vi = v(k, i);
          const double vj = v(k, j);
          v(k, i) = cs * vi - sn * vj;
          v(k, j) = sn * vi + cs * vj;
        }
      }
    }
    if (!rotated) return;
  }
  throw NumericError("svd: jacobi sweeps failed to converge");
}

// Fills the unassigned columns of u (flagged in `have`) with an orthonormal
// completion, chosen deterministically by pivoted Gram-Schmidt over the
// canonical basis.
void complete_basis(Matrix& u, std::vector<bool>& have) {
  const std::size_t n = u.rows();
  // Residuals of the canonical basis after projecting out assigned columns.
  Matrix res = Matrix::identity(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (!have[j]) continue;
    for (std::size_t cand = 0; cand < n; ++cand) {
      double d = 0.0;
      for (std::size_t k = 0; k < n; ++k) d += u(k, j) * res(k, cand);
      for (std::size_t k = 0; k < n; ++k) res(k, cand) -= d * u(k, j);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (have[j]) continue;
    // Largest remaining residual; ties resolved by lowest index.
    std::size_t best = 0;
    double best_norm = -1.0;
    for (std::size_t cand = 0; cand < n; ++cand) {
      double nrm = 0.0;
      for (std::size_t k = 0; k < n; ++k) nrm += res(k, cand) * res(k, cand);
      if (nrm > best_norm) {
        best_norm = nrm;
        best = cand;
      }
    }
    std::vector<double> q(n);
    for (std::size_t k = 0; k < n; ++k) q[k] = res(k, best);
    // One reorthogonalization pass against the assigned columns.
    for (std::size_t col = 0; col < n; ++col) {
      if (!have[col]) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < n; ++k) d += u(k, col) * q[k];
      for (std::size_t k = 0; k < n; ++k) q[k] -= d * u(k, col);
    }
    double nrm = std::sqrt(norm_sq(q));
    if (nrm == 0.0) throw NumericError("svd: basis completion collapsed");
    for (std::size_t k = 0; k < n; ++k) u(k, j) = q[k] / nrm;
    have[j] = true;
    for (std::size_t cand = 0; cand < n; ++cand) {
      double d = 0.0;
      for (std::size_t k = 0; k < n; ++k) d += u(k, j) * res(k, cand);
      for (std::size_t k = 0; k < n; ++k) res(k, cand) -= d * u(k, j);
    }
  }
}

std::size_t argmax_abs_column(const Matrix& m, std::size_t col) {
  std::size_t arg = 0;
  double best = -1.0;
  for (std::size_t k = 0; k < m.rows(); ++k) {
    const double a = std::abs(m(k, col));
    if (a > best) {
      best = a;
      arg = k;
    }
  }
  return arg;
}

void flip_column(Matrix& m, std::size_t col) {
  for (std::size_t k = 0; k < m.rows(); ++k) m(k, col) = -m(k, col);
}

}  // namespace

SvdResult svd(const Matrix& m, double rel_threshold) {
  require_finite(m, "svd");
  if (rel_threshold < 0.0) throw InputError("svd: negative rank threshold");

  const bool transposed = m.rows() < m.cols();
  Matrix a = transposed ? m.transposed() : m;
  const std::size_t tall_rows = a.rows();
  const std::size_t tall_cols = a.cols();

  Matrix w = a;
  Matrix v = Matrix::identity(tall_cols);
  jacobi_orthogonalize(w, v);

  std::vector<double> col_norm(tall_cols);
  for (std::size_t j = 0; j < tall_cols; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < tall_rows; ++k) s += w(k, j) * w(k, j);
    col_norm[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(tall_cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return col_norm[x] > col_norm[y]; });

  std::vector<double> sigma(tall_cols);
  for (std::size_t j = 0; j < tall_cols; ++j) sigma[j] = col_norm[order[j]];
  const double sigma_max = sigma.empty() ? 0.0 : sigma[0];

  // Directions of near-null columns are unreliable; rebuild them (and the
  // rows-beyond-cols part of the left factor) by deterministic completion.
  const double trust = sigma_max * 1e-13;

  Matrix u_tall(tall_rows, tall_rows);
  std::vector<bool> have(tall_rows, false);
  for (std::size_t j = 0; j < tall_cols; ++j) {
    if (sigma[j] > trust && sigma[j] > 0.0) {
      for (std::size_t k = 0; k < tall_rows; ++k) u_tall(k, j) = w(k, order[j]) / sigma[j];
      have[j] = true;
    }
  }
  complete_basis(u_tall, have);

  Matrix v_sorted(tall_cols, tall_cols);
  for (std::size_t j = 0; j < tall_cols; ++j)
    for (std::size_t k = 0; k < tall_cols; ++k) v_sorted(k, j) = v(k, order[j]);

  SvdResult out;
  out.singular_values = std::move(sigma);
  if (transposed) {
    out.left_vectors = std::move(v_sorted);
    out.right_vectors = std::move(u_tall);
  } else {
    out.left_vectors = std::move(u_tall);
    out.right_vectors = std::move(v_sorted);
  }

  out.rank = 0;
  for (double s : out.singular_values)
    if (sigma_max > 0.0 && s > rel_threshold * sigma_max) ++out.rank;

  // Deterministic signs: largest-magnitude entry of each left vector
  // positive, the paired right vector flipping along with it.
  const std::size_t paired = out.singular_values.size();
  for (std::size_t j = 0; j < out.left_vectors.cols(); ++j) {
    const std::size_t arg = argmax_abs_column(out.left_vectors, j);
    if (out.left_vectors(arg, j) < 0.0) {
      flip_column(out.left_vectors, j);
      if (j < paired && out.singular_values[j] > trust) flip_column(out.right_vectors, j);
    }
  }
  for (std::size_t j = 0; j < out.right_vectors.cols(); ++j) {
    if (j < paired && out.singular_values[j] > trust) continue;  // already oriented with u
    const std::size_t arg = argmax_abs_column(out.right_vectors, j);
    if (out.right_vectors(arg, j) < 0.0) flip_column(out.right_vectors, j);
  }
  return out;
}

double log_vandermonde_sq(std::span<const double> values) {
  double acc = 0.0;
  for (std::size_t a = 0; a + 1 < values.size(); ++a)
    for (std::size_t b = a + 1; b < values.size(); ++b) {
      const double diff = values[a] - values[b];
      if (diff == 0.0) return -kInf;
      acc += 2.0 * std::log(std::abs(diff));
    }
  return acc;
}

double vandermonde_sq(std::span<const double> values) {
  const double lg = log_vandermonde_sq(values);
  return lg == -kInf ? 0.0 : std::exp(lg);
}

double determinant(const Matrix& m) {
  require_finite(m, "determinant");
  if (m.rows() != m.cols()) throw InputError("determinant: matrix is not square");
  if (m.rows() > 30) throw InputError("determinant: dimension exceeds 30; use scaled_log_determinant");
  Matrix a = m;
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t k = col + 1; k < n; ++k)
      if (std::abs(a(k, col)) > std::abs(a(piv, col))) piv = k;
    if (a(piv, col) == 0.0) return 0.0;
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
      det = -det;
    }
    det *= a(col, col);
    for (std::size_t k = col + 1; k < n; ++k) {
      const double f = a(k, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a(k, j) -= f * a(col, j);
    }
  }
  return det;
}

SignedLogDet scaled_log_determinant(const Matrix& m) {
  require_finite(m, "scaled_log_determinant");
  if (m.rows() != m.cols()) throw InputError("scaled_log_determinant: matrix is not square");
  Matrix a = m;
  const std::size_t n = a.rows();
  SignedLogDet out;
  out.sign = 1;
  out.log_abs = 0.0;

  // Row then column max-magnitude equilibration; graded moment matrices
  // lose far fewer digits in the elimination afterwards.
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s = std::max(s, std::abs(a(i, j)));
    if (s == 0.0) return SignedLogDet{};  // zero row
    for (std::size_t j = 0; j < n; ++j) a(i, j) /= s;
    out.log_abs += std::log(s);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s = std::max(s, std::abs(a(i, j)));
    if (s == 0.0) return SignedLogDet{};  // zero column
    for (std::size_t i = 0; i < n; ++i) a(i, j) /= s;
    out.log_abs += std::log(s);
  }

  double piv_max = 0.0;
  double piv_min = kInf;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t k = col + 1; k < n; ++k)
      if (std::abs(a(k, col)) > std::abs(a(piv, col))) piv = k;
    const double p = a(piv, col);
    if (p == 0.0) return SignedLogDet{};
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
      out.sign = -out.sign;
    }
    if (p < 0.0) out.sign = -out.sign;
    out.log_abs += std::log(std::abs(p));
    piv_max = std::max(piv_max, std::abs(p));
    piv_min = std::min(piv_min, std::abs(p));
    for (std::size_t k = col + 1; k < n; ++k) {
      const double f = a(k, col) / p;
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a(k, j) -= f * a(col, j);
    }
  }
  out.pivot_loss = piv_min > 0.0 ? piv_max / piv_min : kInf;
  return out;
}

SymEig sym_eig(const Matrix& a_in) {
  require_finite(a_in, "sym_eig");
  if (a_in.rows() != a_in.cols()) throw InputError("sym_eig: matrix is not square");
  const std::size_t n = a_in.rows();
  Matrix a = a_in;
  Matrix q = Matrix::identity(n);
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) {
        const double apr = a(p, r);
        const double scale = std::abs(a(p, p)) + std::abs(a(r, r));
        if (std::abs(apr) <= 1e-15 * scale || apr == 0.0) continue;
        rotated = true;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akr = a(k, r);
          a(k, p) = c * akp - s * akr;
          a(k, r) = s * akp + c * akr;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double ark = a(r, k);
          a(p, k) = c * apk - s * ark;
          a(r, k) = s * apk + c * ark;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double qkp = q(k, p);
          const double qkr = q(k, r);
          q(k, p) = c * qkp - s * qkr;
          q(k, r) = s * qkp + c * qkr;
        }
      }
    }
    if (!rotated) {
      SymEig out;
      out.values.resize(n);
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
      out.vectors = Matrix(n, n);
      for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = q(k, order[j]);
      }
      return out;
    }
  }
  throw NumericError("sym_eig: jacobi sweeps failed to converge");
}

std::vector<double> solve_spd(const Matrix& g, const std::vector<double>& b) {
  require_finite(g, "solve_spd");
  if (g.rows() != g.cols()) throw InputError("solve_spd: matrix is not square");
  if (b.size() != g.rows()) throw InputError("solve_spd: right-hand side size mismatch");

  double max_abs = 0.0;
  for (double x : g.data()) max_abs = std::max(max_abs, std::abs(x));
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = i + 1; j < g.cols(); ++j)
      if (std::abs(g(i, j) - g(j, i)) > 1e-8 * max_abs)
        throw InputError("solve_spd: matrix is not symmetric");
  if (max_abs == 0.0) return std::vector<double>(b.size(), 0.0);

  const SymEig eig = sym_eig(g);
  double lam_max = 0.0;
  for (double lam : eig.values) lam_max = std::max(lam_max, std::abs(lam));
  if (eig.values.front() < -1e-8 * lam_max)
    throw InputError("solve_spd: matrix has a significantly negative eigenvalue");

  const double cutoff = 1e-12 * lam_max;
  const std::size_t n = g.rows();
  std::vector<double> x(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double lam = eig.values[j];
    if (lam <= cutoff) continue;
    double proj = 0.0;
    for (std::size_t k = 0; k < n; ++k) proj += eig.vectors(k, j) * b[k];
    const double coef = proj / lam;
    for (std::size_t k = 0; k < n; ++k) x[k] += coef * eig.vectors(k, j);
  }
  return x;
}

}  // namespace plspoly
