#include "plspoly/pls.hpp"

#include <cmath>

#include "plspoly/errors.hpp"
#include "plspoly/linalg.hpp"

namespace plspoly {

namespace {

// Least-squares coefficients over the current basis: the fitted-space Gram
// is Q^T diag(lambda) Q because the design acts as diag(sqrt(lambda)) on
// spectral coordinates.
std::vector<double> project_onto_basis(const std::vector<std::vector<double>>& q,
                                       const std::vector<double>& lambdas,
                                       const std::vector<double>& sqrt_lam,
                                       const std::vector<double>& p_hat) {
  const std::size_t k = q.size();
  const std::size_t r = lambdas.size();
  Matrix gram(k, k);
  std::vector<double> rhs(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      KahanSum acc;
      for (std::size_t i = 0; i < r; ++i) acc.add(lambdas[i] * q[a][i] * q[b][i]);
      gram(a, b) = acc.value();
      gram(b, a) = acc.value();
    }
    KahanSum acc;
    for (std::size_t i = 0; i < r; ++i) acc.add(sqrt_lam[i] * q[a][i] * p_hat[i]);
    rhs[a] = acc.value();
  }
  return solve_spd(gram, rhs);
}

}  // namespace

PlsPath fit_pls(const SpectralData& s, std::size_t k_max) {
  if (k_max == 0) throw InputError("fit_pls: k_max must be >= 1");
  const std::size_t r = s.rank();
  const std::size_t n = s.p_hat.size();
  const std::size_t p = s.svd.right_vectors.rows();

  PlsPath path;
  path.beta_by_k.emplace_back(p, 0.0);
  path.fitted_by_k.emplace_back(n, 0.0);
  path.residual_sq_by_k.push_back(norm_sq(s.p_hat));

  // Residual mass outside the column space; no estimator can remove it.
  KahanSum tail_acc;
  for (std::size_t i = r; i < n; ++i) tail_acc.add(s.p_hat[i] * s.p_hat[i]);
  const double tail_sq = tail_acc.value();

  const std::size_t target = std::min(k_max, r);
  if (target < k_max) path.truncated = true;

  std::vector<double> sqrt_lam(r);
  for (std::size_t i = 0; i < r; ++i) sqrt_lam[i] = std::sqrt(s.lambdas[i]);

  std::vector<std::vector<double>> q;  // orthonormal Krylov vectors, spectral coords
  for (std::size_t step = 0; step < target; ++step) {
    std::vector<double> cand(r);
    if (step == 0) {
      for (std::size_t i = 0; i < r; ++i) cand[i] = sqrt_lam[i] * s.p_hat[i];
    } else {
      // Extending from the normalized previous vector keeps the iterate
      // scale flat; the raw monomial sequence collapses numerically.
      for (std::size_t i = 0; i < r; ++i) cand[i] = s.lambdas[i] * q[step - 1][i];
    }
    const double pre_norm = std::sqrt(norm_sq(cand));
    if (pre_norm == 0.0) {
      path.truncated = true;
      break;
    }
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& prev : q) {
        const double d = dot(cand, prev);
        for (std::size_t i = 0; i < r; ++i) cand[i] -= d * prev[i];
      }
    const double post_norm = std::sqrt(norm_sq(cand));
    if (post_norm < 1e-10 * pre_norm) {
      path.truncated = true;  // Krylov space stopped growing
      break;
    }
    for (std::size_t i = 0; i < r; ++i) cand[i] /= post_norm;
    q.push_back(std::move(cand));

    const std::vector<double> coeffs = project_onto_basis(q, s.lambdas, sqrt_lam, s.p_hat);
    std::vector<double> beta_tilde(p, 0.0);
    for (std::size_t a = 0; a < q.size(); ++a)
      for (std::size_t i = 0; i < r; ++i) beta_tilde[i] += coeffs[a] * q[a][i];

    std::vector<double> fitted_u(n, 0.0);
    for (std::size_t i = 0; i < r; ++i) fitted_u[i] = sqrt_lam[i] * beta_tilde[i];
    KahanSum res_acc;
    for (std::size_t i = 0; i < r; ++i) {
      const double d = s.p_hat[i] - fitted_u[i];
      res_acc.add(d * d);
    }
    res_acc.add(tail_sq);

    path.beta_by_k.push_back(s.svd.right_vectors.apply(beta_tilde));
    path.fitted_by_k.push_back(s.svd.left_vectors.apply(fitted_u));
    path.residual_sq_by_k.push_back(res_acc.value());
  }

  path.k_max = q.size();
  path.basis.dim = q.size();
  path.basis.vectors = Matrix(p, q.size());
  for (std::size_t a = 0; a < q.size(); ++a) {
    std::vector<double> padded(p, 0.0);
    for (std::size_t i = 0; i < r; ++i) padded[i] = q[a][i];
    const std::vector<double> col = s.svd.right_vectors.apply(padded);
    for (std::size_t i = 0; i < p; ++i) path.basis.vectors(i, a) = col[i];
  }
  path.basis.raw_moments.resize(2 * q.size() + 1, 0.0);
  for (std::size_t j = 0; j < path.basis.raw_moments.size(); ++j) {
    KahanSum acc;
    for (std::size_t i = 0; i < r; ++i)
      acc.add(std::pow(s.lambdas[i], static_cast<double>(j) + 1.0) * s.p_hat[i] * s.p_hat[i]);
    path.basis.raw_moments[j] = acc.value();
  }
  return path;
}

std::vector<double> fit_pcr(const SpectralData& s, std::size_t k) {
  const std::size_t r = s.rank();
  if (k == 0 || k > r) throw InputError("fit_pcr: k must be in [1, rank]");
  const std::size_t p = s.svd.right_vectors.rows();
  std::vector<double> beta_tilde(p, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    beta_tilde[i] = s.p_hat[i] / std::sqrt(s.lambdas[i]);
  return s.svd.right_vectors.apply(beta_tilde);
}

std::vector<double> fit_ls(const SpectralData& s) {
  if (s.rank() == 0) throw InputError("fit_ls: zero-rank design");
  return fit_pcr(s, s.rank());
}

}  // namespace plspoly
