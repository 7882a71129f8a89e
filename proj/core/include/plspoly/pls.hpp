#pragma once

#include <cstddef>
#include <vector>

#include "plspoly/matrix.hpp"
#include "plspoly/model.hpp"

namespace plspoly {

// Orthonormal basis of the Krylov space span{X^T Y, (X^T X) X^T Y, ...} in
// coefficient space, plus the moment sequence the Gram diagnostics reuse:
// raw_moments[j] = sum_i lambda_i^(j+1) p_hat_i^2.
struct KrylovBasis {
  Matrix vectors;  // p x dim, orthonormal columns
  std::vector<double> raw_moments;
  std::size_t dim = 0;
};

// Fitting path for k = 0..k_max. Step 0 is the zero estimator; step k
// minimizes the residual over the k-dimensional Krylov space. Residuals are
// strictly decreasing while the space keeps growing.
struct PlsPath {
  std::vector<std::vector<double>> beta_by_k;    // each length p
  std::vector<std::vector<double>> fitted_by_k;  // each length n
  std::vector<double> residual_sq_by_k;
  std::size_t k_max = 0;   // achieved steps (may be below the request)
  bool truncated = false;  // requested more steps than the space supports
  KrylovBasis basis;
};

// Projection estimator path. Requests beyond the effective Krylov dimension
// truncate with the flag set; a response orthogonal to the column space
// yields the zero-step path.
PlsPath fit_pls(const SpectralData& s, std::size_t k_max);

// Principal-component estimator keeping the top k spectral directions.
std::vector<double> fit_pcr(const SpectralData& s, std::size_t k);

// Minimum-length least-squares estimator (all rank directions).
std::vector<double> fit_ls(const SpectralData& s);

}  // namespace plspoly
