#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plspoly/linalg.hpp"
#include "plspoly/matrix.hpp"
#include "plspoly/rng.hpp"

namespace plspoly {

// Design/response pair, optionally carrying the truth that generated it.
// When truth and noise are present, response was built as
// design * truth + noise in exactly that order, so the identity holds
// bit-for-bit under recomputation.
struct RegressionProblem {
  Matrix design;                             // n x p
  std::vector<double> response;              // n
  std::optional<std::vector<double>> truth;  // p
  std::optional<std::vector<double>> noise;  // n
  std::optional<double> noise_sd;
};

// Plain numeric CSV: comma separated, '.' decimal point, no quoting. A
// single header row is auto-detected (any cell of row one that does not
// parse as a number). The response file holds one column. center
// subtracts column means from the design and the response.
// Errors name the file, row, and column.
RegressionProblem load_csv(const std::string& design_path,
                           const std::string& response_path, bool center);

// Subtracts column means in place (design columns and response).
void center_columns(Matrix& design, std::vector<double>& response);

// The problem rotated into the eigenbasis of design^T design. lambdas are
// the r positive eigenvalues, descending; p_hat the response coordinates
// along all n left singular vectors. Truth-derived coordinates are filled
// when the problem carries truth/noise.
struct SpectralData {
  SvdResult svd;
  std::vector<double> lambdas;                    // r
  std::vector<double> p_hat;                      // n
  std::optional<std::vector<double>> p_signal;    // n
  std::optional<std::vector<double>> eps_tilde;   // n
  std::optional<std::vector<double>> beta_tilde;  // p
  std::optional<double> noise_sd;
  bool zero_projection = false;      // some |p_hat_i| <= 1e-12 ||Y||, i < rank
  bool duplicate_eigenvalue = false; // consecutive lambdas within 1e-12 rel

  std::size_t rank() const { return lambdas.size(); }
  double response_norm_sq() const {
    double s = 0.0;
    for (double v : p_hat) s += v * v;
    return s;
  }
};

SpectralData spectral(const RegressionProblem& problem, double rel_threshold = 1e-12);

enum class BetaMode { kDenseGaussian, kSparse, kAlignedTop };
enum class NoiseDist { kGaussian, kUniform, kRademacher };

// Eigenvalue layout of the synthetic design: an explicit list, a geometric
// decay, or an evenly spaced cluster.
struct SpectrumSpec {
  enum class Kind { kExplicit, kGeometric, kClustered };
  Kind kind = Kind::kExplicit;
  std::vector<double> values;  // explicit form
  std::size_t count = 0;       // generator forms
  double first = 1.0;          // geometric: largest eigenvalue
  double rate = 0.5;           // geometric: consecutive ratio, in (0, 1]
  double center = 1.0;         // clustered: location
  double spread = 0.05;        // clustered: relative half-width, in [0, 1)

  // Materialized eigenvalues, descending, all positive.
  std::vector<double> eigenvalues() const;
};

struct SyntheticSpec {
  std::size_t n = 0;
  std::size_t p = 0;
  SpectrumSpec spectrum;
  BetaMode beta_mode = BetaMode::kDenseGaussian;
  double noise_sd = 0.0;
  NoiseDist noise_dist = NoiseDist::kGaussian;
  std::uint64_t seed = 0;
  std::size_t replications = 1;
};

// Builds design = sum_l sqrt(lambda_l) u_l v_l^T from seeded orthonormal
// factors, then truth by mode, then noise, then response = design * truth
// + noise. Draw order is pinned (left factor, right factor, truth, noise)
// so one seed identifies the problem bit-for-bit.
RegressionProblem generate(const SyntheticSpec& spec);

// Orthonormal factor from Gram-Schmidt of a seeded gaussian matrix.
Matrix random_orthonormal(std::size_t n, Rng& rng);

// One noise vector under generate's draw conventions: gaussian sd * g,
// uniform on [-sd*sqrt(3), sd*sqrt(3)], rademacher +-sd. sd = 0 returns
// zeros without consuming draws.
std::vector<double> draw_noise(NoiseDist dist, double sd, std::size_t n,
                               Rng& rng);

// Diagonal problems for fixtures: design = diag(sqrt(lambda)), response =
// p_hat, so the spectral coordinates are the inputs themselves.
RegressionProblem make_diagonal_problem(const std::vector<double>& lambdas,
                                        const std::vector<double>& p_hat);

// Same design, but response assembled from signal coordinates and an
// explicit noise vector; truth/noise travel with the problem.
RegressionProblem make_diagonal_problem(const std::vector<double>& lambdas,
                                        const std::vector<double>& p_signal,
                                        const std::vector<double>& eps);

}  // namespace plspoly
