#include "plspoly/pls.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "plspoly/errors.hpp"
#include "plspoly/linalg.hpp"
#include "plspoly/model.hpp"

using namespace plspoly;

namespace {

double direct_residual_sq(const RegressionProblem& prob, const std::vector<double>& beta) {
  const std::vector<double> fitted = prob.design.apply(beta);
  KahanSum acc;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    const double d = prob.response[i] - fitted[i];
    acc.add(d * d);
  }
  return acc.value();
}

SyntheticSpec path_spec(unsigned seed) {
  SyntheticSpec spec;
  spec.n = 11;
  spec.p = 7;
  spec.spectrum.kind = SpectrumSpec::Kind::kExplicit;
  spec.spectrum.values = {5.0, 3.1, 2.2, 1.4, 0.7};
  spec.beta_mode = BetaMode::kDenseGaussian;
  spec.noise_sd = 0.4;
  spec.noise_dist = NoiseDist::kGaussian;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("fitting path on the two-by-two diagonal fixture") {
  const RegressionProblem prob = make_diagonal_problem({2.0, 1.0}, {1.0, 1.0});
  const SpectralData s = spectral(prob);
  const PlsPath path = fit_pls(s, 2);
  REQUIRE(path.k_max == 2);
  CHECK(!path.truncated);
  REQUIRE(path.residual_sq_by_k.size() == 3);
  CHECK(std::abs(path.residual_sq_by_k[0] - 2.0) <= 1e-12);
  CHECK(std::abs(path.residual_sq_by_k[1] - 0.2) <= 1e-12);
  CHECK(std::abs(path.residual_sq_by_k[2]) <= 1e-12);

  // One-step oracle: beta = g X^T Y with g = <Y, XX^T Y> / |XX^T Y|^2,
  // recomputed here straight from the fixture matrices.
  const std::vector<double> xty = prob.design.apply_transposed(prob.response);
  const std::vector<double> xxty = prob.design.apply(xty);
  const double g = dot(prob.response, xxty) / norm_sq(xxty);
  REQUIRE(path.beta_by_k[1].size() == 2);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(std::abs(path.beta_by_k[1][j] - g * xty[j]) <= 1e-12);
  CHECK(std::abs(path.beta_by_k[1][0] - 1.2 / std::sqrt(2.0)) <= 1e-12);
  CHECK(std::abs(path.beta_by_k[1][1] - 0.6) <= 1e-12);
  CHECK(std::abs(path.fitted_by_k[1][0] - 1.2) <= 1e-12);
  CHECK(std::abs(path.fitted_by_k[1][1] - 0.6) <= 1e-12);

  const std::vector<double> ls = fit_ls(s);
  for (std::size_t j = 0; j < 2; ++j)
    CHECK(std::abs(path.beta_by_k[2][j] - ls[j]) <= 1e-12);
}

TEST_CASE("path residuals and fits match direct matrix recomputation") {
  for (unsigned seed : {11u, 12u, 13u, 14u, 15u}) {
    const RegressionProblem prob = generate(path_spec(seed));
    const SpectralData s = spectral(prob);
    const PlsPath path = fit_pls(s, s.rank());
    const double y_sq = norm_sq(prob.response);
    for (std::size_t k = 0; k <= path.k_max; ++k) {
      CHECK(std::abs(path.residual_sq_by_k[k] -
                     direct_residual_sq(prob, path.beta_by_k[k])) <= 1e-10 * y_sq);
      const std::vector<double> fitted = prob.design.apply(path.beta_by_k[k]);
      for (std::size_t i = 0; i < fitted.size(); ++i)
        CHECK(std::abs(path.fitted_by_k[k][i] - fitted[i]) <= 1e-10 * std::sqrt(y_sq));
    }
  }
}

TEST_CASE("residuals decrease strictly and fitted norms grow strictly") {
  for (unsigned seed : {21u, 22u, 23u}) {
    const RegressionProblem prob = generate(path_spec(seed));
    const SpectralData s = spectral(prob);
    const PlsPath path = fit_pls(s, s.rank());
    REQUIRE(path.k_max == 5);
    for (std::size_t k = 0; k < path.k_max; ++k) {
      CHECK(path.residual_sq_by_k[k + 1] < path.residual_sq_by_k[k]);
      CHECK(norm_sq(path.fitted_by_k[k + 1]) > norm_sq(path.fitted_by_k[k]));
    }
  }
}

TEST_CASE("each fit is the orthogonal projection onto the fitted space") {
  const RegressionProblem prob = generate(path_spec(31));
  const SpectralData s = spectral(prob);
  const PlsPath path = fit_pls(s, s.rank());
  const double y_norm = std::sqrt(norm_sq(prob.response));
  const std::size_t n = prob.design.rows();
  const std::size_t p = prob.design.cols();

  for (std::size_t k = 1; k <= path.k_max; ++k) {
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i)
      resid[i] = prob.response[i] - path.fitted_by_k[k][i];

    // Residual orthogonal to every fitted-space direction X q_a.
    std::vector<std::vector<double>> w;
    for (std::size_t a = 0; a < k; ++a) {
      std::vector<double> col(p);
      for (std::size_t i = 0; i < p; ++i) col[i] = path.basis.vectors(i, a);
      w.push_back(prob.design.apply(col));
      CHECK(std::abs(dot(resid, w.back())) / std::sqrt(norm_sq(w.back())) <= 1e-8 * y_norm);
    }

    // Idempotence: projecting the fit onto the same space returns it.
    Matrix gram(k, k);
    std::vector<double> rhs(k);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = 0; b < k; ++b) gram(a, b) = dot(w[a], w[b]);
      rhs[a] = dot(w[a], path.fitted_by_k[k]);
    }
    const std::vector<double> c = solve_spd(gram, rhs);
    std::vector<double> twice(n, 0.0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t i = 0; i < n; ++i) twice[i] += c[a] * w[a][i];
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::abs(twice[i] - path.fitted_by_k[k][i]) <= 1e-8 * y_norm);
  }
}

TEST_CASE("full-length fit reaches the least-squares baseline") {
  for (unsigned seed : {41u, 42u, 43u}) {
    const RegressionProblem prob = generate(path_spec(seed));
    const SpectralData s = spectral(prob);
    const PlsPath path = fit_pls(s, s.rank());
    REQUIRE(path.k_max == s.rank());
    const std::vector<double> ls = fit_ls(s);
    double diff_sq = 0.0;
    for (std::size_t j = 0; j < ls.size(); ++j) {
      const double d = path.beta_by_k[path.k_max][j] - ls[j];
      diff_sq += d * d;
    }
    CHECK(std::sqrt(diff_sq / norm_sq(ls)) <= 1e-8);

    // Terminal residual is exactly the mass outside the column space.
    CHECK(std::abs(path.residual_sq_by_k[path.k_max] - direct_residual_sq(prob, ls)) <=
          1e-9 * norm_sq(prob.response));
    KahanSum tail;
    for (std::size_t i = s.rank(); i < prob.design.rows(); ++i)
      tail.add(s.p_hat[i] * s.p_hat[i]);
    CHECK(std::abs(path.residual_sq_by_k[path.k_max] - tail.value()) <=
          1e-9 * norm_sq(prob.response));
  }
}

TEST_CASE("square full-rank problems fit exactly at the full step count") {
  SyntheticSpec spec = path_spec(51);
  spec.n = 6;
  spec.p = 6;
  spec.spectrum.values = {4.0, 2.5, 1.9, 1.2, 0.8, 0.3};
  const RegressionProblem prob = generate(spec);
  const SpectralData s = spectral(prob);
  REQUIRE(s.rank() == 6);
  const PlsPath path = fit_pls(s, 6);
  CHECK(path.residual_sq_by_k[6] <= 1e-10 * norm_sq(prob.response));
}

TEST_CASE("response orthogonal to the column space truncates at step zero") {
  RegressionProblem prob;
  prob.design = Matrix(3, 2);
  prob.design(0, 0) = 1.0;
  prob.design(1, 1) = 1.0;
  prob.response = {0.0, 0.0, 5.0};
  const SpectralData s = spectral(prob);
  REQUIRE(s.rank() == 2);
  const PlsPath path = fit_pls(s, 2);
  CHECK(path.k_max == 0);
  CHECK(path.truncated);
  REQUIRE(path.residual_sq_by_k.size() == 1);
  CHECK(std::abs(path.residual_sq_by_k[0] - 25.0) <= 1e-12);
}

TEST_CASE("repeated eigenvalues stop the path at the distinct-value count") {
  const RegressionProblem prob = make_diagonal_problem({2.0, 2.0, 1.0}, {1.0, 1.0, 1.0});
  const SpectralData s = spectral(prob);
  REQUIRE(s.rank() == 3);
  const PlsPath path = fit_pls(s, 3);
  CHECK(path.k_max == 2);
  CHECK(path.truncated);
  // Two distinct eigenvalues: two steps already reach the least-squares fit.
  CHECK(path.residual_sq_by_k[2] <= 1e-12);
  const std::vector<double> ls = fit_ls(s);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::abs(path.beta_by_k[2][j] - ls[j]) <= 1e-8);
}

TEST_CASE("requesting more steps than the rank truncates with the flag") {
  const RegressionProblem prob = make_diagonal_problem({2.0, 1.0}, {1.0, 1.0});
  const SpectralData s = spectral(prob);
  const PlsPath path = fit_pls(s, 5);
  CHECK(path.k_max == 2);
  CHECK(path.truncated);
}

TEST_CASE("krylov basis is orthonormal and spans the power iterates") {
  const RegressionProblem prob = generate(path_spec(61));
  const SpectralData s = spectral(prob);
  const PlsPath path = fit_pls(s, 4);
  REQUIRE(path.basis.dim == 4);
  const std::size_t p = prob.design.cols();

  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      double d = 0.0;
      for (std::size_t i = 0; i < p; ++i)
        d += path.basis.vectors(i, a) * path.basis.vectors(i, b);
      CHECK(std::abs(d - (a == b ? 1.0 : 0.0)) <= 1e-10);
    }

  // Monomial iterate (X^T X)^j X^T Y must lie in the span of the basis.
  std::vector<double> iterate = prob.design.apply_transposed(prob.response);
  for (std::size_t j = 0; j < 4; ++j) {
    if (j > 0) iterate = prob.design.apply_transposed(prob.design.apply(iterate));
    std::vector<double> resid = iterate;
    for (std::size_t a = 0; a < 4; ++a) {
      double d = 0.0;
      for (std::size_t i = 0; i < p; ++i) d += path.basis.vectors(i, a) * resid[i];
      for (std::size_t i = 0; i < p; ++i) resid[i] -= d * path.basis.vectors(i, a);
    }
    CHECK(std::sqrt(norm_sq(resid)) <= 1e-7 * std::sqrt(norm_sq(iterate)));
  }
}

TEST_CASE("stored moments equal the response power-iteration forms") {
  const RegressionProblem prob = generate(path_spec(71));
  const SpectralData s = spectral(prob);
  const PlsPath path = fit_pls(s, 3);
  // raw_moments[j] = <Y, (XX^T)^(j+1) Y>, recomputed by repeated products.
  std::vector<double> w = prob.response;
  for (std::size_t j = 0; j < path.basis.raw_moments.size(); ++j) {
    w = prob.design.apply(prob.design.apply_transposed(w));
    const double oracle = dot(prob.response, w);
    CHECK(std::abs(path.basis.raw_moments[j] - oracle) <= 1e-10 * std::abs(oracle));
  }
}

TEST_CASE("principal-component estimator on the fixture and in general") {
  const RegressionProblem prob = make_diagonal_problem({2.0, 1.0}, {1.0, 1.0});
  const SpectralData s = spectral(prob);
  const std::vector<double> pcr1 = fit_pcr(s, 1);
  CHECK(std::abs(pcr1[0] - 1.0 / std::sqrt(2.0)) <= 1e-12);
  CHECK(std::abs(pcr1[1]) <= 1e-12);
  CHECK(std::abs(direct_residual_sq(prob, pcr1) - 1.0) <= 1e-12);

  SUBCASE("full-depth principal components equal least squares") {
    for (unsigned seed : {81u, 82u}) {
      const RegressionProblem gp = generate(path_spec(seed));
      const SpectralData gs = spectral(gp);
      const std::vector<double> pcr_full = fit_pcr(gs, gs.rank());
      const std::vector<double> ls = fit_ls(gs);
      for (std::size_t j = 0; j < ls.size(); ++j)
        CHECK(std::abs(pcr_full[j] - ls[j]) <= 1e-10);
    }
  }
  SUBCASE("a dead leading direction contributes nothing") {
    const RegressionProblem dead = make_diagonal_problem({2.0, 1.0}, {0.0, 1.0});
    const std::vector<double> b = fit_pcr(spectral(dead), 1);
    CHECK(b[0] == 0.0);
    CHECK(b[1] == 0.0);
  }
  SUBCASE("depth bounds are enforced") {
    CHECK_THROWS_AS((void)fit_pcr(s, 0), InputError);
    CHECK_THROWS_AS((void)fit_pcr(s, 3), InputError);
    CHECK_THROWS_AS((void)fit_pls(s, 0), InputError);
  }
}

TEST_CASE("least-squares baseline properties") {
  SUBCASE("fixture values") {
    const RegressionProblem prob = make_diagonal_problem({2.0, 1.0}, {1.0, 1.0});
    const std::vector<double> ls = fit_ls(spectral(prob));
    CHECK(std::abs(ls[0] - 1.0 / std::sqrt(2.0)) <= 1e-12);
    CHECK(std::abs(ls[1] - 1.0) <= 1e-12);
    CHECK(std::abs(norm_sq(ls) - 1.5) <= 1e-12);
  }
  SUBCASE("orthonormal design columns give beta = X^T Y") {
    Rng rng(91);
    const Matrix q = random_orthonormal(6, rng);
    RegressionProblem prob;
    prob.design = Matrix(6, 3);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 3; ++j) prob.design(i, j) = q(i, j);
    prob.response.resize(6);
    for (double& v : prob.response) v = rng.gaussian();
    const std::vector<double> ls = fit_ls(spectral(prob));
    const std::vector<double> xty = prob.design.apply_transposed(prob.response);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(ls[j] - xty[j]) <= 1e-10);
  }
  SUBCASE("rank-deficient designs get a least-norm solution") {
    SyntheticSpec spec = path_spec(92);
    spec.n = 6;
    spec.p = 8;
    spec.spectrum.values = {3.0, 2.0, 1.0};  // rank 3 < p
    const RegressionProblem prob = generate(spec);
    const SpectralData s = spectral(prob);
    REQUIRE(s.rank() == 3);
    const std::vector<double> ls = fit_ls(s);
    const std::vector<double> in_v = s.svd.right_vectors.apply_transposed(ls);
    const double scale = std::sqrt(norm_sq(ls));
    for (std::size_t j = 3; j < 8; ++j) CHECK(std::abs(in_v[j]) <= 1e-10 * scale);
  }
}
