#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "plspoly/model.hpp"
#include "plspoly/pls.hpp"
#include "plspoly/residual_poly.hpp"

namespace plspoly {

// Per-direction shrink/expand weights of the projection estimator relative
// to least squares at one depth: factors[i] = 1 - Q_k(lambda_i) on the full
// support. truncated clips each factor to [-1, 1]; the clipped estimator is
// bounded but its prediction error can exceed the plain one.
struct FilterFactors {
  std::size_t k = 0;
  std::vector<double> factors;
  std::vector<double> truncated;
};

std::vector<FilterFactors> filter_factors(
    const std::vector<ResidualPolynomial>& polys, const SpectralData& s);

// One failed sign or bound claim, located by depth, claim, and atom.
// item: 1 extreme-factor parity/range, 2 root alternation, 3 endpoint
// spread bound, 4 depth K-1 closed form. magnitude is the distance past
// the allowance (dead zone or tolerance already subtracted).
struct FilterTheoremViolation {
  std::size_t k = 0;
  int item = 0;
  std::size_t atom = 0;  // full-support index; size() when not atom-bound
  double magnitude = 0.0;
};

// Outcome of the shrink/expand checks across a polynomial family. The
// enforced claims: (1) for k below the effective atom count, the factor at
// the top atom sits above 1 for odd k and below 1 for even k, while the
// bottom factor stays inside (0, 1); (2) factors cross 1 exactly at the
// polynomial roots, so the side of 1 follows the parity of the root count
// below each atom; (3) |1 - f_i| <= eps_i^k with eps_i the worst relative
// distance of atom i to the effective endpoints; (4) at depth K-1 the
// factors match the explicit product closed form. The tuple-ratio distance
// bound (5) is evaluated when weight tables are supplied and only
// reported, never enforced, since its printed exponent makes it loose.
// The Ritz link (factors reproduced from the root product) rides along.
struct FilterTheoremReport {
  std::size_t depths_checked = 0;
  double top_parity_worst = 0.0;     // item 1, distance past the dead zone
  double bottom_range_worst = 0.0;   // item 1
  double alternation_worst = 0.0;    // item 2
  double spread_excess_worst = 0.0;  // item 3, |Q_k| minus eps_i^k
  double spread_epsilon_bar = 0.0;   // global endpoint spread ratio
  bool closed_form_checked = false;
  double closed_form_worst = 0.0;  // item 4, relative deviation
  bool distance_bound_evaluated = false;
  double distance_bound_excess = 0.0;  // item 5, report only
  bool ritz_checked = false;
  double ritz_worst = 0.0;  // |root product - tabulated| / max(1, |value|)
  std::vector<FilterTheoremViolation> violations;
  bool pass = true;  // no violations among items 1-4
};

// polys must be tabulated on s's full spectrum; entries without roots skip
// the alternation and Ritz checks. tables (matched to depths by their k)
// enable the reported distance bound on problems without ties or dead
// directions.
FilterTheoremReport check_filter_theorems(
    const std::vector<ResidualPolynomial>& polys,
    const std::vector<FilterFactors>& ffs, const SpectralData& s,
    const std::vector<const WeightTable*>& tables = {});

// Squared-norm path of the estimator against least squares: the norms must
// grow along the path and stay below the least-squares norm, both within
// 1e-9 of the least-squares scale.
struct ShrinkageReport {
  std::vector<double> norm_sq_by_k;  // k = 0..k_max
  double ls_norm_sq = 0.0;
  double worst_consecutive = 0.0;  // max of ||b_{k-1}||^2 - ||b_k||^2
  double worst_vs_ls = 0.0;        // max of ||b_k||^2 - ls_norm_sq
  bool pass = true;
};

ShrinkageReport check_global_shrinkage(const PlsPath& path,
                                       const std::vector<double>& beta_ls);

// Fit residual ||Y - X b_k||^2 as the enumeration ratio: tuples one longer
// than the depth (projections and Vandermonde only) over the depth-k
// normalizer, plus the out-of-range response energy. Depth r returns the
// out-of-range part alone. Budget covers both enumerations; exceeding it is
// a CapabilityError.
double empirical_risk_closed_form(const SpectralData& s, std::size_t k,
                                  std::size_t budget = kDefaultEnumBudget);

// Product upper bound on the fit residual: the top-k eigenvalue products
// against every deeper atom, plus the out-of-range energy.
double empirical_risk_bound(const SpectralData& s, std::size_t k);

// Expected-risk rate form for synthetic problems: the spectral-ratio power
// against the truth coordinates and noise level, averaged per row. Bounds
// the mean of the fit residual over noise draws, not one realization;
// needs truth and noise level.
double empirical_risk_rate_bound(const SpectralData& s, std::size_t k);

// Per-depth fit-residual identities and comparisons. Relative deviations
// carry a floor of 1e-9 of the response energy.
struct RiskReport {
  std::size_t k = 0;
  double empirical_risk_direct = 0.0;
  double empirical_risk_formula = std::numeric_limits<double>::quiet_NaN();
  bool formula_evaluated = false;
  double formula_rel_dev = std::numeric_limits<double>::quiet_NaN();
  double pcr_risk = 0.0;     // top-k spectral truncation residual, full tail
  double upper_bound = 0.0;  // product bound
  double rate_bound = std::numeric_limits<double>::quiet_NaN();
  bool rate_evaluated = false;
  double fit_gap_ls = 0.0;     // ||X b_ls - X b_k||^2 = sum Q_k^2 p_hat^2
  double fit_gap_bound = 0.0;  // sum of p_hat^2 over ranks past k
};

// One row per polynomial degree; the path must cover those depths.
std::vector<RiskReport> risk_report(const SpectralData& s, const PlsPath& path,
                                    const std::vector<ResidualPolynomial>& polys,
                                    std::size_t budget = kDefaultEnumBudget);

// Squared prediction error of one depth split three equivalent ways, for
// problems that carry truth and noise. bias_like and noise_like are the two
// halves of mse_identity; filter_form restates it through the factors;
// mse_truncated replaces the factors by their clipped variant.
struct MseReport {
  std::size_t k = 0;
  double mse_direct = 0.0;    // ||X truth - fitted_k||^2
  double mse_identity = 0.0;  // sum Q p^2 + sum (1-Q) eps^2
  double mse_alt = 0.0;       // sum Q p_hat p + sum eps^2 - sum Q p_hat eps
  double filter_form = 0.0;   // sum (1-f) p^2 + sum f eps^2
  double bias_like = 0.0;
  double noise_like = 0.0;
  double mse_truncated = 0.0;
  double max_rel_dev = 0.0;  // worst of the three forms against direct
};

std::vector<MseReport> mse_decompositions(
    const SpectralData& s, const PlsPath& path,
    const std::vector<ResidualPolynomial>& polys);

// Prediction-error split through the mixed moment determinants:
// signal_term = ||X truth - proj X truth||^2 from the signal lemma,
// noise_term = ||proj noise||^2 from its transposed companion, each a
// plain moment sum corrected by a determinant ratio against the moment
// Gram determinant (exp(z_log)). Both are re-derived here with an explicit
// orthonormal projector for comparison; deviations are relative with a
// floor of 1e-9 of the response energy.
struct GramTerms {
  std::size_t k = 0;
  double signal_term = 0.0;
  double noise_term = 0.0;
  double signal_direct = 0.0;
  double noise_direct = 0.0;
  double mse_direct = 0.0;
  double det_signal = 0.0;  // mixed determinant, signal layout
  double det_noise = 0.0;   // transposed layout
  double z_log = 0.0;       // log of the moment Gram determinant
  bool numeric_warning = false;  // pivot spread beyond 1e6 in any determinant
  double signal_dev = 0.0;
  double noise_dev = 0.0;
  double sum_dev = 0.0;  // signal_term + noise_term vs mse_direct
};

// Needs truth and noise; depth capped at 12 (order-13 determinants).
GramTerms gram_determinant_terms(const SpectralData& s, std::size_t k);

// A found instance where clipping the factors to [-1, 1] degrades the
// prediction error: expansion past 1 was compensating noise.
struct TruncationCaveat {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  double mse_plain = 0.0;
  double mse_truncated = 0.0;
};

// Scans seeded synthetic problems for a truncation caveat instance.
std::optional<TruncationCaveat> find_truncation_caveat(std::uint64_t seed_start,
                                                       std::size_t attempts);

}  // namespace plspoly
