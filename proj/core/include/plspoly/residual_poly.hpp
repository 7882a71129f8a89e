#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "plspoly/model.hpp"

namespace plspoly {

// Discrete spectral measure: atom lambda_i carries mass lambda_i * p_hat_i^2.
// Held twice: the full atom list as given, and the effective view that merges
// numerically tied atoms and drops the ones the response never touches. The
// polynomial family lives on the effective view; its length bounds the family.
struct DiscreteMeasure {
  std::vector<double> support;  // full, descending, strictly positive
  std::vector<double> masses;   // full, >= 0
  std::vector<std::uint8_t> effective_mask;  // per full atom: carries real mass
  std::vector<double> effective_support;     // merged + filtered, descending
  std::vector<double> effective_masses;
  double total_mass = 0.0;
  bool has_dead_atom = false;  // some atom carries (numerically) no mass
  bool degenerate = false;     // no effective atoms at all

  std::size_t size() const { return support.size(); }
  std::size_t effective_size() const { return effective_support.size(); }
};

DiscreteMeasure make_measure(std::vector<double> support, std::vector<double> masses);
DiscreteMeasure measure_of(const SpectralData& s);

// One member of the residual family: degree k, value 1 at zero, orthogonal to
// all lower degrees under the measure. Values are tabulated on the full
// support; roots are the nodes of the k-point quadrature of the measure.
struct ResidualPolynomial {
  std::size_t degree = 0;
  std::vector<double> values_on_spectrum;  // on the full support
  std::vector<double> alpha;               // recurrence diagonal, length degree
  std::vector<double> beta;                // recurrence ratios, length degree-1
  std::vector<double> roots;               // descending; empty on the sum route
  double monic_at_zero = 0.0;              // monic value at 0; 0 on the sum route
};

// evaluates prod_j (1 - x / roots[j])
double residual_value_from_roots(const std::vector<double>& roots, double x);

struct RecurrencePolys {
  std::vector<ResidualPolynomial> polys;  // degrees 1..achieved
  bool truncated = false;                 // requested degree exceeds the family
};

// Three-term recurrence route (Stieltjes procedure on the effective atoms).
RecurrencePolys residuals_by_recurrence(const DiscreteMeasure& m, std::size_t k_max);

// Probability table over descending index tuples j_1 > ... > j_k: each tuple
// is weighted by prod_l score_l * lambda_l^2 times the squared Vandermonde of
// its eigenvalues, normalized to sum one. Rows are stored flat, count x k.
struct WeightTable {
  std::size_t k = 0;
  std::size_t count = 0;
  std::vector<std::uint32_t> tuple_data;  // 1-based, descending within a row
  std::vector<double> weights;
  double normalizer_log = 0.0;  // log of the unnormalized total

  std::vector<std::uint32_t> tuple(std::size_t row) const {
    return {tuple_data.begin() + static_cast<std::ptrdiff_t>(row * k),
            tuple_data.begin() + static_cast<std::ptrdiff_t>((row + 1) * k)};
  }
};

inline constexpr std::size_t kDefaultEnumBudget = 2'000'000;

struct FormulaPoly {
  ResidualPolynomial poly;
  WeightTable table;
};

// Enumeration route: the same polynomial written as the weight-table average
// of elementary root products, evaluated with compensated summation.
FormulaPoly residuals_by_formula(const SpectralData& s, std::size_t k,
                                 std::size_t budget = kDefaultEnumBudget);

// Noise-averaged weight surrogate: the enumeration weights with each squared
// projection replaced by its mean p_j^2 + sigma^2 (first-order only; callers
// compare against Monte Carlo rather than trusting a tolerance).
WeightTable weight_expectation_approx(const std::vector<double>& lambdas,
                                      const std::vector<double>& p_signal,
                                      double sigma, std::size_t k,
                                      std::size_t budget = kDefaultEnumBudget);

// Structural checks on a computed family; raw deviations, no thresholds.
struct PolyIdentityReport {
  double root_interval_excess = 0.0;  // distance of any root outside the atom range
  bool gap_condition = true;          // at most one root per open spectral gap
  double self_identity_dev = 0.0;     // max_k |sum Q^2 p^2 - sum Q p^2|
  double pair_identity_dev = 0.0;     // max_{j<k} |sum Q_j Q_k p^2 - sum Q_k p^2|
  double tuple_bound_excess = 0.0;    // value vs max tuple product, when tables given
  bool tuple_bound_checked = false;
  double spread_bound_excess = 0.0;   // value vs per-atom endpoint spread power
  double terminal_value_dev = 0.0;    // |Q_K| on effective atoms when degree K present
  bool family_terminates = true;      // no polynomial of degree > effective size
  std::size_t distinct_count = 0;     // effective atom count K
};

PolyIdentityReport verify_poly_identities(
    const DiscreteMeasure& m, const std::vector<ResidualPolynomial>& polys,
    const std::vector<const WeightTable*>& tables = {});

}  // namespace plspoly
