#include "plspoly/residual_poly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "enumerate.hpp"
#include "plspoly/errors.hpp"
#include "plspoly/linalg.hpp"

namespace plspoly {

namespace {

using detail::combination_count_capped;
using detail::for_each_combination;

constexpr double kTieRel = 1e-12;        // atoms closer than this merge
constexpr double kDeadMassRel = 1e-24;   // p^2 below this fraction is dead

WeightTable build_weight_table(const std::vector<double>& lambdas,
                               const std::vector<double>& score_sq, std::size_t k,
                               std::size_t budget, const char* who) {
  const std::size_t r = lambdas.size();
  if (k == 0 || k > r)
    throw InputError(std::string(who) + ": depth must be in [1, " + std::to_string(r) + "]");
  const std::size_t count = combination_count_capped(r, k, budget);
  if (count > budget)
    throw CapabilityError(std::string(who) + ": " + std::to_string(r) + " choose " +
                          std::to_string(k) +
                          " exceeds the enumeration budget; use the recurrence route");

  WeightTable table;
  table.k = k;
  table.count = count;
  table.tuple_data.reserve(count * k);
  std::vector<double> log_weights;
  log_weights.reserve(count);
  LogSum total;
  std::vector<double> lam_subset(k);

  for_each_combination(r, k, [&](const std::vector<std::size_t>& c) {
    double lw = 0.0;
    for (std::size_t l = 0; l < k; ++l) {
      const std::size_t idx = c[l];
      lw += std::log(score_sq[idx]) + 2.0 * std::log(lambdas[idx]);
      lam_subset[l] = lambdas[idx];
    }
    lw += log_vandermonde_sq(lam_subset);
    log_weights.push_back(lw);
    total.add_log(lw);
    // store descending 1-based
    for (std::size_t l = 0; l < k; ++l)
      table.tuple_data.push_back(static_cast<std::uint32_t>(c[k - 1 - l] + 1));
  });

  table.normalizer_log = total.log_value();
  if (!(table.normalizer_log > -std::numeric_limits<double>::infinity()))
    throw NumericError(std::string(who) +
                       ": every tuple at this depth has zero weight (dead directions or "
                       "repeated eigenvalues); no polynomial of this degree exists");
  table.weights.resize(count);
  for (std::size_t t = 0; t < count; ++t)
    table.weights[t] = std::exp(log_weights[t] - table.normalizer_log);
  return table;
}

// Roots of the degree-k member: eigenvalues of the order-k Jacobi matrix,
// guaranteed real; returned descending.
std::vector<double> jacobi_roots(const std::vector<double>& alphas,
                                 const std::vector<double>& betas) {
  const std::size_t k = alphas.size();
  Matrix j(k, k);
  for (std::size_t a = 0; a < k; ++a) j(a, a) = alphas[a];
  for (std::size_t a = 0; a + 1 < k; ++a) {
    const double off = std::sqrt(betas[a]);
    j(a, a + 1) = off;
    j(a + 1, a) = off;
  }
  SymEig eig = sym_eig(j);
  std::reverse(eig.values.begin(), eig.values.end());
  return eig.values;
}

}  // namespace

double residual_value_from_roots(const std::vector<double>& roots, double x) {
  double v = 1.0;
  for (double theta : roots) v *= 1.0 - x / theta;
  return v;
}

DiscreteMeasure make_measure(std::vector<double> support, std::vector<double> masses) {
  if (support.size() != masses.size())
    throw InputError("make_measure: support and mass lengths differ");
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (!(support[i] > 0.0) || !std::isfinite(support[i]))
      throw InputError("make_measure: support must be strictly positive and finite");
    if (i + 1 < support.size() && support[i] < support[i + 1])
      throw InputError("make_measure: support must be descending");
    if (masses[i] < 0.0 || !std::isfinite(masses[i]))
      throw InputError("make_measure: masses must be nonnegative and finite");
  }

  DiscreteMeasure m;
  m.support = std::move(support);
  m.masses = std::move(masses);

  KahanSum mass_acc, proj_acc;
  for (std::size_t i = 0; i < m.size(); ++i) {
    mass_acc.add(m.masses[i]);
    proj_acc.add(m.masses[i] / m.support[i]);  // p_hat_i^2
  }
  m.total_mass = mass_acc.value();
  const double proj_total = proj_acc.value();

  m.effective_mask.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool live = m.masses[i] / m.support[i] > kDeadMassRel * proj_total;
    m.effective_mask[i] = live ? 1 : 0;
    if (!live) m.has_dead_atom = true;
  }

  // Merge numerically tied atoms, then keep the groups that carry real mass.
  const double tie_gap = m.size() ? kTieRel * m.support.front() : 0.0;
  std::size_t i = 0;
  while (i < m.size()) {
    std::size_t j = i + 1;
    while (j < m.size() && m.support[j - 1] - m.support[j] <= tie_gap) ++j;
    KahanSum group_mass, weighted;
    double plain = 0.0;
    for (std::size_t g = i; g < j; ++g) {
      group_mass.add(m.masses[g]);
      weighted.add(m.masses[g] * m.support[g]);
      plain += m.support[g];
    }
    const double gm = group_mass.value();
    const double node = gm > 0.0 ? weighted.value() / gm : plain / static_cast<double>(j - i);
    if (gm / node > kDeadMassRel * proj_total) {
      m.effective_support.push_back(node);
      m.effective_masses.push_back(gm);
    }
    i = j;
  }
  m.degenerate = m.effective_support.empty();
  return m;
}

DiscreteMeasure measure_of(const SpectralData& s) {
  const std::size_t r = s.rank();
  std::vector<double> support(s.lambdas.begin(), s.lambdas.begin() + r);
  std::vector<double> masses(r);
  for (std::size_t i = 0; i < r; ++i)
    masses[i] = s.lambdas[i] * s.p_hat[i] * s.p_hat[i];
  return make_measure(std::move(support), std::move(masses));
}

RecurrencePolys residuals_by_recurrence(const DiscreteMeasure& m, std::size_t k_max) {
  if (k_max == 0) throw InputError("residuals_by_recurrence: k_max must be >= 1");
  const std::vector<double>& x = m.effective_support;
  const std::vector<double>& w = m.effective_masses;
  const std::size_t big_k = x.size();
  const std::size_t r = m.size();

  RecurrencePolys out;
  const std::size_t steps = std::min(k_max, big_k);
  out.truncated = steps < k_max;
  if (steps == 0) return out;

  // Monic family evaluated on the effective atoms (inner products), the full
  // support (reported values), and at zero (the normalization).
  std::vector<double> cur(big_k, 1.0), prev(big_k, 0.0), next(big_k);
  std::vector<double> cur_full(r, 1.0), prev_full(r, 0.0), next_full(r);
  double cur0 = 1.0, prev0 = 0.0;
  double h_cur = m.total_mass, h_prev = 0.0;
  std::vector<double> alphas, betas;

  for (std::size_t j = 0; j < steps; ++j) {
    KahanSum weighted_sq;
    for (std::size_t i = 0; i < big_k; ++i) weighted_sq.add(w[i] * x[i] * cur[i] * cur[i]);
    const double alpha = weighted_sq.value() / h_cur;
    const double beta = j == 0 ? 0.0 : h_cur / h_prev;
    alphas.push_back(alpha);
    if (j > 0) betas.push_back(beta);

    for (std::size_t i = 0; i < big_k; ++i)
      next[i] = (x[i] - alpha) * cur[i] - beta * prev[i];
    for (std::size_t i = 0; i < r; ++i)
      next_full[i] = (m.support[i] - alpha) * cur_full[i] - beta * prev_full[i];
    const double next0 = (0.0 - alpha) * cur0 - beta * prev0;
    if (next0 == 0.0 || !std::isfinite(next0))
      throw NumericError("residuals_by_recurrence: monic value at zero vanished");

    ResidualPolynomial poly;
    poly.degree = j + 1;
    poly.alpha = alphas;
    poly.beta = betas;
    poly.monic_at_zero = next0;
    poly.values_on_spectrum.resize(r);
    for (std::size_t i = 0; i < r; ++i) poly.values_on_spectrum[i] = next_full[i] / next0;
    poly.roots = jacobi_roots(alphas, betas);
    out.polys.push_back(std::move(poly));

    if (j + 1 < steps) {
      KahanSum h_next;
      for (std::size_t i = 0; i < big_k; ++i) h_next.add(w[i] * next[i] * next[i]);
      if (!(h_next.value() > 0.0)) {
        out.truncated = true;  // family collapsed early
        break;
      }
      h_prev = h_cur;
      h_cur = h_next.value();
    }
    std::swap(prev, cur);
    std::swap(cur, next);
    std::swap(prev_full, cur_full);
    std::swap(cur_full, next_full);
    prev0 = cur0;
    cur0 = next0;
  }
  return out;
}

FormulaPoly residuals_by_formula(const SpectralData& s, std::size_t k, std::size_t budget) {
  const std::size_t r = s.rank();
  if (k == 0 || k > r)
    throw InputError("residuals_by_formula: depth must be in [1, rank]");
  std::vector<double> lambdas(s.lambdas.begin(), s.lambdas.begin() + r);
  std::vector<double> score_sq(r);
  for (std::size_t i = 0; i < r; ++i) score_sq[i] = s.p_hat[i] * s.p_hat[i];

  FormulaPoly out;
  out.table = build_weight_table(lambdas, score_sq, k, budget, "residuals_by_formula");
  out.poly.degree = k;
  out.poly.values_on_spectrum.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    KahanSum acc;
    for (std::size_t t = 0; t < out.table.count; ++t) {
      const double wt = out.table.weights[t];
      if (wt == 0.0) continue;
      double prod = wt;
      for (std::size_t l = 0; l < k; ++l) {
        const std::size_t idx = out.table.tuple_data[t * k + l] - 1;
        prod *= 1.0 - lambdas[i] / lambdas[idx];
      }
      acc.add(prod);
    }
    out.poly.values_on_spectrum[i] = acc.value();
  }
  return out;
}

WeightTable weight_expectation_approx(const std::vector<double>& lambdas,
                                      const std::vector<double>& p_signal, double sigma,
                                      std::size_t k, std::size_t budget) {
  if (lambdas.size() != p_signal.size())
    throw InputError("weight_expectation_approx: length mismatch");
  if (sigma < 0.0) throw InputError("weight_expectation_approx: negative sigma");
  for (std::size_t i = 0; i + 1 < lambdas.size(); ++i)
    if (lambdas[i] < lambdas[i + 1])
      throw InputError("weight_expectation_approx: eigenvalues must be descending");
  std::vector<double> score_sq(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    score_sq[i] = p_signal[i] * p_signal[i] + sigma * sigma;
  return build_weight_table(lambdas, score_sq, k, budget, "weight_expectation_approx");
}

PolyIdentityReport verify_poly_identities(const DiscreteMeasure& m,
                                          const std::vector<ResidualPolynomial>& polys,
                                          const std::vector<const WeightTable*>& tables) {
  PolyIdentityReport rep;
  rep.distinct_count = m.effective_size();
  const std::size_t r = m.size();
  std::vector<double> proj_sq(r);  // p_hat^2 per full atom
  for (std::size_t i = 0; i < r; ++i) proj_sq[i] = m.masses[i] / m.support[i];

  const double lam_max = rep.distinct_count ? m.effective_support.front() : 0.0;
  const double lam_min = rep.distinct_count ? m.effective_support.back() : 0.0;
  const double snap = 1e-9 * lam_max;

  for (std::size_t a = 0; a < polys.size(); ++a) {
    const ResidualPolynomial& pk = polys[a];

    // (a) roots live among the atoms: inside the effective range, at most one
    // per open gap, counting roots that sit on an atom as resolved.
    if (!pk.roots.empty() && rep.distinct_count > 0) {
      std::vector<std::size_t> per_gap(rep.distinct_count, 0);  // gap g: (eff[g+1], eff[g])
      for (double theta : pk.roots) {
        rep.root_interval_excess = std::max(rep.root_interval_excess, theta - lam_max);
        rep.root_interval_excess = std::max(rep.root_interval_excess, lam_min - theta);
        bool on_atom = false;
        for (double atom : m.effective_support)
          if (std::abs(theta - atom) <= snap) {
            on_atom = true;
            break;
          }
        if (on_atom) continue;
        for (std::size_t g = 0; g + 1 < rep.distinct_count; ++g)
          if (theta < m.effective_support[g] && theta > m.effective_support[g + 1]) {
            if (++per_gap[g] > 1) rep.gap_condition = false;
            break;
          }
      }
    }

    // (b) the self identity sum Q^2 p^2 = sum Q p^2.
    KahanSum sq_acc, lin_acc;
    for (std::size_t i = 0; i < r; ++i) {
      const double q = pk.values_on_spectrum[i];
      sq_acc.add(q * q * proj_sq[i]);
      lin_acc.add(q * proj_sq[i]);
    }
    rep.self_identity_dev =
        std::max(rep.self_identity_dev, std::abs(sq_acc.value() - lin_acc.value()));

    // (c) the nested cross identity: for j < k, sum Q_j Q_k p^2 = sum Q_k p^2.
    for (std::size_t b = 0; b < a; ++b) {
      const ResidualPolynomial& pj = polys[b];
      KahanSum cross;
      for (std::size_t i = 0; i < r; ++i)
        cross.add(pj.values_on_spectrum[i] * pk.values_on_spectrum[i] * proj_sq[i]);
      rep.pair_identity_dev =
          std::max(rep.pair_identity_dev, std::abs(cross.value() - lin_acc.value()));
    }

    // (d) value bounds: exact tuple bound when a table is available, the
    // endpoint-spread bound always.
    const WeightTable* table = a < tables.size() ? tables[a] : nullptr;
    if (table != nullptr && table->k == pk.degree) {
      rep.tuple_bound_checked = true;
      for (std::size_t i = 0; i < r; ++i) {
        double bound = 0.0;
        for (std::size_t t = 0; t < table->count; ++t) {
          double prod = 1.0;
          for (std::size_t l = 0; l < table->k; ++l) {
            const std::size_t idx = table->tuple_data[t * table->k + l] - 1;
            prod *= std::abs(1.0 - m.support[i] / m.support[idx]);
          }
          bound = std::max(bound, prod);
        }
        rep.tuple_bound_excess =
            std::max(rep.tuple_bound_excess, std::abs(pk.values_on_spectrum[i]) - bound);
      }
    }
    if (rep.distinct_count > 0) {
      for (std::size_t i = 0; i < r; ++i) {
        const double eps_i = std::max(std::abs(1.0 - m.support[i] / lam_max),
                                      std::abs(1.0 - m.support[i] / lam_min));
        const double bound = std::pow(eps_i, static_cast<double>(pk.degree));
        rep.spread_bound_excess =
            std::max(rep.spread_bound_excess, std::abs(pk.values_on_spectrum[i]) - bound);
      }
    }

    // (e) the family stops at the effective atom count; the terminal member
    // vanishes on every effective atom.
    if (pk.degree > rep.distinct_count) rep.family_terminates = false;
    if (pk.degree == rep.distinct_count)
      for (std::size_t i = 0; i < r; ++i)
        if (m.effective_mask[i])
          rep.terminal_value_dev =
              std::max(rep.terminal_value_dev, std::abs(pk.values_on_spectrum[i]));
  }
  return rep;
}

}  // namespace plspoly
