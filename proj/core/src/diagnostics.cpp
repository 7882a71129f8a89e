#include "plspoly/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "enumerate.hpp"
#include "plspoly/errors.hpp"
#include "plspoly/linalg.hpp"

namespace plspoly {

namespace {

constexpr double kDeadZone = 1e-9;      // sign checks ignore ties this close
constexpr double kClosedFormTol = 1e-7;  // closed form vs direct factors

const double kInf = std::numeric_limits<double>::infinity();

double rel_dev(double a, double b, double floor_scale) {
  const double scale = std::max({std::fabs(a), std::fabs(b), floor_scale});
  return scale > 0.0 ? std::fabs(a - b) / scale : 0.0;
}

// Indices of the full atoms that carry mass, descending like the support.
std::vector<std::size_t> live_atoms(const DiscreteMeasure& m) {
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.effective_mask[i]) live.push_back(i);
  return live;
}

// Out-of-range response energy: coordinates past the rank.
double tail_energy(const SpectralData& s) {
  KahanSum tail;
  for (std::size_t i = s.rank(); i < s.p_hat.size(); ++i)
    tail.add(s.p_hat[i] * s.p_hat[i]);
  return tail.value();
}

}  // namespace

std::vector<FilterFactors> filter_factors(
    const std::vector<ResidualPolynomial>& polys, const SpectralData& s) {
  const std::size_t r = s.rank();
  std::vector<FilterFactors> out;
  out.reserve(polys.size());
  for (const ResidualPolynomial& poly : polys) {
    if (poly.values_on_spectrum.size() != r)
      throw InputError(
          "filter_factors: polynomial values and spectrum sizes disagree");
    FilterFactors ff;
    ff.k = poly.degree;
    ff.factors.resize(r);
    ff.truncated.resize(r);
    for (std::size_t i = 0; i < r; ++i) {
      ff.factors[i] = 1.0 - poly.values_on_spectrum[i];
      ff.truncated[i] = std::clamp(ff.factors[i], -1.0, 1.0);
    }
    out.push_back(std::move(ff));
  }
  return out;
}

FilterTheoremReport check_filter_theorems(
    const std::vector<ResidualPolynomial>& polys,
    const std::vector<FilterFactors>& ffs, const SpectralData& s,
    const std::vector<const WeightTable*>& tables) {
  FilterTheoremReport rep;
  const DiscreteMeasure m = measure_of(s);
  const std::size_t r = m.size();
  const std::size_t big_k = m.effective_size();
  const std::vector<std::size_t> live = live_atoms(m);
  if (big_k == 0 || live.empty() || polys.empty()) return rep;

  const double lam_top = m.effective_support.front();
  const double lam_bot = m.effective_support.back();
  rep.spread_epsilon_bar = lam_top / lam_bot - 1.0;

  auto factors_for = [&](std::size_t k) -> const FilterFactors* {
    for (const FilterFactors& ff : ffs)
      if (ff.k == k) return &ff;
    return nullptr;
  };
  auto table_for = [&](std::size_t k) -> const WeightTable* {
    for (const WeightTable* t : tables)
      if (t != nullptr && t->k == k) return t;
    return nullptr;
  };
  auto flag = [&](std::size_t k, int item, std::size_t atom, double magnitude) {
    rep.violations.push_back({k, item, atom, magnitude});
  };

  // Clean spectra (no ties, no dead directions) keep the tuple indices of
  // the weight tables aligned with the full support; only then is the
  // reported distance bound meaningful.
  const bool clean = !m.has_dead_atom && big_k == r && big_k >= 2;
  const double log_ratio_pow =
      rep.spread_epsilon_bar > 0.0
          ? static_cast<double>(s.p_hat.size()) *
                std::log((lam_top - lam_bot) / lam_bot)
          : -kInf;

  for (const ResidualPolynomial& poly : polys) {
    const std::size_t k = poly.degree;
    if (poly.values_on_spectrum.size() != r)
      throw InputError(
          "check_filter_theorems: polynomial values and spectrum sizes disagree");
    const FilterFactors* ff = factors_for(k);
    if (ff == nullptr || ff->factors.size() != r)
      throw InputError("check_filter_theorems: no factor row for depth " +
                       std::to_string(k));
    ++rep.depths_checked;

    // (1) extreme factors: top oscillates with the parity of k, bottom
    // stays inside (0, 1); claims hold below the effective atom count.
    if (k < big_k) {
      const double f_top = ff->factors[live.front()];
      const double top_viol = (k % 2 == 1) ? (1.0 - kDeadZone) - f_top
                                           : f_top - (1.0 + kDeadZone);
      if (top_viol > 0.0) {
        rep.top_parity_worst = std::max(rep.top_parity_worst, top_viol);
        flag(k, 1, live.front(), top_viol);
      }
      const double f_bot = ff->factors[live.back()];
      const double bot_viol =
          std::max((0.0 - kDeadZone) - f_bot, f_bot - (1.0 + kDeadZone));
      if (bot_viol > 0.0) {
        rep.bottom_range_worst = std::max(rep.bottom_range_worst, bot_viol);
        flag(k, 1, live.back(), bot_viol);
      }
    }

    // (2) alternation: the side of 1 follows the parity of the root count
    // below the atom. Atoms sitting on a root are skipped.
    if (!poly.roots.empty()) {
      const double snap = 1e-9 * m.support.front();
      for (std::size_t idx : live) {
        const double lam = m.support[idx];
        double nearest = kInf;
        std::size_t below = 0;
        for (double theta : poly.roots) {
          nearest = std::min(nearest, std::fabs(theta - lam));
          if (theta < lam) ++below;
        }
        if (nearest <= snap) continue;
        const double f = ff->factors[idx];
        const double viol = (below % 2 == 0) ? f - (1.0 + kDeadZone)
                                             : (1.0 - kDeadZone) - f;
        if (viol > 0.0) {
          rep.alternation_worst = std::max(rep.alternation_worst, viol);
          flag(k, 2, idx, viol);
        }
      }

      // Ritz link: the factors again from the root product.
      rep.ritz_checked = true;
      for (std::size_t idx : live) {
        double prod = 1.0;
        for (double theta : poly.roots)
          prod *= (theta - m.support[idx]) / theta;
        const double v = poly.values_on_spectrum[idx];
        rep.ritz_worst = std::max(
            rep.ritz_worst, std::fabs(prod - v) / std::max(1.0, std::fabs(v)));
      }
    }

    // (3) endpoint spread bound: |Q_k| <= eps_i^k per atom.
    for (std::size_t idx : live) {
      const double lam = m.support[idx];
      const double eps_i = std::max(std::fabs(1.0 - lam / lam_top),
                                    std::fabs(1.0 - lam / lam_bot));
      const double bound = std::pow(eps_i, static_cast<double>(k));
      const double excess = std::fabs(poly.values_on_spectrum[idx]) - bound;
      if (excess > rep.spread_excess_worst) rep.spread_excess_worst = excess;
      if (excess > kDeadZone) flag(k, 3, idx, excess - kDeadZone);
    }

    // (5) printed distance-to-one bound, reported but never enforced: its
    // spectral-ratio power makes it vacuous or violated depending on the
    // spread, which is exactly what the report is for.
    if (clean && k >= 1 && k <= r) {
      const WeightTable* tk = table_for(k);
      const WeightTable* tkm1 = k >= 2 ? table_for(k - 1) : nullptr;
      if (tk != nullptr && (k == 1 || tkm1 != nullptr)) {
        std::vector<double> share_k(r, 0.0), share_km1(r, 0.0);
        for (std::size_t row = 0; row < tk->count; ++row)
          for (std::size_t l = 0; l < tk->k; ++l)
            share_k[tk->tuple_data[row * tk->k + l] - 1] += tk->weights[row];
        if (tkm1 != nullptr)
          for (std::size_t row = 0; row < tkm1->count; ++row)
            for (std::size_t l = 0; l < tkm1->k; ++l)
              share_km1[tkm1->tuple_data[row * tkm1->k + l] - 1] +=
                  tkm1->weights[row];
        for (std::size_t i = 0; i < r; ++i) {
          const double open_k = 1.0 - std::min(share_k[i], 1.0);
          const double s_k_log =
              open_k < 1e-14 ? -kInf : tk->normalizer_log + std::log(open_k);
          double s_km1_log = 0.0;
          if (tkm1 != nullptr) {
            const double open = 1.0 - std::min(share_km1[i], 1.0);
            s_km1_log =
                open < 1e-14 ? -kInf : tkm1->normalizer_log + std::log(open);
          }
          const double ph2 = s.p_hat[i] * s.p_hat[i];
          const double lam2 = s.lambdas[i] * s.lambdas[i];
          double inner;
          if (s_k_log == -kInf)
            inner = kInf;
          else if (s_km1_log == -kInf)
            inner = 0.0;
          else
            inner = ph2 * lam2 * std::exp(s_km1_log - s_k_log);
          double bound;
          if (inner == kInf)
            bound = 0.0;
          else
            bound = std::exp(log_ratio_pow - std::log1p(inner));
          if (!std::isfinite(bound)) continue;  // vacuously satisfied
          const double excess = std::fabs(poly.values_on_spectrum[i]) - bound;
          rep.distance_bound_excess =
              std::max(rep.distance_bound_excess, excess);
          rep.distance_bound_evaluated = true;
        }
      }
    }
  }

  // (4) depth K-1 closed form: the lowest depth whose enumeration collapses
  // to one surviving tuple per atom, evaluated on the effective view in the
  // log domain and matched at each node's nearest live atom.
  if (big_k >= 2) {
    const std::size_t kc = big_k - 1;
    const ResidualPolynomial* poly_kc = nullptr;
    for (const ResidualPolynomial& poly : polys)
      if (poly.degree == kc) poly_kc = &poly;
    const FilterFactors* ff_kc = factors_for(kc);
    if (poly_kc != nullptr && ff_kc != nullptr) {
      const std::vector<double>& sup = m.effective_support;
      const std::vector<double>& mass = m.effective_masses;
      double log_c = log_vandermonde_sq(sup);
      for (double g : mass) log_c += std::log(g);
      LogSum z;
      std::vector<double> sub(big_k - 1);
      for (std::size_t l = 0; l < big_k; ++l) {
        double term = 0.0;
        std::size_t at = 0;
        for (std::size_t j = 0; j < big_k; ++j) {
          if (j == l) continue;
          term += std::log(mass[j]) + std::log(sup[j]);
          sub[at++] = sup[j];
        }
        z.add_log(term + log_vandermonde_sq(sub));
      }
      log_c -= z.log_value();

      rep.closed_form_checked = true;
      for (std::size_t i = 0; i < big_k; ++i) {
        double log_den = std::log(mass[i]);
        for (std::size_t j = 0; j < big_k; ++j)
          if (j != i) log_den += std::log(std::fabs(sup[j] - sup[i]));
        const double sign = ((big_k - 1 - i) % 2 == 0) ? 1.0 : -1.0;
        const double f_closed = 1.0 - sign * std::exp(log_c - log_den);

        std::size_t rep_idx = live.front();
        double best = kInf;
        for (std::size_t idx : live) {
          const double d = std::fabs(m.support[idx] - sup[i]);
          if (d < best) {
            best = d;
            rep_idx = idx;
          }
        }
        const double f_direct = ff_kc->factors[rep_idx];
        const double dev = std::fabs(f_closed - f_direct) /
                           std::max({1.0, std::fabs(f_closed), std::fabs(f_direct)});
        rep.closed_form_worst = std::max(rep.closed_form_worst, dev);
        if (dev > kClosedFormTol) flag(kc, 4, rep_idx, dev - kClosedFormTol);
      }
    }
  }

  rep.pass = rep.violations.empty();
  return rep;
}

ShrinkageReport check_global_shrinkage(const PlsPath& path,
                                       const std::vector<double>& beta_ls) {
  ShrinkageReport rep;
  rep.ls_norm_sq = norm_sq(beta_ls);
  rep.norm_sq_by_k.reserve(path.beta_by_k.size());
  for (const std::vector<double>& beta : path.beta_by_k)
    rep.norm_sq_by_k.push_back(norm_sq(beta));
  for (std::size_t k = 0; k < rep.norm_sq_by_k.size(); ++k) {
    if (k > 0)
      rep.worst_consecutive = std::max(
          rep.worst_consecutive, rep.norm_sq_by_k[k - 1] - rep.norm_sq_by_k[k]);
    rep.worst_vs_ls =
        std::max(rep.worst_vs_ls, rep.norm_sq_by_k[k] - rep.ls_norm_sq);
  }
  const double tol = 1e-9 * rep.ls_norm_sq;
  rep.pass = rep.worst_consecutive <= tol && rep.worst_vs_ls <= tol;
  return rep;
}

double empirical_risk_closed_form(const SpectralData& s, std::size_t k,
                                  std::size_t budget) {
  const std::size_t r = s.rank();
  if (k > r)
    throw InputError("empirical_risk_closed_form: depth must be in [0, " +
                     std::to_string(r) + "]");
  const double tail = tail_energy(s);
  if (k == r) return tail;

  const std::size_t count_num =
      detail::combination_count_capped(r, k + 1, budget);
  const std::size_t count_den = detail::combination_count_capped(r, k, budget);
  if (count_num > budget || count_den > budget ||
      count_num + count_den > budget)
    throw CapabilityError("empirical_risk_closed_form: " + std::to_string(r) +
                          " choose " + std::to_string(k + 1) +
                          " exceeds the enumeration budget; compare against "
                          "the fit residual instead");

  std::vector<double> log_p2(r), log_m2(r);
  for (std::size_t i = 0; i < r; ++i) {
    log_p2[i] = std::log(s.p_hat[i] * s.p_hat[i]);
    log_m2[i] = log_p2[i] + 2.0 * std::log(s.lambdas[i]);
  }

  LogSum num;
  std::vector<double> lam_sub(k + 1);
  detail::for_each_combination(r, k + 1, [&](const std::vector<std::size_t>& c) {
    double lw = 0.0;
    for (std::size_t l = 0; l <= k; ++l) {
      lw += log_p2[c[l]];
      lam_sub[l] = s.lambdas[c[l]];
    }
    num.add_log(lw + log_vandermonde_sq(lam_sub));
  });

  double den_log = 0.0;
  if (k > 0) {
    LogSum den;
    std::vector<double> lam_den(k);
    detail::for_each_combination(r, k, [&](const std::vector<std::size_t>& c) {
      double lw = 0.0;
      for (std::size_t l = 0; l < k; ++l) {
        lw += log_m2[c[l]];
        lam_den[l] = s.lambdas[c[l]];
      }
      den.add_log(lw + log_vandermonde_sq(lam_den));
    });
    den_log = den.log_value();
    if (den_log == -kInf)
      throw NumericError(
          "empirical_risk_closed_form: every tuple at this depth has zero "
          "weight (dead directions or repeated eigenvalues); the ratio is "
          "undefined");
  }

  const double num_log = num.log_value();
  const double in_range = num_log == -kInf ? 0.0 : std::exp(num_log - den_log);
  return in_range + tail;
}

double empirical_risk_bound(const SpectralData& s, std::size_t k) {
  const std::size_t r = s.rank();
  if (k > r)
    throw InputError("empirical_risk_bound: depth must be in [0, " +
                     std::to_string(r) + "]");
  KahanSum in_range;
  for (std::size_t i = k; i < r; ++i) {
    double prod = 1.0;
    for (std::size_t l = 0; l < k; ++l)
      prod *= 1.0 - s.lambdas[i] / s.lambdas[l];
    in_range.add(prod * prod * s.p_hat[i] * s.p_hat[i]);
  }
  return in_range.value() + tail_energy(s);
}

double empirical_risk_rate_bound(const SpectralData& s, std::size_t k) {
  if (!s.beta_tilde.has_value() || !s.noise_sd.has_value())
    throw CapabilityError(
        "empirical_risk_rate_bound: needs the generating truth and noise "
        "level");
  const std::size_t r = s.rank();
  if (k > r)
    throw InputError("empirical_risk_rate_bound: depth must be in [0, " +
                     std::to_string(r) + "]");
  const std::size_t n = s.p_hat.size();
  const double sigma_sq = *s.noise_sd * *s.noise_sd;
  const double lam_min = r == n ? s.lambdas[r - 1] : 0.0;
  const double base = 1.0 - lam_min / s.lambdas.front();
  KahanSum signal;
  for (std::size_t i = k; i < r; ++i) {
    const double bt = (*s.beta_tilde)[i];
    signal.add(s.lambdas[i] * bt * bt);
  }
  const double in_range =
      std::pow(base, 2.0 * static_cast<double>(k)) *
      (signal.value() + static_cast<double>(r - k) * sigma_sq);
  const double tail = static_cast<double>(n - r) * sigma_sq;
  return (in_range + tail) / static_cast<double>(n);
}

std::vector<RiskReport> risk_report(const SpectralData& s, const PlsPath& path,
                                    const std::vector<ResidualPolynomial>& polys,
                                    std::size_t budget) {
  const std::size_t r = s.rank();
  const double floor_scale = 1e-9 * s.response_norm_sq();
  std::vector<RiskReport> out;
  out.reserve(polys.size());
  for (const ResidualPolynomial& poly : polys) {
    const std::size_t k = poly.degree;
    if (k > path.k_max)
      throw InputError("risk_report: path depth " + std::to_string(path.k_max) +
                       " does not cover polynomial degree " + std::to_string(k));
    if (poly.values_on_spectrum.size() != r)
      throw InputError("risk_report: polynomial values and spectrum sizes disagree");

    RiskReport row;
    row.k = k;
    row.empirical_risk_direct = path.residual_sq_by_k[k];
    try {
      row.empirical_risk_formula = empirical_risk_closed_form(s, k, budget);
      row.formula_evaluated = true;
      row.formula_rel_dev = rel_dev(row.empirical_risk_direct,
                                    row.empirical_risk_formula, floor_scale);
    } catch (const CapabilityError&) {
      // row keeps NaN and the evaluated flag stays off
    }

    KahanSum pcr;
    for (std::size_t i = k; i < s.p_hat.size(); ++i)
      pcr.add(s.p_hat[i] * s.p_hat[i]);
    row.pcr_risk = pcr.value();

    row.upper_bound = empirical_risk_bound(s, k);
    if (s.beta_tilde.has_value() && s.noise_sd.has_value()) {
      row.rate_bound = empirical_risk_rate_bound(s, k);
      row.rate_evaluated = true;
    }

    KahanSum gap, gap_bound;
    for (std::size_t i = 0; i < r; ++i) {
      const double q = poly.values_on_spectrum[i];
      gap.add(q * q * s.p_hat[i] * s.p_hat[i]);
      if (i >= k) gap_bound.add(s.p_hat[i] * s.p_hat[i]);
    }
    row.fit_gap_ls = gap.value();
    row.fit_gap_bound = gap_bound.value();

    out.push_back(row);
  }
  return out;
}

std::vector<MseReport> mse_decompositions(
    const SpectralData& s, const PlsPath& path,
    const std::vector<ResidualPolynomial>& polys) {
  if (!s.p_signal.has_value() || !s.eps_tilde.has_value())
    throw CapabilityError(
        "mse_decompositions: needs the generating truth and noise");
  const std::size_t r = s.rank();
  const std::vector<double>& p = *s.p_signal;
  const std::vector<double>& eps = *s.eps_tilde;
  const std::vector<double> signal_vec = s.svd.left_vectors.apply(p);
  const double floor_scale = 1e-9 * s.response_norm_sq();

  std::vector<MseReport> out;
  out.reserve(polys.size());
  for (const ResidualPolynomial& poly : polys) {
    const std::size_t k = poly.degree;
    if (k > path.k_max)
      throw InputError("mse_decompositions: path depth " +
                       std::to_string(path.k_max) +
                       " does not cover polynomial degree " + std::to_string(k));
    if (poly.values_on_spectrum.size() != r)
      throw InputError(
          "mse_decompositions: polynomial values and spectrum sizes disagree");

    MseReport row;
    row.k = k;

    const std::vector<double>& fitted = path.fitted_by_k[k];
    KahanSum direct;
    for (std::size_t i = 0; i < fitted.size(); ++i) {
      const double d = signal_vec[i] - fitted[i];
      direct.add(d * d);
    }
    row.mse_direct = direct.value();

    KahanSum bias, noise, alt_qpp, alt_eps, alt_qpe, filter, trunc;
    for (std::size_t i = 0; i < r; ++i) {
      const double q = poly.values_on_spectrum[i];
      const double f = 1.0 - q;
      bias.add(q * p[i] * p[i]);
      noise.add(f * eps[i] * eps[i]);
      alt_qpp.add(q * s.p_hat[i] * p[i]);
      alt_eps.add(eps[i] * eps[i]);
      alt_qpe.add(q * s.p_hat[i] * eps[i]);
      filter.add((1.0 - f) * p[i] * p[i] + f * eps[i] * eps[i]);
      const double ft = std::clamp(f, -1.0, 1.0);
      const double dt = p[i] - ft * s.p_hat[i];
      trunc.add(dt * dt);
    }
    row.bias_like = bias.value();
    row.noise_like = noise.value();
    row.mse_identity = row.bias_like + row.noise_like;
    row.mse_alt = alt_qpp.value() + alt_eps.value() - alt_qpe.value();
    row.filter_form = filter.value();
    row.mse_truncated = trunc.value();
    row.max_rel_dev =
        std::max({rel_dev(row.mse_direct, row.mse_identity, floor_scale),
                  rel_dev(row.mse_direct, row.mse_alt, floor_scale),
                  rel_dev(row.mse_direct, row.filter_form, floor_scale)});
    out.push_back(row);
  }
  return out;
}

GramTerms gram_determinant_terms(const SpectralData& s, std::size_t k) {
  if (!s.p_signal.has_value() || !s.eps_tilde.has_value())
    throw CapabilityError(
        "gram_determinant_terms: needs the generating truth and noise");
  const std::size_t r = s.rank();
  if (k < 1 || k > std::min<std::size_t>(12, r))
    throw InputError(
        "gram_determinant_terms: depth must be in [1, min(12, rank)]; mixed "
        "determinants are capped at order 13");

  const DiscreteMeasure m = measure_of(s);
  const RecurrencePolys rec = residuals_by_recurrence(m, k);
  if (rec.polys.size() < k)
    throw NumericError(
        "gram_determinant_terms: the polynomial family ends before this "
        "depth (repeated eigenvalues or dead directions)");
  const std::vector<double>& q = rec.polys[k - 1].values_on_spectrum;
  const std::vector<double>& p = *s.p_signal;
  const std::vector<double>& eps = *s.eps_tilde;

  // Moment sums: a[c] pairs signal with response, b[rho] noise with
  // response, d[t] response with itself, e0 noise with signal.
  std::vector<KahanSum> a(k + 1), b(k + 1), d(2 * k + 1);
  KahanSum e0;
  for (std::size_t i = 0; i < r; ++i) {
    const double ph = s.p_hat[i];
    e0.add(eps[i] * p[i]);
    double pw = 1.0;
    for (std::size_t t = 1; t <= 2 * k; ++t) {
      pw *= s.lambdas[i];
      if (t <= k) {
        a[t].add(pw * p[i] * ph);
        b[t].add(pw * eps[i] * ph);
      }
      if (t >= 2) d[t].add(pw * ph * ph);
    }
  }

  Matrix m1(k + 1, k + 1);
  m1(0, 0) = e0.value();
  for (std::size_t c = 1; c <= k; ++c) m1(0, c) = a[c].value();
  for (std::size_t rho = 1; rho <= k; ++rho) {
    m1(rho, 0) = b[rho].value();
    for (std::size_t c = 1; c <= k; ++c) m1(rho, c) = d[rho + c].value();
  }
  const Matrix m2 = m1.transposed();

  Matrix hankel(k, k);
  for (std::size_t row = 0; row < k; ++row)
    for (std::size_t col = 0; col < k; ++col)
      hankel(row, col) = d[row + col + 2].value();

  const SignedLogDet det1 = scaled_log_determinant(m1);
  const SignedLogDet det2 = scaled_log_determinant(m2);
  const SignedLogDet detz = scaled_log_determinant(hankel);
  if (detz.sign <= 0)
    throw NumericError(
        "gram_determinant_terms: the moment determinant vanished; the "
        "normalizer is undefined at this depth");

  GramTerms out;
  out.k = k;
  out.det_signal = det1.value();
  out.det_noise = det2.value();
  out.z_log = detz.log_abs;
  out.numeric_warning = det1.pivot_loss > 1e6 || det2.pivot_loss > 1e6 ||
                        detz.pivot_loss > 1e6;

  const double ratio1 =
      det1.sign == 0 ? 0.0 : det1.sign * std::exp(det1.log_abs - detz.log_abs);
  const double ratio2 =
      det2.sign == 0 ? 0.0 : det2.sign * std::exp(det2.log_abs - detz.log_abs);

  KahanSum qpp, eps_sq, qpe, mse;
  for (std::size_t i = 0; i < r; ++i) {
    const double ph = s.p_hat[i];
    qpp.add(q[i] * ph * p[i]);
    eps_sq.add(eps[i] * eps[i]);
    qpe.add(q[i] * ph * eps[i]);
    const double dm = p[i] - (1.0 - q[i]) * ph;
    mse.add(dm * dm);
  }
  out.signal_term = qpp.value() - ratio1;
  out.noise_term = eps_sq.value() - qpe.value() + ratio2;
  out.mse_direct = mse.value();

  // Explicit projector onto the fitted space, assembled from the moment
  // iterates in response coordinates and orthonormalized with a second pass.
  Matrix w(r, k);
  {
    std::vector<double> col(r);
    for (std::size_t i = 0; i < r; ++i) col[i] = s.p_hat[i];
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < r; ++i) col[i] *= s.lambdas[i];
      for (std::size_t i = 0; i < r; ++i) w(i, j) = col[i];
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t prev = 0; prev < j; ++prev) {
          double proj = 0.0;
          for (std::size_t i = 0; i < r; ++i) proj += w(i, prev) * w(i, j);
          for (std::size_t i = 0; i < r; ++i) w(i, j) -= proj * w(i, prev);
        }
      }
      double nrm = 0.0;
      for (std::size_t i = 0; i < r; ++i) nrm += w(i, j) * w(i, j);
      nrm = std::sqrt(nrm);
      if (nrm <= 0.0 || !std::isfinite(nrm))
        throw NumericError(
            "gram_determinant_terms: projector basis collapsed");
      for (std::size_t i = 0; i < r; ++i) w(i, j) /= nrm;
    }
  }
  std::vector<double> coef_p(k, 0.0), coef_e(k, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < r; ++i) {
      coef_p[j] += w(i, j) * p[i];
      coef_e[j] += w(i, j) * eps[i];
    }
  KahanSum sig_direct;
  for (std::size_t i = 0; i < r; ++i) {
    double proj = 0.0;
    for (std::size_t j = 0; j < k; ++j) proj += w(i, j) * coef_p[j];
    const double dd = p[i] - proj;
    sig_direct.add(dd * dd);
  }
  out.signal_direct = sig_direct.value();
  out.noise_direct = norm_sq(coef_e);

  const double floor_scale = 1e-9 * s.response_norm_sq();
  out.signal_dev = rel_dev(out.signal_term, out.signal_direct, floor_scale);
  out.noise_dev = rel_dev(out.noise_term, out.noise_direct, floor_scale);
  out.sum_dev =
      rel_dev(out.signal_term + out.noise_term, out.mse_direct, floor_scale);
  return out;
}

std::optional<TruncationCaveat> find_truncation_caveat(std::uint64_t seed_start,
                                                       std::size_t attempts) {
  SyntheticSpec spec;
  spec.n = 10;
  spec.p = 6;
  spec.spectrum.kind = SpectrumSpec::Kind::kGeometric;
  spec.spectrum.count = 5;
  spec.spectrum.first = 4.0;
  spec.spectrum.rate = 0.55;
  spec.beta_mode = BetaMode::kDenseGaussian;
  spec.noise_sd = 0.6;

  for (std::size_t t = 0; t < attempts; ++t) {
    spec.seed = seed_start + t;
    const SpectralData s = spectral(generate(spec));
    const DiscreteMeasure m = measure_of(s);
    if (m.degenerate) continue;
    const std::size_t depth = std::min<std::size_t>(3, m.effective_size());
    const RecurrencePolys rec = residuals_by_recurrence(m, depth);
    const std::vector<double>& p = *s.p_signal;
    for (const ResidualPolynomial& poly : rec.polys) {
      KahanSum plain, trunc;
      for (std::size_t i = 0; i < s.rank(); ++i) {
        const double f = 1.0 - poly.values_on_spectrum[i];
        const double ft = std::clamp(f, -1.0, 1.0);
        const double dp = p[i] - f * s.p_hat[i];
        const double dt = p[i] - ft * s.p_hat[i];
        plain.add(dp * dp);
        trunc.add(dt * dt);
      }
      if (trunc.value() >
          plain.value() * (1.0 + 1e-9) + 1e-12 * s.response_norm_sq())
        return TruncationCaveat{spec.seed, poly.degree, plain.value(),
                                trunc.value()};
    }
  }
  return std::nullopt;
}

}  // namespace plspoly
