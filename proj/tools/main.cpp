// Command line front end: CSV/synthetic ingestion, fitting, diagnostic
// reports, Monte Carlo simulation, and the identity verification sweep.
//
// Exit codes: 0 success, 1 verification failure, 2 input error, 3 numeric
// or capability error. Reports are deterministic: the same config and seed
// produce byte-identical output files (timings are never written).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "plspoly/diagnostics.hpp"
#include "plspoly/errors.hpp"
#include "plspoly/model.hpp"
#include "plspoly/pls.hpp"
#include "plspoly/report.hpp"
#include "plspoly/residual_poly.hpp"
#include "plspoly/verify.hpp"

namespace {

using namespace plspoly;

struct RunConfig {
  std::string design_path;
  std::string response_path;
  bool center = false;
  std::string spec_path;
  std::size_t k_max = 0;  // 0: use the full rank
  std::string out_path;
  std::string format;  // json or csv; empty picks the command default
  std::optional<std::uint64_t> seed;
  double rel_tol = 1e-7;         // diagnose: within_tol annotations
  double verify_rel_tol = 0.0;   // verify: threshold relaxation floor
  std::size_t enum_budget = kDefaultEnumBudget;
  std::string suite;
  std::size_t problems = 200;
  bool inject_perturbation = false;
};

// ---------------------------------------------------------------------------
// plumbing

void write_output(const RunConfig& cfg, const std::string& text) {
  if (cfg.out_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
    if (text.empty() || text.back() != '\n') std::fputc('\n', stdout);
    return;
  }
  std::ofstream out(cfg.out_path, std::ios::binary);
  if (!out) throw InputError("cannot open output file: " + cfg.out_path);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw InputError("write failed: " + cfg.out_path);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 step over seed + odd stride; decorrelates replication streams.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// synthetic spec ingestion

const char* kSpecKeys[] = {"n",        "p",          "spectrum",    "beta_mode",
                           "noise_sd", "noise_dist", "seed",        "replications"};
const char* kSpectrumKeys[] = {"kind", "values", "count", "first",
                               "rate", "center", "spread"};

void reject_unknown_keys(const nlohmann::json& j, const char* const* known,
                         std::size_t count, const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (std::size_t i = 0; i < count; ++i)
      if (item.key() == known[i]) ok = true;
    if (!ok) throw InputError("unknown key \"" + item.key() + "\" in " + where);
  }
}

SpectrumSpec parse_spectrum(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object())
    throw InputError("\"spectrum\" must be an object in " + path);
  reject_unknown_keys(j, kSpectrumKeys, std::size(kSpectrumKeys),
                      path + " spectrum");
  SpectrumSpec spec;
  const std::string kind = j.value("kind", std::string());
  if (kind == "explicit") {
    spec.kind = SpectrumSpec::Kind::kExplicit;
    if (!j.contains("values") || !j["values"].is_array())
      throw InputError("explicit spectrum needs a \"values\" array in " + path);
    for (const auto& v : j["values"])
      spec.values.push_back(v.get<double>());
  } else if (kind == "geometric") {
    spec.kind = SpectrumSpec::Kind::kGeometric;
    spec.count = j.at("count").get<std::size_t>();
    spec.first = j.value("first", 1.0);
    spec.rate = j.at("rate").get<double>();
  } else if (kind == "clustered") {
    spec.kind = SpectrumSpec::Kind::kClustered;
    spec.count = j.at("count").get<std::size_t>();
    spec.center = j.value("center", 1.0);
    spec.spread = j.value("spread", 0.05);
  } else {
    throw InputError(
        "spectrum \"kind\" must be explicit, geometric, or clustered in " +
        path);
  }
  return spec;
}

SyntheticSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open spec file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InputError("spec file " + path + ": " + e.what());
  }
  if (!j.is_object()) throw InputError("spec file " + path + " is not an object");
  reject_unknown_keys(j, kSpecKeys, std::size(kSpecKeys), path);

  SyntheticSpec spec;
  try {
    spec.n = j.at("n").get<std::size_t>();
    spec.p = j.at("p").get<std::size_t>();
    spec.spectrum = parse_spectrum(j.at("spectrum"), path);
    spec.noise_sd = j.value("noise_sd", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.replications = j.value("replications", std::size_t{1});

    const std::string mode = j.value("beta_mode", std::string("dense"));
    if (mode == "dense")
      spec.beta_mode = BetaMode::kDenseGaussian;
    else if (mode == "sparse")
      spec.beta_mode = BetaMode::kSparse;
    else if (mode == "aligned-top" || mode == "aligned_top")
      spec.beta_mode = BetaMode::kAlignedTop;
    else
      throw InputError("beta_mode must be dense, sparse, or aligned-top in " +
                       path);

    const std::string dist = j.value("noise_dist", std::string("gaussian"));
    if (dist == "gaussian")
      spec.noise_dist = NoiseDist::kGaussian;
    else if (dist == "uniform")
      spec.noise_dist = NoiseDist::kUniform;
    else if (dist == "rademacher")
      spec.noise_dist = NoiseDist::kRademacher;
    else
      throw InputError(
          "noise_dist must be gaussian, uniform, or rademacher in " + path);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("spec file " + path + ": " + e.what());
  }
  return spec;
}

// Exactly one input source; files and synthetic specs are exclusive.
RegressionProblem acquire_problem(const RunConfig& cfg, bool* synthetic) {
  const bool files = !cfg.design_path.empty() || !cfg.response_path.empty();
  const bool spec = !cfg.spec_path.empty();
  if (files == spec)
    throw InputError(
        "provide either --design/--response or --spec, not both or neither");
  if (files) {
    if (cfg.design_path.empty() || cfg.response_path.empty())
      throw InputError("--design and --response must be given together");
    *synthetic = false;
    return load_csv(cfg.design_path, cfg.response_path, cfg.center);
  }
  if (cfg.center)
    throw InputError(
        "--center applies to file input; synthetic problems are generated "
        "uncentered so the stored truth stays exact");
  *synthetic = true;
  SyntheticSpec s = parse_spec_file(cfg.spec_path);
  if (cfg.seed.has_value()) s.seed = *cfg.seed;
  return generate(s);
}

// ---------------------------------------------------------------------------
// shared fit assembly

struct FitBundle {
  SpectralData s;
  PlsPath path;
  std::vector<ResidualPolynomial> polys;  // degrees 1..path.k_max at most
  std::vector<FilterFactors> ffs;
};

FitBundle assemble_fit(const RegressionProblem& problem, std::size_t k_max) {
  FitBundle b;
  b.s = spectral(problem);
  if (b.s.rank() == 0)
    throw InputError("design has rank zero; nothing to fit");
  const std::size_t request = k_max == 0 ? b.s.rank() : k_max;
  b.path = fit_pls(b.s, request);
  const DiscreteMeasure m = measure_of(b.s);
  if (!m.degenerate && b.path.k_max >= 1) {
    b.polys = residuals_by_recurrence(m, b.path.k_max).polys;
    if (b.polys.size() > b.path.k_max) b.polys.resize(b.path.k_max);
    b.ffs = filter_factors(b.polys, b.s);
  }
  return b;
}

void json_filter_factors(JsonWriter& w, const std::vector<FilterFactors>& ffs) {
  w.begin_array();
  for (const FilterFactors& f : ffs) {
    w.begin_object();
    w.key("k");
    w.value_size(f.k);
    w.key("factors");
    w.number_array(f.factors);
    w.key("truncated_factors");
    w.number_array(f.truncated);
    w.end_object();
  }
  w.end_array();
}

void json_problem_header(JsonWriter& w, const char* command,
                         const RunConfig& cfg, const FitBundle& b,
                         bool synthetic) {
  w.key("schema_version");
  w.value_size(1);
  w.key("command");
  w.value(command);
  w.key("source");
  w.value(synthetic ? "synthetic" : "files");
  w.key("centered");
  w.value(cfg.center);
  w.key("n");
  w.value_size(b.s.p_hat.size());
  w.key("p");
  w.value_size(b.path.beta_by_k.empty() ? 0 : b.path.beta_by_k[0].size());
  w.key("rank");
  w.value_size(b.s.rank());
  w.key("k_max");
  w.value_size(b.path.k_max);
  w.key("truncated");
  w.value(b.path.truncated);
}

// ---------------------------------------------------------------------------
// fit

std::string fit_json(const RunConfig& cfg, const FitBundle& b, bool synthetic) {
  JsonWriter w;
  w.begin_object();
  json_problem_header(w, "fit", cfg, b, synthetic);
  w.key("residual_sq");
  w.number_array(b.path.residual_sq_by_k);
  w.key("beta_by_k");
  w.begin_array();
  for (const std::vector<double>& beta : b.path.beta_by_k) w.number_array(beta);
  w.end_array();
  w.key("filter_factors");
  json_filter_factors(w, b.ffs);
  w.end_object();
  return w.str();
}

std::string fit_csv(const FitBundle& b) {
  CsvWriter w;
  const std::size_t p = b.path.beta_by_k.empty() ? 0 : b.path.beta_by_k[0].size();
  const std::size_t r = b.s.rank();
  w.cell("k");
  w.cell("residual_sq");
  for (std::size_t j = 1; j <= p; ++j) w.cell("beta_" + std::to_string(j));
  for (std::size_t i = 1; i <= r; ++i) w.cell("factor_" + std::to_string(i));
  for (std::size_t i = 1; i <= r; ++i)
    w.cell("truncated_factor_" + std::to_string(i));
  w.end_row();
  for (std::size_t k = 0; k <= b.path.k_max; ++k) {
    w.cell_size(k);
    w.cell(b.path.residual_sq_by_k[k]);
    for (double v : b.path.beta_by_k[k]) w.cell(v);
    const FilterFactors* f =
        (k >= 1 && k <= b.ffs.size()) ? &b.ffs[k - 1] : nullptr;
    for (std::size_t i = 0; i < r; ++i) w.cell(f ? f->factors[i] : 0.0);
    for (std::size_t i = 0; i < r; ++i) w.cell(f ? f->truncated[i] : 0.0);
    w.end_row();
  }
  return w.str();
}

int cmd_fit(const RunConfig& cfg) {
  bool synthetic = false;
  const RegressionProblem problem = acquire_problem(cfg, &synthetic);
  const FitBundle b = assemble_fit(problem, cfg.k_max);
  write_output(cfg, cfg.format == "csv" ? fit_csv(b) : fit_json(cfg, b, synthetic));
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseData {
  std::vector<RiskReport> risk;
  bool mse_available = false;
  std::string mse_reason;
  std::vector<MseReport> mse;
  ShrinkageReport shrinkage;
  bool weights_evaluated = false;
  std::string weights_reason;
  std::vector<WeightTable> weights;
};

DiagnoseData run_diagnose(const RunConfig& cfg, const FitBundle& b) {
  DiagnoseData d;
  d.risk = risk_report(b.s, b.path, b.polys, cfg.enum_budget);
  try {
    d.mse = mse_decompositions(b.s, b.path, b.polys);
    d.mse_available = true;
  } catch (const CapabilityError& e) {
    d.mse_reason = e.what();
  }
  d.shrinkage = check_global_shrinkage(b.path, fit_ls(b.s));
  try {
    for (std::size_t k = 1; k <= b.path.k_max; ++k)
      d.weights.push_back(residuals_by_formula(b.s, k, cfg.enum_budget).table);
    d.weights_evaluated = true;
  } catch (const CapabilityError& e) {
    d.weights.clear();
    d.weights_reason = e.what();
  }
  return d;
}

std::string diagnose_json(const RunConfig& cfg, const FitBundle& b,
                          const DiagnoseData& d, bool synthetic) {
  JsonWriter w;
  w.begin_object();
  json_problem_header(w, "diagnose", cfg, b, synthetic);
  w.key("rel_tol");
  w.value(cfg.rel_tol);

  w.key("filter_factors");
  json_filter_factors(w, b.ffs);

  w.key("risk");
  w.begin_array();
  for (const RiskReport& row : d.risk) {
    w.begin_object();
    w.key("k");
    w.value_size(row.k);
    w.key("empirical_risk_direct");
    w.value(row.empirical_risk_direct);
    w.key("formula_evaluated");
    w.value(row.formula_evaluated);
    w.key("empirical_risk_formula");
    w.value(row.empirical_risk_formula);
    w.key("formula_rel_dev");
    w.value(row.formula_rel_dev);
    w.key("formula_within_tol");
    if (row.formula_evaluated)
      w.value(row.formula_rel_dev <= cfg.rel_tol);
    else
      w.null();
    w.key("pcr_risk");
    w.value(row.pcr_risk);
    w.key("upper_bound");
    w.value(row.upper_bound);
    w.key("rate_evaluated");
    w.value(row.rate_evaluated);
    w.key("rate_bound");
    w.value(row.rate_bound);
    w.key("fit_gap_ls");
    w.value(row.fit_gap_ls);
    w.key("fit_gap_bound");
    w.value(row.fit_gap_bound);
    w.end_object();
  }
  w.end_array();

  w.key("mse");
  w.begin_object();
  w.key("available");
  w.value(d.mse_available);
  if (!d.mse_available) {
    w.key("reason");
    w.value(d.mse_reason);
  }
  w.key("rows");
  w.begin_array();
  for (const MseReport& row : d.mse) {
    w.begin_object();
    w.key("k");
    w.value_size(row.k);
    w.key("mse_direct");
    w.value(row.mse_direct);
    w.key("mse_identity");
    w.value(row.mse_identity);
    w.key("mse_alt");
    w.value(row.mse_alt);
    w.key("filter_form");
    w.value(row.filter_form);
    w.key("bias_like");
    w.value(row.bias_like);
    w.key("noise_like");
    w.value(row.noise_like);
    w.key("mse_truncated");
    w.value(row.mse_truncated);
    w.key("max_rel_dev");
    w.value(row.max_rel_dev);
    w.key("within_tol");
    w.value(row.max_rel_dev <= cfg.rel_tol);
    w.end_object();
  }
  w.end_array();
  w.end_object();

  w.key("shrinkage");
  w.begin_object();
  w.key("norm_sq_by_k");
  w.number_array(d.shrinkage.norm_sq_by_k);
  w.key("ls_norm_sq");
  w.value(d.shrinkage.ls_norm_sq);
  w.key("worst_consecutive");
  w.value(d.shrinkage.worst_consecutive);
  w.key("worst_vs_ls");
  w.value(d.shrinkage.worst_vs_ls);
  w.key("pass");
  w.value(d.shrinkage.pass);
  w.end_object();

  w.key("weights");
  w.begin_object();
  w.key("evaluated");
  w.value(d.weights_evaluated);
  if (!d.weights_evaluated) {
    w.key("reason");
    w.value(d.weights_reason.empty() ? std::string("not evaluated")
                                     : d.weights_reason);
  }
  w.key("tables");
  w.begin_array();
  for (const WeightTable& t : d.weights) weight_table_json(w, t);
  w.end_array();
  w.end_object();

  w.end_object();
  return w.str();
}

std::string diagnose_csv(const FitBundle& b, const DiagnoseData& d) {
  CsvWriter w;
  const std::size_t r = b.s.rank();
  const char* head[] = {"k",           "residual_sq",   "risk_direct",
                        "risk_formula", "formula_rel_dev", "pcr_risk",
                        "upper_bound", "rate_bound",    "fit_gap_ls",
                        "fit_gap_bound", "mse_direct",  "mse_identity",
                        "mse_alt",     "filter_form",   "mse_truncated",
                        "max_rel_dev"};
  for (const char* h : head) w.cell(h);
  for (std::size_t i = 1; i <= r; ++i) w.cell("factor_" + std::to_string(i));
  for (std::size_t i = 1; i <= r; ++i)
    w.cell("truncated_factor_" + std::to_string(i));
  w.end_row();

  const double nan = std::nan("");
  for (std::size_t k = 0; k <= b.path.k_max; ++k) {
    w.cell_size(k);
    w.cell(b.path.residual_sq_by_k[k]);
    const RiskReport* rr = nullptr;
    for (const RiskReport& row : d.risk)
      if (row.k == k) rr = &row;
    w.cell(rr ? rr->empirical_risk_direct : nan);
    w.cell(rr && rr->formula_evaluated ? rr->empirical_risk_formula : nan);
    w.cell(rr && rr->formula_evaluated ? rr->formula_rel_dev : nan);
    w.cell(rr ? rr->pcr_risk : nan);
    w.cell(rr ? rr->upper_bound : nan);
    w.cell(rr && rr->rate_evaluated ? rr->rate_bound : nan);
    w.cell(rr ? rr->fit_gap_ls : nan);
    w.cell(rr ? rr->fit_gap_bound : nan);
    const MseReport* mr = nullptr;
    for (const MseReport& row : d.mse)
      if (row.k == k) mr = &row;
    w.cell(mr ? mr->mse_direct : nan);
    w.cell(mr ? mr->mse_identity : nan);
    w.cell(mr ? mr->mse_alt : nan);
    w.cell(mr ? mr->filter_form : nan);
    w.cell(mr ? mr->mse_truncated : nan);
    w.cell(mr ? mr->max_rel_dev : nan);
    const FilterFactors* f =
        (k >= 1 && k <= b.ffs.size()) ? &b.ffs[k - 1] : nullptr;
    for (std::size_t i = 0; i < r; ++i) w.cell(f ? f->factors[i] : 0.0);
    for (std::size_t i = 0; i < r; ++i) w.cell(f ? f->truncated[i] : 0.0);
    w.end_row();
  }
  return w.str();
}

int cmd_diagnose(const RunConfig& cfg) {
  bool synthetic = false;
  const RegressionProblem problem = acquire_problem(cfg, &synthetic);
  const FitBundle b = assemble_fit(problem, cfg.k_max);
  const DiagnoseData d = run_diagnose(cfg, b);
  write_output(cfg, cfg.format == "csv" ? diagnose_csv(b, d)
                                        : diagnose_json(cfg, b, d, synthetic));
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimRow {
  std::size_t k = 0;
  double mean_risk_per_row = 0.0;
  double rate_bound = std::nan("");
  double mean_mse = std::nan("");
  bool mse_available = false;
  bool weights_evaluated = false;
  std::size_t weight_tuples = 0;
  double weight_gap = std::nan("");
  double weight_band3 = std::nan("");
  bool within_band = false;
};

struct SimReport {
  std::size_t n = 0, p = 0, rank = 0, k_max = 0;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  double noise_sd = 0.0;
  std::vector<SimRow> rows;
};

struct RepResult {
  std::vector<double> risk;                   // index k-1
  std::vector<double> mse;                    // index k-1, NaN if unavailable
  std::vector<std::vector<double>> weights;   // index k-1; empty if skipped
  std::size_t k_max = 0;
};

// One replication: fixed design and truth, fresh noise, full refit.
RepResult run_rep(const SyntheticSpec& spec, const RegressionProblem& base,
                  std::size_t rep, std::size_t k_request, std::size_t budget) {
  Rng rng(mix_seed(spec.seed, rep));
  const std::vector<double> noise =
      draw_noise(spec.noise_dist, spec.noise_sd, spec.n, rng);
  RegressionProblem prob;
  prob.design = base.design;
  prob.response = base.response;  // noiseless: base was generated with sd 0
  for (std::size_t i = 0; i < prob.response.size(); ++i)
    prob.response[i] += noise[i];
  prob.truth = base.truth;
  prob.noise = noise;
  prob.noise_sd = spec.noise_sd;

  const SpectralData s = spectral(prob);
  const PlsPath path = fit_pls(s, k_request);
  RepResult out;
  out.k_max = path.k_max;
  out.risk.resize(path.k_max);
  out.mse.assign(path.k_max, std::nan(""));
  out.weights.resize(path.k_max);
  const double n = static_cast<double>(spec.n);
  for (std::size_t k = 1; k <= path.k_max; ++k)
    out.risk[k - 1] = path.residual_sq_by_k[k] / n;

  const DiscreteMeasure m = measure_of(s);
  if (!m.degenerate) {
    std::vector<ResidualPolynomial> polys =
        residuals_by_recurrence(m, path.k_max).polys;
    if (polys.size() > path.k_max) polys.resize(path.k_max);
    for (const MseReport& row : mse_decompositions(s, path, polys))
      if (row.k >= 1 && row.k <= path.k_max) out.mse[row.k - 1] = row.mse_direct;
  }
  for (std::size_t k = 1; k <= path.k_max; ++k) {
    try {
      out.weights[k - 1] = residuals_by_formula(s, k, budget).table.weights;
    } catch (const CapabilityError&) {
      // leave empty: tuple count exceeds the budget at this depth
    }
  }
  return out;
}

SimReport run_simulation(const RunConfig& cfg) {
  if (cfg.spec_path.empty())
    throw InputError("simulate needs --spec (synthetic problems only)");
  if (!cfg.design_path.empty() || !cfg.response_path.empty())
    throw InputError("simulate takes no --design/--response input");
  SyntheticSpec spec = parse_spec_file(cfg.spec_path);
  if (cfg.seed.has_value()) spec.seed = *cfg.seed;
  if (spec.replications < 1)
    throw InputError("simulate needs replications >= 1");

  SyntheticSpec noiseless = spec;
  noiseless.noise_sd = 0.0;
  const RegressionProblem base = generate(noiseless);
  const SpectralData s_base = spectral(base);
  if (s_base.rank() == 0)
    throw InputError("design has rank zero; nothing to simulate");
  const std::size_t k_request = cfg.k_max == 0 ? s_base.rank() : cfg.k_max;

  const std::size_t reps = spec.replications;
  std::vector<RepResult> results(reps);
  const std::size_t hw = std::max<unsigned>(1, std::thread::hardware_concurrency());
  const std::size_t workers = std::min({hw, reps, std::size_t{8}});
  if (workers <= 1) {
    for (std::size_t t = 0; t < reps; ++t)
      results[t] = run_rep(spec, base, t, k_request, cfg.enum_budget);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < reps; t += workers)
          results[t] = run_rep(spec, base, t, k_request, cfg.enum_budget);
      });
    for (std::thread& th : pool) th.join();
  }

  SimReport rep;
  rep.n = spec.n;
  rep.p = spec.p;
  rep.rank = s_base.rank();
  rep.replications = reps;
  rep.seed = spec.seed;
  rep.noise_sd = spec.noise_sd;
  std::size_t shared = results[0].k_max;
  for (const RepResult& r : results) shared = std::min(shared, r.k_max);
  rep.k_max = shared;

  // Reference quantities are replication independent: the rate bound and the
  // first-order weights depend only on design, truth, and noise level.
  std::vector<double> p_signal(s_base.lambdas.size());
  for (std::size_t i = 0; i < p_signal.size(); ++i)
    p_signal[i] = s_base.p_hat[i];

  const double denom = static_cast<double>(reps);
  for (std::size_t k = 1; k <= shared; ++k) {
    SimRow row;
    row.k = k;
    KahanSum risk_sum;
    for (const RepResult& r : results) risk_sum.add(r.risk[k - 1]);
    row.mean_risk_per_row = risk_sum.value() / denom;

    KahanSum mse_sum;
    std::size_t mse_count = 0;
    for (const RepResult& r : results)
      if (std::isfinite(r.mse[k - 1])) {
        mse_sum.add(r.mse[k - 1]);
        ++mse_count;
      }
    if (mse_count == reps) {
      row.mean_mse = mse_sum.value() / denom;
      row.mse_available = true;
    }

    {
      Rng probe(mix_seed(spec.seed, 0));
      std::vector<double> noise =
          draw_noise(spec.noise_dist, spec.noise_sd, spec.n, probe);
      RegressionProblem prob;
      prob.design = base.design;
      prob.response = base.response;
      for (std::size_t i = 0; i < prob.response.size(); ++i)
        prob.response[i] += noise[i];
      prob.truth = base.truth;
      prob.noise = noise;
      prob.noise_sd = spec.noise_sd;
      try {
        row.rate_bound = empirical_risk_rate_bound(spectral(prob), k);
      } catch (const CapabilityError&) {
      } catch (const InputError&) {
      }
    }

    bool all_weights = true;
    for (const RepResult& r : results)
      if (r.weights[k - 1].empty()) all_weights = false;
    if (all_weights) {
      try {
        const WeightTable approx = weight_expectation_approx(
            s_base.lambdas, p_signal, spec.noise_sd, k, cfg.enum_budget);
        const std::size_t count = approx.weights.size();
        bool sized = true;
        for (const RepResult& r : results)
          if (r.weights[k - 1].size() != count) sized = false;
        if (sized && count > 0) {
          row.weights_evaluated = true;
          row.weight_tuples = count;
          // worst tuple by gap beyond its own three-sigma Monte Carlo band
          double worst_gap = 0.0, worst_band = 0.0, worst_score = -1.0;
          for (std::size_t t = 0; t < count; ++t) {
            KahanSum sum, sumsq;
            for (const RepResult& r : results) {
              sum.add(r.weights[k - 1][t]);
              sumsq.add(r.weights[k - 1][t] * r.weights[k - 1][t]);
            }
            const double mean = sum.value() / denom;
            double var = 0.0;
            if (reps > 1)
              var = std::max(0.0,
                             (sumsq.value() - denom * mean * mean) / (denom - 1.0));
            const double band = 3.0 * std::sqrt(var / denom);
            const double gap = std::fabs(mean - approx.weights[t]);
            const double score = gap - band;
            if (score > worst_score) {
              worst_score = score;
              worst_gap = gap;
              worst_band = band;
            }
          }
          row.weight_gap = worst_gap;
          row.weight_band3 = worst_band;
          row.within_band = worst_gap <= worst_band;
        }
      } catch (const CapabilityError&) {
      }
    }
    rep.rows.push_back(row);
  }
  return rep;
}

std::string simulate_csv(const SimReport& r) {
  CsvWriter w;
  const char* head[] = {"k",           "replications", "mean_risk_per_row",
                        "rate_bound",  "mean_mse",     "weight_tuples",
                        "weight_gap",  "weight_band3", "weight_status"};
  for (const char* h : head) w.cell(h);
  w.end_row();
  for (const SimRow& row : r.rows) {
    w.cell_size(row.k);
    w.cell_size(r.replications);
    w.cell(row.mean_risk_per_row);
    w.cell(row.rate_bound);
    w.cell(row.mse_available ? row.mean_mse : std::nan(""));
    if (row.weights_evaluated) {
      w.cell_size(row.weight_tuples);
      w.cell(row.weight_gap);
      w.cell(row.weight_band3);
      w.cell(row.within_band ? "within-band" : "first-order-gap");
    } else {
      w.cell(std::nan(""));
      w.cell(std::nan(""));
      w.cell(std::nan(""));
      w.cell("not-evaluated");
    }
    w.end_row();
  }
  return w.str();
}

std::string simulate_json(const SimReport& r) {
  JsonWriter w;
  w.begin_object();
  w.key("schema_version");
  w.value_size(1);
  w.key("command");
  w.value("simulate");
  w.key("n");
  w.value_size(r.n);
  w.key("p");
  w.value_size(r.p);
  w.key("rank");
  w.value_size(r.rank);
  w.key("k_max");
  w.value_size(r.k_max);
  w.key("replications");
  w.value_size(r.replications);
  w.key("seed");
  w.value_size(static_cast<std::size_t>(r.seed));
  w.key("noise_sd");
  w.value(r.noise_sd);
  w.key("rows");
  w.begin_array();
  for (const SimRow& row : r.rows) {
    w.begin_object();
    w.key("k");
    w.value_size(row.k);
    w.key("mean_risk_per_row");
    w.value(row.mean_risk_per_row);
    w.key("rate_bound");
    w.value(row.rate_bound);
    w.key("mse_available");
    w.value(row.mse_available);
    w.key("mean_mse");
    w.value(row.mean_mse);
    w.key("weights_evaluated");
    w.value(row.weights_evaluated);
    if (row.weights_evaluated) {
      w.key("weight_tuples");
      w.value_size(row.weight_tuples);
      w.key("weight_gap");
      w.value(row.weight_gap);
      w.key("weight_band3");
      w.value(row.weight_band3);
      w.key("weight_status");
      w.value(row.within_band ? "within-band" : "first-order-gap");
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

int cmd_simulate(const RunConfig& cfg) {
  const SimReport r = run_simulation(cfg);
  write_output(cfg, cfg.format == "json" ? simulate_json(r) : simulate_csv(r));
  return 0;
}

// ---------------------------------------------------------------------------
// verify

std::string verify_json(const RunConfig& cfg, const VerifyReport& rep,
                        const std::vector<bool>& pass_flags, bool overall) {
  JsonWriter w;
  w.begin_object();
  w.key("schema_version");
  w.value_size(1);
  w.key("command");
  w.value("verify");
  w.key("problems");
  w.value_size(cfg.problems);
  w.key("seed");
  w.value_size(static_cast<std::size_t>(cfg.seed.value_or(20240915)));
  w.key("enum_budget");
  w.value_size(cfg.enum_budget);
  w.key("suite");
  if (cfg.suite.empty())
    w.null();
  else
    w.value(cfg.suite);
  w.key("rel_tol_floor");
  w.value(cfg.verify_rel_tol);
  w.key("results");
  w.begin_array();
  for (std::size_t i = 0; i < rep.results.size(); ++i) {
    const IdentityResult& r = rep.results[i];
    w.begin_object();
    w.key("suite");
    w.value(r.suite);
    w.key("identity");
    w.value(r.identity);
    w.key("worst");
    w.value(r.worst);
    w.key("threshold");
    w.value(r.soft ? r.threshold : std::max(r.threshold, cfg.verify_rel_tol));
    w.key("seed");
    w.value_size(static_cast<std::size_t>(r.seed));
    w.key("problem");
    w.value_size(r.problem);
    w.key("k");
    w.value_size(r.k);
    w.key("checks");
    w.value_size(r.checks);
    w.key("soft");
    w.value(r.soft);
    w.key("pass");
    w.value(pass_flags[i]);
    w.end_object();
  }
  w.end_array();
  w.key("problems_run");
  w.value_size(rep.problems_run);
  w.key("problems_degenerate");
  w.value_size(rep.problems_degenerate);
  w.key("truncation_caveat");
  w.begin_object();
  w.key("found");
  w.value(rep.caveat_found);
  if (rep.caveat_found) {
    w.key("seed");
    w.value_size(static_cast<std::size_t>(rep.caveat.seed));
    w.key("k");
    w.value_size(rep.caveat.k);
    w.key("mse_plain");
    w.value(rep.caveat.mse_plain);
    w.key("mse_truncated");
    w.value(rep.caveat.mse_truncated);
  }
  w.end_object();
  w.key("pass");
  w.value(overall);
  w.end_object();
  return w.str();
}

std::string verify_csv(const RunConfig& cfg, const VerifyReport& rep,
                       const std::vector<bool>& pass_flags) {
  CsvWriter w;
  const char* head[] = {"suite", "identity", "worst",  "threshold", "seed",
                        "problem", "k",      "checks", "soft",      "pass"};
  for (const char* h : head) w.cell(h);
  w.end_row();
  for (std::size_t i = 0; i < rep.results.size(); ++i) {
    const IdentityResult& r = rep.results[i];
    w.cell(r.suite);
    w.cell(r.identity);
    w.cell(r.worst);
    w.cell(r.soft ? r.threshold : std::max(r.threshold, cfg.verify_rel_tol));
    w.cell_size(static_cast<std::size_t>(r.seed));
    w.cell_size(r.problem);
    w.cell_size(r.k);
    w.cell_size(r.checks);
    w.cell(r.soft ? "true" : "false");
    w.cell(pass_flags[i] ? "true" : "false");
    w.end_row();
  }
  return w.str();
}

int cmd_verify(const RunConfig& cfg) {
  VerifyOptions opts;
  opts.problem_count = cfg.problems;
  opts.seed = cfg.seed.value_or(opts.seed);
  opts.enum_budget = cfg.enum_budget;
  opts.suite = cfg.suite;
  opts.inject_perturbation = cfg.inject_perturbation;
  const VerifyReport rep = run_verification(opts);

  // --rel-tol relaxes hard thresholds to at least the given value; soft
  // identities are reported either way and never gate the exit code.
  std::vector<bool> pass_flags(rep.results.size(), true);
  bool overall = true;
  for (std::size_t i = 0; i < rep.results.size(); ++i) {
    const IdentityResult& r = rep.results[i];
    const bool ok =
        r.soft || r.worst <= std::max(r.threshold, cfg.verify_rel_tol);
    pass_flags[i] = ok;
    if (!ok) overall = false;
  }

  std::printf("%-18s %-26s %12s %10s %8s %7s %6s  %s\n", "suite", "identity",
              "worst", "threshold", "checks", "problem", "k", "status");
  for (std::size_t i = 0; i < rep.results.size(); ++i) {
    const IdentityResult& r = rep.results[i];
    const double thr =
        r.soft ? r.threshold : std::max(r.threshold, cfg.verify_rel_tol);
    std::printf("%-18s %-26s %12.4e %10.1e %8zu %7zu %6zu  %s\n",
                r.suite.c_str(), r.identity.c_str(), r.worst, thr, r.checks,
                r.problem, r.k,
                r.soft ? "report" : (pass_flags[i] ? "pass" : "FAIL"));
  }
  for (std::size_t i = 0; i < rep.results.size(); ++i) {
    const IdentityResult& r = rep.results[i];
    if (!pass_flags[i])
      std::printf(
          "FAIL %s: worst %.6e exceeds %.1e at problem %zu (seed %llu, k=%zu)\n",
          r.identity.c_str(), r.worst,
          std::max(r.threshold, cfg.verify_rel_tol), r.problem,
          static_cast<unsigned long long>(r.seed), r.k);
  }
  std::printf("verification: %s (%zu problems run, %zu degenerate)\n",
              overall ? "PASS" : "FAIL", rep.problems_run,
              rep.problems_degenerate);

  if (!cfg.out_path.empty()) {
    const std::string text = cfg.format == "csv"
                                 ? verify_csv(cfg, rep, pass_flags)
                                 : verify_json(cfg, rep, pass_flags, overall);
    write_output(cfg, text);
  }
  return overall ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{
      "Partial least squares as orthogonal polynomials: fitting, closed-form "
      "diagnostics, Monte Carlo simulation, and an identity verification "
      "sweep."};
  app.require_subcommand(1);

  const std::string suites = [] {
    std::string s;
    for (const std::string& name : verify_suite_names()) {
      if (!s.empty()) s += ", ";
      s += name;
    }
    return s;
  }();

  auto add_input = [&](CLI::App* cmd) {
    cmd->add_option("--design", cfg.design_path,
                    "Design matrix CSV (rows = observations)");
    cmd->add_option("--response", cfg.response_path,
                    "Response CSV (single column)");
    cmd->add_flag("--center", cfg.center,
                  "Subtract column means from design and response");
    cmd->add_option("--spec", cfg.spec_path, "Synthetic problem spec (JSON)");
    cmd->add_option("--seed", cfg.seed, "Override the spec seed");
    cmd->add_option("--k-max", cfg.k_max,
                    "Path depth (default: full rank)")
        ->check(CLI::PositiveNumber);
  };
  auto add_output = [&](CLI::App* cmd, const char* fmt_default) {
    cmd->add_option("--out", cfg.out_path, "Output file (default: stdout)");
    cmd->add_option("--format", cfg.format,
                    std::string("Report format, json or csv (default: ") +
                        fmt_default + ")")
        ->check(CLI::IsMember({"json", "csv"}));
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit the projection path");
  add_input(fit);
  add_output(fit, "json");

  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "Fit plus risk, error decompositions, and weight tables");
  add_input(diagnose);
  add_output(diagnose, "json");
  diagnose->add_option("--rel-tol", cfg.rel_tol,
                       "Relative tolerance for the within_tol annotations");
  diagnose->add_option("--enum-budget", cfg.enum_budget,
                       "Tuple enumeration budget (0 skips weight tables)");

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Monte Carlo over noise draws with a fixed design");
  simulate->add_option("--spec", cfg.spec_path, "Synthetic problem spec (JSON)")
      ->required();
  simulate->add_option("--seed", cfg.seed, "Override the spec seed");
  simulate->add_option("--k-max", cfg.k_max,
                       "Path depth (default: full rank)")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--enum-budget", cfg.enum_budget,
                       "Tuple enumeration budget");
  add_output(simulate, "csv");

  CLI::App* verify = app.add_subcommand(
      "verify", "Run every identity suite over seeded random problems");
  verify->add_option("--problems", cfg.problems, "Problem count (default 200)")
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", cfg.seed, "Sweep base seed");
  verify->add_option("--suite", cfg.suite, "Run one suite only: " + suites);
  verify->add_option("--enum-budget", cfg.enum_budget,
                     "Tuple enumeration budget");
  verify->add_option("--rel-tol", cfg.verify_rel_tol,
                     "Relax hard identity thresholds to at least this value")
      ->check(CLI::NonNegativeNumber);
  verify->add_flag("--inject-perturbation", cfg.inject_perturbation)
      ->group("");  // harness self-test: corrupt one value, expect failure
  add_output(verify, "json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  }

  if (cfg.format.empty()) cfg.format = simulate->parsed() ? "csv" : "json";

  try {
    if (fit->parsed()) return cmd_fit(cfg);
    if (diagnose->parsed()) return cmd_diagnose(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (verify->parsed()) return cmd_verify(cfg);
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const CapabilityError& e) {
    std::fprintf(stderr, "capability error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
