#include "plspoly/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>

#include "plspoly/errors.hpp"

namespace plspoly {

namespace {

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_cell(std::string_view cell, double& out) {
  cell = trimmed(cell);
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);  // from_chars takes '-' only
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc{} && ptr == cell.data() + cell.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

struct CsvTable {
  std::vector<std::vector<double>> rows;
  std::size_t cols = 0;
};

CsvTable read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  while (!lines.empty() && trimmed(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw InputError("'" + path + "' has no data rows");

  CsvTable table;
  std::size_t first_data = 0;
  {
    // Header auto-detection: a first row with any non-numeric cell.
    const auto fields = split_fields(lines[0]);
    double ignored;
    bool all_numeric = true;
    for (auto f : fields)
      if (!parse_cell(f, ignored)) {
        all_numeric = false;
        break;
      }
    if (!all_numeric) first_data = 1;
  }
  if (first_data >= lines.size())
    throw InputError("'" + path + "' has a header but no data rows");

  for (std::size_t li = first_data; li < lines.size(); ++li) {
    const std::size_t row_no = li + 1;  // 1-based file line
    if (trimmed(lines[li]).empty())
      throw InputError("'" + path + "' row " + std::to_string(row_no) + " is empty");
    const auto fields = split_fields(lines[li]);
    if (table.rows.empty()) {
      table.cols = fields.size();
    } else if (fields.size() != table.cols) {
      throw InputError("'" + path + "' row " + std::to_string(row_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(table.cols));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_cell(fields[c], row[c]))
        throw InputError("'" + path + "' row " + std::to_string(row_no) + ", column " +
                         std::to_string(c + 1) + ": cannot parse '" +
                         std::string(trimmed(fields[c])) + "' as a number");
      if (!std::isfinite(row[c]))
        throw InputError("'" + path + "' row " + std::to_string(row_no) + ", column " +
                         std::to_string(c + 1) + ": non-finite value");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

void center_columns(Matrix& design, std::vector<double>& response) {
  const std::size_t n = design.rows();
  if (n == 0) return;
  for (std::size_t j = 0; j < design.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += design(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) design(i, j) -= mean;
  }
  double mean = 0.0;
  for (double v : response) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : response) v -= mean;
}

RegressionProblem load_csv(const std::string& design_path,
                           const std::string& response_path, bool center) {
  const CsvTable design_table = read_numeric_csv(design_path);
  const CsvTable response_table = read_numeric_csv(response_path);

  if (response_table.cols != 1)
    throw InputError("'" + response_path + "' must hold a single column, found " +
                     std::to_string(response_table.cols));
  if (design_table.rows.size() != response_table.rows.size())
    throw InputError("design has " + std::to_string(design_table.rows.size()) +
                     " rows but response has " + std::to_string(response_table.rows.size()) +
                     " rows");

  RegressionProblem problem;
  problem.design = Matrix(design_table.rows.size(), design_table.cols);
  for (std::size_t i = 0; i < design_table.rows.size(); ++i)
    for (std::size_t j = 0; j < design_table.cols; ++j)
      problem.design(i, j) = design_table.rows[i][j];
  problem.response.resize(response_table.rows.size());
  for (std::size_t i = 0; i < response_table.rows.size(); ++i)
    problem.response[i] = response_table.rows[i][0];

  if (center) center_columns(problem.design, problem.response);
  return problem;
}

SpectralData spectral(const RegressionProblem& problem, double rel_threshold) {
  const std::size_t n = problem.design.rows();
  const std::size_t p = problem.design.cols();
  if (problem.response.size() != n)
    throw InputError("spectral: response length differs from design rows");
  for (double v : problem.response)
    if (!std::isfinite(v)) throw InputError("spectral: non-finite response entry");

  SpectralData s;
  s.svd = svd(problem.design, rel_threshold);
  s.lambdas.resize(s.svd.rank);
  for (std::size_t i = 0; i < s.svd.rank; ++i)
    s.lambdas[i] = s.svd.singular_values[i] * s.svd.singular_values[i];
  s.p_hat = s.svd.left_vectors.apply_transposed(problem.response);
  s.noise_sd = problem.noise_sd;

  if (problem.truth) {
    if (problem.truth->size() != p)
      throw InputError("spectral: truth length differs from design columns");
    const std::vector<double> signal = problem.design.apply(*problem.truth);
    s.p_signal = s.svd.left_vectors.apply_transposed(signal);
    s.beta_tilde = s.svd.right_vectors.apply_transposed(*problem.truth);
  }
  if (problem.noise) {
    if (problem.noise->size() != n)
      throw InputError("spectral: noise length differs from design rows");
    s.eps_tilde = s.svd.left_vectors.apply_transposed(*problem.noise);
  }

  const double y_norm = std::sqrt(s.response_norm_sq());
  for (std::size_t i = 0; i < s.rank(); ++i)
    if (std::abs(s.p_hat[i]) <= 1e-12 * y_norm) s.zero_projection = true;
  for (std::size_t i = 0; i + 1 < s.lambdas.size(); ++i)
    if (s.lambdas[i] - s.lambdas[i + 1] <= 1e-12 * s.lambdas[0]) s.duplicate_eigenvalue = true;
  return s;
}

std::vector<double> SpectrumSpec::eigenvalues() const {
  std::vector<double> lam;
  switch (kind) {
    case Kind::kExplicit:
      lam = values;
      break;
    case Kind::kGeometric: {
      if (count == 0) throw InputError("spectrum: geometric form needs count >= 1");
      if (!(first > 0.0) || !(rate > 0.0) || rate > 1.0)
        throw InputError("spectrum: geometric form needs first > 0 and rate in (0, 1]");
      double v = first;
      for (std::size_t i = 0; i < count; ++i) {
        lam.push_back(v);
        v *= rate;
      }
      break;
    }
    case Kind::kClustered: {
      if (count == 0) throw InputError("spectrum: clustered form needs count >= 1");
      if (!(center > 0.0) || spread < 0.0 || spread >= 1.0)
        throw InputError("spectrum: clustered form needs center > 0 and spread in [0, 1)");
      if (count == 1) {
        lam.push_back(center);
      } else {
        for (std::size_t i = 0; i < count; ++i) {
          const double t = static_cast<double>(i) / static_cast<double>(count - 1);
          lam.push_back(center * (1.0 + spread - 2.0 * spread * t));
        }
      }
      break;
    }
  }
  if (lam.empty()) throw InputError("spectrum: no eigenvalues");
  for (double v : lam)
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("spectrum: eigenvalues must be positive and finite");
  std::sort(lam.begin(), lam.end(), std::greater<>());
  return lam;
}

Matrix random_orthonormal(std::size_t n, Rng& rng) {
  Matrix q(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) q(i, j) = rng.gaussian();
  // Modified Gram-Schmidt over columns, one reorthogonalization pass.
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t prev = 0; prev < j; ++prev) {
        double d = 0.0;
        for (std::size_t k = 0; k < n; ++k) d += q(k, prev) * q(k, j);
        for (std::size_t k = 0; k < n; ++k) q(k, j) -= d * q(k, prev);
      }
    }
    double nrm = 0.0;
    for (std::size_t k = 0; k < n; ++k) nrm += q(k, j) * q(k, j);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-8) throw NumericError("random_orthonormal: gaussian draw collapsed");
    for (std::size_t k = 0; k < n; ++k) q(k, j) /= nrm;
  }
  return q;
}

std::vector<double> draw_noise(NoiseDist dist, double sd, std::size_t n,
                               Rng& rng) {
  std::vector<double> noise(n, 0.0);
  if (sd <= 0.0) return noise;
  switch (dist) {
    case NoiseDist::kGaussian:
      for (double& e : noise) e = sd * rng.gaussian();
      break;
    case NoiseDist::kUniform: {
      const double half_width = sd * std::sqrt(3.0);
      for (double& e : noise) e = half_width * rng.uniform_symmetric();
      break;
    }
    case NoiseDist::kRademacher:
      for (double& e : noise) e = sd * rng.rademacher();
      break;
  }
  return noise;
}

RegressionProblem generate(const SyntheticSpec& spec) {
  if (spec.n == 0 || spec.p == 0) throw InputError("generate: n and p must be >= 1");
  const std::vector<double> lam = spec.spectrum.eigenvalues();
  if (lam.size() > std::min(spec.n, spec.p))
    throw InputError("generate: spectrum longer than min(n, p)");
  if (spec.noise_sd < 0.0) throw InputError("generate: negative noise sd");

  Rng rng(spec.seed);
  const Matrix u = random_orthonormal(spec.n, rng);
  const Matrix v = random_orthonormal(spec.p, rng);

  RegressionProblem problem;
  problem.design = Matrix(spec.n, spec.p);
  for (std::size_t l = 0; l < lam.size(); ++l) {
    const double root = std::sqrt(lam[l]);
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double ui = root * u(i, l);
      if (ui == 0.0) continue;
      for (std::size_t j = 0; j < spec.p; ++j) problem.design(i, j) += ui * v(j, l);
    }
  }

  std::vector<double> truth(spec.p, 0.0);
  switch (spec.beta_mode) {
    case BetaMode::kDenseGaussian:
      for (double& b : truth) b = rng.gaussian();
      break;
    case BetaMode::kSparse: {
      const std::size_t nz = std::max<std::size_t>(1, spec.p / 5);
      std::vector<std::size_t> picked;
      while (picked.size() < nz) {
        const std::size_t idx = rng.below(spec.p);
        if (std::find(picked.begin(), picked.end(), idx) == picked.end()) picked.push_back(idx);
      }
      for (std::size_t idx : picked) truth[idx] = rng.gaussian();
      break;
    }
    case BetaMode::kAlignedTop: {
      // Mass on the leading right singular directions, decaying 1, 1/2, 1/3.
      const std::size_t m = std::min<std::size_t>(3, lam.size());
      for (std::size_t l = 0; l < m; ++l)
        for (std::size_t j = 0; j < spec.p; ++j)
          truth[j] += v(j, l) / static_cast<double>(l + 1);
      break;
    }
  }

  std::vector<double> noise = draw_noise(spec.noise_dist, spec.noise_sd, spec.n, rng);

  const std::vector<double> signal = problem.design.apply(truth);
  problem.response.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) problem.response[i] = signal[i] + noise[i];
  problem.truth = std::move(truth);
  problem.noise = std::move(noise);
  problem.noise_sd = spec.noise_sd;
  return problem;
}

RegressionProblem make_diagonal_problem(const std::vector<double>& lambdas,
                                        const std::vector<double>& p_hat) {
  if (lambdas.size() != p_hat.size())
    throw InputError("make_diagonal_problem: length mismatch");
  const std::size_t n = lambdas.size();
  RegressionProblem problem;
  problem.design = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lambdas[i] > 0.0)) throw InputError("make_diagonal_problem: eigenvalues must be positive");
    if (i + 1 < n && lambdas[i] < lambdas[i + 1])
      throw InputError("make_diagonal_problem: eigenvalues must be descending");
    problem.design(i, i) = std::sqrt(lambdas[i]);
  }
  problem.response = p_hat;
  return problem;
}

RegressionProblem make_diagonal_problem(const std::vector<double>& lambdas,
                                        const std::vector<double>& p_signal,
                                        const std::vector<double>& eps) {
  if (p_signal.size() != lambdas.size() || eps.size() != lambdas.size())
    throw InputError("make_diagonal_problem: length mismatch");
  RegressionProblem problem = make_diagonal_problem(lambdas, p_signal);
  std::vector<double> truth(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    truth[i] = p_signal[i] / std::sqrt(lambdas[i]);
  const std::vector<double> signal = problem.design.apply(truth);
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    problem.response[i] = signal[i] + eps[i];
  problem.truth = std::move(truth);
  problem.noise = eps;
  return problem;
}

}  // namespace plspoly
