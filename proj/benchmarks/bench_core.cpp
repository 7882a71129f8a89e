// Microbenchmarks for the numeric kernels: decomposition, path fitting, the
// two polynomial routes, and the closed-form risk enumeration. Problem sizes
// mirror the verification sweep (small n, p; spectra of a few decades).

#include <cstddef>
#include <vector>

#include <benchmark/benchmark.h>

#include "plspoly/diagnostics.hpp"
#include "plspoly/model.hpp"
#include "plspoly/pls.hpp"
#include "plspoly/residual_poly.hpp"

namespace {

using namespace plspoly;

SyntheticSpec bench_spec(std::size_t n, std::size_t p, std::size_t count) {
  SyntheticSpec spec;
  spec.n = n;
  spec.p = p;
  spec.spectrum.kind = SpectrumSpec::Kind::kGeometric;
  spec.spectrum.count = count;
  spec.spectrum.first = 6.0;
  spec.spectrum.rate = 0.7;
  spec.noise_sd = 0.5;
  spec.seed = 424242;
  return spec;
}

void bm_spectral(benchmark::State& state) {
  const RegressionProblem problem = generate(
      bench_spec(static_cast<std::size_t>(state.range(0)),
                 static_cast<std::size_t>(state.range(1)),
                 static_cast<std::size_t>(state.range(2))));
  for (auto _ : state) {
    SpectralData s = spectral(problem);
    benchmark::DoNotOptimize(s.lambdas.data());
  }
}
BENCHMARK(bm_spectral)->Args({20, 20, 10})->Args({60, 40, 10});

void bm_fit_path(benchmark::State& state) {
  const RegressionProblem problem = generate(
      bench_spec(static_cast<std::size_t>(state.range(0)),
                 static_cast<std::size_t>(state.range(1)),
                 static_cast<std::size_t>(state.range(2))));
  const SpectralData s = spectral(problem);
  for (auto _ : state) {
    PlsPath path = fit_pls(s, s.rank());
    benchmark::DoNotOptimize(path.residual_sq_by_k.data());
  }
}
BENCHMARK(bm_fit_path)->Args({20, 20, 10})->Args({60, 40, 10});

void bm_recurrence(benchmark::State& state) {
  const RegressionProblem problem =
      generate(bench_spec(20, 20, static_cast<std::size_t>(state.range(0))));
  const SpectralData s = spectral(problem);
  const DiscreteMeasure m = measure_of(s);
  for (auto _ : state) {
    RecurrencePolys polys = residuals_by_recurrence(m, m.effective_size());
    benchmark::DoNotOptimize(polys.polys.data());
  }
}
BENCHMARK(bm_recurrence)->Arg(6)->Arg(10);

void bm_formula(benchmark::State& state) {
  const RegressionProblem problem = generate(bench_spec(20, 20, 10));
  const SpectralData s = spectral(problem);
  const std::size_t k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    FormulaPoly fp = residuals_by_formula(s, k);
    benchmark::DoNotOptimize(fp.table.weights.data());
  }
}
BENCHMARK(bm_formula)->Arg(3)->Arg(5)->Arg(8);

void bm_risk_closed_form(benchmark::State& state) {
  const RegressionProblem problem = generate(bench_spec(20, 20, 10));
  const SpectralData s = spectral(problem);
  const std::size_t k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    double risk = empirical_risk_closed_form(s, k);
    benchmark::DoNotOptimize(risk);
  }
}
BENCHMARK(bm_risk_closed_form)->Arg(3)->Arg(5);

void bm_gram_terms(benchmark::State& state) {
  const RegressionProblem problem = generate(bench_spec(20, 20, 10));
  const SpectralData s = spectral(problem);
  const std::size_t k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    GramTerms g = gram_determinant_terms(s, k);
    benchmark::DoNotOptimize(g.signal_term);
  }
}
BENCHMARK(bm_gram_terms)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
