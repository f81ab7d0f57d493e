// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to the
// thread count of interest.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dirspglm/inference.hpp"
#include "dirspglm/kernels.hpp"

using namespace dirspglm;

namespace {

const std::vector<double> kScores{0, 1, 2, 3, 4, 5};
const std::vector<double> kProbs{0.368, 0.368, 0.184, 0.061, 0.015, 0.004};

std::vector<double> means(std::size_t n) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.1, 4.9);
  std::vector<double> mu(n);
  for (auto& m : mu) m = u(gen);
  return mu;
}

template <bool Parallel>
void BM_SolveThetas(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto mu = means(n);
  std::vector<double> t(n), b(n), v(n);
  for (auto _ : state) {
    std::fill(t.begin(), t.end(), 0.0);
    const kernel::ThetaBatch out{t, b, v};
    benchmark::DoNotOptimize(Parallel ? kernel::solve_thetas_parallel(kScores, kProbs, mu, out)
                                      : kernel::solve_thetas_serial(kScores, kProbs, mu, out));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n));
}

PosteriorChain chain_of(Eigen::Index draws) {
  PosteriorChain chain;
  chain.support = make_support(kScores);
  chain.link = LinkSpec(LinkKind::log);
  chain.beta.resize(draws, 2);
  chain.f0.resize(draws, 6);
  std::mt19937_64 gen(2);
  std::normal_distribution<double> z(0, 0.1);
  for (Eigen::Index d = 0; d < draws; ++d) {
    chain.beta(d, 0) = -0.7 + z(gen);
    chain.beta(d, 1) = 0.2 + z(gen);
    for (Eigen::Index l = 0; l < 6; ++l) chain.f0(d, l) = kProbs[static_cast<std::size_t>(l)];
  }
  return chain;
}

template <bool Parallel>
void BM_ExceedanceDraws(benchmark::State& state) {
  const auto chain = chain_of(state.range(0));
  Eigen::MatrixXd rows(50, 2);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) rows.row(i) << 1.0, -2.0 + 0.08 * static_cast<double>(i);
  std::vector<double> out(static_cast<std::size_t>(chain.size()));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Parallel ? kernel::exceedance_draws_parallel(chain, rows, 3.0, out)
                                      : kernel::exceedance_draws_serial(chain, rows, 3.0, out));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * chain.size() * rows.rows()));
}

}  // namespace

BENCHMARK(BM_SolveThetas<false>)->Name("solve_thetas/serial")->Arg(250)->Arg(5000);
BENCHMARK(BM_SolveThetas<true>)->Name("solve_thetas/openmp")->Arg(250)->Arg(5000);
BENCHMARK(BM_ExceedanceDraws<false>)->Name("exceedance_draws/serial")->Arg(3000);
BENCHMARK(BM_ExceedanceDraws<true>)->Name("exceedance_draws/openmp")->Arg(3000);

BENCHMARK_MAIN();
