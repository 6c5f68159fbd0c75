#include <sohpie/pseudovalue.hpp>
#include <sohpie/regression.hpp>
#include <sohpie/simulation.hpp>
#include <sohpie/sparcc.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace sohpie;

namespace {

OtuTable synthetic_counts(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    SimulationConfig cfg;
    cfg.p = p;
    cfg.n = std::max<Eigen::Index>(2 * n, 6);
    cfg.seed = seed;
    const SyntheticDataset ds = generate_synthetic_dataset(cfg);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < std::min(n, ds.group1.n()); ++i) rows.push_back(i);
    OtuTable t = select_samples(ds.group1, rows);
    // top up from group 2 if the Bernoulli split left group 1 short
    Eigen::Index missing = n - t.n();
    if (missing > 0) {
        std::vector<Eigen::Index> extra;
        for (Eigen::Index i = 0; i < missing; ++i) extra.push_back(i);
        t = concat_samples(t, select_samples(ds.group2, extra));
    }
    return t;
}

void bm_sparcc(benchmark::State& state) {
    const OtuTable otu =
        synthetic_counts(state.range(0), state.range(1), 11);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sparcc(otu, {}));
    }
}

void bm_jackknife(benchmark::State& state) {
    const OtuTable otu = synthetic_counts(state.range(0), state.range(1), 12);
    JackknifeConfig cfg;
    cfg.threads = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(jackknife_pseudovalues(otu, cfg, "g"));
    }
}

void bm_lts(benchmark::State& state) {
    const Eigen::Index n = state.range(0);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X.row(i) << 1.0, normal(rng), normal(rng);
        y(i) = 0.5 + 2.0 * X(i, 1) - X(i, 2) + 0.2 * normal(rng);
    }
    LtsConfig cfg;
    cfg.seed = 3;
    for (auto _ : state) {
        benchmark::DoNotOptimize(lts_fit(X, y, cfg));
    }
}

} // namespace

BENCHMARK(bm_sparcc)->Args({50, 20})->Args({200, 20})->Args({50, 60})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(bm_jackknife)->Args({20, 10})->Args({50, 20})->Unit(benchmark::kMillisecond);
BENCHMARK(bm_lts)->Arg(50)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
