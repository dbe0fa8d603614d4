// Serial reference against the OpenMP kernel for the hot paths of the search.

#include <benchmark/benchmark.h>

#include "dimred/beamsearch.hpp"
#include "dimred/bench.hpp"
#include "dimred/depmeasure.hpp"
#include "dimred/kdtree.hpp"

using namespace dimred;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

Matrix uniform(Index n, Index d, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    Matrix X(n, d);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
    return X;
}

std::shared_ptr<SearchNode> washburn_root()
{
    Problem p{"washburn", 5, parse("sqrt(x1*x2*x3*cos(x4)/(2*x5))"), std::nullopt, {}};
    auto node = std::make_shared<SearchNode>();
    node->dataset = sample_problem(p, 1000, 8);
    return node;
}

void candidate_scoring(benchmark::State& state)
{
    static const auto root = washburn_root();
    static const auto candidates = candidates_for(root->dataset, BeamConfig{});
    for (auto _ : state)
        benchmark::DoNotOptimize(score_all(*root, candidates, Measure::Codec, kMaxDroppedRows, exec_of(state)));
    state.counters["candidates"] = static_cast<double>(candidates.size());
}

void nn_query(benchmark::State& state)
{
    Matrix X = uniform(state.range(1), 4, 1);
    for (auto _ : state) benchmark::DoNotOptimize(nearest_neighbors(X, exec_of(state)));
}

void kmac_pairs(benchmark::State& state)
{
    Matrix X = uniform(state.range(1), 3, 2);
    Vector y = X.rowwise().squaredNorm();
    for (auto _ : state) benchmark::DoNotOptimize(kmac(X, y, exec_of(state)));
}

void volume(benchmark::State& state)
{
    Matrix X = uniform(state.range(1), 4, 3);
    Vector y = X.rowwise().sum();
    for (auto _ : state) benchmark::DoNotOptimize(mean_volume(X, y, true, exec_of(state)));
}

}  // namespace

BENCHMARK(candidate_scoring)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(nn_query)->ArgNames({"parallel", "n"})->ArgsProduct({{0, 1}, {1000, 10000}})->Unit(benchmark::kMillisecond);
BENCHMARK(kmac_pairs)->ArgNames({"parallel", "n"})->ArgsProduct({{0, 1}, {1000, 2000}})->Unit(benchmark::kMillisecond);
BENCHMARK(volume)->ArgNames({"parallel", "n"})->ArgsProduct({{0, 1}, {1000, 10000}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
