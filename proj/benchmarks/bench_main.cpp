#include <benchmark/benchmark.h>

#include "dtd/digits.hpp"
#include "dtd/relevance.hpp"

using namespace dtd;

namespace {

struct Fixture {
    Mlp net = make_mlp(784, {200}, 10, 1);
    Dataset data = make_digit_dataset(64, 2);
    PatternSet patterns = estimate_patterns(net, data);

    Vector sample(std::size_t i) const {
        const double* row = data.images.row_ptr(i);
        return Vector(row, row + 784);
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
    const auto& f = fixture();
    const Vector x = f.sample(0);
    for (auto _ : state) benchmark::DoNotOptimize(forward(f.net, x));
}
BENCHMARK(BM_Forward);

static void BM_ForwardTrace(benchmark::State& state) {
    const auto& f = fixture();
    const Vector x = f.sample(0);
    for (auto _ : state) benchmark::DoNotOptimize(forward_trace(f.net, x));
}
BENCHMARK(BM_ForwardTrace);

static void BM_InputGradient(benchmark::State& state) {
    const auto& f = fixture();
    const auto trace = forward_trace(f.net, f.sample(0));
    for (auto _ : state) benchmark::DoNotOptimize(input_gradient(f.net, trace, 3));
}
BENCHMARK(BM_InputGradient);

static void BM_ExplainRule(benchmark::State& state) {
    const auto& f = fixture();
    const Vector x = f.sample(0);
    const Rule rule = static_cast<Rule>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(explain(f.net, x, 3, rule, &f.patterns, 0.0));
}
BENCHMARK(BM_ExplainRule)
    ->Arg(int(Rule::Z))
    ->Arg(int(Rule::W2))
    ->Arg(int(Rule::WPlus))
    ->Arg(int(Rule::A))
    ->Arg(int(Rule::APlus));

static void BM_PatternAccumulate(benchmark::State& state) {
    const auto& f = fixture();
    const auto trace = forward_trace(f.net, f.sample(1));
    auto acc = MomentAccumulator::for_model(f.net);
    for (auto _ : state) accumulate(acc, trace);
}
BENCHMARK(BM_PatternAccumulate);

BENCHMARK_MAIN();
