#include <random>

#include <benchmark/benchmark.h>

#include "sawar/kernels.hpp"
#include "sawar/oracles.hpp"

using namespace sawar;

namespace {

struct Fixture {
    Network net;
    Batch batch;
    Vector up;

    explicit Fixture(int n) {
        std::mt19937_64 rng(1);
        net = oracles::random_network({16, 50, 50, 1}, -0.2, 0.2, 0.01, rng);
        batch = oracles::random_batch(n, 16, 0.5, rng);
        up = Vector::Ones(n);
    }
};

template <bool Parallel>
void forward(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? kernels::forward_batch(f.net, f.batch.X)
                                          : kernels::serial::forward_batch(f.net, f.batch.X));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void bounds(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? kernels::bounds_batch(f.net, f.batch.X, 0.1)
                                          : kernels::serial::bounds_batch(f.net, f.batch.X, 0.1));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void backward(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? kernels::backward_batch(f.net, f.batch.X, f.up)
                                          : kernels::serial::backward_batch(f.net, f.batch.X, f.up));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void bounds_backward(benchmark::State& state) {
    const Fixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(Parallel ? kernels::bounds_backward_batch(f.net, f.batch.X, 0.1, f.up, f.up)
                                          : kernels::serial::bounds_backward_batch(f.net, f.batch.X, 0.1, f.up, f.up));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(forward<false>)->Name("forward/serial")->Arg(128)->Arg(1024);
BENCHMARK(forward<true>)->Name("forward/omp")->Arg(128)->Arg(1024);
BENCHMARK(bounds<false>)->Name("bounds/serial")->Arg(128)->Arg(1024);
BENCHMARK(bounds<true>)->Name("bounds/omp")->Arg(128)->Arg(1024);
BENCHMARK(backward<false>)->Name("backward/serial")->Arg(128)->Arg(1024);
BENCHMARK(backward<true>)->Name("backward/omp")->Arg(128)->Arg(1024);
BENCHMARK(bounds_backward<false>)->Name("bounds_backward/serial")->Arg(128)->Arg(1024);
BENCHMARK(bounds_backward<true>)->Name("bounds_backward/omp")->Arg(128)->Arg(1024);

BENCHMARK_MAIN();
