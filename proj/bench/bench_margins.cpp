// Serial reference against the OpenMP kernels on the same inputs.

#include <benchmark/benchmark.h>

#include "gridswitch/pipeline.hpp"
#include "gridswitch/sweep.hpp"

using namespace gridswitch;

namespace {

const std::vector<Eigen::VectorXd>& grid() {
    static const auto pts = grid_points({1.5, 0.5}, {18.0, 18.0}, 16);
    return pts;
}

const MarginFn& gfl_margin() {
    static const MarginFn fn = model_margin_fn(Mode::Gfl, SystemConfig{}, {"scr", "x_over_r"});
    return fn;
}

void margins(benchmark::State& state, Exec exec) {
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_margins(gfl_margin(), grid(), exec));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(grid().size()));
}

struct Fitted {
    ParamSpace space;
    Region region;
};

const Fitted& fitted() {
    static const Fitted f = [] {
        SystemConfig cfg;
        cfg.params.scr = 4.0;
        auto space = make_space(plane_preset("gfm-icl"), cfg);
        auto region = fit_sssr(space, Eigen::Vector2d(10.0, 500.0));
        return Fitted{std::move(space), std::move(region)};
    }();
    return f;
}

void ismd(benchmark::State& state, Exec exec) {
    const auto& f = fitted();
    for (auto _ : state) benchmark::DoNotOptimize(sample_ismd(f.region, f.space, 500, 3, exec));
}

void region_fit(benchmark::State& state, Exec exec) {
    const auto& f = fitted();
    FitOptions o;
    o.exec = exec;
    for (auto _ : state) benchmark::DoNotOptimize(fit_sssr(f.space, Eigen::Vector2d(10.0, 500.0), o));
}

}  // namespace

BENCHMARK_CAPTURE(margins, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(margins, parallel, Exec::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(ismd, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(ismd, parallel, Exec::Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(region_fit, serial, Exec::Serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(region_fit, parallel, Exec::Parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
