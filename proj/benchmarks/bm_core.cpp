#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "dcplus/ac_solver.hpp"
#include "dcplus/bus_split.hpp"
#include "dcplus/contingency.hpp"
#include "dcplus/linear_solver.hpp"
#include "dcplus/matpower.hpp"
#include "dcplus/topology.hpp"

using namespace dcplus;

namespace {

struct Bench {
    IndexedGrid grid;
    ACState ac;
    ReferenceState ref;
    LinearModel model;
    InverseOpPtr minv;
    LinState base;
    int outage = 0;

    explicit Bench(const char* name) {
        std::ifstream in(std::string(FIXTURES_DIR) + "/" + name);
        std::stringstream ss;
        ss << in.rdbuf();
        grid = index_grid(parse_matpower(ss.str()));
        AcOptions opts;
        opts.tol = 1e-10;
        ac = ac_solve(grid, opts);
        ref = hot_ref(grid, ac);
        model = assemble(grid, ref);
        minv = factor(model.M);
        base = solve(model, *minv, grid_injections(grid));
        for (size_t k = 0; k < grid.branches.size(); ++k)
            if (connectivity_check(grid, {static_cast<int>(k)}).connected) {
                outage = static_cast<int>(k);
                break;
            }
    }
};

Bench& case118() {
    static Bench b("case118s.m");
    return b;
}

}  // namespace

static void BM_Assemble(benchmark::State& state) {
    Bench& b = case118();
    for (auto _ : state) {
        LinearModel m = assemble(b.grid, b.ref);
        benchmark::DoNotOptimize(m.M.data());
    }
}
BENCHMARK(BM_Assemble);

static void BM_Factor(benchmark::State& state) {
    Bench& b = case118();
    for (auto _ : state) {
        InverseOpPtr f = factor(b.model.M);
        benchmark::DoNotOptimize(f.get());
    }
}
BENCHMARK(BM_Factor);

// One contingency via the low-rank update path: delta, rank-3 inner solve,
// state change.
static void BM_OutageViaUpdate(benchmark::State& state) {
    Bench& b = case118();
    for (auto _ : state) {
        const LowRankUpdate upd = outage_delta(b.grid, b.ref, b.outage);
        const InverseOpPtr updated = woodbury_update(b.minv, upd);
        const LinState d = state_delta(b.model, *updated, upd, b.base);
        benchmark::DoNotOptimize(d.theta.data());
    }
}
BENCHMARK(BM_OutageViaUpdate);

// The same contingency by rebuilding and refactoring from scratch.
static void BM_OutageViaRebuild(benchmark::State& state) {
    Bench& b = case118();
    IndexedGrid reduced = b.grid;
    reduced.branches[b.outage].in_service = false;
    for (auto _ : state) {
        const LinearModel m = assemble(reduced, b.ref);
        const FactoredInverse f(m.M);
        const LinState st = solve(m, f, grid_injections(b.grid));
        benchmark::DoNotOptimize(st.theta.data());
    }
}
BENCHMARK(BM_OutageViaRebuild);

static void BM_AcSolveFlat(benchmark::State& state) {
    Bench& b = case118();
    AcOptions opts;
    opts.tol = 1e-10;
    for (auto _ : state) {
        ACState st = ac_solve(b.grid, opts);
        benchmark::DoNotOptimize(st.v.data());
    }
}
BENCHMARK(BM_AcSolveFlat);

static void BM_AcSolveWarmOutage(benchmark::State& state) {
    Bench& b = case118();
    IndexedGrid reduced = b.grid;
    reduced.branches[b.outage].in_service = false;
    AcOptions opts;
    opts.tol = 1e-10;
    opts.warm = b.ac;
    for (auto _ : state) {
        ACState st = ac_solve(reduced, opts);
        benchmark::DoNotOptimize(st.v.data());
    }
}
BENCHMARK(BM_AcSolveWarmOutage);

// Distribution factors for one modification against every monitored branch.
static void BM_LmdfSweep(benchmark::State& state) {
    Bench& b = case118();
    const LineMod lm = LineMod::outage_of(b.grid.branches[b.outage]);
    for (auto _ : state) {
        const LmdfEngine engine(b.model, *b.minv, b.grid, b.outage, lm);
        double acc = 0.0;
        for (size_t mon = 0; mon < b.grid.branches.size(); ++mon)
            acc += engine.factor_for(static_cast<int>(mon))(0, 0);
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(BM_LmdfSweep);

BENCHMARK_MAIN();
