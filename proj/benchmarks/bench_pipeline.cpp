#include <benchmark/benchmark.h>

#include <memory>

#include "cdarom/cda.hpp"
#include "cdarom/fom.hpp"
#include "cdarom/mesh.hpp"
#include "cdarom/pod.hpp"
#include "cdarom/rom.hpp"

using namespace cdarom;

namespace {

constexpr double dt = 1e-3;
constexpr double nu = 1e-3;

/// Channel flow started from rest, with snapshots of the first 80 steps.
struct Channel {
    std::shared_ptr<const Mesh> mesh;
    FlowProblem problem;
    std::unique_ptr<FomSolver> fom;
    FOMState state;
    SnapshotSet snapshots;

    explicit Channel(double h) {
        mesh = std::make_shared<const Mesh>(generate_channel_mesh(h, 24));
        problem = make_channel_problem(mesh, nu);
        fom = std::make_unique<FomSolver>(problem, dt);
        FomRunConfig rc;
        rc.T = 80 * dt;
        rc.dt = dt;
        rc.record_start = dt;
        rc.record_end = rc.T;
        FomRunResult r = run_fom(*fom, fom->rest_state(0.0), rc);
        state = r.final_state;
        snapshots = std::move(r.snapshots);
    }

    FieldMatrices matrices() const {
        return {&fom->velocity_mass(), &fom->pressure_mass(), &fom->velocity_stiffness(), &fom->pressure_stiffness()};
    }
};

Channel& channel(double h) {
    static Channel coarse(0.05), mini(0.045);
    return h > 0.0475 ? coarse : mini;
}

double mesh_size(const benchmark::State& st) { return st.range(0) == 0 ? 0.05 : 0.045; }

void BM_FomStep(benchmark::State& st) {
    Channel& c = channel(mesh_size(st));
    FOMState s = c.state;
    for (auto _ : st) {
        s = c.fom->step(s);
        benchmark::DoNotOptimize(s.u.data());
    }
    st.counters["velocity_dofs"] = c.problem.velocity->dof_count();
}
BENCHMARK(BM_FomStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_PodBasis(benchmark::State& st) {
    Channel& c = channel(0.045);
    PODOptions po;
    po.r_u = po.r_p = static_cast<int>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(build_pod_basis(c.snapshots, c.matrices(), po));
    st.counters["snapshots"] = static_cast<double>(c.snapshots.size());
}
BENCHMARK(BM_PodBasis)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

struct Reduced {
    PODBasis basis;
    CoarseOverlay overlay;
    ObservationOperator uop, pop;
    ROMOperators ops;
    ROMState init;
    Eigen::VectorXd yu, yp;

    explicit Reduced(int r)
        : basis(make_basis(r)),
          overlay(build_coarse_overlay(*channel(0.045).mesh, 8, 8)),
          uop(channel(0.045).problem.velocity, overlay),
          pop(channel(0.045).problem.pressure, overlay),
          ops(build_rom_operators(basis, full_order_operators(*channel(0.045).fom), &uop, &pop)) {
        const Channel& c = channel(0.045);
        const double t = c.snapshots.times.back();
        init = initial_rom_state(basis, c.fom->velocity_mass(), c.fom->pressure_mass(), c.snapshots, t, dt);
        yu = uop.apply(Eigen::VectorXd(c.snapshots.velocity.rightCols(1)));
        yp = pop.apply(Eigen::VectorXd(c.snapshots.pressure.rightCols(1)));
    }

    static PODBasis make_basis(int r) {
        PODOptions po;
        po.r_u = po.r_p = r;
        return build_pod_basis(channel(0.045).snapshots, channel(0.045).matrices(), po);
    }
};

void BM_RomOperators(benchmark::State& st) {
    const Channel& c = channel(0.045);
    const PODBasis b = Reduced::make_basis(static_cast<int>(st.range(0)));
    const FullOrderOperators full = full_order_operators(*c.fom);
    for (auto _ : st) benchmark::DoNotOptimize(build_rom_operators(b, full));
}
BENCHMARK(BM_RomOperators)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_RomStep(benchmark::State& st) {
    const Reduced red(static_cast<int>(st.range(0)));
    const double gamma = static_cast<double>(st.range(1));
    const RomStepper stepper(red.ops, {dt, nu, gamma, gamma});
    const StepObservation obs{&red.yu, &red.yp};
    ROMState s = red.init;
    for (auto _ : st) {
        s = stepper.step(s, obs);
        benchmark::DoNotOptimize(s.a.data());
    }
}
BENCHMARK(BM_RomStep)->Args({8, 0})->Args({8, 100})->Args({16, 0})->Args({16, 100})->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
