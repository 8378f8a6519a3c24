// Serial reference vs OpenMP for the per-tick power kernels and for seed ensembles.
// Run with OMP_NUM_THREADS set to the core count you want to measure.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "dtwin/engine.hpp"
#include "dtwin/power_kernels.hpp"

using namespace dtwin;

namespace {

struct Utilization {
  std::vector<double> cpu, gpu;
  explicit Utilization(std::size_t n) : cpu(n), gpu(n) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      cpu[i] = u(rng);
      gpu[i] = u(rng);
    }
  }
};

void node_powers(benchmark::State& st, Exec exec) {
  SystemConfig cfg;
  PowerModel m(cfg);
  Utilization u(static_cast<std::size_t>(cfg.topology.nodes_total));
  std::vector<double> out(u.cpu.size());
  for (auto _ : st) {
    m.node_powers(u.cpu.data(), u.gpu.data(), out.data(), exec);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(out.size()));
}

void rack_powers(benchmark::State& st, Exec exec) {
  SystemConfig cfg;
  cfg.loss_model.mode = static_cast<LossMode>(st.range(0));
  PowerModel m(cfg);
  Utilization u(static_cast<std::size_t>(cfg.topology.nodes_total));
  std::vector<double> p(u.cpu.size());
  m.node_powers(u.cpu.data(), u.gpu.data(), p.data(), Exec::Serial);
  std::vector<RackPower> racks(static_cast<std::size_t>(m.racks()));
  for (auto _ : st) {
    m.rack_powers(p.data(), racks.data(), exec);
    benchmark::DoNotOptimize(racks.data());
  }
}

void full_tick(benchmark::State& st, Exec exec) {
  SystemConfig cfg;
  PowerModel m(cfg);
  Utilization u(static_cast<std::size_t>(cfg.topology.nodes_total));
  for (auto _ : st) benchmark::DoNotOptimize(m.evaluate(u.cpu, u.gpu, exec).p_system_w);
}

constexpr double kEnsembleHorizonS = 2 * 3600.0;

void ensemble_serial(benchmark::State& st) {
  SystemConfig cfg;
  RunOptions opts;
  opts.duration_s = kEnsembleHorizonS;
  opts.exec = Exec::Serial;
  for (auto _ : st) {
    std::vector<Report> reports;
    for (int i = 0; i < st.range(0); ++i) {
      const auto jobs = generate_synthetic(WorkloadStats{}, opts.duration_s, static_cast<std::uint64_t>(i));
      reports.push_back(make_report(run_simulation(cfg, jobs, opts)));
    }
    benchmark::DoNotOptimize(aggregate_reports(reports).fields.data());
  }
}

void ensemble_parallel(benchmark::State& st) {
  SystemConfig cfg;
  for (auto _ : st) {
    benchmark::DoNotOptimize(
        run_ensemble(cfg, WorkloadStats{}, static_cast<int>(st.range(0)), kEnsembleHorizonS).fields.data());
  }
}

}  // namespace

BENCHMARK_CAPTURE(node_powers, serial, Exec::Serial);
BENCHMARK_CAPTURE(node_powers, omp, Exec::Parallel);
BENCHMARK_CAPTURE(rack_powers, serial, Exec::Serial)->Arg(0)->Arg(1)->Arg(2);
BENCHMARK_CAPTURE(rack_powers, omp, Exec::Parallel)->Arg(0)->Arg(1)->Arg(2);
BENCHMARK_CAPTURE(full_tick, serial, Exec::Serial);
BENCHMARK_CAPTURE(full_tick, omp, Exec::Parallel);
BENCHMARK(ensemble_serial)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(1);
BENCHMARK(ensemble_parallel)->Arg(4)->Unit(benchmark::kMillisecond)->Iterations(1);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
