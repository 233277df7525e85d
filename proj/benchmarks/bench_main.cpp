#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "sdpinn/geometry.hpp"
#include "sdpinn/lbfgs.hpp"
#include "sdpinn/mlp.hpp"
#include "sdpinn/training.hpp"

using namespace sdpinn;

namespace {

Architecture wide_net() {
  return Architecture({2, 40, 40, 40, 40, 1}, InputScaling::to_unit_box(-1, 1, 0, 1));
}

void BM_forward(benchmark::State& state) {
  const Architecture a = wide_net();
  const ParameterVector p = init_xavier(a, 1);
  double x = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(p, a, x, 0.3));
    x = -x;
  }
}
BENCHMARK(BM_forward);

void BM_jet_eval(benchmark::State& state) {
  const Architecture a = wide_net();
  const ParameterVector p = init_xavier(a, 1);
  double x = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(jet_eval(p, a, x, 0.3));
    x = -x;
  }
}
BENCHMARK(BM_jet_eval);

// Full loss and gradient of a sub-domain objective, per collocation count.
void BM_loss_gradient(benchmark::State& state) {
  const ProblemSpec kdv = kdv_problem(20.0);
  const Partition part = partition(kdv.rect, kdv.group, {-0.5});
  TrainingConfig cfg;
  cfg.method = Method::sdpinn_isc;
  SubdomainConfig sc;
  sc.n_f = static_cast<int>(state.range(0));
  cfg.subdomains = {sc};
  const SubdomainData data = prepare_subdomain_data(kdv, part, 1, sc, cfg);
  SubdomainLoss loss(kdv, data, Method::sdpinn_isc, sc.weights, 1.0);
  GradientEvaluator eval(ModelLayout({data.arch}, 0), loss.batches(), loss);
  const ParameterVector p = init_xavier(data.arch, 3);
  ParameterVector g(p.size());
  for (auto _ : state) benchmark::DoNotOptimize(eval(p, g));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_loss_gradient)->Arg(250)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_lbfgs_rosenbrock(benchmark::State& state) {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  OptimConfig c;
  for (auto _ : state) benchmark::DoNotOptimize(minimize(f, x0, c).x);
}
BENCHMARK(BM_lbfgs_rosenbrock);

}  // namespace
BENCHMARK_MAIN();
