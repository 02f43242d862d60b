#include <benchmark/benchmark.h>

#include "spcarob/attacks.hpp"
#include "spcarob/heads.hpp"
#include "spcarob/numerics.hpp"
#include "spcarob/projection.hpp"
#include "spcarob/rng.hpp"

using namespace spcarob;

namespace {

Mat random_mat(SeededRng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
    Mat m(rows, cols);
    for (double& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

Mat random_covariance(std::size_t n, std::uint64_t seed) {
    SeededRng rng(seed);
    const Mat a = random_mat(rng, 2 * n, n);
    return matmul_tn(a, a);
}

void BM_SymEig(benchmark::State& state) {
    const Mat s = random_covariance(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(sym_eig(s));
}
BENCHMARK(BM_SymEig)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Spca(benchmark::State& state) {
    const std::size_t d = static_cast<std::size_t>(state.range(0));
    const Mat s = random_covariance(d, 2);
    SpcaOptions o;
    o.target_density = 0.1;
    for (auto _ : state) benchmark::DoNotOptimize(fit_spca_from_covariance(s, CenteringInfo{Vec(d, 0.0)}, 8, o));
}
BENCHMARK(BM_Spca)->Arg(64)->Arg(196)->Unit(benchmark::kMillisecond);

void BM_MlpTrainingStep(benchmark::State& state) {
    SeededRng rng(3);
    const Mat z = random_mat(rng, 128, 200);
    std::vector<int> y(128);
    for (int& v : y) v = static_cast<int>(rng.below(10));
    const MlpHead h = init_mlp(200, {256, 128}, 10, 4);
    MlpHead grads;
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_parameter_gradients(h, z, y, grads));
}
BENCHMARK(BM_MlpTrainingStep)->Unit(benchmark::kMillisecond);

struct AttackFixture {
    ProjectionModel projection;
    Head head;
    Vec x;

    explicit AttackFixture(bool mlp) {
        SeededRng rng(5);
        projection = ProjectionModel::from_matrix(ProjectionKind::Pca, random_mat(rng, 100, 784, -0.05, 0.05),
                                                  Vec(100, 0.0));
        if (mlp) head = init_mlp(100, {256, 128}, 10, 6);
        else head = LinearHead{random_mat(rng, 100, 10), Vec(10, 0.0)};
        x = rng_uniform(rng, 0.0, 1.0, 784);
    }
};

void BM_Fgsm(benchmark::State& state) {
    const AttackFixture f(state.range(0) != 0);
    const ProjectedClassifier model(f.projection, f.head);
    const auto cfg = AttackConfig::defaults(AttackKind::Fgsm, ThreatModel{Norm::Linf, 0.1});
    for (auto _ : state) benchmark::DoNotOptimize(fgsm(model, f.x, 3, cfg));
}
BENCHMARK(BM_Fgsm)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_Pgd(benchmark::State& state) {
    const AttackFixture f(state.range(0) != 0);
    const ProjectedClassifier model(f.projection, f.head);
    const auto cfg = AttackConfig::defaults(AttackKind::Pgd, ThreatModel{Norm::Linf, 0.1});
    for (auto _ : state) benchmark::DoNotOptimize(pgd(model, f.x, 3, cfg));
}
BENCHMARK(BM_Pgd)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_Square(benchmark::State& state) {
    const AttackFixture f(true);
    const ProjectedClassifier model(f.projection, f.head);
    auto cfg = AttackConfig::defaults(AttackKind::Square, ThreatModel{Norm::Linf, 0.1});
    cfg.query_budget = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(square_attack(model, f.x, 3, cfg));
}
BENCHMARK(BM_Square)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
