#include <chrono>
#include <cstdio>
#include <map>
#include <random>

#include <omp.h>

#include "rspv/kernels.hpp"
#include "rspv/stats.hpp"

using namespace rspv::kernels;

namespace {

template <class F>
double best_of(int reps, F&& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

std::vector<SparseVec> random_sparse(std::mt19937_64& rng, int count, int support, std::uint64_t range) {
    std::uniform_int_distribution<std::uint64_t> idx(0, range - 1);
    std::normal_distribution<double> g;
    std::vector<SparseVec> out(static_cast<std::size_t>(count));
    for (auto& v : out) {
        std::map<std::uint64_t, Complex> m;
        for (int i = 0; i < support; ++i) m[idx(rng)] = {g(rng), g(rng)};
        v.assign(m.begin(), m.end());
    }
    return out;
}

}  // namespace

int main() {
    std::mt19937_64 rng(7);
    std::printf("threads available: %d\n", omp_get_max_threads());
    std::printf("%-28s %12s %12s %8s\n", "kernel", "serial [s]", "omp [s]", "speedup");

    {
        const int dim = 256, count = 512;
        std::vector<Eigen::VectorXcd> vs(count, Eigen::VectorXcd::Random(dim));
        for (auto& v : vs) v = Eigen::VectorXcd::Random(dim);
        std::vector<double> ws(count, 1.0 / count);
        Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim), b = a;
        double ts = best_of(3, [&] { a.setZero(); accumulate_outer_serial(vs, ws, a); });
        double tp = best_of(3, [&] { b.setZero(); accumulate_outer_omp(vs, ws, b); });
        std::printf("%-28s %12.5f %12.5f %8.2f  (max diff %.2e)\n", "accumulate_outer 256x512", ts, tp, ts / tp,
                    (a - b).cwiseAbs().maxCoeff());
    }
    {
        auto vs = random_sparse(rng, 400, 2000, 1u << 20);
        Eigen::MatrixXcd a, b;
        double ts = best_of(3, [&] { a = gram_serial(vs); });
        double tp = best_of(3, [&] { b = gram_omp(vs); });
        std::printf("%-28s %12.5f %12.5f %8.2f  (max diff %.2e)\n", "gram 400 x 2000-sparse", ts, tp, ts / tp,
                    (a - b).cwiseAbs().maxCoeff());
    }
    {
        const long n = 200000;
        auto trial = [](std::uint64_t s) { return std::mt19937_64(s)() % 3 == 0; };
        rspv::stats::ExperimentReport a, b;
        double ts = best_of(3, [&] { a = rspv::stats::estimate_probability(trial, n, 1, 1); });
        double tp = best_of(3, [&] { b = rspv::stats::estimate_probability(trial, n, 1, omp_get_max_threads()); });
        std::printf("%-28s %12.5f %12.5f %8.2f  (counts %ld vs %ld)\n", "trial fan-out 200k", ts, tp, ts / tp,
                    a.successes, b.successes);
    }
    return 0;
}
