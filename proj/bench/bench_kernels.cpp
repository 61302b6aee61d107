// Timings for the data-parallel kernels against their serial references.

#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "geobo/kernel.hpp"
#include "geobo/trust_region.hpp"

using namespace geobo;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    using clock = std::chrono::steady_clock;
    fn();  // warm-up
    const auto t0 = clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    Rng rng = make_rng(7);

    {
        Sphere s(10);
        std::vector<Vec> pts;
        for (int i = 0; i < 800; ++i) pts.push_back(s.random_point(rng));
        const double ts = time_ms([&] { pairwise_sq_distances(pts, s, Exec::serial); }, 3);
        const double tp = time_ms([&] { pairwise_sq_distances(pts, s, Exec::parallel); }, 3);
        report("pairwise distances S^10", ts, tp);
    }
    {
        Spd m(10);
        std::vector<Mat> pts;
        for (int i = 0; i < 400; ++i) pts.push_back(m.to_mat(m.random_point(rng)));
        const double ts = time_ms([&] { build_spd_log_table(pts, Exec::serial); }, 3);
        const double tp = time_ms([&] { build_spd_log_table(pts, Exec::parallel); }, 3);
        report("batch logm 10x10", ts, tp);
    }
    {
        Spd m(10);
        std::vector<Mat> pts;
        for (int i = 0; i < 300; ++i) pts.push_back(m.to_mat(m.random_point(rng)));
        SpdLogTable table = build_spd_log_table(pts);
        Grassmann g(10, 3);
        Mat w = g.to_mat(g.random_point(rng));
        const double ts = time_ms([&] { spd_latent_sq_distances_fast(table, w, Exec::serial); }, 3);
        const double tp = time_ms([&] { spd_latent_sq_distances_fast(table, w, Exec::parallel); }, 3);
        report("latent distances (fast)", ts, tp);
    }
    {
        Sphere s(40);
        Vec x = s.random_point(rng);
        Objective f = [](const Vec& v) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::sin(3.0 * v[i]) * v[i] * v[i];
            for (int r = 0; r < 200; ++r) acc += std::cos(acc) * 1e-3;
            return acc;
        };
        const double ts = time_ms([&] { fd_gradient(s, f, x, 1e-6, Exec::serial); }, 5);
        const double tp = time_ms([&] { fd_gradient(s, f, x, 1e-6, Exec::parallel); }, 5);
        report("fd gradient on S^40", ts, tp);
    }
    return 0;
}
