// Times the OpenMP kernels against their serial reference twins and verifies
// that both produce bit-identical results.

#include "lprnet/kdtree.hpp"
#include "lprnet/kernels.hpp"
#include "lprnet/rng.hpp"
#include "lprnet/threading.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <limits>
#include <vector>

using namespace lprnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double extent) {
    rng::Engine e(seed);
    std::vector<Vec3> pts(n);
    for (auto& p : pts)
        p = Vec3(rng::uniform(e, -extent, extent), rng::uniform(e, -extent, extent),
                 rng::uniform(e, -extent, extent));
    return pts;
}

void report(const char* name, double t_omp, double t_serial, bool match) {
    std::printf("%-18s omp %8.4f s   serial %8.4f s   speedup %5.2fx   %s\n", name, t_omp,
                t_serial, t_serial / t_omp, match ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
    init_threading();
    std::printf("threads: %d\n", effective_threads());

    const int reps = 5;

    {
        const auto pts = random_points(2'000'000, 1, 100.0);
        const Mat3 R = se3_exp(Twist(0.3, -0.4, 0.5, 0, 0, 0)).rotation;
        const Vec3 t(1, 2, 3);
        std::vector<Vec3> a(pts.size()), b(pts.size());

        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            kernels::transform_points(R, t, pts.data(), a.data(), pts.size());
        const double t_omp = seconds_since(t0) / reps;

        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            kernels::serial::transform_points(R, t, pts.data(), b.data(), pts.size());
        const double t_ser = seconds_since(t0) / reps;

        report("transform_points", t_omp, t_ser,
               std::memcmp(a.data(), b.data(), a.size() * sizeof(Vec3)) == 0);
    }

    {
        const auto refs = random_points(200'000, 2, 100.0);
        const auto queries = random_points(50'000, 3, 110.0);
        const KdTree tree(refs);
        std::vector<double> da(queries.size()), db(queries.size());
        std::vector<std::uint32_t> ia(queries.size()), ib(queries.size());

        auto t0 = Clock::now();
        kernels::nn1_batch(tree, queries.data(), queries.size(), da.data(), ia.data());
        const double t_omp = seconds_since(t0);

        t0 = Clock::now();
        kernels::serial::nn1_batch(refs.data(), refs.size(), queries.data(), queries.size(),
                                   db.data(), ib.data());
        const double t_ser = seconds_since(t0);

        report("nn1_batch", t_omp, t_ser,
               da == db && ia == ib);
    }

    {
        const auto pts = random_points(1'000'000, 4, 100.0);
        std::vector<double> ma(pts.size(), std::numeric_limits<double>::infinity());
        std::vector<double> mb = ma;

        auto t0 = Clock::now();
        kernels::FpsStep sa{};
        for (int r = 0; r < reps; ++r)
            sa = kernels::fps_update_argmax(pts.data(), pts.size(), pts[r], ma.data());
        const double t_omp = seconds_since(t0) / reps;

        t0 = Clock::now();
        kernels::FpsStep sb{};
        for (int r = 0; r < reps; ++r)
            sb = kernels::serial::fps_update_argmax(pts.data(), pts.size(), pts[r], mb.data());
        const double t_ser = seconds_since(t0) / reps;

        report("fps_update_argmax", t_omp, t_ser,
               sa.argmax == sb.argmax && ma == mb);
    }

    {
        const int n = 256, m = 256, p = 256;
        rng::Engine e(5);
        std::vector<float> A(std::size_t(n) * m), B(std::size_t(m) * p);
        for (auto& v : A) v = float(rng::uniform(e, -1, 1));
        for (auto& v : B) v = float(rng::uniform(e, -1, 1));
        std::vector<float> Ca(std::size_t(n) * p), Cb(std::size_t(n) * p);

        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r) kernels::matmul(A.data(), B.data(), Ca.data(), n, m, p);
        const double t_omp = seconds_since(t0) / reps;

        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            kernels::serial::matmul(A.data(), B.data(), Cb.data(), n, m, p);
        const double t_ser = seconds_since(t0) / reps;

        report("matmul f32", t_omp, t_ser,
               std::memcmp(Ca.data(), Cb.data(), Ca.size() * sizeof(float)) == 0);
    }

    {
        const auto pts = random_points(2'000'000, 6, 500.0);
        const int nx = 1000, ny = 1000;
        std::vector<double> za(std::size_t(nx) * ny), zb(std::size_t(nx) * ny);
        std::vector<std::uint8_t> oa(za.size()), ob(za.size());

        auto t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            kernels::grid_max_bin(pts.data(), pts.size(), -500, -500, 1.0, nx, ny, za.data(),
                                  oa.data());
        const double t_omp = seconds_since(t0) / reps;

        t0 = Clock::now();
        for (int r = 0; r < reps; ++r)
            kernels::serial::grid_max_bin(pts.data(), pts.size(), -500, -500, 1.0, nx, ny,
                                          zb.data(), ob.data());
        const double t_ser = seconds_since(t0) / reps;

        report("grid_max_bin", t_omp, t_ser, za == zb && oa == ob);
    }

    return 0;
}
