#include "doctest.h"

#include "lprnet/kdtree.hpp"
#include "lprnet/kernels.hpp"
#include "lprnet/rng.hpp"

#include <cstring>
#include <limits>
#include <vector>

using namespace lprnet;

namespace {

std::vector<Vec3> random_points(std::size_t n, std::uint64_t seed, double extent = 10.0) {
    rng::Engine e(seed);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        pts.emplace_back(rng::uniform(e, -extent, extent), rng::uniform(e, -extent, extent),
                         rng::uniform(e, -extent, extent));
    return pts;
}

template <typename T>
std::vector<T> random_matrix(int rows, int cols, std::uint64_t seed) {
    rng::Engine e(seed);
    std::vector<T> m(std::size_t(rows) * cols);
    for (auto& v : m) v = T(rng::uniform(e, -1, 1));
    return m;
}

bool bits_equal(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(Vec3)) == 0;
}

}  // namespace

TEST_CASE("transform_points matches serial bit for bit") {
    const auto pts = random_points(4097, 1);
    const Mat3 R = se3_exp(Twist{(Vec6() << 0.3, -0.2, 0.7, 0, 0, 0).finished()}).rotation;
    const Vec3 t(1.5, -2.0, 0.25);

    std::vector<Vec3> par(pts.size()), ser(pts.size());
    kernels::transform_points(R, t, pts.data(), par.data(), pts.size());
    kernels::serial::transform_points(R, t, pts.data(), ser.data(), pts.size());
    CHECK(bits_equal(par, ser));
}

TEST_CASE("nn1_batch: tree matches brute force bit for bit") {
    const auto refs = random_points(3000, 2);
    const auto queries = random_points(777, 3, 12.0);
    const KdTree tree(refs);

    std::vector<double> d2_tree(queries.size()), d2_brute(queries.size());
    std::vector<std::uint32_t> idx_tree(queries.size()), idx_brute(queries.size());
    kernels::nn1_batch(tree, queries.data(), queries.size(), d2_tree.data(), idx_tree.data());
    kernels::serial::nn1_batch(refs.data(), refs.size(), queries.data(), queries.size(),
                               d2_brute.data(), idx_brute.data());

    for (std::size_t i = 0; i < queries.size(); ++i) {
        CHECK(idx_tree[i] == idx_brute[i]);
        CHECK(d2_tree[i] == d2_brute[i]);
    }
}

TEST_CASE("nn1_batch ties resolve to the lowest index") {
    // two reference points equidistant from the query
    std::vector<Vec3> refs = {Vec3(1, 0, 0), Vec3(-1, 0, 0)};
    const KdTree tree(refs);
    const Vec3 q = Vec3::Zero();
    double d2;
    std::uint32_t idx;
    kernels::nn1_batch(tree, &q, 1, &d2, &idx);
    CHECK(idx == 0);

    std::swap(refs[0], refs[1]);
    const KdTree tree2(refs);
    kernels::nn1_batch(tree2, &q, 1, &d2, &idx);
    CHECK(idx == 0);
}

TEST_CASE("fps_update_argmax matches serial on state and result") {
    const auto pts = random_points(5000, 4);
    std::vector<double> min_par(pts.size(), std::numeric_limits<double>::infinity());
    std::vector<double> min_ser = min_par;

    Vec3 center = pts[17];
    for (int step = 0; step < 20; ++step) {
        const auto a = kernels::fps_update_argmax(pts.data(), pts.size(), center, min_par.data());
        const auto b =
            kernels::serial::fps_update_argmax(pts.data(), pts.size(), center, min_ser.data());
        CHECK(a.argmax == b.argmax);
        CHECK(a.max_d2 == b.max_d2);
        REQUIRE(std::memcmp(min_par.data(), min_ser.data(), pts.size() * sizeof(double)) == 0);
        min_par[a.argmax] = -1.0;
        min_ser[b.argmax] = -1.0;
        center = pts[a.argmax];
    }
}

TEST_CASE("fps_update_argmax ties resolve to the lowest index") {
    // four points at equal distance from the center
    std::vector<Vec3> pts = {Vec3(0, 0, 1), Vec3(0, 0, -1), Vec3(0, 1, 0), Vec3(1, 0, 0)};
    std::vector<double> min_d2(4, std::numeric_limits<double>::infinity());
    const auto step = kernels::fps_update_argmax(pts.data(), 4, Vec3::Zero(), min_d2.data());
    CHECK(step.argmax == 0);
    CHECK(step.max_d2 == 1.0);
}

TEST_CASE_TEMPLATE("matmul family matches serial bit for bit", T, float, double) {
    const int n = 33, m = 47, p = 29;
    const auto A = random_matrix<T>(n, m, 5);
    const auto B = random_matrix<T>(m, p, 6);
    const auto Bt = random_matrix<T>(p, m, 7);
    const auto A2 = random_matrix<T>(n, p, 8);

    std::vector<T> c_par(std::size_t(n) * p), c_ser(std::size_t(n) * p);
    kernels::matmul(A.data(), B.data(), c_par.data(), n, m, p);
    kernels::serial::matmul(A.data(), B.data(), c_ser.data(), n, m, p);
    CHECK(std::memcmp(c_par.data(), c_ser.data(), c_par.size() * sizeof(T)) == 0);

    kernels::matmul_nt(A.data(), Bt.data(), c_par.data(), n, m, p);
    kernels::serial::matmul_nt(A.data(), Bt.data(), c_ser.data(), n, m, p);
    CHECK(std::memcmp(c_par.data(), c_ser.data(), c_par.size() * sizeof(T)) == 0);

    std::vector<T> d_par(std::size_t(m) * p), d_ser(std::size_t(m) * p);
    kernels::matmul_tn(A.data(), A2.data(), d_par.data(), n, m, p);
    kernels::serial::matmul_tn(A.data(), A2.data(), d_ser.data(), n, m, p);
    CHECK(std::memcmp(d_par.data(), d_ser.data(), d_par.size() * sizeof(T)) == 0);
}

TEST_CASE("matmul agrees with a plain triple loop") {
    const int n = 5, m = 7, p = 4;
    const auto A = random_matrix<double>(n, m, 9);
    const auto B = random_matrix<double>(m, p, 10);
    std::vector<double> C(std::size_t(n) * p);
    kernels::matmul(A.data(), B.data(), C.data(), n, m, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) {
            double acc = 0.0;
            for (int k = 0; k < m; ++k) acc += A[i * m + k] * B[k * p + j];
            CHECK(C[i * p + j] == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("matmul_nt and matmul_tn equal matmul against transposed operands") {
    const int n = 8, m = 6, p = 9;
    const auto A = random_matrix<double>(n, m, 11);
    const auto B = random_matrix<double>(m, p, 12);

    std::vector<double> Bt(std::size_t(p) * m);
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < p; ++j) Bt[std::size_t(j) * m + k] = B[std::size_t(k) * p + j];

    std::vector<double> ref(std::size_t(n) * p), got(std::size_t(n) * p);
    kernels::matmul(A.data(), B.data(), ref.data(), n, m, p);
    kernels::matmul_nt(A.data(), Bt.data(), got.data(), n, m, p);
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(got[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    std::vector<double> At(std::size_t(m) * n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < m; ++k) At[std::size_t(k) * n + i] = A[std::size_t(i) * m + k];
    std::vector<double> tn_ref(std::size_t(n) * p);
    // (A^T)^T * B with matmul_tn on At should reproduce A * B
    kernels::matmul_tn(At.data(), B.data(), tn_ref.data(), m, n, p);
    // tn_ref is (At)^T B = A B only if shapes line up: At is [m x n], so result is [n x p]
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(tn_ref[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("grid_max_bin matches serial bit for bit") {
    const auto pts = random_points(20000, 13, 25.0);
    const int nx = 50, ny = 50;
    std::vector<double> z_par(nx * ny), z_ser(nx * ny);
    std::vector<std::uint8_t> o_par(nx * ny), o_ser(nx * ny);
    kernels::grid_max_bin(pts.data(), pts.size(), -25, -25, 1.0, nx, ny, z_par.data(),
                          o_par.data());
    kernels::serial::grid_max_bin(pts.data(), pts.size(), -25, -25, 1.0, nx, ny, z_ser.data(),
                                  o_ser.data());
    CHECK(std::memcmp(z_par.data(), z_ser.data(), z_par.size() * sizeof(double)) == 0);
    CHECK(o_par == o_ser);
}

TEST_CASE("kdtree knn equals brute force on degenerate layouts") {
    SUBCASE("all points identical") {
        std::vector<Vec3> pts(100, Vec3(1, 1, 1));
        const KdTree tree(pts);
        const auto hits = tree.knn(Vec3(0, 0, 0), 5);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(hits[i].index == i);  // ties ascend by index
            CHECK(hits[i].d2 == 3.0);
        }
    }
    SUBCASE("collinear points") {
        std::vector<Vec3> pts;
        for (int i = 0; i < 200; ++i) pts.emplace_back(double(i), 0, 0);
        const KdTree tree(pts);
        const auto hits = tree.knn(Vec3(50.4, 0, 0), 3);
        CHECK(hits[0].index == 50);
        CHECK(hits[1].index == 51);
        CHECK(hits[2].index == 49);
    }
    SUBCASE("single point") {
        const KdTree tree(std::vector<Vec3>{Vec3(2, 3, 4)});
        const auto hit = tree.nearest(Vec3(0, 0, 0));
        CHECK(hit.index == 0);
        CHECK(hit.d2 == 29.0);
    }
}
