#include "doctest.h"

#include "lprnet/rng.hpp"
#include "lprnet/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace lprnet;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 10.0) {
    rng::Engine e(seed);
    PointCloud c;
    c.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        c.points.emplace_back(rng::uniform(e, -extent, extent), rng::uniform(e, -extent, extent),
                              rng::uniform(e, -extent, extent));
    return c;
}

double min_pairwise_d2(const PointCloud& c, const std::vector<std::uint32_t>& idx) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = i + 1; j < idx.size(); ++j)
            best = std::min(best, (c.points[idx[i]] - c.points[idx[j]]).squaredNorm());
    return best;
}

}  // namespace

TEST_CASE("fps basics") {
    const PointCloud c = random_cloud(100, 1);

    SUBCASE("m = N returns a permutation") {
        const auto idx = fps(c, 100, 7);
        std::set<std::uint32_t> uniq(idx.begin(), idx.end());
        CHECK(uniq.size() == 100);
    }
    SUBCASE("m = 1 returns one valid index") {
        const auto idx = fps(c, 1, 7);
        REQUIRE(idx.size() == 1);
        CHECK(idx[0] < 100);
    }
    SUBCASE("deterministic in the seed") {
        CHECK(fps(c, 10, 7) == fps(c, 10, 7));
    }
    SUBCASE("m > N throws") { CHECK_THROWS_AS(fps(c, 101, 7), std::invalid_argument); }
}

TEST_CASE("fps on the unit square picks opposite corners early") {
    // second pick is always the farthest point from the first: a corner
    // diagonal to whatever corner region the seed start falls nearest
    PointCloud c;
    c.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto idx = fps(c, 2, s);
        const double d2 = (c.points[idx[0]] - c.points[idx[1]]).squaredNorm();
        CHECK(d2 == 2.0);  // the diagonal
    }
}

TEST_CASE("fps spreads better than random subsets") {
    const PointCloud c = random_cloud(512, 3);
    const auto sel = fps(c, 32, 11);
    const double fps_sep = min_pairwise_d2(c, sel);

    rng::Engine e(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::uint32_t> idx(c.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = std::uint32_t(i);
        rng::shuffle(e, idx);
        idx.resize(32);
        CHECK(fps_sep >= min_pairwise_d2(c, idx));
    }
}

TEST_CASE("fps handles duplicate points") {
    PointCloud c;
    for (int i = 0; i < 50; ++i) c.points.emplace_back(1, 2, 3);
    c.points.emplace_back(5, 5, 5);
    const auto idx = fps(c, 10, 4);
    std::set<std::uint32_t> uniq(idx.begin(), idx.end());
    CHECK(uniq.size() == 10);  // never re-selects an index even at distance 0
}

TEST_CASE("knn matches brute force exactly") {
    const PointCloud c = random_cloud(800, 5);
    rng::Engine e(6);
    for (int q = 0; q < 50; ++q) {
        const Vec3 query(rng::uniform(e, -12, 12), rng::uniform(e, -12, 12),
                         rng::uniform(e, -12, 12));
        const auto got = knn(c, query, 16);

        std::vector<std::pair<double, std::uint32_t>> all;
        for (std::uint32_t i = 0; i < c.size(); ++i)
            all.emplace_back((c.points[i] - query).squaredNorm(), i);
        std::sort(all.begin(), all.end());
        REQUIRE(got.size() == 16);
        for (int i = 0; i < 16; ++i) CHECK(got[i] == all[i].second);
    }
}

TEST_CASE("knn with k >= N returns all points") {
    const PointCloud c = random_cloud(10, 8);
    const auto got = knn(c, Vec3::Zero(), 10);
    std::set<std::uint32_t> uniq(got.begin(), got.end());
    CHECK(uniq.size() == 10);
    CHECK_THROWS_AS(knn(c, Vec3::Zero(), 11), std::invalid_argument);
}

TEST_CASE("multi_scale_fps produces nested levels") {
    const PointCloud c = random_cloud(1000, 2);
    const auto levels = multi_scale_fps(c, {1.0, 0.5, 0.25}, 13);
    REQUIRE(levels.size() == 3);
    CHECK(levels[0].size() == 1000);
    CHECK(levels[1].size() == 500);
    CHECK(levels[2].size() == 250);
    // coarser level is a prefix of the finer: subset by construction
    for (std::size_t l = 1; l < 3; ++l) {
        std::set<std::uint32_t> fine(levels[l - 1].begin(), levels[l - 1].end());
        for (auto i : levels[l]) CHECK(fine.count(i) == 1);
    }
}

TEST_CASE("multi_scale_fps rejects bad fractions") {
    const PointCloud c = random_cloud(100, 2);
    CHECK_THROWS_AS(multi_scale_fps(c, {0.5, 1.0}, 1), std::invalid_argument);
    CHECK_THROWS_AS(multi_scale_fps(c, {1.0, 0.0}, 1), std::invalid_argument);
    CHECK_THROWS_AS(multi_scale_fps(c, {1.5}, 1), std::invalid_argument);
    CHECK_THROWS_AS(multi_scale_fps(c, {}, 1), std::invalid_argument);
}

TEST_CASE("build_patches structure") {
    const PointCloud c = random_cloud(2048, 17);
    const PatchSet ps = build_patches(c, 64, 32, {1.0, 0.5, 0.25}, 21);
    REQUIRE(ps.num_patches() == 64);
    REQUIRE(ps.groups.size() == 64);
    REQUIRE(ps.local_points.size() == 64);
    REQUIRE(ps.scale_label.size() == 64);

    for (std::size_t p = 0; p < 64; ++p) {
        REQUIRE(ps.groups[p].size() == 32);
        REQUIRE(ps.local_points[p].size() == 32);
        CHECK(ps.scale_label[p] >= 0);
        CHECK(ps.scale_label[p] < 3);
        for (std::size_t j = 0; j < 32; ++j) {
            const auto idx = ps.groups[p][j];
            REQUIRE(idx < c.size());
            const Vec3 expect = c.points[idx] - ps.centers[p];
            CHECK((ps.local_points[p][j] - expect).norm() < 1e-12);
        }
    }

    // every level gets used under round-robin assignment
    std::set<int> used(ps.scale_label.begin(), ps.scale_label.end());
    CHECK(used.size() == 3);

    // all patches visible before masking
    CHECK(ps.num_masked() == 0);

    CHECK(build_patches(c, 64, 32, {1.0, 0.5, 0.25}, 21).groups == ps.groups);
}

TEST_CASE("build_patches rejects patch_size above the coarsest level") {
    const PointCloud c = random_cloud(100, 17);
    // coarsest level keeps 25 points, so 32-point groups are impossible
    CHECK_THROWS_AS(build_patches(c, 8, 32, {1.0, 0.5, 0.25}, 1), std::invalid_argument);
}

TEST_CASE("generate_mask quota is exact") {
    const PointCloud c = random_cloud(512, 30);
    const PatchSet ps = build_patches(c, 100, 4, {1.0}, 2);
    for (auto strat : {MaskStrategy::kRandom, MaskStrategy::kBlock, MaskStrategy::kHybrid}) {
        const auto mask = generate_mask(100, 0.6, strat, ps.centers, 5);
        REQUIRE(mask.size() == 100);
        int masked = 0;
        for (auto v : mask) masked += (v == 0);
        CHECK(masked == 60);
    }
    // rounding: 7 patches at 0.6 -> round(4.2) = 4
    const auto m7 = generate_mask(7, 0.6, MaskStrategy::kRandom, {}, 5);
    int masked = 0;
    for (auto v : m7) masked += (v == 0);
    CHECK(masked == 4);
}

TEST_CASE("block mask is spatially contiguous") {
    // centers on a line: the masked set must be a contiguous run
    std::vector<Vec3> centers;
    for (int i = 0; i < 50; ++i) centers.emplace_back(double(i), 0, 0);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto mask = generate_mask(50, 0.4, MaskStrategy::kBlock, centers, s);
        int first = -1, last = -1, masked = 0;
        for (int i = 0; i < 50; ++i)
            if (mask[i] == 0) {
                if (first < 0) first = i;
                last = i;
                ++masked;
            }
        CHECK(masked == 20);
        CHECK(last - first + 1 == masked);
    }
}

TEST_CASE("mask strategies differ and are seed-deterministic") {
    std::vector<Vec3> centers;
    rng::Engine e(40);
    for (int i = 0; i < 64; ++i)
        centers.emplace_back(rng::uniform(e, 0, 10), rng::uniform(e, 0, 10), 0);

    const auto a = generate_mask(64, 0.6, MaskStrategy::kRandom, centers, 9);
    const auto b = generate_mask(64, 0.6, MaskStrategy::kRandom, centers, 9);
    CHECK(a == b);
    const auto c2 = generate_mask(64, 0.6, MaskStrategy::kRandom, centers, 10);
    CHECK(a != c2);
}

TEST_CASE("random mask hits all positions across seeds") {
    // every slot should get masked somewhere over many seeds; a frozen slot
    // would betray a biased draw
    std::vector<int> hits(20, 0);
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto mask = generate_mask(20, 0.5, MaskStrategy::kRandom, {}, s);
        for (int i = 0; i < 20; ++i) hits[i] += (mask[i] == 0);
    }
    for (int i = 0; i < 20; ++i) {
        CHECK(hits[i] > 50);  // expectation 100, generous band
        CHECK(hits[i] < 150);
    }
}

TEST_CASE("mask_strategy_from_name") {
    CHECK(mask_strategy_from_name("random") == MaskStrategy::kRandom);
    CHECK(mask_strategy_from_name("block") == MaskStrategy::kBlock);
    CHECK(mask_strategy_from_name("hybrid") == MaskStrategy::kHybrid);
    CHECK_THROWS_AS(mask_strategy_from_name("banana"), std::invalid_argument);
}

TEST_CASE("derive_seed separates purposes and indices") {
    const auto a = derive_seed(42, "fps-centers", 0);
    CHECK(a == derive_seed(42, "fps-centers", 0));
    CHECK(a != derive_seed(42, "fps-centers", 1));
    CHECK(a != derive_seed(42, "ms-levels", 0));
    CHECK(a != derive_seed(43, "fps-centers", 0));
}

TEST_CASE("debug_dump names every patch") {
    const PointCloud c = random_cloud(64, 50);
    PatchSet ps = build_patches(c, 8, 4, {1.0}, 3);
    ps.visible = generate_mask(8, 0.5, MaskStrategy::kRandom, ps.centers, 1);
    const std::string dump = ps.debug_dump();
    CHECK(dump.find("patch 0") != std::string::npos);
    CHECK(dump.find("patch 7") != std::string::npos);
    CHECK(dump.find("masked") != std::string::npos);
}
