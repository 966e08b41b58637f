#include "doctest.h"

#include "lprnet/cloud.hpp"
#include "lprnet/errors.hpp"
#include "lprnet/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace lprnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lprnet_cloud_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 50.0) {
    rng::Engine e(seed);
    PointCloud c;
    c.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        c.points.emplace_back(rng::uniform(e, -extent, extent), rng::uniform(e, -extent, extent),
                              rng::uniform(e, -extent, extent));
    return c;
}

}  // namespace

TEST_CASE("load_xyz reads points in file order") {
    const auto p = temp_file("two.xyz");
    write_file(p, "0 0 0\n1 2 3\n");
    const PointCloud c = load_xyz(p.string());
    REQUIRE(c.size() == 2);
    CHECK(c.points[1] == Vec3(1, 2, 3));
}

TEST_CASE("load_xyz ignores extra fields and blank lines") {
    const auto p = temp_file("extra.xyz");
    write_file(p, "1 2 3 42 intensity\n\n4 5 6 0\n");
    const PointCloud c = load_xyz(p.string());
    REQUIRE(c.size() == 2);
    CHECK(c.points[0] == Vec3(1, 2, 3));
}

TEST_CASE("load_xyz errors") {
    const auto bad = temp_file("bad.xyz");
    write_file(bad, "a b c\n");
    CHECK_THROWS_AS(load_xyz(bad.string()), ParseError);
    try {
        load_xyz(bad.string());
    } catch (const ParseError& e) {
        CHECK(e.line_number == 1);
    }

    const auto empty = temp_file("empty.xyz");
    write_file(empty, "");
    CHECK_THROWS_AS(load_xyz(empty.string()), std::invalid_argument);

    CHECK_THROWS_AS(load_xyz("/nonexistent/path.xyz"), IoError);
}

TEST_CASE("xyz roundtrip preserves coordinates to 1e-6 m") {
    const PointCloud c = random_cloud(1000, 77);
    const auto p = temp_file("round.xyz");
    save_xyz(c, p.string());
    const PointCloud back = load_xyz(p.string());
    REQUIRE(back.size() == c.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        worst = std::max(worst, (back.points[i] - c.points[i]).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-6);
}

TEST_CASE("minimal ascii PLY") {
    const auto p = temp_file("one.ply");
    write_file(p,
               "ply\nformat ascii 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n1.5 -2 3\n");
    const PointCloud c = load_ply(p.string());
    REQUIRE(c.size() == 1);
    CHECK(c.points[0] == Vec3(1.5, -2, 3));
}

TEST_CASE("binary PLY roundtrip is byte-identical") {
    const PointCloud c = random_cloud(10000, 13);
    const auto a = temp_file("bin_a.ply");
    const auto b = temp_file("bin_b.ply");
    save_ply(c, a.string(), /*binary=*/true);
    const PointCloud back = load_ply(a.string());
    save_ply(back, b.string(), /*binary=*/true);
    CHECK(read_file(a) == read_file(b));
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(back.points[i] == c.points[i]);
}

TEST_CASE("PLY error paths") {
    const auto xy = temp_file("xy.ply");
    write_file(xy,
               "ply\nformat ascii 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nend_header\n1 2\n");
    CHECK_THROWS_AS(load_ply(xy.string()), UnsupportedFormatError);

    const auto trunc = temp_file("trunc.ply");
    write_file(trunc,
               "ply\nformat ascii 1.0\nelement vertex 3\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n1 2 3\n");
    CHECK_THROWS_AS(load_ply(trunc.string()), IntegrityError);

    const auto notply = temp_file("not.ply");
    write_file(notply, "solid something\n");
    CHECK_THROWS_AS(load_ply(notply.string()), UnsupportedFormatError);
}

TEST_CASE("PLY reader skips extra vertex properties (binary)") {
    // hand-written little-endian payload: float x,y,z + uchar intensity
    const auto p = temp_file("attrs.ply");
    std::ofstream out(p, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
           "property float x\nproperty float y\nproperty float z\n"
           "property uchar intensity\nend_header\n";
    const float rows[2][3] = {{1, 2, 3}, {4, 5, 6}};
    for (int i = 0; i < 2; ++i) {
        out.write(reinterpret_cast<const char*>(rows[i]), 12);
        const char inten = 200 - i;
        out.write(&inten, 1);
    }
    out.close();
    const PointCloud c = load_ply(p.string());
    REQUIRE(c.size() == 2);
    CHECK(c.points[1] == Vec3(4, 5, 6));
}

TEST_CASE("normalize: degenerate single point") {
    PointCloud c;
    c.points = {Vec3(5, 5, 5)};
    const auto [normed, rec] = normalize(c);
    CHECK(normed.points[0].norm() == 0.0);
    CHECK(rec.scale == 1.0);
    CHECK(rec.degenerate);
}

TEST_CASE("normalize: cube corners scale to max radius 1") {
    PointCloud c;
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int sz : {-1, 1}) c.points.emplace_back(2.0 * sx, 2.0 * sy, 2.0 * sz);
    const auto [normed, rec] = normalize(c);
    CHECK(rec.scale == doctest::Approx(std::sqrt(12.0)).epsilon(1e-12));
    double max_r = 0.0;
    for (const auto& p : normed.points) max_r = std::max(max_r, p.norm());
    CHECK(max_r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize then denormalize is the identity") {
    const PointCloud c = random_cloud(500, 3);
    const auto [normed, rec] = normalize(c);
    const PointCloud back = invert_norm(normed, rec);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK((back.points[i] - c.points[i]).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pair union record preserves the relative transform geometry") {
    const PointCloud a = random_cloud(200, 21, 20.0);
    PointCloud b = random_cloud(200, 22, 20.0);
    for (auto& p : b.points) p += Vec3(100, 0, 0);  // disjoint footprints
    const NormRecord rec = pair_union_record(a, b);
    // same record applied to both, so relative offsets shrink by one common scale
    const PointCloud an = apply_norm(a, rec);
    const PointCloud bn = apply_norm(b, rec);
    const Vec3 rel = b.points[0] - a.points[0];
    const Vec3 rel_n = bn.points[0] - an.points[0];
    CHECK((rel / rec.scale - rel_n).norm() < 1e-12);
}

namespace {

// flat plane plus a 2x2 m box of height 3 centered in the plane
PointCloud plane_with_box(int plane_pts, int box_pts, std::uint64_t seed) {
    rng::Engine e(seed);
    PointCloud c;
    for (int i = 0; i < plane_pts; ++i)
        c.points.emplace_back(rng::uniform(e, 0, 20), rng::uniform(e, 0, 20), 0.0);
    for (int i = 0; i < box_pts; ++i)
        c.points.emplace_back(rng::uniform(e, 9, 11), rng::uniform(e, 9, 11), 3.0);
    return c;
}

}  // namespace

TEST_CASE("ground_filter: plane points ground, box-top points not") {
    const PointCloud scene = plane_with_box(2000, 300, 5);
    const PointCloud flagged = ground_filter(scene, 1.0, 0.3);
    REQUIRE(flagged.has_ground_flags());
    for (int i = 0; i < 2000; ++i) CHECK(flagged.ground_flag[i] == 1);
    for (int i = 2000; i < 2300; ++i) CHECK(flagged.ground_flag[i] == 0);
    CHECK(flagged.size() == scene.size());  // partitioned, nothing deleted
}

TEST_CASE("ground_filter: infinite threshold flags everything") {
    const PointCloud scene = plane_with_box(100, 50, 6);
    const PointCloud flagged =
        ground_filter(scene, 1.0, std::numeric_limits<double>::infinity());
    for (auto f : flagged.ground_flag) CHECK(f == 1);
}

TEST_CASE("ground_filter: single point is its own cell minimum") {
    PointCloud c;
    c.points = {Vec3(3, 4, 17)};
    const PointCloud flagged = ground_filter(c, 1.0, 0.0);
    CHECK(flagged.ground_flag[0] == 1);
}

TEST_CASE("ground_filter is idempotent on flags") {
    const PointCloud scene = plane_with_box(500, 100, 7);
    const PointCloud once = ground_filter(scene, 1.0, 0.3);
    const PointCloud twice = ground_filter(once, 1.0, 0.3);
    CHECK(once.ground_flag == twice.ground_flag);
}

TEST_CASE("build_dsm: max of points sharing a cell") {
    PointCloud c;
    c.points = {Vec3(0.2, 0.2, 1.0), Vec3(0.8, 0.6, 2.0)};
    const GridDSM dsm = build_dsm(c, 1.0);
    CHECK(dsm.nx == 1);
    CHECK(dsm.ny == 1);
    CHECK(dsm.at(0, 0) == 2.0);
}

TEST_CASE("build_dsm: 10x10 m plane at 1 m cells gives 100 occupied zero cells") {
    PointCloud c;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) c.points.emplace_back(i + 0.5, j + 0.5, 0.0);
    const GridDSM dsm = build_dsm(c, 1.0);
    CHECK(dsm.nx * dsm.ny == 100);
    int occupied = 0;
    for (int iy = 0; iy < dsm.ny; ++iy)
        for (int ix = 0; ix < dsm.nx; ++ix)
            if (dsm.occupied_at(ix, iy)) {
                ++occupied;
                CHECK(dsm.at(ix, iy) == 0.0);
            }
    CHECK(occupied == 100);
}

TEST_CASE("build_dsm: unoccupied cells flagged, values order-invariant") {
    PointCloud c = random_cloud(400, 9, 10.0);
    c.points.emplace_back(100, 100, 1.0);  // isolate a far cell so gaps exist
    const GridDSM a = build_dsm(c, 1.0);
    bool any_empty = false;
    for (auto o : a.occupied) any_empty |= (o == 0);
    CHECK(any_empty);

    PointCloud shuffled = c;
    rng::Engine e(10);
    rng::shuffle(e, shuffled.points);
    const GridDSM b = build_dsm(shuffled, 1.0);
    REQUIRE(a.max_z.size() == b.max_z.size());
    for (std::size_t i = 0; i < a.max_z.size(); ++i) {
        CHECK(a.occupied[i] == b.occupied[i]);
        CHECK(a.max_z[i] == b.max_z[i]);
    }
}
