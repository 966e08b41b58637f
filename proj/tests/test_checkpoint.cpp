#include "doctest.h"

#include "lprnet/checkpoint.hpp"
#include "lprnet/errors.hpp"

#include <filesystem>
#include <fstream>

using namespace lprnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lprnet_ckpt_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<CheckpointRecord> sample_records() {
    std::vector<CheckpointRecord> recs;
    recs.push_back(make_record<float>("enc.w1", {2, 3}, {1.5f, -2.25f, 3.125f, 0.1f, 0.2f, 0.3f}));
    recs.push_back(make_record<double>("opt.step", {1}, {42.0}));
    recs.push_back(make_record<float>("head.bias", {4}, {0.0f, -0.0f, 1e-30f, 3.0f}));
    return recs;
}

}  // namespace

TEST_CASE("checkpoint roundtrip is byte-exact") {
    const auto a = temp_file("a.ckpt");
    const auto b = temp_file("b.ckpt");
    save_checkpoint(a.string(), sample_records());
    const auto loaded = load_checkpoint(a.string());
    save_checkpoint(b.string(), loaded);
    CHECK(read_file(a) == read_file(b));

    REQUIRE(loaded.size() == 3);
    CHECK(loaded[0].name == "enc.w1");
    CHECK(loaded[0].dims == std::vector<std::uint32_t>{2, 3});
    const auto w1 = record_values<float>(loaded[0]);
    CHECK(w1[2] == 3.125f);
    const auto step = record_values<double>(loaded[1]);
    CHECK(step[0] == 42.0);
    const auto bias = record_values<float>(loaded[2]);
    CHECK(bias[2] == 1e-30f);  // denormal-ish values survive untouched
}

TEST_CASE("empty record list roundtrips") {
    const auto p = temp_file("empty.ckpt");
    save_checkpoint(p.string(), {});
    CHECK(load_checkpoint(p.string()).empty());
}

TEST_CASE("wrong magic is rejected") {
    const auto p = temp_file("magic.ckpt");
    std::ofstream(p, std::ios::binary) << "NOPE\x01\x00\x00\x00";
    CHECK_THROWS_AS(load_checkpoint(p.string()), UnsupportedVersionError);
}

TEST_CASE("future version is rejected") {
    const auto good = temp_file("good.ckpt");
    save_checkpoint(good.string(), sample_records());
    auto bytes = read_file(good);
    bytes[4] = 9;  // bump the version field
    const auto p = temp_file("future.ckpt");
    std::ofstream(p, std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_checkpoint(p.string()), UnsupportedVersionError);
}

TEST_CASE("truncated payload names the record") {
    const auto good = temp_file("good2.ckpt");
    save_checkpoint(good.string(), sample_records());
    auto bytes = read_file(good);
    bytes.resize(bytes.size() - 5);
    const auto p = temp_file("trunc.ckpt");
    std::ofstream(p, std::ios::binary) << bytes;
    try {
        load_checkpoint(p.string());
        FAIL("expected IntegrityError");
    } catch (const IntegrityError& e) {
        CHECK(std::string(e.what()).find("head.bias") != std::string::npos);
    }
}

TEST_CASE("unknown dtype is rejected") {
    auto recs = sample_records();
    const auto good = temp_file("good3.ckpt");
    save_checkpoint(good.string(), {recs[1]});  // single f64 record "opt.step"
    auto bytes = read_file(good);
    // dtype byte sits after magic(4) + version(4) + name_len(4) + name(8)
    bytes[4 + 4 + 4 + 8] = 7;
    const auto p = temp_file("dtype.ckpt");
    std::ofstream(p, std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_checkpoint(p.string()), UnsupportedFormatError);
}

TEST_CASE("record constructor validates dims") {
    CHECK_THROWS_AS(make_record<float>("w", {2, 3}, {1.0f}), ShapeError);
    CHECK_THROWS_AS(record_values<double>(sample_records()[0]), UnsupportedFormatError);
}

TEST_CASE("missing file raises IoError") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), IoError);
}
