#include "lprnet/training.hpp"

#include "lprnet/checkpoint.hpp"
#include "lprnet/errors.hpp"
#include "lprnet/network.hpp"
#include "lprnet/rng.hpp"

#include "doctest.h"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace lprnet;

namespace {

PointCloud make_cloud(std::size_t n, std::uint64_t seed, double extent = 4.0) {
    rng::Engine e(seed);
    PointCloud cloud;
    cloud.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.points.emplace_back(rng::uniform(e, -extent, extent), rng::uniform(e, -extent, extent),
                                  rng::uniform(e, -extent, extent));
    }
    return cloud;
}

NetworkConfig tiny_config() {
    NetworkConfig c;
    c.embed_dim = 8;
    c.hidden_dim = 8;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.encoder_depth = 1;
    c.decoder_depth = 1;
    c.patch_size = 4;
    c.num_patches = 6;
    c.mask_ratio = 0.5;
    c.level_fractions = {1.0, 0.5};
    return c;
}

std::vector<PointCloud> make_dataset(std::size_t count, std::size_t points, std::uint64_t seed) {
    std::vector<PointCloud> clouds;
    clouds.reserve(count);
    for (std::size_t i = 0; i < count; ++i) clouds.push_back(make_cloud(points, seed + i));
    return clouds;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.base_lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero-angle rotation returns the cloud unchanged") {
    const PointCloud cloud = make_cloud(30, 3);
    const PointCloud same = rotate_cloud(cloud, vertical_rotation(0.0));
    REQUIRE(same.points.size() == cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        CHECK(same.points[i] == cloud.points[i]);
    }
}

TEST_CASE("vertical rotation moves x/y, keeps z, and preserves distances") {
    const Mat3 r = vertical_rotation(M_PI / 2.0);
    const Vec3 moved = r * Vec3(1, 0, 0.5);
    CHECK(moved.x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(moved.y() == doctest::Approx(1.0));
    CHECK(moved.z() == 0.5);

    const PointCloud cloud = make_cloud(40, 5);
    const PointCloud rotated = augment_random_rotation(cloud, 17);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        CHECK(rotated.points[i].z() == cloud.points[i].z());
        for (std::size_t j = i + 1; j < cloud.points.size(); j += 7) {
            const double before = (cloud.points[i] - cloud.points[j]).norm();
            const double after = (rotated.points[i] - rotated.points[j]).norm();
            CHECK(std::abs(before - after) < 1e-9);
        }
    }
}

TEST_CASE("full SO(3) augmentation is an isometry about the origin") {
    const PointCloud cloud = make_cloud(40, 7);
    const PointCloud rotated = augment_random_rotation(cloud, 23, true);

    Vec3 c_before = Vec3::Zero();
    Vec3 c_after = Vec3::Zero();
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        c_before += cloud.points[i];
        c_after += rotated.points[i];
    }
    c_before /= double(cloud.points.size());
    c_after /= double(cloud.points.size());
    CHECK(std::abs(c_before.norm() - c_after.norm()) < 1e-9);

    for (std::size_t i = 0; i < cloud.points.size(); i += 5) {
        CHECK(std::abs(cloud.points[i].norm() - rotated.points[i].norm()) < 1e-9);
    }

    // a z coordinate actually changes, unlike the vertical-axis default
    bool z_changed = false;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        z_changed = z_changed || std::abs(rotated.points[i].z() - cloud.points[i].z()) > 1e-6;
    }
    CHECK(z_changed);
}

TEST_CASE("augmentation is deterministic in the seed") {
    const PointCloud cloud = make_cloud(25, 11);
    const PointCloud a = augment_random_rotation(cloud, 5);
    const PointCloud b = augment_random_rotation(cloud, 5);
    const PointCloud c = augment_random_rotation(cloud, 6);
    REQUIRE(a.points.size() == b.points.size());
    bool differs = false;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i] == b.points[i]);
        differs = differs || a.points[i] != c.points[i];
    }
    CHECK(differs);
}

TEST_CASE("two training runs with one seed produce identical histories") {
    const auto clouds = make_dataset(8, 40, 100);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.seed = 42;
    const TrainResult<float> a = train_on_clouds<float>(cfg, tiny_config(), clouds);
    const TrainResult<float> b = train_on_clouds<float>(cfg, tiny_config(), clouds);
    REQUIRE(a.step_losses.size() == 4);  // 2 steps/epoch * 2 epochs
    CHECK(a.step_losses == b.step_losses);
    CHECK(a.epoch_means == b.epoch_means);
    for (double v : a.step_losses) CHECK(std::isfinite(v));

    TrainConfig other = cfg;
    other.seed = 43;
    const TrainResult<float> c = train_on_clouds<float>(other, tiny_config(), clouds);
    CHECK(a.step_losses != c.step_losses);
}

TEST_CASE("loss drops over a short run") {
    const auto clouds = make_dataset(8, 48, 300);
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 4;
    cfg.seed = 7;
    const TrainResult<float> r = train_on_clouds<float>(cfg, tiny_config(), clouds);
    REQUIRE(r.epoch_means.size() == 8);
    CHECK(r.epoch_means.back() < r.epoch_means.front());
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run exactly") {
    const auto clouds = make_dataset(8, 40, 200);
    const NetworkConfig net = tiny_config();
    const auto ckpt = temp_file("lprnet_resume.ckpt");

    TrainConfig full;
    full.epochs = 4;
    full.batch_size = 4;
    full.seed = 9;
    const TrainResult<float> straight = train_on_clouds<float>(full, net, clouds);

    TrainConfig first = full;  // same 4-epoch schedule, halted after 2
    first.stop_after_epochs = 2;
    first.checkpoint_path = ckpt.string();
    const TrainResult<float> prefix = train_on_clouds<float>(first, net, clouds);
    REQUIRE(prefix.step_losses.size() == straight.step_losses.size() / 2);
    for (std::size_t i = 0; i < prefix.step_losses.size(); ++i) {
        CHECK(prefix.step_losses[i] == straight.step_losses[i]);
    }

    TrainConfig second = full;
    second.resume_path = ckpt.string();
    const TrainResult<float> resumed = train_on_clouds<float>(second, net, clouds);
    CHECK(resumed.first_epoch == 2);
    REQUIRE(resumed.step_losses.size() == straight.step_losses.size() / 2);
    for (std::size_t i = 0; i < resumed.step_losses.size(); ++i) {
        CHECK(resumed.step_losses[i] == straight.step_losses[i + resumed.step_losses.size()]);
    }
    std::filesystem::remove(ckpt);
}

TEST_CASE("a saved model state reloads to bit-identical features") {
    const auto clouds = make_dataset(6, 40, 400);
    const NetworkConfig net = tiny_config();
    const auto ckpt = temp_file("lprnet_state.ckpt");

    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 3;
    cfg.seed = 77;
    cfg.checkpoint_path = ckpt.string();
    const TrainResult<float> r = train_on_clouds<float>(cfg, net, clouds);

    const TrainState<float> state = load_train_state<float>(ckpt.string(), net);
    CHECK(state.next_epoch == 1);
    CHECK(state.seed == 77);
    CHECK(state.opt.step == 2);

    const PointCloud probe = make_cloud(60, 55);
    CHECK(global_feature(state.model, probe) == global_feature(r.model, probe));
    std::filesystem::remove(ckpt);
}

TEST_CASE("clouds too small for patching are skipped; all skipped is an error") {
    const NetworkConfig net = tiny_config();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 2;

    std::vector<PointCloud> mixed = {make_cloud(3, 1), make_cloud(40, 2), make_cloud(40, 3)};
    const TrainResult<float> r = train_on_clouds<float>(cfg, net, mixed);
    CHECK(r.step_losses.size() == 1);  // two usable clouds, one batch

    std::vector<PointCloud> tiny = {make_cloud(3, 1), make_cloud(2, 2)};
    CHECK_THROWS_AS(train_on_clouds<float>(cfg, net, tiny), std::invalid_argument);
}

TEST_CASE("a non-finite coordinate aborts with the batch position") {
    const NetworkConfig net = tiny_config();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 2;
    std::vector<PointCloud> clouds = make_dataset(2, 40, 500);
    clouds[1].points[7].y() = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(train_on_clouds<float>(cfg, net, clouds),
                         doctest::Contains("batch"), NumericFault);
}

TEST_CASE("training writes a JSON-lines log with epoch, step, loss, lr") {
    const auto clouds = make_dataset(4, 40, 600);
    const auto log_path = temp_file("lprnet_train_log.jsonl");
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.log_path = log_path.string();
    const TrainResult<float> r = train_on_clouds<float>(cfg, tiny_config(), clouds);

    std::ifstream in(log_path);
    REQUIRE(in.good());
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        const nlohmann::json j = nlohmann::json::parse(line);
        CHECK(j.contains("epoch"));
        CHECK(j.contains("step"));
        CHECK(j.contains("loss"));
        CHECK(j.contains("lr"));
        CHECK(j["step"].get<long long>() == (long long)count);
        CHECK(j["loss"].get<double>() == r.step_losses[count]);
        ++count;
    }
    CHECK(count == r.step_losses.size());
    std::filesystem::remove(log_path);
}

TEST_CASE("the path-based entry point loads xyz files") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = dir / "lprnet_train_a.xyz";
    const auto p2 = dir / "lprnet_train_b.xyz";
    save_xyz(make_cloud(40, 801), p1.string());
    save_xyz(make_cloud(40, 802), p2.string());

    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.dataset = {p1.string(), p2.string()};
    const TrainResult<float> r = train<float>(cfg, tiny_config());
    CHECK(r.step_losses.size() == 1);
    CHECK(std::isfinite(r.step_losses[0]));

    cfg.dataset.clear();
    CHECK_THROWS_AS(train<float>(cfg, tiny_config()), std::invalid_argument);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}
