#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "lprnet/errors.hpp"
#include "lprnet/run_config.hpp"

using namespace lprnet;

TEST_CASE("an empty object yields every documented default") {
    const RunConfig cfg = parse_run_config("{}");
    CHECK(cfg.network.embed_dim == 64);
    CHECK(cfg.network.embedding == Embedding::kBoth);
    CHECK(cfg.network.integrator == Integrator::kTransformer);
    CHECK(cfg.training.epochs == 30);
    CHECK(cfg.training.base_lr == doctest::Approx(1e-3));
    CHECK(cfg.registration.max_iterations == 50);
    CHECK(cfg.simulation.noise_sigma == doctest::Approx(0.1));
}

TEST_CASE("sections set their fields and round-trip through serialization") {
    const std::string text = R"({
        "network": {"embed_dim": 16, "hidden_dim": 12, "heads": 3,
                     "level_fractions": [1.0, 0.5], "embedding": "feat",
                     "integrator": "mlp"},
        "training": {"epochs": 5, "seed": 42, "dataset": ["a.xyz", "b.ply"],
                      "full_so3_augment": true},
        "registration": {"step": 0.001, "central_differences": false},
        "simulation": {"occlusion_rate": 0.4, "vertical_axis_only": true}
    })";
    const RunConfig cfg = parse_run_config(text);
    CHECK(cfg.network.embed_dim == 16);
    CHECK(cfg.network.level_fractions == std::vector<double>({1.0, 0.5}));
    CHECK(cfg.network.embedding == Embedding::kFeatureOnly);
    CHECK(cfg.network.integrator == Integrator::kSharedMLP);
    CHECK(cfg.training.epochs == 5);
    CHECK(cfg.training.seed == 42);
    CHECK(cfg.training.dataset == std::vector<std::string>({"a.xyz", "b.ply"}));
    CHECK(cfg.training.full_so3_augment);
    CHECK(cfg.registration.step == doctest::Approx(0.001));
    CHECK_FALSE(cfg.registration.central_differences);
    CHECK(cfg.simulation.occlusion_rate == doctest::Approx(0.4));
    CHECK(cfg.simulation.vertical_axis_only);

    const RunConfig back = parse_run_config(run_config_json(cfg));
    CHECK(back.network.embed_dim == cfg.network.embed_dim);
    CHECK(back.network.embedding == cfg.network.embedding);
    CHECK(back.training.seed == cfg.training.seed);
    CHECK(back.training.dataset == cfg.training.dataset);
    CHECK(back.registration.central_differences == cfg.registration.central_differences);
    CHECK(back.simulation.occlusion_rate == doctest::Approx(cfg.simulation.occlusion_rate));
    CHECK(run_config_json(back) == run_config_json(cfg));
}

TEST_CASE("unknown keys are rejected and named") {
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"nets": {}})"),
                         "config: unknown key \"nets\"", std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"network": {"embed_dims": 64}})"),
                         "config: unknown key \"network.embed_dims\"", std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"training": {"lr": 0.1}})"),
                         "config: unknown key \"training.lr\"", std::invalid_argument);
}

TEST_CASE("type mismatches name the key and the expected type") {
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"network": {"embed_dim": "big"}})"),
                         "config: key \"network.embed_dim\" expects an integer",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"network": {"mask_ratio": true}})"),
                         "config: key \"network.mask_ratio\" expects a number",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"training": {"seed": -3}})"),
                         "config: key \"training.seed\" expects a non-negative integer",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"training": {"dataset": [1]}})"),
                         "config: key \"training.dataset\" expects an array of strings",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"network": {"embedding": "fancy"}})"),
                         "config: key \"network.embedding\" expects one of \"pos\", \"feat\", "
                         "\"both\"",
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_run_config(R"({"registration": 5})"),
                         "config: key \"registration\" expects an object", std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config("[1,2]"), std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config("{ nope"), std::invalid_argument);
}

TEST_CASE("config files load from disk and missing paths are I/O errors") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "lprnet_run_config_test.json";
    {
        std::ofstream out(path);
        out << R"({"training": {"epochs": 2}})";
    }
    const RunConfig cfg = load_run_config(path.string());
    CHECK(cfg.training.epochs == 2);
    fs::remove(path);
    CHECK_THROWS_AS(load_run_config(path.string()), IoError);
}
