// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splatmark/errors.hpp"
#include "splatmark/metrics.hpp"
#include "splatmark/renderer.hpp"
#include "splatmark/rng.hpp"
#include "splatmark/scene_io.hpp"
#include "support/oracles.hpp"

#include <filesystem>
#include <fstream>

using namespace splatmark;
using namespace splatmark::testing;

namespace {

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "splatmark_scene_test";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("minimal scene file loads") {
    const auto dir = temp_dir();
    // One-pixel-ish scene: 1 gaussian, 1 view.
    auto [cloud, set] = synthesize_toy_scene(3, 1, 1, 16, 16);
    CHECK(cloud.size() == 1);
    CHECK(set.size() == 1);
    const auto path = dir / "minimal.json";
    save_scene(cloud, set, path);
    auto [loaded_cloud, loaded_set] = load_scene(path);
    CHECK(loaded_cloud.size() == 1);
    CHECK(loaded_set.size() == 1);
}

TEST_CASE("cloud round trip is bit exact on randomized clouds") {
    const auto dir = temp_dir();
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto [cloud, set] = synthesize_toy_scene(seed, 40, 2, 16, 16);
        const auto path = dir / ("roundtrip_" + std::to_string(seed) + ".json");
        save_scene(cloud, set, path);
        auto [loaded, loaded_set] = load_scene(path);

        REQUIRE(loaded.size() == cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            CHECK(loaded.positions[i] == cloud.positions[i]);
            CHECK(loaded.rotations[i] == cloud.rotations[i]);
            CHECK(loaded.log_scales[i] == cloud.log_scales[i]);
            CHECK(loaded.opacity_logits[i] == cloud.opacity_logits[i]);
            CHECK(loaded.colors[i] == cloud.colors[i]);
        }
        for (std::size_t v = 0; v < set.size(); ++v) {
            const CameraView& a = set.views[v].first;
            const CameraView& b = loaded_set.views[v].first;
            CHECK(a.rotation == b.rotation);
            CHECK(a.translation == b.translation);
            CHECK(a.fx == b.fx);
            CHECK(a.cx == b.cx);
            // Images pass through 16-bit PNG quantization.
            double max_err = 0.0;
            for (std::size_t k = 0; k < set.views[v].second.size(); ++k)
                max_err = std::max(max_err, std::abs(set.views[v].second.data()[k] -
                                                     loaded_set.views[v].second.data()[k]));
            CHECK(max_err <= 0.5 / 65535.0 + 1e-12);
        }
    }
}

TEST_CASE("schema violations name the offending field") {
    const auto dir = temp_dir();
    const auto path = dir / "broken.json";
    {
        std::ofstream out(path);
        out << R"({"gaussians": [{"mu": [0, 0, 4], "rot": [1, 0, 0], "log_scale": [0, 0, 0],
                  "opacity_logit": 0.0, "rgb": [1, 0, 0]}], "views": []})";
    }
    try {
        load_scene(path);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("rot") != std::string::npos);
    }
}

TEST_CASE("zero-norm quaternion is rejected") {
    const auto dir = temp_dir();
    auto [cloud, set] = synthesize_toy_scene(5, 2, 1, 16, 16);
    cloud.rotations[0] = Eigen::Vector4d::Zero();
    CHECK_THROWS_AS(save_scene(cloud, set, dir / "badquat.json"), ValidationError);
}

TEST_CASE("empty clouds and view lists are rejected") {
    const auto dir = temp_dir();
    auto [cloud, set] = synthesize_toy_scene(6, 2, 1, 16, 16);
    TrainingSet no_views;
    CHECK_THROWS_AS(save_scene(cloud, no_views, dir / "noviews.json"), ValidationError);
    GaussianCloud empty;
    CHECK_THROWS_AS(save_scene(empty, set, dir / "empty.json"), ValidationError);
    CHECK_THROWS_AS(load_scene(dir / "does_not_exist.json"), IoError);
}

TEST_CASE("synthesis is deterministic in the seed and seeds differ") {
    auto [cloud_a, set_a] = synthesize_toy_scene(7, 50, 3, 32, 32);
    auto [cloud_b, set_b] = synthesize_toy_scene(7, 50, 3, 32, 32);
    REQUIRE(cloud_a.size() == cloud_b.size());
    for (std::size_t i = 0; i < cloud_a.size(); ++i)
        CHECK(cloud_a.positions[i] == cloud_b.positions[i]);
    for (std::size_t v = 0; v < set_a.size(); ++v)
        CHECK(set_a.views[v].second.data() == set_b.views[v].second.data());

    auto [cloud_c, set_c] = synthesize_toy_scene(8, 50, 3, 32, 32);
    bool any_differs = false;
    for (std::size_t i = 0; i < cloud_a.size() && !any_differs; ++i)
        any_differs = cloud_a.positions[i] != cloud_c.positions[i];
    CHECK(any_differs);
}

TEST_CASE("ground truth is the scene's own render") {
    auto [cloud, set] = synthesize_toy_scene(9, 60, 2, 32, 32);
    cloud.validate();
    set.validate();
    for (const auto& [camera, image] : set.views) {
        const PsnrResult q = psnr(rasterize(cloud, camera).image, image);
        CHECK(q.capped);
        CHECK(q.db == 99.0);
    }
}

TEST_CASE("synthesized scenes satisfy the type invariants for many seeds") {
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
        auto [cloud, set] = synthesize_toy_scene(seed, 25, 2, 16, 16);
        CHECK_NOTHROW(cloud.validate());
        CHECK_NOTHROW(set.validate());
    }
    CHECK_THROWS_AS(synthesize_toy_scene(1, 0, 1, 16, 16), ValidationError);
    CHECK_THROWS_AS(synthesize_toy_scene(1, 1, 0, 16, 16), ValidationError);
    CHECK_THROWS_AS(synthesize_toy_scene(1, 1, 1, 18, 16), ValidationError);
}
