// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splatmark/errors.hpp"
#include "splatmark/fgd.hpp"
#include "splatmark/metrics.hpp"
#include "splatmark/scene_io.hpp"
#include "support/oracles.hpp"

#include <cmath>
#include <limits>

using namespace splatmark;
using namespace splatmark::testing;

namespace {

// The paper-defined auxiliary loss, evaluated by actually rendering with
// raw auxiliary colors (no clamping): sum |I - gt| .* I / (H*W).
double auxiliary_loss(const GaussianCloud& cloud, const CameraView& camera,
                      const Image& ground_truth,
                      const std::vector<Eigen::Vector3d>& aux_colors) {
    GaussianCloud aux = cloud;
    aux.colors = aux_colors;
    RasterizeOptions options;
    options.clamp_colors = false;
    options.track_contributors = false;
    const Image rendered = rasterize(aux, camera, options).image;
    double acc = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i)
        acc += std::abs(rendered.data()[i] - ground_truth.data()[i]) * rendered.data()[i];
    return acc / static_cast<double>(camera.width * camera.height);
}

TrainingSet single_view_set(const GaussianCloud& cloud, const CameraView& camera) {
    TrainingSet set;
    set.views.emplace_back(camera, rasterize(cloud, camera).image);
    return set;
}

} // namespace

TEST_CASE("contribution matches finite differences of the auxiliary loss") {
    // High opacities keep every in-rectangle blending term above the
    // contributor tracking floor, so the buffer-based measure is exact.
    GaussianCloud cloud = fd_test_cloud(55, 3);
    for (double& logit_value : cloud.opacity_logits) logit_value = std::max(logit_value, 2.2);
    const CameraView camera = identity_camera(8, 8, 8.0);
    const TrainingSet set = single_view_set(cloud, camera);

    const ContributionMap measured = measure_contribution(cloud, set);

    const std::vector<Eigen::Vector3d> zeros(cloud.size(), Eigen::Vector3d::Zero());
    const double h = 1e-4;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            auto colors = zeros;
            colors[i][c] = h;
            const double plus = auxiliary_loss(cloud, camera, set.views[0].second, colors);
            colors[i][c] = -h;
            const double minus = auxiliary_loss(cloud, camera, set.views[0].second, colors);
            const double fd = (plus - minus) / (2.0 * h);
            CHECK(close_rel(measured.per_channel[i][c], fd, 1e-4, 1e-9));
        }
    }
}

TEST_CASE("gaussians culled from every view have zero contribution") {
    GaussianCloud cloud = fd_test_cloud(56, 3);
    cloud.positions[1].z() = -5.0; // behind the camera
    const CameraView camera = identity_camera(16, 16, 18.0);
    const ContributionMap measured = measure_contribution(cloud, single_view_set(cloud, camera));
    CHECK(measured.reduced[1] == 0.0);
    CHECK(measured.reduced[0] > 0.0);
}

TEST_CASE("white full-frame gaussian has the closed-form contribution") {
    // Single saturated white gaussian over white ground truth:
    // V = alpha_max * mean(gt) at every covered pixel.
    GaussianCloud cloud;
    cloud.positions.push_back({0, 0, 3.0});
    cloud.rotations.push_back(Eigen::Vector4d(1, 0, 0, 0));
    cloud.log_scales.push_back(Eigen::Vector3d::Constant(std::log(25.0)));
    cloud.opacity_logits.push_back(14.0);
    cloud.colors.push_back(Eigen::Vector3d::Ones());
    const CameraView camera = identity_camera(16, 16, 18.0);
    const TrainingSet set = single_view_set(cloud, camera);

    // gt is the render itself: alpha_max everywhere.
    const ContributionMap measured = measure_contribution(cloud, set);
    const double expected = RasterizerConstants::kAlphaMax * RasterizerConstants::kAlphaMax;
    CHECK(measured.reduced[0] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("prune thresholds behave at the extremes") {
    auto [cloud, set] = synthesize_toy_scene(12, 60, 2, 32, 32);
    const ContributionMap contribution = measure_contribution(cloud, set);

    auto [same, removed_none] = prune(cloud, contribution, 0.0);
    CHECK(removed_none.empty());
    CHECK(same.size() == cloud.size());

    CHECK_THROWS_AS(prune(cloud, contribution, std::numeric_limits<double>::infinity()),
                    ValidationError);
    CHECK_THROWS_AS(prune(cloud, contribution, -1.0), ValidationError);
}

TEST_CASE("prune is idempotent at a fixed threshold") {
    auto [cloud, set] = synthesize_toy_scene(13, 80, 2, 32, 32);
    const ContributionMap contribution = measure_contribution(cloud, set);
    auto [pruned, removed] = prune(cloud, contribution, 1e-8);
    CHECK(!removed.empty());

    std::vector<int> surviving;
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i)
        if (std::find(removed.begin(), removed.end(), i) == removed.end())
            surviving.push_back(i);
    const ContributionMap sub = contribution.subset(surviving);
    auto [pruned_again, removed_again] = prune(pruned, sub, 1e-8);
    CHECK(removed_again.empty());
    CHECK(pruned_again.size() == pruned.size());
}

TEST_CASE("pruning at the default threshold preserves the render") {
    auto [cloud, set] = synthesize_toy_scene(14, 100, 3, 32, 32);
    const ContributionMap contribution = measure_contribution(cloud, set);
    auto [pruned, removed] = prune(cloud, contribution, 1e-8);
    CHECK(removed.size() > 0);
    for (const auto& [camera, gt] : set.views) {
        const PsnrResult q = psnr(rasterize(cloud, camera).image, rasterize(pruned, camera).image);
        CHECK(q.db >= 35.0);
    }
}

TEST_CASE("patch selection: uniform image falls back to raster order") {
    GaussianCloud cloud = fd_test_cloud(57, 1);
    const CameraView camera = identity_camera(64, 64, 60.0);
    RenderOutput render = rasterize(cloud, camera);
    for (double& v : render.image.data()) v = 0.5; // force uniform

    FgdConfig config;
    config.patch_size = 16;
    config.top_k_percent = 20.0; // ceil(0.2 * 16) = 4 patches
    const auto selected = select_high_freq_patches(render, config);
    REQUIRE(selected.size() == 4);
    CHECK(selected[0].origin_x == 0);
    CHECK(selected[0].origin_y == 0);
    CHECK(selected[1].origin_x == 16);
    CHECK(selected[1].origin_y == 0);
    CHECK(selected[2].origin_x == 32);
    CHECK(selected[3].origin_x == 48);
    for (const auto& s : selected) CHECK(s.intensity == 0.0);
}

TEST_CASE("a single busy patch ranks first") {
    GaussianCloud cloud = fd_test_cloud(58, 1);
    const CameraView camera = identity_camera(64, 64, 60.0);
    RenderOutput render = rasterize(cloud, camera);
    for (double& v : render.image.data()) v = 0.25;
    // Checkerboard inside the patch whose origin is (32, 16).
    for (int y = 16; y < 32; ++y)
        for (int x = 32; x < 48; ++x)
            for (int c = 0; c < 3; ++c)
                render.image(y, x, c) = ((x + y) % 2 == 0) ? 1.0 : 0.0;

    FgdConfig config;
    config.patch_size = 16;
    config.top_k_percent = 1.0;
    const auto selected = select_high_freq_patches(render, config);
    REQUIRE(selected.size() == 1);
    CHECK(selected[0].origin_x == 32);
    CHECK(selected[0].origin_y == 16);
    CHECK(selected[0].intensity > 0.0);
}

TEST_CASE("k = 100 selects every full patch") {
    GaussianCloud cloud = fd_test_cloud(59, 2);
    const CameraView camera = identity_camera(48, 32, 30.0);
    const RenderOutput render = rasterize(cloud, camera);
    FgdConfig config;
    config.patch_size = 16;
    config.top_k_percent = 100.0;
    CHECK(select_high_freq_patches(render, config).size() == 3 * 2);
}

TEST_CASE("splitting replaces one parent with two children") {
    GaussianCloud cloud;
    cloud.positions.push_back({0, 0, 4.0});
    cloud.rotations.push_back(Eigen::Vector4d(1, 0, 0, 0));
    cloud.log_scales.push_back(Eigen::Vector3d(std::log(1.2), std::log(0.6), std::log(0.5)));
    cloud.opacity_logits.push_back(1.2);
    cloud.colors.push_back(Eigen::Vector3d(0.7, 0.3, 0.4));
    const CameraView camera = identity_camera(32, 32, 32.0);

    const RenderOutput render = rasterize(cloud, camera);
    FgdConfig config;
    config.patch_size = 16;
    config.top_k_percent = 100.0;
    const auto patches = select_high_freq_patches(render, config);
    const TrainingSet set = single_view_set(cloud, camera);
    const ContributionMap contribution = measure_contribution(cloud, set);

    const GaussianCloud split_cloud =
        split_in_patches(cloud, {render}, {patches}, contribution, config);
    REQUIRE(split_cloud.size() == 2);

    // Children straddle the parent along its longest axis (x here),
    // minus offset first, with scales reduced by the divisor.
    const double offset = std::exp(cloud.log_scales[0][0]) / 2.0;
    CHECK(split_cloud.positions[0].x() == doctest::Approx(-offset));
    CHECK(split_cloud.positions[1].x() == doctest::Approx(offset));
    CHECK(split_cloud.log_scales[0][1] ==
          doctest::Approx(cloud.log_scales[0][1] - std::log(1.6)));
    CHECK(split_cloud.opacity_logits[0] == cloud.opacity_logits[0]);
    CHECK(split_cloud.colors[1] == cloud.colors[0]);

    // And the two children still resemble the parent's render.
    const PsnrResult q = psnr(render.image, rasterize(split_cloud, camera).image);
    CHECK(q.db >= 25.0);
}

TEST_CASE("no selected patches leaves the cloud unchanged") {
    GaussianCloud cloud = fd_test_cloud(60, 3);
    const CameraView camera = identity_camera(32, 32, 32.0);
    const RenderOutput render = rasterize(cloud, camera);
    const TrainingSet set = single_view_set(cloud, camera);
    const ContributionMap contribution = measure_contribution(cloud, set);
    FgdConfig config;
    const GaussianCloud out = split_in_patches(cloud, {render}, {{}}, contribution, config);
    CHECK(out.size() == cloud.size());
}

TEST_CASE("full pipeline shrinks the toy scene and reports consistent counts") {
    auto [cloud, set] = synthesize_toy_scene(15, 120, 3, 64, 64);
    FgdConfig config;
    auto [result, report] = run_fgd(cloud, set, config);

    CHECK(report.before_count == 120);
    CHECK(report.removed > 0);
    CHECK(report.after_count == report.before_count - report.removed + report.split);
    CHECK(report.after_count == static_cast<int>(result.size()));
    CHECK(report.after_count < report.before_count); // removals dominate splits
    CHECK(report.per_view_psnr.size() == set.size());
    for (double db : report.per_view_psnr) CHECK(db >= 20.0);

    const std::string json = report.to_json();
    CHECK(json.find("before_count") != std::string::npos);
}

TEST_CASE("identity configuration is a no-op") {
    auto [cloud, set] = synthesize_toy_scene(16, 40, 2, 32, 32);
    FgdConfig config;
    config.prune_threshold = 0.0;
    config.top_k_percent = 0.0;
    auto [result, report] = run_fgd(cloud, set, config);
    CHECK(result.size() == cloud.size());
    CHECK(report.removed == 0);
    CHECK(report.split == 0);
    for (std::size_t i = 0; i < cloud.size(); ++i)
        CHECK(result.positions[i] == cloud.positions[i]);
}
