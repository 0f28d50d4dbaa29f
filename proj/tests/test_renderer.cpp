// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splatmark/renderer.hpp"
#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace splatmark;
using namespace splatmark::testing;

namespace {

GaussianCloud single_gaussian(const Eigen::Vector3d& position, double opacity_logit,
                              const Eigen::Vector3d& color, double scale = 1.0) {
    GaussianCloud cloud;
    cloud.positions.push_back(position);
    cloud.rotations.push_back(Eigen::Vector4d(1, 0, 0, 0));
    cloud.log_scales.push_back(Eigen::Vector3d::Constant(std::log(scale)));
    cloud.opacity_logits.push_back(opacity_logit);
    cloud.colors.push_back(color);
    return cloud;
}

} // namespace

TEST_CASE("on-axis gaussian projects to the principal point") {
    const CameraView camera = identity_camera(32, 32, 40.0);
    const GaussianCloud cloud = single_gaussian({0, 0, 5.0}, 0.0, {1, 0, 0});
    const auto projected = project(cloud, camera);
    REQUIRE(projected.size() == 1);
    CHECK(projected[0].mean2d.x() == doctest::Approx(camera.cx).epsilon(1e-12));
    CHECK(projected[0].mean2d.y() == doctest::Approx(camera.cy).epsilon(1e-12));
    CHECK(projected[0].depth == doctest::Approx(5.0));
    CHECK(projected[0].source_index == 0);
}

TEST_CASE("doubling an isotropic scale scales the pre-dilation covariance by 4") {
    const CameraView camera = identity_camera(32, 32, 40.0);
    const GaussianCloud small = single_gaussian({0.2, -0.1, 5.0}, 0.0, {1, 0, 0}, 0.4);
    const GaussianCloud big = single_gaussian({0.2, -0.1, 5.0}, 0.0, {1, 0, 0}, 0.8);
    const Eigen::Matrix2d cov_small =
        project(small, camera)[0].cov2d -
        RasterizerConstants::kCovarianceDilation * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d cov_big =
        project(big, camera)[0].cov2d -
        RasterizerConstants::kCovarianceDilation * Eigen::Matrix2d::Identity();
    CHECK((cov_big - 4.0 * cov_small).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("behind-camera gaussians are culled") {
    const CameraView camera = identity_camera(32, 32, 40.0);
    GaussianCloud cloud = single_gaussian({0, 0, -3.0}, 0.0, {1, 0, 0});
    CHECK(project(cloud, camera).empty());

    const RenderOutput out = rasterize(cloud, camera);
    for (double v : out.image.data()) CHECK(v == 0.0);
    for (double t : out.final_transmittance) CHECK(t == 1.0);
}

TEST_CASE("projected covariance matches a numerical jacobian of the projection map") {
    // Oracle: propagate the world covariance through a finite-difference
    // jacobian of the full world->pixel map.
    const CameraView camera = [] {
        CameraView c = identity_camera(48, 32, 55.0);
        const Eigen::AngleAxisd spin(0.4, Eigen::Vector3d(0.2, 1.0, 0.1).normalized());
        c.rotation = spin.toRotationMatrix();
        c.translation = Eigen::Vector3d(0.3, -0.2, 4.2);
        return c;
    }();
    const GaussianCloud cloud = fd_test_cloud(11, 4);
    const auto projected = project(cloud, camera);

    for (const Projected2DGaussian& g : projected) {
        const int i = g.source_index;
        const auto pixel_of = [&](const Eigen::Vector3d& world) {
            const Eigen::Vector3d cam = camera.rotation * world + camera.translation;
            return Eigen::Vector2d(camera.fx * cam.x() / cam.z() + camera.cx,
                                   camera.fy * cam.y() / cam.z() + camera.cy);
        };
        CHECK((pixel_of(cloud.positions[i]) - g.mean2d).norm() < 1e-10);

        Eigen::Matrix<double, 2, 3> jac_fd;
        const double h = 1e-6;
        for (int axis = 0; axis < 3; ++axis) {
            Eigen::Vector3d lo = cloud.positions[i], hi = cloud.positions[i];
            lo[axis] -= h;
            hi[axis] += h;
            jac_fd.col(axis) = (pixel_of(hi) - pixel_of(lo)) / (2.0 * h);
        }
        const Eigen::Matrix3d rot = quaternion_to_rotation(cloud.rotations[i]);
        const Eigen::Vector3d variances = (2.0 * cloud.log_scales[i]).array().exp();
        const Eigen::Matrix3d world_cov = rot * variances.asDiagonal() * rot.transpose();
        const Eigen::Matrix2d expected =
            jac_fd * world_cov * jac_fd.transpose() +
            RasterizerConstants::kCovarianceDilation * Eigen::Matrix2d::Identity();
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c)
                CHECK(close_rel(expected(r, c), g.cov2d(r, c), 1e-5, 1e-8));
    }
}

TEST_CASE("alpha saturates at the clamp on the gaussian's own pixel") {
    const CameraView camera = identity_camera(16, 16, 20.0);
    // Mean exactly on pixel (9, 6): x = (9 - cx) * z / fx.
    const double z = 4.0;
    const Eigen::Vector3d position((9 - camera.cx) * z / camera.fx,
                                   (6 - camera.cy) * z / camera.fy, z);
    const GaussianCloud cloud = single_gaussian(position, 12.0, {0.2, 0.9, 0.4}, 1.0);
    const RenderOutput out = rasterize(cloud, camera);

    const auto& terms = out.at(6, 9);
    REQUIRE(terms.size() == 1);
    CHECK(terms[0].alpha == doctest::Approx(RasterizerConstants::kAlphaMax).epsilon(1e-12));
    CHECK(terms[0].transmittance == 1.0);
    for (int c = 0; c < 3; ++c)
        CHECK(out.image(6, 9, c) ==
              doctest::Approx(RasterizerConstants::kAlphaMax * cloud.colors[0][c]).epsilon(1e-9));
}

TEST_CASE("two-layer blending follows the compositing equation") {
    const CameraView camera = identity_camera(16, 16, 20.0);
    GaussianCloud cloud;
    // Front: red at alpha 1/2 (logit 0). Back: blue at the alpha clamp.
    const double cx = camera.cx, cy = camera.cy;
    cloud = single_gaussian({0, 0, 3.0}, 0.0, {1, 0, 0}, 1.0);
    const GaussianCloud back = single_gaussian({0, 0, 5.0}, 12.0, {0, 0, 1}, 2.0);
    cloud.positions.push_back(back.positions[0]);
    cloud.rotations.push_back(back.rotations[0]);
    cloud.log_scales.push_back(back.log_scales[0]);
    cloud.opacity_logits.push_back(back.opacity_logits[0]);
    cloud.colors.push_back(back.colors[0]);

    const RenderOutput out = rasterize(cloud, camera);
    const int px = static_cast<int>(cx), py = static_cast<int>(cy);
    // cx = 7.5 is mid-pixel; evaluate the closed form at pixel (7, 7).
    const Eigen::Vector2d d(px - cx, py - cy);
    const auto alpha_at = [&](double logit_value, double scale, double z) {
        const double sigma_screen_sq = camera.fx * camera.fx * scale * scale / (z * z) +
                                       RasterizerConstants::kCovarianceDilation;
        const double quad = d.squaredNorm() / sigma_screen_sq;
        return std::min(logistic(logit_value) * std::exp(-0.5 * quad),
                        RasterizerConstants::kAlphaMax);
    };
    const double alpha_front = alpha_at(0.0, 1.0, 3.0);
    const double alpha_back = alpha_at(12.0, 2.0, 5.0);
    CHECK(out.image(py, px, 0) == doctest::Approx(alpha_front).epsilon(1e-9));
    CHECK(out.image(py, px, 2) ==
          doctest::Approx((1.0 - alpha_front) * alpha_back).epsilon(1e-9));
    // Within the documented alpha clamp, this is the textbook half red
    // plus half blue.
    CHECK(std::abs(out.image(py, px, 0) - 0.5) < 0.02);
    CHECK(std::abs(out.image(py, px, 2) - 0.5) < 0.02);
}

TEST_CASE("blended weights and final transmittance sum to one") {
    // With every color at 1, each image channel accumulates exactly
    // sum(alpha * T), including sub-threshold contributions.
    GaussianCloud cloud = fd_test_cloud(5, 5);
    for (auto& c : cloud.colors) c = Eigen::Vector3d::Ones();
    const CameraView camera = identity_camera(24, 24, 24.0);
    const RenderOutput out = rasterize(cloud, camera);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            const double blended = out.image(y, x, 0);
            const double final_t =
                out.final_transmittance[static_cast<std::size_t>(y) * 24 + x];
            CHECK(std::abs(blended + final_t - 1.0) < 1e-6);
        }
}

TEST_CASE("depth ties broken by index keep renders permutation invariant") {
    GaussianCloud cloud = fd_test_cloud(21, 4); // distinct depths
    const CameraView camera = identity_camera(16, 16, 18.0);
    const Image base = rasterize(cloud, camera).image;

    GaussianCloud permuted;
    for (int idx : {2, 0, 3, 1}) {
        permuted.positions.push_back(cloud.positions[idx]);
        permuted.rotations.push_back(cloud.rotations[idx]);
        permuted.log_scales.push_back(cloud.log_scales[idx]);
        permuted.opacity_logits.push_back(cloud.opacity_logits[idx]);
        permuted.colors.push_back(cloud.colors[idx]);
    }
    const Image shuffled = rasterize(permuted, camera).image;
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(base.data()[i] == shuffled.data()[i]);
}

TEST_CASE("rendering twice gives bit-identical output") {
    const GaussianCloud cloud = fd_test_cloud(33, 5);
    const CameraView camera = identity_camera(16, 16, 18.0);
    const RenderOutput a = rasterize(cloud, camera);
    const RenderOutput b = rasterize(cloud, camera);
    CHECK(a.image.data() == b.image.data());
    CHECK(a.final_transmittance == b.final_transmittance);
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const GaussianCloud cloud = fd_test_cloud(7, 3);
    const CameraView camera = identity_camera(16, 16, 18.0);
    const Image zero(16, 16, 3);
    const CloudGradients grads = rasterize_backward(cloud, camera, zero);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(grads.positions[i].norm() == 0.0);
        CHECK(grads.rotations[i].norm() == 0.0);
        CHECK(grads.log_scales[i].norm() == 0.0);
        CHECK(grads.opacity_logits[i] == 0.0);
        CHECK(grads.colors[i].norm() == 0.0);
    }
}

TEST_CASE("color gradient matches central differences at h = 1e-4") {
    GaussianCloud cloud = single_gaussian({0.1, 0.05, 4.0}, 0.5, {0.4, 0.6, 0.3}, 0.9);
    const CameraView camera = identity_camera(16, 16, 18.0);
    Image weights(16, 16, 3);
    RandomStream rng(99);
    for (double& w : weights.data()) w = rng.uniform(-1.0, 1.0);

    const CloudGradients grads = rasterize_backward(cloud, camera, weights);
    for (int c = 0; c < 3; ++c) {
        const auto loss_at = [&](double v) {
            GaussianCloud probe = cloud;
            probe.colors[0][c] = v;
            const Image img = rasterize(probe, camera).image;
            double acc = 0.0;
            for (std::size_t i = 0; i < img.size(); ++i) acc += img.data()[i] * weights.data()[i];
            return acc;
        };
        const double fd = central_difference(loss_at, cloud.colors[0][c], 1e-4);
        CHECK(close_rel(grads.colors[0][c], fd, 1e-4, 1e-10));
    }
}

TEST_CASE("full jacobian of the render matches central differences") {
    // Every parameter type, every image entry, 5 gaussians on an 8x8 render.
    GaussianCloud cloud = fd_test_cloud(42, 5);
    const CameraView camera = identity_camera(8, 8, 8.0);
    const std::size_t params = cloud_param_count(cloud);
    const std::size_t entries = 8 * 8 * 3;

    // Analytic rows via one-hot adjoint calls.
    std::vector<std::vector<double>> analytic(entries, std::vector<double>(params, 0.0));
    for (std::size_t e = 0; e < entries; ++e) {
        Image one_hot(8, 8, 3);
        one_hot.data()[e] = 1.0;
        const CloudGradients grads = rasterize_backward(cloud, camera, one_hot);
        for (std::size_t p = 0; p < params; ++p) analytic[e][p] = cloud_gradient(grads, p);
    }

    const double h = 1e-5;
    std::size_t checked = 0;
    for (std::size_t p = 0; p < params; ++p) {
        GaussianCloud probe = cloud;
        double* slot = cloud_param(probe, p);
        const double saved = *slot;
        *slot = saved + h;
        const Image plus = rasterize(probe, camera).image;
        *slot = saved - h;
        const Image minus = rasterize(probe, camera).image;
        *slot = saved;
        for (std::size_t e = 0; e < entries; ++e) {
            const double fd = (plus.data()[e] - minus.data()[e]) / (2.0 * h);
            const bool ok = close_rel(analytic[e][p], fd, 1e-4, 1e-6);
            if (!ok)
                FAIL_CHECK("jacobian mismatch at entry " << e << " param " << p << " ("
                           << cloud_param_group(cloud, p) << "): analytic " << analytic[e][p]
                           << " vs fd " << fd);
            ++checked;
        }
    }
    CHECK(checked == params * entries);
}

TEST_CASE("a fully occluded gaussian keeps only a (1 - alpha_max) share of gradient") {
    const CameraView camera = identity_camera(16, 16, 18.0);
    const GaussianCloud back = single_gaussian({0, 0, 5.0}, 1.0, {0.3, 0.5, 0.7}, 0.8);

    GaussianCloud occluded = back;
    // Huge saturated front gaussian: alpha has hit the clamp across the frame.
    occluded.positions.insert(occluded.positions.begin(), {0, 0, 2.5});
    occluded.rotations.insert(occluded.rotations.begin(), Eigen::Vector4d(1, 0, 0, 0));
    occluded.log_scales.insert(occluded.log_scales.begin(),
                               Eigen::Vector3d::Constant(std::log(20.0)));
    occluded.opacity_logits.insert(occluded.opacity_logits.begin(), 14.0);
    occluded.colors.insert(occluded.colors.begin(), Eigen::Vector3d(0.5, 0.5, 0.5));

    Image weights(16, 16, 3);
    RandomStream rng(123);
    for (double& w : weights.data()) w = rng.uniform(-1.0, 1.0);

    const CloudGradients alone = rasterize_backward(back, camera, weights);
    const CloudGradients behind = rasterize_backward(occluded, camera, weights);

    const double unoccluded_norm =
        alone.colors[0].norm() + std::abs(alone.opacity_logits[0]) + alone.positions[0].norm();
    const double occluded_norm = behind.colors[1].norm() +
                                 std::abs(behind.opacity_logits[1]) +
                                 behind.positions[1].norm();
    CHECK(occluded_norm <=
          (1.0 - RasterizerConstants::kAlphaMax) * unoccluded_norm * 1.05 + 1e-12);
}
