// SPDX-License-Identifier: Apache-2.0
#include "splatmark/renderer.hpp"

#include "splatmark/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace splatmark {

Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d& q) {
    const Eigen::Vector4d u = q / q.norm();
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Eigen::Matrix3d rot;
    rot << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
           2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
           2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return rot;
}

namespace {

// Partial derivatives of R(q_hat) w.r.t. the normalized quaternion components.
void rotation_jacobian(const Eigen::Vector4d& u, Eigen::Matrix3d out[4]) {
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    out[0] << 0, -z, y,
              z, 0, -x,
              -y, x, 0;
    out[1] << 0, y, z,
              y, -2 * x, -w,
              z, w, -2 * x;
    out[2] << -2 * y, x, w,
              x, 0, z,
              -w, z, -2 * y;
    out[3] << -2 * z, -w, x,
              w, -2 * z, y,
              x, y, 0;
    for (int k = 0; k < 4; ++k) out[k] *= 2.0;
}

// Everything the forward pass computes per visible Gaussian, kept so the
// backward pass can chain through it.
struct ProjectedDetail {
    int source_index = -1;
    double depth = 0.0;
    Eigen::Vector2d mean2d;
    Eigen::Matrix2d cov2d;    // dilated
    Eigen::Matrix2d inv_cov;
    double opacity = 0.0;     // logistic(logit)
    Eigen::Vector3d color;    // clamped or raw per options
    Eigen::Vector3d raw_color;
    // pixel bounding rectangle, inclusive; empty if x0 > x1 or y0 > y1
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
    // saved intermediates
    Eigen::Vector4d q_hat;
    double q_norm = 1.0;
    Eigen::Matrix3d rot;
    Eigen::Vector3d cam_mean;               // t
    Eigen::Matrix<double, 2, 3> jacobian;   // J
    Eigen::Matrix3d cam_cov;                // V = W Sigma W^T
};

std::vector<ProjectedDetail> project_detailed(const GaussianCloud& cloud, const CameraView& view,
                                              const RasterizeOptions& options) {
    std::vector<ProjectedDetail> out;
    out.reserve(cloud.size());
    const Eigen::Matrix3d& world_to_cam = view.rotation;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d t = world_to_cam * cloud.positions[i] + view.translation;
        if (t.z() <= RasterizerConstants::kNearPlane) continue;

        ProjectedDetail g;
        g.source_index = static_cast<int>(i);
        g.depth = t.z();
        g.cam_mean = t;
        g.q_norm = cloud.rotations[i].norm();
        g.q_hat = cloud.rotations[i] / g.q_norm;
        g.rot = quaternion_to_rotation(cloud.rotations[i]);

        const Eigen::Vector3d variances = (2.0 * cloud.log_scales[i]).array().exp();
        const Eigen::Matrix3d world_cov =
            g.rot * variances.asDiagonal() * g.rot.transpose();
        g.cam_cov = world_to_cam * world_cov * world_to_cam.transpose();

        const double inv_z = 1.0 / t.z();
        g.jacobian << view.fx * inv_z, 0.0, -view.fx * t.x() * inv_z * inv_z,
                      0.0, view.fy * inv_z, -view.fy * t.y() * inv_z * inv_z;
        g.mean2d = Eigen::Vector2d(view.fx * t.x() * inv_z + view.cx,
                                   view.fy * t.y() * inv_z + view.cy);

        g.cov2d = g.jacobian * g.cam_cov * g.jacobian.transpose();
        g.cov2d(0, 0) += RasterizerConstants::kCovarianceDilation;
        g.cov2d(1, 1) += RasterizerConstants::kCovarianceDilation;

        const double det = g.cov2d(0, 0) * g.cov2d(1, 1) - g.cov2d(0, 1) * g.cov2d(1, 0);
        g.inv_cov << g.cov2d(1, 1) / det, -g.cov2d(0, 1) / det,
                     -g.cov2d(1, 0) / det, g.cov2d(0, 0) / det;

        g.opacity = logistic(cloud.opacity_logits[i]);
        g.raw_color = cloud.colors[i];
        g.color = options.clamp_colors
                      ? g.raw_color.cwiseMax(0.0).cwiseMin(1.0).eval()
                      : g.raw_color;

        // 3-sigma rectangle from the largest eigenvalue of cov2d.
        const double mid = 0.5 * (g.cov2d(0, 0) + g.cov2d(1, 1));
        const double disc = std::sqrt(std::max(0.0, mid * mid - det));
        const double radius =
            RasterizerConstants::kBoundingSigmas * std::sqrt(std::max(0.0, mid + disc));
        g.x0 = std::max(0, static_cast<int>(std::ceil(g.mean2d.x() - radius)));
        g.x1 = std::min(view.width - 1, static_cast<int>(std::floor(g.mean2d.x() + radius)));
        g.y0 = std::max(0, static_cast<int>(std::ceil(g.mean2d.y() - radius)));
        g.y1 = std::min(view.height - 1, static_cast<int>(std::floor(g.mean2d.y() + radius)));

        out.push_back(std::move(g));
    }
    std::sort(out.begin(), out.end(), [](const ProjectedDetail& a, const ProjectedDetail& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.source_index < b.source_index;
    });
    return out;
}

// One alpha-blending term as the per-pixel walk sees it.
struct BlendStep {
    const ProjectedDetail* gaussian;
    Eigen::Vector2d offset;      // pixel - mean2d
    double exponential;          // exp(-0.5 d^T inv_cov d)
    double alpha;
    double transmittance_before;
    bool alpha_clamped;
};

// Front-to-back walk at one pixel; invokes fn for every blended term and
// returns the final transmittance.
template <typename Fn>
double blend_pixel(const std::vector<ProjectedDetail>& sorted, double px, double py, int ix,
                   int iy, Fn&& fn) {
    double transmittance = 1.0;
    for (const ProjectedDetail& g : sorted) {
        if (ix < g.x0 || ix > g.x1 || iy < g.y0 || iy > g.y1) continue;
        const Eigen::Vector2d d(px - g.mean2d.x(), py - g.mean2d.y());
        const double quad = d.dot(g.inv_cov * d);
        const double exponential = std::exp(-0.5 * quad);
        double alpha = g.opacity * exponential;
        const bool clamped = alpha > RasterizerConstants::kAlphaMax;
        if (clamped) alpha = RasterizerConstants::kAlphaMax;

        fn(BlendStep{&g, d, exponential, alpha, transmittance, clamped});

        transmittance *= 1.0 - alpha;
        if (transmittance < RasterizerConstants::kTransmittanceStop) break;
    }
    return transmittance;
}

} // namespace

std::vector<Projected2DGaussian> project(const GaussianCloud& cloud, const CameraView& view) {
    RasterizeOptions options;
    auto detailed = project_detailed(cloud, view, options);
    // Back to cloud order; the depth sort is a rasterization concern.
    std::sort(detailed.begin(), detailed.end(),
              [](const ProjectedDetail& a, const ProjectedDetail& b) {
                  return a.source_index < b.source_index;
              });
    std::vector<Projected2DGaussian> out;
    out.reserve(detailed.size());
    for (const auto& g : detailed)
        out.push_back(Projected2DGaussian{g.mean2d, g.cov2d, g.depth, g.source_index});
    return out;
}

RenderOutput rasterize(const GaussianCloud& cloud, const CameraView& view,
                       const RasterizeOptions& options) {
    const auto sorted = project_detailed(cloud, view, options);

    RenderOutput out{Image(view.height, view.width, 3),
                     std::vector<double>(static_cast<std::size_t>(view.height) * view.width, 1.0),
                     {}};
    if (options.track_contributors)
        out.contributors.resize(static_cast<std::size_t>(view.height) * view.width);

    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            const std::size_t pixel = static_cast<std::size_t>(y) * view.width + x;
            const double final_t = blend_pixel(
                sorted, static_cast<double>(x), static_cast<double>(y), x, y,
                [&](const BlendStep& step) {
                    const double weight = step.alpha * step.transmittance_before;
                    for (int c = 0; c < 3; ++c)
                        out.image(y, x, c) += step.gaussian->color[c] * weight;
                    if (options.track_contributors &&
                        weight >= RasterizerConstants::kContributorTrack)
                        out.contributors[pixel].push_back(Contribution{
                            step.gaussian->source_index, step.alpha, step.transmittance_before});
                });
            out.final_transmittance[pixel] = final_t;
        }
    }
    return out;
}

CloudGradients rasterize_backward(const GaussianCloud& cloud, const CameraView& view,
                                  const Image& loss_dimage, const RasterizeOptions& options) {
    if (loss_dimage.height() != view.height || loss_dimage.width() != view.width ||
        loss_dimage.channels() != 3)
        throw ValidationError("rasterize_backward: dL/dimage does not match the view resolution");
    if (!loss_dimage.all_finite())
        throw ValidationError("rasterize_backward: dL/dimage has non-finite entries");

    const auto sorted = project_detailed(cloud, view, options);

    // Per visible Gaussian accumulators in sorted order.
    const std::size_t m = sorted.size();
    std::vector<Eigen::Vector3d> d_color(m, Eigen::Vector3d::Zero());
    std::vector<double> d_opacity(m, 0.0);
    std::vector<Eigen::Vector2d> d_mean2d(m, Eigen::Vector2d::Zero());
    std::vector<Eigen::Matrix2d> d_invcov(m, Eigen::Matrix2d::Zero());
    std::vector<int> slot_of_sorted(m);
    for (std::size_t k = 0; k < m; ++k) slot_of_sorted[k] = static_cast<int>(k);

    std::vector<BlendStep> steps;
    std::vector<std::size_t> step_slots;
    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            steps.clear();
            step_slots.clear();
            std::size_t walk_slot = 0;
            blend_pixel(sorted, static_cast<double>(x), static_cast<double>(y), x, y,
                        [&](const BlendStep& step) {
                            // Recover the slot: sorted order is the walk order.
                            while (&sorted[walk_slot] != step.gaussian) ++walk_slot;
                            steps.push_back(step);
                            step_slots.push_back(walk_slot);
                        });

            const Eigen::Vector3d d_pixel(loss_dimage(y, x, 0), loss_dimage(y, x, 1),
                                          loss_dimage(y, x, 2));
            if (d_pixel.isZero(0.0)) continue;

            // Back-to-front sweep; suffix holds sum of color*alpha*T behind
            // the current term.
            Eigen::Vector3d suffix = Eigen::Vector3d::Zero();
            for (std::size_t k = steps.size(); k-- > 0;) {
                const BlendStep& step = steps[k];
                const ProjectedDetail& g = *step.gaussian;
                const std::size_t slot = step_slots[k];
                const double weight = step.alpha * step.transmittance_before;

                for (int c = 0; c < 3; ++c) {
                    const bool pass = !options.clamp_colors ||
                                      (g.raw_color[c] > 0.0 && g.raw_color[c] < 1.0);
                    if (pass) d_color[slot][c] += d_pixel[c] * weight;
                }

                double d_alpha = 0.0;
                for (int c = 0; c < 3; ++c)
                    d_alpha += d_pixel[c] * (g.color[c] * step.transmittance_before -
                                             suffix[c] / (1.0 - step.alpha));
                suffix += g.color * weight;

                if (step.alpha_clamped) continue; // flat region of the clamp

                const double d_sigma = d_alpha * step.exponential;
                d_opacity[slot] += d_sigma;
                const double d_exponential = d_alpha * g.opacity;
                const double d_quad = -0.5 * step.exponential * d_exponential;
                const Eigen::Vector2d a_d = g.inv_cov * step.offset;
                d_mean2d[slot] -= 2.0 * d_quad * a_d;
                d_invcov[slot] += d_quad * step.offset * step.offset.transpose();
            }
        }
    }

    // Chain each visible Gaussian's screen-space gradients back to its
    // stored parameters.
    CloudGradients grads(cloud.size());
    const Eigen::Matrix3d& world_to_cam = view.rotation;
    for (std::size_t k = 0; k < m; ++k) {
        const ProjectedDetail& g = sorted[k];
        const int i = g.source_index;

        grads.colors[i] += d_color[k];
        const double sigma = g.opacity;
        grads.opacity_logits[i] += d_opacity[k] * sigma * (1.0 - sigma);

        // inv_cov -> cov2d (dilation is additive, so identical gradient).
        const Eigen::Matrix2d d_cov2d = -g.inv_cov * d_invcov[k] * g.inv_cov;

        // cov2d = J V J^T
        const Eigen::Matrix3d d_camcov = g.jacobian.transpose() * d_cov2d * g.jacobian;
        const Eigen::Matrix<double, 2, 3> d_jacobian =
            (d_cov2d + d_cov2d.transpose()) * g.jacobian * g.cam_cov;
        const Eigen::Matrix3d d_worldcov =
            world_to_cam.transpose() * d_camcov * world_to_cam;

        // Camera-space mean: through the projection and through J.
        const double tx = g.cam_mean.x(), ty = g.cam_mean.y(), tz = g.cam_mean.z();
        const double inv_z = 1.0 / tz;
        const double inv_z2 = inv_z * inv_z;
        Eigen::Vector3d d_cam = Eigen::Vector3d::Zero();
        d_cam.x() += d_mean2d[k].x() * view.fx * inv_z;
        d_cam.y() += d_mean2d[k].y() * view.fy * inv_z;
        d_cam.z() += -d_mean2d[k].x() * view.fx * tx * inv_z2 -
                     d_mean2d[k].y() * view.fy * ty * inv_z2;
        d_cam.x() += d_jacobian(0, 2) * (-view.fx * inv_z2);
        d_cam.y() += d_jacobian(1, 2) * (-view.fy * inv_z2);
        d_cam.z() += d_jacobian(0, 0) * (-view.fx * inv_z2) +
                     d_jacobian(1, 1) * (-view.fy * inv_z2) +
                     d_jacobian(0, 2) * (2.0 * view.fx * tx * inv_z2 * inv_z) +
                     d_jacobian(1, 2) * (2.0 * view.fy * ty * inv_z2 * inv_z);
        grads.positions[i] += world_to_cam.transpose() * d_cam;

        // world_cov = R diag(exp(2 s)) R^T
        const Eigen::Vector3d variances = (2.0 * cloud.log_scales[i]).array().exp();
        const Eigen::Matrix3d d_rot =
            (d_worldcov + d_worldcov.transpose()) * g.rot * variances.asDiagonal();
        const Eigen::Matrix3d rt_g_r = g.rot.transpose() * d_worldcov * g.rot;
        for (int axis = 0; axis < 3; ++axis)
            grads.log_scales[i][axis] += rt_g_r(axis, axis) * 2.0 * variances[axis];

        Eigen::Matrix3d rot_partials[4];
        rotation_jacobian(g.q_hat, rot_partials);
        Eigen::Vector4d d_qhat;
        for (int comp = 0; comp < 4; ++comp)
            d_qhat[comp] = (d_rot.array() * rot_partials[comp].array()).sum();
        // Through the normalization q_hat = q / |q|.
        grads.rotations[i] += (d_qhat - g.q_hat * g.q_hat.dot(d_qhat)) / g.q_norm;
    }
    return grads;
}

} // namespace splatmark
