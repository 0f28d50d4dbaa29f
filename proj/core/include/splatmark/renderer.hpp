// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/cloud.hpp"
#include "splatmark/image.hpp"

#include <Eigen/Dense>

#include <vector>

namespace splatmark {

/// Rasterizer conventions. The paper's splatting equations leave clamping
/// and dilation unstated; these match the reference-renderer defaults and
/// are shared by the forward and backward passes.
struct RasterizerConstants {
    static constexpr double kNearPlane = 0.01;       // camera-z culling plane
    static constexpr double kCovarianceDilation = 0.3; // px^2 added to cov2d diagonal
    static constexpr double kAlphaMax = 0.99;        // per-sample alpha clamp
    static constexpr double kTransmittanceStop = 1e-4; // early blending termination
    static constexpr double kBoundingSigmas = 3.0;   // rectangular cull radius, sigmas
    static constexpr double kContributorTrack = 1e-4; // alpha*T floor for the contributors buffer
};

struct Projected2DGaussian {
    Eigen::Vector2d mean2d;  // pixels
    Eigen::Matrix2d cov2d;   // pixels^2, dilation included
    double depth = 0.0;      // camera-space z
    int source_index = -1;   // index into the cloud
};

/// One alpha-blending term recorded at a pixel: alpha and the transmittance
/// in front of it (its blending weight is alpha * transmittance).
struct Contribution {
    int source_index = -1;
    double alpha = 0.0;
    double transmittance = 0.0;
};

struct RenderOutput {
    Image image;                              // H x W x 3 in [0,1]
    std::vector<double> final_transmittance;  // H*W, product of (1 - alpha) over blended terms
    std::vector<std::vector<Contribution>> contributors; // per pixel, depth order,
                                                         // alpha*T >= kContributorTrack only

    const std::vector<Contribution>& at(int y, int x) const {
        return contributors[static_cast<std::size_t>(y) * image.width() + x];
    }
};

struct RasterizeOptions {
    /// Clamp colors into [0,1] before blending. The auxiliary contribution
    /// pass renders with raw colors so its loss stays differentiable at 0.
    bool clamp_colors = true;
    /// Skip filling the per-pixel contributors buffer.
    bool track_contributors = true;
};

/// Projects every Gaussian into pixel space, culling those behind the near
/// plane. cov2d = J W Sigma W^T J^T (top-left 2x2) plus the dilation floor,
/// with Sigma = R(q) diag(exp(2 s)) R(q)^T and J the perspective Jacobian
/// at the camera-space mean. Output preserves cloud order.
std::vector<Projected2DGaussian> project(const GaussianCloud& cloud, const CameraView& view);

/// Depth-ordered alpha blending (ties broken by source index). Per pixel,
/// alpha = min(opacity * exp(-0.5 d^T cov2d^-1 d), kAlphaMax); accumulation
/// stops once transmittance falls below kTransmittanceStop. Pixels outside a
/// Gaussian's 3-sigma bounding rectangle receive exactly zero from it, in
/// both passes.
RenderOutput rasterize(const GaussianCloud& cloud, const CameraView& view,
                       const RasterizeOptions& options = {});

/// Analytic adjoint of rasterize: given dL/dimage, returns dL/dtheta for
/// every Gaussian parameter. Culled, early-terminated or out-of-rectangle
/// Gaussians get zero gradient. Uses the same clamps as the forward pass.
CloudGradients rasterize_backward(const GaussianCloud& cloud, const CameraView& view,
                                  const Image& loss_dimage,
                                  const RasterizeOptions& options = {});

/// Rotation matrix of a (not necessarily unit) quaternion, normalized internally.
Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d& q);

} // namespace splatmark
