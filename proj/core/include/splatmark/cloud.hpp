// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/errors.hpp"
#include "splatmark/image.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <utility>
#include <vector>

namespace splatmark {

inline double logistic(double x) {
    // Split on sign so exp never overflows.
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Trainable scene model: N anisotropic 3D Gaussians.
///
/// Opacity is stored as a logit and scale as a log so optimizer steps stay
/// unconstrained; rendering applies logistic/exp. Colors are plain RGB
/// (degree-0 only) and may drift outside [0,1] during fine-tuning; they are
/// clamped at render time.
struct GaussianCloud {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector4d> rotations; // unit quaternions (w, x, y, z)
    std::vector<Eigen::Vector3d> log_scales;
    std::vector<double> opacity_logits;
    std::vector<Eigen::Vector3d> colors;

    std::size_t size() const { return positions.size(); }

    /// Throws ValidationError unless all invariants hold:
    /// equal array lengths, N >= 1, unit quaternions within 1e-6, finite values.
    void validate() const;
};

/// Pinhole camera for one rendering viewpoint.
struct CameraView {
    Eigen::Matrix3d rotation;    // world -> camera
    Eigen::Vector3d translation; // camera = rotation * world + translation
    double fx = 0.0, fy = 0.0;   // focal lengths, pixels
    double cx = 0.0, cy = 0.0;   // principal point, pixels
    int width = 0, height = 0;

    /// Orthonormality within 1e-6; width/height >= 16 and divisible by 4.
    void validate() const;
};

/// Cameras paired with their ground-truth images.
struct TrainingSet {
    std::vector<std::pair<CameraView, Image>> views;

    std::size_t size() const { return views.size(); }

    /// >= 1 view; every image matches its camera resolution, 3 channels, finite.
    void validate() const;
};

/// d(loss)/d(parameter) arrays, shaped exactly like GaussianCloud.
struct CloudGradients {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector4d> rotations;
    std::vector<Eigen::Vector3d> log_scales;
    std::vector<double> opacity_logits;
    std::vector<Eigen::Vector3d> colors;

    explicit CloudGradients(std::size_t n = 0)
        : positions(n, Eigen::Vector3d::Zero()),
          rotations(n, Eigen::Vector4d::Zero()),
          log_scales(n, Eigen::Vector3d::Zero()),
          opacity_logits(n, 0.0),
          colors(n, Eigen::Vector3d::Zero()) {}

    std::size_t size() const { return positions.size(); }
    bool all_finite() const;
};

} // namespace splatmark
