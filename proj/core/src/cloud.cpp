// SPDX-License-Identifier: Apache-2.0
#include "splatmark/cloud.hpp"

#include <cmath>
#include <string>

namespace splatmark {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

} // namespace

void GaussianCloud::validate() const {
    const std::size_t n = positions.size();
    require(n >= 1, "GaussianCloud: needs at least one Gaussian");
    require(rotations.size() == n && log_scales.size() == n &&
                opacity_logits.size() == n && colors.size() == n,
            "GaussianCloud: parameter arrays have mismatched lengths");
    for (std::size_t i = 0; i < n; ++i) {
        require(positions[i].allFinite(), "GaussianCloud: non-finite position at index " + std::to_string(i));
        require(log_scales[i].allFinite(), "GaussianCloud: non-finite log_scale at index " + std::to_string(i));
        require(colors[i].allFinite(), "GaussianCloud: non-finite color at index " + std::to_string(i));
        require(std::isfinite(opacity_logits[i]),
                "GaussianCloud: non-finite opacity_logit at index " + std::to_string(i));
        const double norm = rotations[i].norm();
        require(std::abs(norm - 1.0) <= 1e-6,
                "GaussianCloud: quaternion at index " + std::to_string(i) +
                    " has norm " + std::to_string(norm) + ", expected 1 within 1e-6");
    }
}

void CameraView::validate() const {
    require(rotation.allFinite() && translation.allFinite(), "CameraView: non-finite extrinsics");
    const Eigen::Matrix3d delta = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
    require(delta.cwiseAbs().maxCoeff() <= 1e-6, "CameraView: rotation is not orthonormal within 1e-6");
    require(std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0,
            "CameraView: focal lengths must be positive");
    require(std::isfinite(cx) && std::isfinite(cy), "CameraView: non-finite principal point");
    require(width >= 16 && height >= 16, "CameraView: resolution must be at least 16x16");
    require(width % 4 == 0 && height % 4 == 0,
            "CameraView: width and height must be divisible by 4 (two wavelet levels)");
}

void TrainingSet::validate() const {
    require(!views.empty(), "TrainingSet: needs at least one view");
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& [camera, image] = views[i];
        camera.validate();
        require(image.height() == camera.height && image.width() == camera.width,
                "TrainingSet: image " + std::to_string(i) + " does not match its camera resolution");
        require(image.channels() == 3, "TrainingSet: image " + std::to_string(i) + " must have 3 channels");
        require(image.all_finite(), "TrainingSet: image " + std::to_string(i) + " has non-finite samples");
    }
}

bool CloudGradients::all_finite() const {
    for (std::size_t i = 0; i < size(); ++i) {
        if (!positions[i].allFinite() || !rotations[i].allFinite() ||
            !log_scales[i].allFinite() || !colors[i].allFinite() ||
            !std::isfinite(opacity_logits[i]))
            return false;
    }
    return true;
}

} // namespace splatmark
