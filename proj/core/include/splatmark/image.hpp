// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/errors.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace splatmark {

/// Dense H x W x C image of doubles, row-major, channel-interleaved.
/// Rendered images and ground truth live in [0,1]; transform outputs
/// (DFT spectra, wavelet subbands, gradients) are unbounded.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels = 3, double fill = 0.0)
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {
        if (height < 1 || width < 1 || channels < 1)
            throw ValidationError("Image: dimensions must be positive");
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int y, int x, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    double operator()(int y, int x, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Clamp every sample into [lo, hi] in place.
    void clamp(double lo, double hi) {
        for (double& v : data_) v = v < lo ? lo : (v > hi ? hi : v);
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

} // namespace splatmark
