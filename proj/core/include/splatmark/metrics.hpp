// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/image.hpp"

#include <vector>

namespace splatmark {

struct PsnrResult {
    double db = 0.0;
    bool capped = false; // MSE was 0; db reported as the 99 dB cap
};

/// Peak signal-to-noise ratio of two [0,1] images: 10*log10(1/MSE).
/// Identical images report the 99 dB cap with the capped flag set.
PsnrResult psnr(const Image& a, const Image& b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1=(0.01)^2,
/// C2=(0.03)^2 on the [0,1] range, channel-averaged over valid window
/// positions. Requires min dimension >= 11.
double ssim(const Image& a, const Image& b);

/// Fraction of positions where the two bit strings agree.
double bit_accuracy(const std::vector<int>& extracted, const std::vector<int>& expected);

} // namespace splatmark
