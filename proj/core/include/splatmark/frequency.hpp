// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/image.hpp"

#include <complex>
#include <vector>

namespace splatmark {

enum class ChannelReduction { Mean, Sum };

/// High-frequency score of one image patch.
struct PatchSpectrumScore {
    int origin_x = 0;
    int origin_y = 0;
    double intensity = 0.0; // >= 0, finite
};

/// Multi-level 2D Haar decomposition. Level l subbands have shape
/// (H/2^l) x (W/2^l) x C. LL is kept at every level for inspection, but
/// only the deepest LL together with the high bands of every level form
/// the orthonormal coefficient set consumed by idwt2.
struct WaveletLevel {
    Image ll, lh, hl, hh; // lh: high along y, hl: high along x
};

struct WaveletPyramid {
    std::vector<WaveletLevel> levels; // levels[0] is level 1

    int level_count() const { return static_cast<int>(levels.size()); }
    const Image& deepest_ll() const { return levels.back().ll; }
    Image& deepest_ll() { return levels.back().ll; }
};

/// Full complex 2D DFT per channel, uncentered:
/// F[u,v] = sum_{m,n} f[m,n] * exp(-2*pi*i*(u*m/M + v*n/N)).
/// Returned as one M x N matrix (row-major vector) per channel.
std::vector<std::vector<std::complex<double>>> dft2_complex(const Image& patch);

/// Centered real part of the 2D DFT: the zero-frequency bin is moved to
/// (floor(M/2), floor(N/2)). Shape matches the input.
Image dft2_real(const Image& patch);

/// Radial frequency-emphasis mask, zero at the centered DC bin:
/// Q[u,v] = ((2u-U)/U)^2 + ((2v-V)/V)^2.
std::vector<std::vector<double>> high_freq_mask(int u_size, int v_size);

/// High-frequency intensity of a patch: |centered real spectrum| weighted by
/// the Q mask, summed over the spectrum, divided by U*V, reduced over channels.
double patch_intensity(const Image& patch, ChannelReduction reduction = ChannelReduction::Mean);

/// Orthonormal 2D Haar analysis, `levels` cascaded on the running LL band.
/// Requires H and W divisible by 2^levels.
WaveletPyramid dwt2(const Image& image, int levels);

/// Exact inverse of dwt2 (reconstructs from the deepest LL plus all
/// high bands). For this orthonormal transform the inverse is also the
/// adjoint of the forward map, which is how backprop uses it.
Image idwt2(const WaveletPyramid& pyramid);

/// Pyramid with every subband zero, shaped for an H x W x C image.
WaveletPyramid zero_pyramid(int height, int width, int channels, int levels);

} // namespace splatmark
