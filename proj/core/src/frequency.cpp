// SPDX-License-Identifier: Apache-2.0
#include "splatmark/frequency.hpp"

#include "splatmark/errors.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace splatmark {

namespace {

using Complex = std::complex<double>;

// exp(-2*pi*i*k/n) for k = 0..n-1
std::vector<Complex> twiddle_table(int n) {
    std::vector<Complex> table(n);
    for (int k = 0; k < n; ++k) {
        const double angle = -2.0 * std::numbers::pi * k / n;
        table[k] = Complex(std::cos(angle), std::sin(angle));
    }
    return table;
}

} // namespace

std::vector<std::vector<Complex>> dft2_complex(const Image& patch) {
    const int m_size = patch.height();
    const int n_size = patch.width();
    const int channels = patch.channels();
    if (m_size < 2 || n_size < 2)
        throw ValidationError("dft2_complex: patch must be at least 2x2");

    const auto row_tw = twiddle_table(n_size);
    const auto col_tw = twiddle_table(m_size);

    std::vector<std::vector<Complex>> out(channels);
    std::vector<Complex> partial(static_cast<std::size_t>(m_size) * n_size);
    for (int c = 0; c < channels; ++c) {
        // Row pass: G[m][v] = sum_n f[m][n] w_N^{v n}
        for (int m = 0; m < m_size; ++m) {
            for (int v = 0; v < n_size; ++v) {
                Complex acc(0.0, 0.0);
                for (int n = 0; n < n_size; ++n)
                    acc += patch(m, n, c) * row_tw[static_cast<std::size_t>(v) * n % n_size];
                partial[static_cast<std::size_t>(m) * n_size + v] = acc;
            }
        }
        // Column pass: F[u][v] = sum_m G[m][v] w_M^{u m}
        auto& spectrum = out[c];
        spectrum.resize(static_cast<std::size_t>(m_size) * n_size);
        for (int u = 0; u < m_size; ++u) {
            for (int v = 0; v < n_size; ++v) {
                Complex acc(0.0, 0.0);
                for (int m = 0; m < m_size; ++m)
                    acc += partial[static_cast<std::size_t>(m) * n_size + v] *
                           col_tw[static_cast<std::size_t>(u) * m % m_size];
                spectrum[static_cast<std::size_t>(u) * n_size + v] = acc;
            }
        }
    }
    return out;
}

Image dft2_real(const Image& patch) {
    const int m_size = patch.height();
    const int n_size = patch.width();
    const auto spectra = dft2_complex(patch);

    Image centered(m_size, n_size, patch.channels());
    for (int c = 0; c < patch.channels(); ++c) {
        for (int u = 0; u < m_size; ++u) {
            const int cu = (u + m_size / 2) % m_size;
            for (int v = 0; v < n_size; ++v) {
                const int cv = (v + n_size / 2) % n_size;
                centered(cu, cv, c) = spectra[c][static_cast<std::size_t>(u) * n_size + v].real();
            }
        }
    }
    return centered;
}

std::vector<std::vector<double>> high_freq_mask(int u_size, int v_size) {
    if (u_size < 2 || v_size < 2)
        throw ValidationError("high_freq_mask: sizes must be at least 2");
    std::vector<std::vector<double>> mask(u_size, std::vector<double>(v_size));
    for (int u = 0; u < u_size; ++u) {
        const double du = (2.0 * u - u_size) / u_size;
        for (int v = 0; v < v_size; ++v) {
            const double dv = (2.0 * v - v_size) / v_size;
            mask[u][v] = du * du + dv * dv;
        }
    }
    return mask;
}

double patch_intensity(const Image& patch, ChannelReduction reduction) {
    const int u_size = patch.height();
    const int v_size = patch.width();

    // The mask zeroes the DC bin, so removing the per-channel mean leaves
    // the score unchanged in exact arithmetic; in floating point it keeps
    // constant patches at exactly zero instead of rounding noise.
    Image centered_patch = patch;
    for (int c = 0; c < patch.channels(); ++c) {
        double mean = 0.0;
        for (int u = 0; u < u_size; ++u)
            for (int v = 0; v < v_size; ++v) mean += patch(u, v, c);
        mean /= static_cast<double>(u_size) * v_size;
        for (int u = 0; u < u_size; ++u)
            for (int v = 0; v < v_size; ++v) centered_patch(u, v, c) -= mean;
    }

    const Image spectrum = dft2_real(centered_patch);
    const auto mask = high_freq_mask(u_size, v_size);

    double total = 0.0;
    for (int c = 0; c < patch.channels(); ++c) {
        double channel_sum = 0.0;
        for (int u = 0; u < u_size; ++u)
            for (int v = 0; v < v_size; ++v)
                channel_sum += std::abs(spectrum(u, v, c)) * mask[u][v];
        total += channel_sum / (static_cast<double>(u_size) * v_size);
    }
    if (reduction == ChannelReduction::Mean) total /= patch.channels();
    return total;
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// One analysis level: input 2h x 2w -> four h x w subbands.
WaveletLevel haar_analyze(const Image& input) {
    const int h = input.height() / 2;
    const int w = input.width() / 2;
    const int ch = input.channels();
    WaveletLevel level{Image(h, w, ch), Image(h, w, ch), Image(h, w, ch), Image(h, w, ch)};
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double a = input(2 * y, 2 * x, c);
                const double b = input(2 * y, 2 * x + 1, c);
                const double d = input(2 * y + 1, 2 * x, c);
                const double e = input(2 * y + 1, 2 * x + 1, c);
                level.ll(y, x, c) = 0.5 * (a + b + d + e);
                level.hl(y, x, c) = 0.5 * (a - b + d - e); // high along x
                level.lh(y, x, c) = 0.5 * (a + b - d - e); // high along y
                level.hh(y, x, c) = 0.5 * (a - b - d + e);
            }
        }
    }
    return level;
}

Image haar_synthesize(const WaveletLevel& level) {
    const int h = level.ll.height();
    const int w = level.ll.width();
    const int ch = level.ll.channels();
    Image out(2 * h, 2 * w, ch);
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double ll = level.ll(y, x, c);
                const double hl = level.hl(y, x, c);
                const double lh = level.lh(y, x, c);
                const double hh = level.hh(y, x, c);
                out(2 * y, 2 * x, c) = 0.5 * (ll + hl + lh + hh);
                out(2 * y, 2 * x + 1, c) = 0.5 * (ll - hl + lh - hh);
                out(2 * y + 1, 2 * x, c) = 0.5 * (ll + hl - lh - hh);
                out(2 * y + 1, 2 * x + 1, c) = 0.5 * (ll - hl - lh + hh);
            }
        }
    }
    return out;
}

} // namespace

WaveletPyramid dwt2(const Image& image, int levels) {
    if (levels < 1) throw ValidationError("dwt2: needs at least one level");
    const int divisor = 1 << levels;
    if (image.height() % divisor != 0 || image.width() % divisor != 0)
        throw ValidationError("dwt2: image dimensions must be divisible by 2^levels");

    WaveletPyramid pyramid;
    const Image* current = &image;
    for (int l = 0; l < levels; ++l) {
        pyramid.levels.push_back(haar_analyze(*current));
        current = &pyramid.levels.back().ll;
    }
    return pyramid;
}

Image idwt2(const WaveletPyramid& pyramid) {
    if (pyramid.levels.empty()) throw ValidationError("idwt2: empty pyramid");
    Image current = pyramid.levels.back().ll;
    for (int l = pyramid.level_count() - 1; l >= 0; --l) {
        WaveletLevel level = pyramid.levels[l];
        level.ll = std::move(current);
        current = haar_synthesize(level);
    }
    return current;
}

WaveletPyramid zero_pyramid(int height, int width, int channels, int levels) {
    WaveletPyramid pyramid;
    for (int l = 1; l <= levels; ++l) {
        const int h = height >> l;
        const int w = width >> l;
        pyramid.levels.push_back(WaveletLevel{Image(h, w, channels), Image(h, w, channels),
                                              Image(h, w, channels), Image(h, w, channels)});
    }
    return pyramid;
}

} // namespace splatmark
