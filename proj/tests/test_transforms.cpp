// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splatmark/errors.hpp"
#include "splatmark/frequency.hpp"
#include "splatmark/rng.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace splatmark;
using namespace splatmark::testing;

namespace {

Image random_image(int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    Image img(h, w, 3);
    RandomStream rng(seed);
    for (double& v : img.data()) v = rng.uniform(lo, hi);
    return img;
}

Image checkerboard(int n) {
    Image img(n, n, 3);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < 3; ++c) img(y, x, c) = ((x + y) % 2 == 0) ? 1.0 : -1.0;
    return img;
}

} // namespace

TEST_CASE("constant patch concentrates the spectrum in the centered DC bin") {
    Image ones(16, 16, 3, 1.0);
    const Image spectrum = dft2_real(ones);
    for (int u = 0; u < 16; ++u)
        for (int v = 0; v < 16; ++v)
            for (int c = 0; c < 3; ++c) {
                const double expected = (u == 8 && v == 8) ? 256.0 : 0.0;
                CHECK(std::abs(spectrum(u, v, c) - expected) < 1e-9);
            }
}

TEST_CASE("checkerboard concentrates at the nyquist bin, which centering moves to the origin") {
    const Image spectrum = dft2_real(checkerboard(16));
    for (int u = 0; u < 16; ++u)
        for (int v = 0; v < 16; ++v) {
            const double expected = (u == 0 && v == 0) ? 256.0 : 0.0;
            CHECK(std::abs(std::abs(spectrum(u, v, 0)) - expected) < 1e-9);
        }
}

TEST_CASE("transform matches the direct-summation oracle on 8x8 patches") {
    const Image patch = random_image(8, 8, 71);
    const auto fast = dft2_complex(patch);
    for (int c = 0; c < 3; ++c) {
        const auto direct = dft2_direct(patch, c);
        for (std::size_t k = 0; k < direct.size(); ++k)
            CHECK(std::abs(fast[c][k] - direct[k]) < 1e-8);
    }
}

TEST_CASE("parseval energy identity holds") {
    const Image patch = random_image(12, 10, 5);
    const auto spectra = dft2_complex(patch);
    for (int c = 0; c < 3; ++c) {
        double spatial = 0.0;
        for (int m = 0; m < patch.height(); ++m)
            for (int n = 0; n < patch.width(); ++n) spatial += patch(m, n, c) * patch(m, n, c);
        double frequency = 0.0;
        for (const auto& bin : spectra[c]) frequency += std::norm(bin);
        frequency /= static_cast<double>(patch.height() * patch.width());
        CHECK(std::abs(spatial - frequency) < 1e-8);
    }
}

TEST_CASE("frequency-emphasis mask closed forms") {
    const auto q16 = high_freq_mask(16, 16);
    CHECK(q16[8][8] == 0.0);
    CHECK(q16[0][0] == 2.0);
    CHECK(q16[8][0] == 1.0);
    CHECK(q16[0][8] == 1.0);

    const auto q6 = high_freq_mask(6, 4);
    CHECK(q6[3][2] == 0.0);
    CHECK(q6[0][0] == 2.0);
}

TEST_CASE("patch intensity: constant zero, checkerboard two, dc-shift invariant") {
    Image constant(16, 16, 3, 0.37);
    CHECK(patch_intensity(constant) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK(patch_intensity(checkerboard(16)) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(patch_intensity(checkerboard(16), ChannelReduction::Sum) ==
          doctest::Approx(6.0).epsilon(1e-9));

    const Image patch = random_image(16, 16, 9);
    Image shifted = patch;
    for (double& v : shifted.data()) v += 0.25;
    CHECK(patch_intensity(patch) == doctest::Approx(patch_intensity(shifted)).epsilon(1e-9));
    CHECK(patch_intensity(patch) >= 0.0);
}

TEST_CASE("single-level haar of a constant image") {
    Image constant(8, 8, 3, 0.4);
    const WaveletPyramid pyramid = dwt2(constant, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) {
                CHECK(pyramid.levels[0].ll(y, x, c) == doctest::Approx(0.8).epsilon(1e-12));
                CHECK(pyramid.levels[0].lh(y, x, c) == 0.0);
                CHECK(pyramid.levels[0].hl(y, x, c) == 0.0);
                CHECK(pyramid.levels[0].hh(y, x, c) == 0.0);
            }
}

TEST_CASE("wavelet round trip is the identity within 1e-10") {
    const Image img = random_image(32, 24, 17);
    const Image rebuilt = idwt2(dwt2(img, 2));
    REQUIRE(rebuilt.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(img.data()[i] - rebuilt.data()[i]) < 1e-10);
}

TEST_CASE("wavelet energy is preserved across the coefficient set") {
    const Image img = random_image(16, 16, 23);
    const WaveletPyramid pyramid = dwt2(img, 2);
    double spatial = 0.0;
    for (double v : img.data()) spatial += v * v;
    double coeff = 0.0;
    for (double v : pyramid.deepest_ll().data()) coeff += v * v;
    for (const WaveletLevel& level : pyramid.levels) {
        for (double v : level.lh.data()) coeff += v * v;
        for (double v : level.hl.data()) coeff += v * v;
        for (double v : level.hh.data()) coeff += v * v;
    }
    CHECK(std::abs(spatial - coeff) < 1e-8);
}

TEST_CASE("wavelet transform is linear") {
    const Image x = random_image(16, 16, 31);
    const Image y = random_image(16, 16, 37);
    Image combo(16, 16, 3);
    for (std::size_t i = 0; i < combo.size(); ++i)
        combo.data()[i] = 2.5 * x.data()[i] - 1.25 * y.data()[i];

    const WaveletPyramid px = dwt2(x, 2), py = dwt2(y, 2), pc = dwt2(combo, 2);
    for (int l = 0; l < 2; ++l) {
        for (std::size_t i = 0; i < pc.levels[l].hh.size(); ++i) {
            const double expected =
                2.5 * px.levels[l].hh.data()[i] - 1.25 * py.levels[l].hh.data()[i];
            CHECK(std::abs(pc.levels[l].hh.data()[i] - expected) < 1e-10);
        }
    }
}

TEST_CASE("inverse transform is the adjoint of the forward map") {
    // <dwt2(x), y>_pyramid == <x, idwt2(y)> over the orthonormal coefficient
    // set; this is the identity backprop relies on.
    const Image x = random_image(16, 16, 41, -1.0, 1.0);
    WaveletPyramid y = zero_pyramid(16, 16, 3, 2);
    RandomStream rng(43);
    for (WaveletLevel& level : y.levels) {
        for (double& v : level.lh.data()) v = rng.uniform(-1.0, 1.0);
        for (double& v : level.hl.data()) v = rng.uniform(-1.0, 1.0);
        for (double& v : level.hh.data()) v = rng.uniform(-1.0, 1.0);
    }
    for (double& v : y.deepest_ll().data()) v = rng.uniform(-1.0, 1.0);

    const WaveletPyramid fx = dwt2(x, 2);
    double lhs = 0.0;
    for (std::size_t i = 0; i < fx.deepest_ll().size(); ++i)
        lhs += fx.deepest_ll().data()[i] * y.deepest_ll().data()[i];
    for (int l = 0; l < 2; ++l)
        for (std::size_t i = 0; i < fx.levels[l].lh.size(); ++i) {
            lhs += fx.levels[l].lh.data()[i] * y.levels[l].lh.data()[i];
            lhs += fx.levels[l].hl.data()[i] * y.levels[l].hl.data()[i];
            lhs += fx.levels[l].hh.data()[i] * y.levels[l].hh.data()[i];
        }

    const Image adjoint = idwt2(y);
    double rhs = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x.data()[i] * adjoint.data()[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("indivisible dimensions are rejected") {
    Image odd(18, 16, 3, 0.5);
    CHECK_THROWS_AS(dwt2(odd, 2), ValidationError);
    CHECK_NOTHROW(dwt2(odd, 1));
}
