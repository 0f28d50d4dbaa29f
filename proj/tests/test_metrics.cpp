// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splatmark/errors.hpp"
#include "splatmark/metrics.hpp"
#include "splatmark/rng.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace splatmark;
using namespace splatmark::testing;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
    Image img(h, w, 3);
    RandomStream rng(seed);
    for (double& v : img.data()) v = rng.uniform();
    return img;
}

} // namespace

TEST_CASE("psnr closed forms") {
    const Image a = random_image(16, 16, 3);
    const PsnrResult identical = psnr(a, a);
    CHECK(identical.db == 99.0);
    CHECK(identical.capped);

    Image zeros(16, 16, 3, 0.0), ones(16, 16, 3, 1.0);
    const PsnrResult worst = psnr(zeros, ones);
    CHECK(worst.db == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(worst.capped);

    // MSE 0.01 -> 20 dB.
    Image shifted = zeros;
    for (double& v : shifted.data()) v = 0.1;
    const PsnrResult twenty = psnr(zeros, shifted);
    CHECK(twenty.db == doctest::Approx(20.0).epsilon(1e-12));

    Image wrong_shape(8, 16, 3);
    CHECK_THROWS_AS(psnr(a, wrong_shape), ValidationError);
}

TEST_CASE("ssim closed forms and reference agreement") {
    const Image a = random_image(24, 20, 7);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    Image c1(16, 16, 3, 0.42), c2(16, 16, 3, 0.42);
    CHECK(ssim(c1, c2) == doctest::Approx(1.0).epsilon(1e-12));

    // Mid-contrast content against its negative.
    Image mid(16, 16, 3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) mid(y, x, c) = 0.25 + 0.5 * ((x / 2 + y / 2) % 2);
    Image negated = mid;
    for (double& v : negated.data()) v = 1.0 - v;
    CHECK(ssim(mid, negated) < 0.5);

    const Image b = random_image(24, 20, 11);
    CHECK(ssim(a, b) == doctest::Approx(ssim_reference(a, b)).epsilon(1e-9));
    CHECK(psnr(a, b).db == doctest::Approx(psnr_reference(a, b)).epsilon(1e-9));

    Image tiny(8, 8, 3);
    CHECK_THROWS_AS(ssim(tiny, tiny), ValidationError);
}

TEST_CASE("bit accuracy counts matches") {
    const std::vector<int> message{1, 0, 1, 1, 0, 0, 1, 0};
    CHECK(bit_accuracy(message, message) == 1.0);

    std::vector<int> flipped = message;
    for (int& b : flipped) b = 1 - b;
    CHECK(bit_accuracy(flipped, message) == 0.0);

    std::vector<int> half = message;
    for (std::size_t i = 0; i < half.size(); i += 2) half[i] = 1 - half[i];
    CHECK(bit_accuracy(half, message) == 0.5);

    std::vector<int> shorter{1, 0};
    CHECK_THROWS_AS(bit_accuracy(shorter, message), ValidationError);
}
