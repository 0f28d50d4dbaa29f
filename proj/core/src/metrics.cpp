// SPDX-License-Identifier: Apache-2.0
#include "splatmark/metrics.hpp"

#include "splatmark/errors.hpp"

#include <cmath>
#include <vector>

namespace splatmark {

PsnrResult psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ValidationError("psnr: image shapes differ");
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sum_sq += d * d;
    }
    const double mse = sum_sq / static_cast<double>(a.size());
    if (mse == 0.0) return PsnrResult{99.0, true};
    const double db = 10.0 * std::log10(1.0 / mse);
    return PsnrResult{db > 99.0 ? 99.0 : db, db > 99.0};
}

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

} // namespace

double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ValidationError("ssim: image shapes differ");
    constexpr int kWindow = 11;
    if (a.height() < kWindow || a.width() < kWindow)
        throw ValidationError("ssim: images must be at least 11x11");

    const auto w1d = gaussian_window(kWindow, 1.5);
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;

    double total = 0.0;
    long count = 0;
    for (int c = 0; c < a.channels(); ++c) {
        for (int y = 0; y + kWindow <= a.height(); ++y) {
            for (int x = 0; x + kWindow <= a.width(); ++x) {
                double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
                for (int i = 0; i < kWindow; ++i) {
                    for (int j = 0; j < kWindow; ++j) {
                        const double w = w1d[i] * w1d[j];
                        const double va = a(y + i, x + j, c);
                        const double vb = b(y + i, x + j, c);
                        mu_a += w * va;
                        mu_b += w * vb;
                        aa += w * va * va;
                        bb += w * vb * vb;
                        ab += w * va * vb;
                    }
                }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                const double numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                const double denominator =
                    (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                total += numerator / denominator;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

double bit_accuracy(const std::vector<int>& extracted, const std::vector<int>& expected) {
    if (extracted.size() != expected.size() || extracted.empty())
        throw ValidationError("bit_accuracy: bit strings must have equal nonzero length");
    int matches = 0;
    for (std::size_t i = 0; i < extracted.size(); ++i)
        if ((extracted[i] != 0) == (expected[i] != 0)) ++matches;
    return static_cast<double>(matches) / static_cast<double>(extracted.size());
}

} // namespace splatmark
