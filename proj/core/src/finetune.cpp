// SPDX-License-Identifier: Apache-2.0
#include "splatmark/finetune.hpp"

#include "splatmark/errors.hpp"
#include "splatmark/metrics.hpp"
#include "splatmark/renderer.hpp"
#include "splatmark/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace splatmark {

void LossWeights::validate() const {
    if (rec < 0.0 || lpips < 0.0 || wavelet < 0.0 || message < 0.0)
        throw ValidationError("LossWeights: weights must be >= 0");
}

void FinetuneConfig::validate() const {
    if (epochs < 1) throw ValidationError("FinetuneConfig: epochs must be >= 1");
    if (lr_position <= 0.0 || lr_color <= 0.0 || lr_opacity <= 0.0 || lr_scale <= 0.0 ||
        lr_rotation <= 0.0)
        throw ValidationError("FinetuneConfig: learning rates must be positive");
    if (mask_beta <= 0.0) throw ValidationError("FinetuneConfig: mask_beta must be positive");
    if (decoder_grid < 1) throw ValidationError("FinetuneConfig: decoder_grid must be >= 1");
    weights.validate();
    key.validate();
}

double mask_weight(double theta_magnitude, double beta) {
    return std::exp(-std::pow(std::abs(theta_magnitude), beta));
}

namespace {

// softmax(-|theta|^beta), computed with the usual max shift.
std::vector<double> normalized_mask(const std::vector<double>& magnitudes, double beta) {
    std::vector<double> exponents(magnitudes.size());
    for (std::size_t i = 0; i < magnitudes.size(); ++i)
        exponents[i] = -std::pow(std::abs(magnitudes[i]), beta);
    const double peak = *std::max_element(exponents.begin(), exponents.end());
    double sum = 0.0;
    std::vector<double> z(exponents.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = std::exp(exponents[i] - peak);
        sum += z[i];
    }
    for (double& v : z) v /= sum;
    return z;
}

} // namespace

GradientMask build_gradient_mask(const GaussianCloud& cloud, double beta) {
    if (beta <= 0.0) throw ValidationError("build_gradient_mask: beta must be positive");
    if (cloud.size() == 0) throw ValidationError("build_gradient_mask: empty cloud");

    const std::size_t n = cloud.size();
    std::vector<double> color_mag(n), opacity_mag(n), rotation_mag(n), scale_mag(n);
    for (std::size_t i = 0; i < n; ++i) {
        color_mag[i] = cloud.colors[i].norm();
        opacity_mag[i] = logistic(cloud.opacity_logits[i]);
        rotation_mag[i] = cloud.rotations[i].norm();
        scale_mag[i] = cloud.log_scales[i].array().exp().matrix().norm();
    }

    GradientMask mask;
    mask.beta = beta;
    mask.color = normalized_mask(color_mag, beta);
    mask.opacity = normalized_mask(opacity_mag, beta);
    mask.rotation = normalized_mask(rotation_mag, beta);
    mask.scale = normalized_mask(scale_mag, beta);
    return mask;
}

namespace {

double mean_absolute_error(const Image& a, const Image& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.data()[i] - b.data()[i]);
    return sum / static_cast<double>(a.size());
}

// d(MAE)/da scaled by `weight`, written into `out`.
void add_mae_gradient(const Image& a, const Image& b, double weight, Image& out) {
    const double scale = weight / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        out.data()[i] += d > 0.0 ? scale : (d < 0.0 ? -scale : 0.0);
    }
}

// Numerically stable BCE-with-logits, summed over bits.
double bce_with_logits(const std::vector<double>& logits, const std::vector<int>& message) {
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double x = logits[i];
        total += std::max(x, 0.0) - x * message[i] + std::log1p(std::exp(-std::abs(x)));
    }
    return total;
}

} // namespace

LossBreakdown compute_losses(const Image& watermarked, const Image& original,
                             const WaveletPyramid& pyramid_w, const WaveletPyramid& pyramid_o,
                             const std::vector<double>& logits, const std::vector<int>& message,
                             const LossWeights& weights, double lpips_value) {
    if (!watermarked.same_shape(original))
        throw ValidationError("compute_losses: image shapes differ");
    if (logits.size() != message.size())
        throw ValidationError("compute_losses: logit and message lengths differ");
    if (!watermarked.all_finite() || !original.all_finite())
        throw NumericError("compute_losses: non-finite image input");
    for (double v : logits)
        if (!std::isfinite(v)) throw NumericError("compute_losses: non-finite logits");

    LossBreakdown loss;
    loss.rec = mean_absolute_error(watermarked, original);
    for (int l = 0; l < pyramid_w.level_count(); ++l) {
        loss.wavelet += mean_absolute_error(pyramid_w.levels[l].lh, pyramid_o.levels[l].lh);
        loss.wavelet += mean_absolute_error(pyramid_w.levels[l].hl, pyramid_o.levels[l].hl);
        loss.wavelet += mean_absolute_error(pyramid_w.levels[l].hh, pyramid_o.levels[l].hh);
    }
    loss.message = bce_with_logits(logits, message);
    loss.lpips = lpips_value;
    loss.total = weights.rec * loss.rec + weights.wavelet * loss.wavelet +
                 weights.message * loss.message + weights.lpips * loss.lpips;
    return loss;
}

namespace {

// First-order adaptive-moment optimizer state over one flat parameter group.
struct AdamGroup {
    std::vector<double> m, v;
    explicit AdamGroup(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(double* params, const double* grads, std::size_t n, double lr, long t) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-15;
        const double m_corr = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double v_corr = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            const double m_hat = m[i] / m_corr;
            const double v_hat = v[i] / v_corr;
            params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
};

double* flat(std::vector<Eigen::Vector3d>& v) { return v.front().data(); }
double* flat(std::vector<Eigen::Vector4d>& v) { return v.front().data(); }

} // namespace

std::pair<GaussianCloud, TrainingLog> finetune(const GaussianCloud& cloud, const TrainingSet& set,
                                               const FinetuneConfig& config) {
    config.validate();
    cloud.validate();
    set.validate();

    const int width = set.views.front().first.width;
    const int height = set.views.front().first.height;
    for (const auto& [camera, _] : set.views)
        if (camera.width != width || camera.height != height)
            throw ValidationError("finetune: all views must share one resolution");

    const FrozenDecoder decoder =
        config.decoder_input == DecoderInput::LowLow2
            ? FrozenDecoder::build(config.key, height / 4, width / 4, config.decoder_grid,
                                   DecoderInput::LowLow2)
            : FrozenDecoder::build(config.key, height, width, config.decoder_grid,
                                   DecoderInput::Pixel);
    const std::vector<int> message = config.key.message();

    // Invisibility targets: what the model rendered before embedding.
    RasterizeOptions render_options;
    render_options.track_contributors = false;
    std::vector<Image> originals;
    std::vector<WaveletPyramid> original_pyramids;
    for (const auto& [camera, _] : set.views) {
        originals.push_back(rasterize(cloud, camera, render_options).image);
        original_pyramids.push_back(dwt2(originals.back(), 2));
    }

    GaussianCloud model = cloud;
    const GradientMask mask = build_gradient_mask(model, config.mask_beta);
    const std::size_t n = model.size();

    AdamGroup adam_position(3 * n), adam_color(3 * n), adam_opacity(n), adam_scale(3 * n),
        adam_rotation(4 * n);
    long step_count = 0;

    RandomStream shuffle_rng(mix_seed(config.shuffle_seed, 0x5f0));
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainingLog log;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        LossBreakdown epoch_loss;
        for (std::size_t view_index : order) {
            const CameraView& camera = set.views[view_index].first;
            const Image& original = originals[view_index];
            const WaveletPyramid& pyramid_o = original_pyramids[view_index];

            const Image rendered = rasterize(model, camera, render_options).image;
            const WaveletPyramid pyramid_w = dwt2(rendered, 2);
            const std::vector<double> logits =
                decoder.decode(config.decoder_input == DecoderInput::LowLow2
                                   ? pyramid_w.deepest_ll()
                                   : rendered);

            double lpips_value = 0.0;
            Image lpips_grad;
            if (config.perceptual) {
                auto [value, grad] = config.perceptual(rendered, original);
                lpips_value = value;
                lpips_grad = std::move(grad);
            }

            const LossBreakdown loss =
                compute_losses(rendered, original, pyramid_w, pyramid_o, logits, message,
                               config.weights, lpips_value);
            if (!std::isfinite(loss.total))
                throw NumericError("finetune: loss diverged at epoch " + std::to_string(epoch));
            epoch_loss.total += loss.total;
            epoch_loss.rec += loss.rec;
            epoch_loss.wavelet += loss.wavelet;
            epoch_loss.message += loss.message;
            epoch_loss.lpips += loss.lpips;

            // dL/dimage assembled from all loss paths.
            Image d_image(height, width, 3);
            add_mae_gradient(rendered, original, config.weights.rec, d_image);

            WaveletPyramid d_pyramid = zero_pyramid(height, width, 3, 2);
            for (int l = 0; l < 2; ++l) {
                add_mae_gradient(pyramid_w.levels[l].lh, pyramid_o.levels[l].lh,
                                 config.weights.wavelet, d_pyramid.levels[l].lh);
                add_mae_gradient(pyramid_w.levels[l].hl, pyramid_o.levels[l].hl,
                                 config.weights.wavelet, d_pyramid.levels[l].hl);
                add_mae_gradient(pyramid_w.levels[l].hh, pyramid_o.levels[l].hh,
                                 config.weights.wavelet, d_pyramid.levels[l].hh);
            }
            std::vector<double> d_logits(logits.size());
            for (std::size_t b = 0; b < logits.size(); ++b)
                d_logits[b] = config.weights.message * (logistic(logits[b]) - message[b]);
            if (config.decoder_input == DecoderInput::LowLow2) {
                d_pyramid.deepest_ll() = decoder.decode_backward(d_logits);
            } else {
                const Image d_pixel = decoder.decode_backward(d_logits);
                for (std::size_t k = 0; k < d_image.size(); ++k)
                    d_image.data()[k] += d_pixel.data()[k];
            }
            // The orthonormal inverse transform is the adjoint of dwt2.
            const Image d_from_pyramid = idwt2(d_pyramid);
            for (std::size_t k = 0; k < d_image.size(); ++k)
                d_image.data()[k] += d_from_pyramid.data()[k];
            if (config.perceptual)
                for (std::size_t k = 0; k < d_image.size(); ++k)
                    d_image.data()[k] += config.weights.lpips * lpips_grad.data()[k];

            CloudGradients grads = rasterize_backward(model, camera, d_image, render_options);
            for (std::size_t g = 0; g < n; ++g) {
                grads.colors[g] *= mask.color[g];
                grads.opacity_logits[g] *= mask.opacity[g];
                grads.rotations[g] *= mask.rotation[g];
                grads.log_scales[g] *= mask.scale[g];
            }

            ++step_count;
            adam_position.step(flat(model.positions), flat(grads.positions), 3 * n,
                               config.lr_position, step_count);
            adam_color.step(flat(model.colors), flat(grads.colors), 3 * n, config.lr_color,
                            step_count);
            adam_opacity.step(model.opacity_logits.data(), grads.opacity_logits.data(), n,
                              config.lr_opacity, step_count);
            adam_scale.step(flat(model.log_scales), flat(grads.log_scales), 3 * n,
                            config.lr_scale, step_count);
            const std::vector<Eigen::Vector4d> before_rotations = model.rotations;
            adam_rotation.step(flat(model.rotations), flat(grads.rotations), 4 * n,
                               config.lr_rotation, step_count);
            // Keep stored quaternions unit length, but only when the step
            // actually moved them: a zero-gradient run must be a bit-exact
            // parameter no-op.
            for (std::size_t g = 0; g < n; ++g)
                if ((model.rotations[g].array() != before_rotations[g].array()).any())
                    model.rotations[g] /= model.rotations[g].norm();
        }

        EpochRecord record;
        record.epoch = epoch;
        const double inv_iters = 1.0 / static_cast<double>(order.size());
        record.mean_loss = epoch_loss;
        record.mean_loss.total *= inv_iters;
        record.mean_loss.rec *= inv_iters;
        record.mean_loss.wavelet *= inv_iters;
        record.mean_loss.message *= inv_iters;
        record.mean_loss.lpips *= inv_iters;

        double accuracy = 0.0, quality = 0.0;
        for (std::size_t v = 0; v < set.size(); ++v) {
            const Image rendered = rasterize(model, set.views[v].first, render_options).image;
            accuracy += bit_accuracy(decoder.extract_bits(rendered), message);
            quality += psnr(rendered, originals[v]).db;
        }
        record.bit_accuracy = accuracy / static_cast<double>(set.size());
        record.psnr_vs_original = quality / static_cast<double>(set.size());
        log.epochs.push_back(record);
    }
    return {std::move(model), std::move(log)};
}

std::string TrainingLog::to_jsonl() const {
    std::ostringstream out;
    for (const EpochRecord& r : epochs) {
        nlohmann::json j{{"epoch", r.epoch},
                         {"loss_total", r.mean_loss.total},
                         {"loss_rec", r.mean_loss.rec},
                         {"loss_wavelet", r.mean_loss.wavelet},
                         {"loss_message", r.mean_loss.message},
                         {"loss_lpips", r.mean_loss.lpips},
                         {"bit_accuracy", r.bit_accuracy},
                         {"psnr_vs_original", r.psnr_vs_original}};
        out << j.dump() << "\n";
    }
    return out.str();
}

} // namespace splatmark
