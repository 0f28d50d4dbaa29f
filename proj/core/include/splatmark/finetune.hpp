// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/cloud.hpp"
#include "splatmark/decoder.hpp"
#include "splatmark/frequency.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace splatmark {

struct LossWeights {
    double rec = 1.0;
    double lpips = 0.0; // plugin-only; no built-in perceptual network
    double wavelet = 0.3;
    double message = 0.4;

    void validate() const;
};

/// Per-Gaussian, per-group gradient attenuation z = softmax(-|theta|^beta).
/// Positions are deliberately not masked. Each group's z sums to 1 and is
/// strictly positive; the exponential form is total, so the zero-parameter
/// division hazard of ratio-based masks cannot occur.
struct GradientMask {
    std::vector<double> color;
    std::vector<double> opacity;
    std::vector<double> rotation;
    std::vector<double> scale;
    double beta = 4.0;
};

/// Raw mask weight w = exp(-|theta|^beta) before normalization.
double mask_weight(double theta_magnitude, double beta);

/// Builds the mask from the FGD-processed cloud. Group magnitudes use the
/// rendering-facing values: |rgb|, logistic(opacity_logit), |quaternion|,
/// |exp(log_scale)|.
GradientMask build_gradient_mask(const GaussianCloud& cloud, double beta = 4.0);

struct LossBreakdown {
    double total = 0.0;
    double rec = 0.0;
    double wavelet = 0.0;
    double message = 0.0;
    double lpips = 0.0;
};

/// L_rec = MAE(I_w, I_o); L_w = sum over levels 1..2 and bands {LH,HL,HH}
/// of MAE(S_w, S_o); L_m = BCE(sigmoid(logits), message), summed over bits
/// and computed in logit space; total = weighted sum. The lpips term is the
/// plugin's value (0 when none is installed).
LossBreakdown compute_losses(const Image& watermarked, const Image& original,
                             const WaveletPyramid& pyramid_w, const WaveletPyramid& pyramid_o,
                             const std::vector<double>& logits, const std::vector<int>& message,
                             const LossWeights& weights, double lpips_value = 0.0);

/// Optional perceptual loss plugin: maps (rendered, reference) to
/// (value, dL/drendered).
using PerceptualLossFn = std::function<std::pair<double, Image>(const Image&, const Image&)>;

struct FinetuneConfig {
    int epochs = 10; // iteration count per epoch = number of training views
    double lr_position = 1.6e-5;
    double lr_color = 2.5e-3;
    double lr_opacity = 2.5e-2;
    double lr_scale = 1e-3;
    double lr_rotation = 1e-3;
    LossWeights weights;
    WatermarkKey key;
    std::uint64_t shuffle_seed = 0; // view-order stream
    double mask_beta = 4.0;
    int decoder_grid = 8;
    DecoderInput decoder_input = DecoderInput::LowLow2;
    PerceptualLossFn perceptual; // empty = no lpips term

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    LossBreakdown mean_loss; // averaged over the epoch's iterations
    double bit_accuracy = 0.0; // over all views at epoch end
    double psnr_vs_original = 0.0; // mean over views
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    /// JSON-lines, one record per epoch.
    std::string to_jsonl() const;
};

/// Embeds the key's message into the cloud by fine-tuning against cached
/// pre-fine-tuning renders. Gradients of color/opacity/rotation/scale are
/// masked (Hadamard) before the per-group Adam step; position gradients are
/// not. Deterministic given (cloud, set, cfg). Throws NumericError on
/// divergence.
std::pair<GaussianCloud, TrainingLog> finetune(const GaussianCloud& cloud, const TrainingSet& set,
                                               const FinetuneConfig& config);

} // namespace splatmark
