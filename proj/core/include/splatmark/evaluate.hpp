// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/attacks.hpp"
#include "splatmark/cloud.hpp"
#include "splatmark/decoder.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace splatmark {

struct EvalRow {
    std::string name;          // canonical attack-list entry
    std::string spec_json;     // replayable AttackSpec ("" for the clean row)
    double bit_accuracy = 0.0; // mean over views
    double psnr_vs_watermarked = 0.0; // attacked image vs clean watermarked render
    std::vector<double> per_view_accuracy;
};

struct EvalReport {
    double bit_accuracy = 0.0; // clean extraction, mean over views
    double psnr = 0.0;         // watermarked vs original render
    bool psnr_capped = false;
    double ssim = 0.0;
    std::vector<double> per_view_psnr;
    std::vector<double> per_view_ssim;
    std::vector<double> per_view_accuracy;
    std::vector<EvalRow> rows;
    std::string config_snapshot; // JSON text of the run configuration
    std::string png_codec;
    std::string jpeg_codec;

    std::string to_json() const;
};

struct EvaluateConfig {
    WatermarkKey key;
    int decoder_grid = 8;
    DecoderInput decoder_input = DecoderInput::LowLow2;
    std::uint64_t attack_seed = 0;
    std::string config_snapshot = "{}";
};

/// Runs the full distortion matrix: clean extraction plus the canonical
/// attack list (noise, rotation, scaling, blur, crop, jpeg, two combined
/// chains, model noise/remove/clone). Attacked images whose resolution
/// changed are resized back to the decoder's render geometry before
/// extraction. Deterministic given the seeds in the config.
EvalReport evaluate(const GaussianCloud& watermarked, const GaussianCloud& original,
                    const std::vector<CameraView>& views, const EvaluateConfig& config);

/// The canonical distortion list evaluated by `evaluate`, seeds unset.
std::vector<AttackSpec> canonical_attacks();

} // namespace splatmark
