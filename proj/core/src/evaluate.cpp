// SPDX-License-Identifier: Apache-2.0
#include "splatmark/evaluate.hpp"

#include "splatmark/errors.hpp"
#include "splatmark/jpeg_codec.hpp"
#include "splatmark/metrics.hpp"
#include "splatmark/png_io.hpp"
#include "splatmark/renderer.hpp"
#include "splatmark/rng.hpp"

#include <json.hpp>

namespace splatmark {

std::vector<AttackSpec> canonical_attacks() {
    AttackSpec noise;
    noise.kind = AttackKind::GaussianNoise;
    noise.sigma = 0.1;

    AttackSpec rotation;
    rotation.kind = AttackKind::Rotation; // seeded pick of +-pi/6

    AttackSpec scaling;
    scaling.kind = AttackKind::Scaling;
    scaling.factor = 0.75;

    AttackSpec blur;
    blur.kind = AttackKind::GaussianBlur;
    blur.sigma = 0.1;

    AttackSpec crop;
    crop.kind = AttackKind::Crop;
    crop.keep_area_fraction = 0.4;

    AttackSpec jpeg;
    jpeg.kind = AttackKind::JpegCompress;
    jpeg.quality = 50;

    AttackSpec combined_ncj;
    combined_ncj.kind = AttackKind::Combined;
    combined_ncj.members = {noise, crop, jpeg};

    AttackSpec combined_cbj;
    combined_cbj.kind = AttackKind::Combined;
    combined_cbj.members = {crop, blur, jpeg};

    AttackSpec model_noise;
    model_noise.kind = AttackKind::ModelNoise;
    model_noise.sigma = 0.1;

    AttackSpec model_remove;
    model_remove.kind = AttackKind::ModelRemove;
    model_remove.fraction = 0.2;

    AttackSpec model_clone;
    model_clone.kind = AttackKind::ModelClone;
    model_clone.fraction = 0.2;

    return {noise,        rotation,     scaling,      blur,        crop,       jpeg,
            combined_ncj, combined_cbj, model_noise,  model_remove, model_clone};
}

namespace {

// One seed per (row, view) so rows replay independently.
AttackSpec reseed(AttackSpec spec, std::uint64_t attack_seed, std::size_t row,
                  std::size_t view) {
    spec.seed = mix_seed(attack_seed, row * 1000 + view);
    for (AttackSpec& member : spec.members)
        member.seed = mix_seed(spec.seed, 0xc0 + (&member - spec.members.data()));
    return spec;
}

} // namespace

EvalReport evaluate(const GaussianCloud& watermarked, const GaussianCloud& original,
                    const std::vector<CameraView>& views, const EvaluateConfig& config) {
    if (views.empty()) throw ValidationError("evaluate: needs at least one view");
    config.key.validate();

    const int width = views.front().width;
    const int height = views.front().height;
    for (const CameraView& view : views)
        if (view.width != width || view.height != height)
            throw ValidationError("evaluate: all views must share one resolution");

    const FrozenDecoder decoder =
        config.decoder_input == DecoderInput::LowLow2
            ? FrozenDecoder::build(config.key, height / 4, width / 4, config.decoder_grid,
                                   DecoderInput::LowLow2)
            : FrozenDecoder::build(config.key, height, width, config.decoder_grid,
                                   DecoderInput::Pixel);
    const std::vector<int> message = config.key.message();

    RasterizeOptions options;
    options.track_contributors = false;

    EvalReport report;
    report.config_snapshot = config.config_snapshot;
    report.png_codec = png_codec_id();
    report.jpeg_codec = jpeg_codec_id();

    std::vector<Image> watermarked_renders;
    watermarked_renders.reserve(views.size());
    double acc_sum = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
    bool any_capped = false;
    for (const CameraView& view : views) {
        watermarked_renders.push_back(rasterize(watermarked, view, options).image);
        const Image original_render = rasterize(original, view, options).image;
        const Image& render = watermarked_renders.back();

        const double accuracy = bit_accuracy(decoder.extract_bits(render), message);
        const PsnrResult quality = psnr(render, original_render);
        const double structural = ssim(render, original_render);
        report.per_view_accuracy.push_back(accuracy);
        report.per_view_psnr.push_back(quality.db);
        report.per_view_ssim.push_back(structural);
        acc_sum += accuracy;
        psnr_sum += quality.db;
        ssim_sum += structural;
        any_capped = any_capped || quality.capped;
    }
    const double inv_views = 1.0 / static_cast<double>(views.size());
    report.bit_accuracy = acc_sum * inv_views;
    report.psnr = psnr_sum * inv_views;
    report.psnr_capped = any_capped;
    report.ssim = ssim_sum * inv_views;

    EvalRow clean;
    clean.name = "none";
    clean.bit_accuracy = report.bit_accuracy;
    clean.psnr_vs_watermarked = 99.0;
    clean.per_view_accuracy = report.per_view_accuracy;
    report.rows.push_back(std::move(clean));

    const std::vector<AttackSpec> attacks = canonical_attacks();
    for (std::size_t row = 0; row < attacks.size(); ++row) {
        EvalRow result;
        result.name = attacks[row].name();
        result.spec_json = reseed(attacks[row], config.attack_seed, row + 1, 0).to_json();

        double row_acc = 0.0, row_psnr = 0.0;
        for (std::size_t v = 0; v < views.size(); ++v) {
            const AttackSpec spec = reseed(attacks[row], config.attack_seed, row + 1, v);
            Image attacked;
            if (spec.is_model_attack()) {
                const GaussianCloud distorted = attack_model(watermarked, spec);
                attacked = rasterize(distorted, views[v], options).image;
            } else {
                attacked = attack_image(watermarked_renders[v], spec);
                if (attacked.height() != height || attacked.width() != width)
                    attacked = resize_bilinear(attacked, height, width);
            }
            const double accuracy = bit_accuracy(decoder.extract_bits(attacked), message);
            result.per_view_accuracy.push_back(accuracy);
            row_acc += accuracy;
            row_psnr += psnr(attacked, watermarked_renders[v]).db;
        }
        result.bit_accuracy = row_acc * inv_views;
        result.psnr_vs_watermarked = row_psnr * inv_views;
        report.rows.push_back(std::move(result));
    }
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["bit_accuracy"] = bit_accuracy;
    j["psnr"] = psnr;
    j["psnr_capped"] = psnr_capped;
    j["ssim"] = ssim;
    j["per_view"] = {{"bit_accuracy", per_view_accuracy},
                     {"psnr", per_view_psnr},
                     {"ssim", per_view_ssim}};
    nlohmann::json rows_json = nlohmann::json::array();
    for (const EvalRow& row : rows) {
        rows_json.push_back(
            {{"name", row.name},
             {"spec", row.spec_json.empty() ? nlohmann::json(nullptr)
                                            : nlohmann::json::parse(row.spec_json)},
             {"bit_accuracy", row.bit_accuracy},
             {"psnr_vs_watermarked", row.psnr_vs_watermarked},
             {"per_view_accuracy", row.per_view_accuracy}});
    }
    j["attacks"] = rows_json;
    j["config"] = nlohmann::json::parse(config_snapshot);
    j["codecs"] = {{"png", png_codec}, {"jpeg", jpeg_codec}};
    return j.dump(2);
}

} // namespace splatmark
