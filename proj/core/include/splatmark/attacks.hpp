// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/cloud.hpp"
#include "splatmark/image.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace splatmark {

enum class AttackKind {
    GaussianNoise,
    Rotation,
    Scaling,
    GaussianBlur,
    Crop,
    JpegCompress,
    Combined,
    ModelNoise,
    ModelRemove,
    ModelClone,
};

/// Tagged distortion description. Only the fields of the active kind are
/// meaningful; `seed` drives every random choice so a spec replays
/// bit-exactly.
struct AttackSpec {
    AttackKind kind = AttackKind::GaussianNoise;
    double sigma = 0.1;                    // GaussianNoise, GaussianBlur, ModelNoise
    std::optional<double> angle_rad;       // Rotation; absent = seeded pick of +-pi/6
    double factor = 0.75;                  // Scaling
    int kernel = 0;                        // GaussianBlur; 0 = from sigma
    double keep_area_fraction = 0.4;       // Crop
    int quality = 50;                      // JpegCompress
    double fraction = 0.2;                 // ModelRemove, ModelClone
    std::vector<AttackSpec> members;       // Combined
    std::uint64_t seed = 0;

    bool is_image_attack() const;
    bool is_model_attack() const;
    std::string name() const;

    std::string to_json() const;
    static AttackSpec from_json(const std::string& text);

    void validate() const;
};

/// Applies an image-space distortion. Output stays in [0,1]; Scaling and
/// Crop change the resolution. Throws ValidationError for model-space specs.
Image attack_image(const Image& image, const AttackSpec& spec);

/// Applies a model-space distortion; all GaussianCloud invariants are
/// preserved (quaternions renormalized after parameter noise). Throws
/// ValidationError for image-space specs or when a removal fraction would
/// delete every Gaussian.
GaussianCloud attack_model(const GaussianCloud& cloud, const AttackSpec& spec);

/// Bilinear resize used both by Scaling and by the extraction path that
/// restores attacked images to the decoder's expected resolution.
Image resize_bilinear(const Image& image, int out_height, int out_width);

struct SweepPoint {
    double strength = 0.0;
    double bit_accuracy = 0.0;
    double psnr = 0.0;
};

/// Evaluation outcome for one attacked instance: (bit accuracy, psnr).
using SweepEvalFn = std::function<std::pair<double, double>(const AttackSpec&)>;

/// Replaces the template's strength knob with each listed value and
/// evaluates it. Strengths must be monotone.
std::vector<SweepPoint> sweep(const AttackSpec& spec_template, const std::vector<double>& strengths,
                              const SweepEvalFn& evaluate_fn);

/// The template with its kind-specific strength knob set to `strength`.
AttackSpec with_strength(const AttackSpec& spec_template, double strength);

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);

} // namespace splatmark
