// SPDX-License-Identifier: Apache-2.0
#include "splatmark/attacks.hpp"

#include "splatmark/errors.hpp"
#include "splatmark/jpeg_codec.hpp"
#include "splatmark/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace splatmark {

namespace {

using nlohmann::json;

// Bilinear sample; border=true clamps to the edge, otherwise out-of-frame
// reads are black.
double sample_bilinear(const Image& image, double fy, double fx, int c, bool clamp_border) {
    if (!clamp_border &&
        (fx < -0.5 || fy < -0.5 || fx > image.width() - 0.5 || fy > image.height() - 0.5))
        return 0.0;
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double wx = fx - x0;
    const double wy = fy - y0;
    auto fetch = [&](int y, int x) -> double {
        if (clamp_border) {
            x = std::clamp(x, 0, image.width() - 1);
            y = std::clamp(y, 0, image.height() - 1);
        } else if (x < 0 || y < 0 || x >= image.width() || y >= image.height()) {
            return 0.0;
        }
        return image(y, x, c);
    };
    return (1 - wy) * ((1 - wx) * fetch(y0, x0) + wx * fetch(y0, x0 + 1)) +
           wy * ((1 - wx) * fetch(y0 + 1, x0) + wx * fetch(y0 + 1, x0 + 1));
}

Image add_gaussian_noise(const Image& image, double sigma, std::uint64_t seed) {
    Image out = image;
    if (sigma == 0.0) return out;
    RandomStream rng(mix_seed(seed, 0x6e6f));
    for (double& v : out.data()) v += sigma * rng.normal();
    out.clamp(0.0, 1.0);
    return out;
}

Image rotate_about_center(const Image& image, double angle) {
    const double cx = 0.5 * (image.width() - 1);
    const double cy = 0.5 * (image.height() - 1);
    const double cos_a = std::cos(angle);
    const double sin_a = std::sin(angle);
    Image out(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            // Inverse map: rotate the output coordinate back by -angle.
            const double dx = x - cx;
            const double dy = y - cy;
            const double sx = cx + cos_a * dx + sin_a * dy;
            const double sy = cy - sin_a * dx + cos_a * dy;
            for (int c = 0; c < image.channels(); ++c)
                out(y, x, c) = sample_bilinear(image, sy, sx, c, false);
        }
    }
    return out;
}

Image gaussian_blur(const Image& image, double sigma, int kernel) {
    int size = kernel > 0 ? kernel : 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
    if (size < 3) size = 3;
    if (size % 2 == 0) ++size;
    const int half = size / 2;

    std::vector<double> weights(size);
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        weights[i] = sigma > 0.0 ? std::exp(-d * d / (2.0 * sigma * sigma)) : (d == 0.0 ? 1.0 : 0.0);
        sum += weights[i];
    }
    for (double& w : weights) w /= sum;

    // Separable convolution with edge replication.
    Image horizontal(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c) {
                double acc = 0.0;
                for (int k = 0; k < size; ++k)
                    acc += weights[k] *
                           image(y, std::clamp(x + k - half, 0, image.width() - 1), c);
                horizontal(y, x, c) = acc;
            }
    Image out(image.height(), image.width(), image.channels());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            for (int c = 0; c < image.channels(); ++c) {
                double acc = 0.0;
                for (int k = 0; k < size; ++k)
                    acc += weights[k] *
                           horizontal(std::clamp(y + k - half, 0, image.height() - 1), x, c);
                out(y, x, c) = acc;
            }
    return out;
}

Image center_crop(const Image& image, double keep_area_fraction) {
    const double side_scale = std::sqrt(keep_area_fraction);
    const int out_h = std::max(1, static_cast<int>(std::lround(image.height() * side_scale)));
    const int out_w = std::max(1, static_cast<int>(std::lround(image.width() * side_scale)));
    const int y0 = (image.height() - out_h) / 2;
    const int x0 = (image.width() - out_w) / 2;
    Image out(out_h, out_w, image.channels());
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x)
            for (int c = 0; c < image.channels(); ++c) out(y, x, c) = image(y0 + y, x0 + x, c);
    return out;
}

} // namespace

Image resize_bilinear(const Image& image, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1)
        throw ValidationError("resize_bilinear: output dimensions must be positive");
    Image out(out_height, out_width, image.channels());
    const double scale_y = static_cast<double>(image.height()) / out_height;
    const double scale_x = static_cast<double>(image.width()) / out_width;
    for (int y = 0; y < out_height; ++y) {
        const double sy = (y + 0.5) * scale_y - 0.5;
        for (int x = 0; x < out_width; ++x) {
            const double sx = (x + 0.5) * scale_x - 0.5;
            for (int c = 0; c < image.channels(); ++c)
                out(y, x, c) = sample_bilinear(image, sy, sx, c, true);
        }
    }
    return out;
}

bool AttackSpec::is_image_attack() const {
    switch (kind) {
        case AttackKind::GaussianNoise:
        case AttackKind::Rotation:
        case AttackKind::Scaling:
        case AttackKind::GaussianBlur:
        case AttackKind::Crop:
        case AttackKind::JpegCompress:
            return true;
        case AttackKind::Combined:
            return std::all_of(members.begin(), members.end(),
                               [](const AttackSpec& m) { return m.is_image_attack(); });
        default:
            return false;
    }
}

bool AttackSpec::is_model_attack() const {
    return kind == AttackKind::ModelNoise || kind == AttackKind::ModelRemove ||
           kind == AttackKind::ModelClone;
}

void AttackSpec::validate() const {
    switch (kind) {
        case AttackKind::GaussianNoise:
        case AttackKind::GaussianBlur:
        case AttackKind::ModelNoise:
            if (sigma < 0.0) throw ValidationError("AttackSpec: sigma must be >= 0");
            break;
        case AttackKind::Scaling:
            if (factor <= 0.0 || factor > 1.0)
                throw ValidationError("AttackSpec: scaling factor must be in (0, 1]");
            break;
        case AttackKind::Crop:
            if (keep_area_fraction <= 0.0 || keep_area_fraction > 1.0)
                throw ValidationError("AttackSpec: keep_area_fraction must be in (0, 1]");
            break;
        case AttackKind::JpegCompress:
            if (quality < 1 || quality > 100)
                throw ValidationError("AttackSpec: quality must be in [1, 100]");
            break;
        case AttackKind::ModelRemove:
        case AttackKind::ModelClone:
            if (fraction <= 0.0 || fraction > 1.0)
                throw ValidationError("AttackSpec: fraction must be in (0, 1]");
            break;
        case AttackKind::Combined:
            for (const AttackSpec& m : members) m.validate();
            break;
        case AttackKind::Rotation:
            break;
    }
}

Image attack_image(const Image& image, const AttackSpec& spec) {
    spec.validate();
    if (!spec.is_image_attack())
        throw ValidationError("attack_image: '" + to_string(spec.kind) + "' is not an image attack");
    switch (spec.kind) {
        case AttackKind::GaussianNoise:
            return add_gaussian_noise(image, spec.sigma, spec.seed);
        case AttackKind::Rotation: {
            double angle;
            if (spec.angle_rad) {
                angle = *spec.angle_rad;
            } else {
                RandomStream rng(mix_seed(spec.seed, 0x726f));
                angle = rng.coin_flip() ? std::numbers::pi / 6.0 : -std::numbers::pi / 6.0;
            }
            return rotate_about_center(image, angle);
        }
        case AttackKind::Scaling:
            return resize_bilinear(image,
                                   std::max(1, static_cast<int>(std::lround(image.height() * spec.factor))),
                                   std::max(1, static_cast<int>(std::lround(image.width() * spec.factor))));
        case AttackKind::GaussianBlur:
            return gaussian_blur(image, spec.sigma, spec.kernel);
        case AttackKind::Crop:
            return center_crop(image, spec.keep_area_fraction);
        case AttackKind::JpegCompress:
            return jpeg_roundtrip(image, spec.quality);
        case AttackKind::Combined: {
            Image current = image;
            for (const AttackSpec& member : spec.members) current = attack_image(current, member);
            return current;
        }
        default:
            throw ValidationError("attack_image: unreachable");
    }
}

namespace {

// First `count` entries of a seeded partial Fisher-Yates over [0, n).
std::vector<int> sample_indices(int n, int count, RandomStream& rng) {
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < count; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

GaussianCloud erase_indices(const GaussianCloud& cloud, std::vector<int> victims) {
    std::sort(victims.begin(), victims.end());
    GaussianCloud out;
    std::size_t next = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (next < victims.size() && victims[next] == static_cast<int>(i)) {
            ++next;
            continue;
        }
        out.positions.push_back(cloud.positions[i]);
        out.rotations.push_back(cloud.rotations[i]);
        out.log_scales.push_back(cloud.log_scales[i]);
        out.opacity_logits.push_back(cloud.opacity_logits[i]);
        out.colors.push_back(cloud.colors[i]);
    }
    return out;
}

} // namespace

GaussianCloud attack_model(const GaussianCloud& cloud, const AttackSpec& spec) {
    spec.validate();
    if (!spec.is_model_attack())
        throw ValidationError("attack_model: '" + to_string(spec.kind) + "' is not a model attack");
    const int n = static_cast<int>(cloud.size());

    switch (spec.kind) {
        case AttackKind::ModelRemove: {
            const int count = static_cast<int>(std::floor(spec.fraction * n));
            if (count >= n)
                throw ValidationError("attack_model: removal would delete every Gaussian");
            if (count == 0) return cloud;
            RandomStream rng(mix_seed(spec.seed, 0x7265));
            return erase_indices(cloud, sample_indices(n, count, rng));
        }
        case AttackKind::ModelClone: {
            const int count = static_cast<int>(std::floor(spec.fraction * n));
            GaussianCloud out = cloud;
            if (count == 0) return out;
            RandomStream rng(mix_seed(spec.seed, 0x636c));
            for (int idx : sample_indices(n, count, rng)) { // appended in sampled order
                out.positions.push_back(cloud.positions[idx]);
                out.rotations.push_back(cloud.rotations[idx]);
                out.log_scales.push_back(cloud.log_scales[idx]);
                out.opacity_logits.push_back(cloud.opacity_logits[idx]);
                out.colors.push_back(cloud.colors[idx]);
            }
            return out;
        }
        case AttackKind::ModelNoise: {
            GaussianCloud out = cloud;
            if (spec.sigma == 0.0) return out;
            RandomStream rng(mix_seed(spec.seed, 0x6d6e));
            for (std::size_t i = 0; i < out.size(); ++i) {
                for (int k = 0; k < 3; ++k) out.positions[i][k] += spec.sigma * rng.normal();
                for (int k = 0; k < 4; ++k) out.rotations[i][k] += spec.sigma * rng.normal();
                for (int k = 0; k < 3; ++k) out.log_scales[i][k] += spec.sigma * rng.normal();
                out.opacity_logits[i] += spec.sigma * rng.normal();
                for (int k = 0; k < 3; ++k) out.colors[i][k] += spec.sigma * rng.normal();
                out.rotations[i] /= out.rotations[i].norm();
            }
            return out;
        }
        default:
            throw ValidationError("attack_model: unreachable");
    }
}

AttackSpec with_strength(const AttackSpec& spec_template, double strength) {
    AttackSpec spec = spec_template;
    switch (spec.kind) {
        case AttackKind::GaussianNoise:
        case AttackKind::GaussianBlur:
        case AttackKind::ModelNoise:
            spec.sigma = strength;
            break;
        case AttackKind::Rotation:
            spec.angle_rad = strength;
            break;
        case AttackKind::Scaling:
            spec.factor = strength;
            break;
        case AttackKind::Crop:
            spec.keep_area_fraction = strength;
            break;
        case AttackKind::JpegCompress:
            spec.quality = static_cast<int>(std::lround(strength));
            break;
        case AttackKind::ModelRemove:
        case AttackKind::ModelClone:
            spec.fraction = strength;
            break;
        case AttackKind::Combined:
            throw ValidationError("with_strength: combined attacks have no single strength knob");
    }
    return spec;
}

std::vector<SweepPoint> sweep(const AttackSpec& spec_template, const std::vector<double>& strengths,
                              const SweepEvalFn& evaluate_fn) {
    if (strengths.empty()) throw ValidationError("sweep: empty strength list");
    for (std::size_t i = 1; i < strengths.size(); ++i)
        if (strengths[i] < strengths[i - 1])
            throw ValidationError("sweep: strengths must be monotone non-decreasing");

    std::vector<SweepPoint> curve;
    curve.reserve(strengths.size());
    for (double strength : strengths) {
        const auto [accuracy, quality] = evaluate_fn(with_strength(spec_template, strength));
        curve.push_back(SweepPoint{strength, accuracy, quality});
    }
    return curve;
}

std::string to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::GaussianNoise: return "gaussian_noise";
        case AttackKind::Rotation: return "rotation";
        case AttackKind::Scaling: return "scaling";
        case AttackKind::GaussianBlur: return "gaussian_blur";
        case AttackKind::Crop: return "crop";
        case AttackKind::JpegCompress: return "jpeg";
        case AttackKind::Combined: return "combined";
        case AttackKind::ModelNoise: return "model_noise";
        case AttackKind::ModelRemove: return "model_remove";
        case AttackKind::ModelClone: return "model_clone";
    }
    return "unknown";
}

AttackKind attack_kind_from_string(const std::string& name) {
    for (AttackKind kind :
         {AttackKind::GaussianNoise, AttackKind::Rotation, AttackKind::Scaling,
          AttackKind::GaussianBlur, AttackKind::Crop, AttackKind::JpegCompress,
          AttackKind::Combined, AttackKind::ModelNoise, AttackKind::ModelRemove,
          AttackKind::ModelClone})
        if (to_string(kind) == name) return kind;
    throw ValidationError("unknown attack kind: " + name);
}

std::string AttackSpec::name() const {
    if (kind != AttackKind::Combined) return to_string(kind);
    std::string out = "combined";
    for (const AttackSpec& m : members) out += "_" + m.name();
    return out;
}

std::string AttackSpec::to_json() const {
    json j;
    j["kind"] = splatmark::to_string(kind);
    j["seed"] = seed;
    switch (kind) {
        case AttackKind::GaussianNoise:
        case AttackKind::GaussianBlur:
        case AttackKind::ModelNoise:
            j["sigma"] = sigma;
            if (kind == AttackKind::GaussianBlur) j["kernel"] = kernel;
            break;
        case AttackKind::Rotation:
            if (angle_rad) j["angle_rad"] = *angle_rad;
            break;
        case AttackKind::Scaling:
            j["factor"] = factor;
            break;
        case AttackKind::Crop:
            j["keep_area_fraction"] = keep_area_fraction;
            break;
        case AttackKind::JpegCompress:
            j["quality"] = quality;
            break;
        case AttackKind::ModelRemove:
        case AttackKind::ModelClone:
            j["fraction"] = fraction;
            break;
        case AttackKind::Combined: {
            json list = json::array();
            for (const AttackSpec& m : members) list.push_back(json::parse(m.to_json()));
            j["members"] = list;
            break;
        }
    }
    return j.dump();
}

namespace {

AttackSpec spec_from_parsed(const json& j) {
    AttackSpec spec;
    spec.kind = attack_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("sigma")) spec.sigma = j.at("sigma").get<double>();
    if (j.contains("angle_rad")) spec.angle_rad = j.at("angle_rad").get<double>();
    if (j.contains("factor")) spec.factor = j.at("factor").get<double>();
    if (j.contains("kernel")) spec.kernel = j.at("kernel").get<int>();
    if (j.contains("keep_area_fraction"))
        spec.keep_area_fraction = j.at("keep_area_fraction").get<double>();
    if (j.contains("quality")) spec.quality = j.at("quality").get<int>();
    if (j.contains("fraction")) spec.fraction = j.at("fraction").get<double>();
    if (j.contains("members"))
        for (const json& m : j.at("members")) spec.members.push_back(spec_from_parsed(m));
    spec.validate();
    return spec;
}

} // namespace

AttackSpec AttackSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("attack spec JSON parse error: ") + e.what());
    }
    return spec_from_parsed(j);
}

} // namespace splatmark
