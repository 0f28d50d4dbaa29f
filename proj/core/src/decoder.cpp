// SPDX-License-Identifier: Apache-2.0
#include "splatmark/decoder.hpp"

#include "splatmark/errors.hpp"
#include "splatmark/frequency.hpp"
#include "splatmark/rng.hpp"

#include <json.hpp>

#include <cmath>

namespace splatmark {

namespace {

// Independent sub-streams of the key seed.
constexpr std::uint64_t kMessageStream = 0x6d65;
constexpr std::uint64_t kProjectionStream = 0x7072;

// Pooling cell boundaries: cell g covers [g*n/grid, (g+1)*n/grid).
int cell_start(int g, int n, int grid) { return g * n / grid; }

} // namespace

std::vector<int> WatermarkKey::message() const {
    validate();
    RandomStream rng(mix_seed(seed, kMessageStream));
    std::vector<int> bits(n_bits);
    for (int& b : bits) b = static_cast<int>(rng.next_u64() >> 63);
    return bits;
}

void WatermarkKey::validate() const {
    if (n_bits != 32 && n_bits != 48 && n_bits != 64)
        throw ValidationError("WatermarkKey: n_bits must be 32, 48 or 64");
}

FrozenDecoder FrozenDecoder::build(const WatermarkKey& key, int input_height, int input_width,
                                   int grid, DecoderInput input) {
    key.validate();
    if (grid < 1) throw ValidationError("FrozenDecoder: pooling grid must be >= 1");
    if (input_height < grid || input_width < grid)
        throw ValidationError("FrozenDecoder: input shape must be at least grid x grid");
    const int features = grid * grid * 3;
    if (key.n_bits > features - 3)
        throw ValidationError("FrozenDecoder: n_bits " + std::to_string(key.n_bits) +
                              " exceeds usable feature count " + std::to_string(features - 3) +
                              " (" + std::to_string(features) +
                              " minus 3 brightness directions: rank deficit)");

    FrozenDecoder decoder;
    decoder.key_ = key;
    decoder.grid_ = grid;
    decoder.input_height_ = input_height;
    decoder.input_width_ = input_width;
    decoder.input_ = input;
    decoder.projection_.resize(static_cast<std::size_t>(key.n_bits) * features);
    decoder.bias_.assign(key.n_bits, 0.0);

    RandomStream rng(mix_seed(key.seed, kProjectionStream));
    for (double& v : decoder.projection_) v = rng.normal();

    // Whitening: the read-outs must not ride on overall image brightness,
    // which dominates pooled subband features and would bias every decoded
    // bit toward the content. Making each row orthogonal to the per-channel
    // constant directions removes that common mode; this costs 3 of the
    // feature dimensions, hence the tighter rank bound above.
    std::vector<double> channel_dc(3 * static_cast<std::size_t>(features), 0.0);
    const double inv_norm = 1.0 / std::sqrt(static_cast<double>(grid) * grid);
    for (int c = 0; c < 3; ++c)
        for (int k = c; k < features; k += 3)
            channel_dc[static_cast<std::size_t>(c) * features + k] = inv_norm;

    auto project_out = [features](double* v, const double* u) {
        double dot = 0.0;
        for (int k = 0; k < features; ++k) dot += v[k] * u[k];
        for (int k = 0; k < features; ++k) v[k] -= dot * u[k];
    };

    // Gram-Schmidt in row order, seeded rows first projected off the
    // brightness directions.
    auto row = [&](int r) { return decoder.projection_.data() + static_cast<std::size_t>(r) * features; };
    for (int r = 0; r < key.n_bits; ++r) {
        double* current = row(r);
        for (int c = 0; c < 3; ++c)
            project_out(current, channel_dc.data() + static_cast<std::size_t>(c) * features);
        for (int prev = 0; prev < r; ++prev) project_out(current, row(prev));
        double norm_sq = 0.0;
        for (int k = 0; k < features; ++k) norm_sq += current[k] * current[k];
        const double norm = std::sqrt(norm_sq);
        if (norm < 1e-10)
            throw ValidationError("FrozenDecoder: projection rows are rank deficient");
        for (int k = 0; k < features; ++k) current[k] /= norm;
    }
    return decoder;
}

std::vector<double> FrozenDecoder::decode(const Image& input) const {
    if (input.height() != input_height_ || input.width() != input_width_ ||
        input.channels() != 3)
        throw ValidationError("FrozenDecoder::decode: input shape mismatch");

    const int features = grid_ * grid_ * 3;
    std::vector<double> pooled(features, 0.0);
    for (int gy = 0; gy < grid_; ++gy) {
        const int y0 = cell_start(gy, input_height_, grid_);
        const int y1 = cell_start(gy + 1, input_height_, grid_);
        for (int gx = 0; gx < grid_; ++gx) {
            const int x0 = cell_start(gx, input_width_, grid_);
            const int x1 = cell_start(gx + 1, input_width_, grid_);
            const double inv_count = 1.0 / ((y1 - y0) * (x1 - x0));
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) sum += input(y, x, c);
                pooled[(gy * grid_ + gx) * 3 + c] = sum * inv_count;
            }
        }
    }

    std::vector<double> logits(key_.n_bits);
    for (int r = 0; r < key_.n_bits; ++r) {
        const double* p = projection_.data() + static_cast<std::size_t>(r) * features;
        double acc = bias_[r];
        for (int k = 0; k < features; ++k) acc += p[k] * pooled[k];
        logits[r] = acc;
    }
    return logits;
}

Image FrozenDecoder::decode_backward(const std::vector<double>& d_logits) const {
    if (static_cast<int>(d_logits.size()) != key_.n_bits)
        throw ValidationError("FrozenDecoder::decode_backward: logit count mismatch");

    const int features = grid_ * grid_ * 3;
    std::vector<double> d_pooled(features, 0.0);
    for (int r = 0; r < key_.n_bits; ++r) {
        const double* p = projection_.data() + static_cast<std::size_t>(r) * features;
        for (int k = 0; k < features; ++k) d_pooled[k] += p[k] * d_logits[r];
    }

    Image d_input(input_height_, input_width_, 3);
    for (int gy = 0; gy < grid_; ++gy) {
        const int y0 = cell_start(gy, input_height_, grid_);
        const int y1 = cell_start(gy + 1, input_height_, grid_);
        for (int gx = 0; gx < grid_; ++gx) {
            const int x0 = cell_start(gx, input_width_, grid_);
            const int x1 = cell_start(gx + 1, input_width_, grid_);
            const double inv_count = 1.0 / ((y1 - y0) * (x1 - x0));
            for (int c = 0; c < 3; ++c) {
                const double spread = d_pooled[(gy * grid_ + gx) * 3 + c] * inv_count;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) d_input(y, x, c) = spread;
            }
        }
    }
    return d_input;
}

std::vector<int> FrozenDecoder::extract_bits(const Image& image) const {
    std::vector<double> logits;
    if (input_ == DecoderInput::LowLow2) {
        if (image.height() % 4 != 0 || image.width() % 4 != 0)
            throw ValidationError("extract_bits: image dimensions must be divisible by 4");
        logits = decode(dwt2(image, 2).deepest_ll());
    } else {
        logits = decode(image);
    }
    std::vector<int> bits(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) bits[i] = logits[i] > 0.0 ? 1 : 0;
    return bits;
}

std::string to_string(DecoderInput input) {
    return input == DecoderInput::LowLow2 ? "ll2" : "pixel";
}

DecoderInput decoder_input_from_string(const std::string& name) {
    if (name == "ll2") return DecoderInput::LowLow2;
    if (name == "pixel") return DecoderInput::Pixel;
    throw ValidationError("unknown decoder input kind: " + name);
}

std::string FrozenDecoder::to_json() const {
    nlohmann::json j{{"seed", key_.seed},
                     {"n_bits", key_.n_bits},
                     {"grid", grid_},
                     {"input_height", input_height_},
                     {"input_width", input_width_},
                     {"input", splatmark::to_string(input_)}};
    return j.dump(2);
}

FrozenDecoder FrozenDecoder::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("decoder JSON parse error: ") + e.what());
    }
    WatermarkKey key{j.at("seed").get<std::uint64_t>(), j.at("n_bits").get<int>()};
    return build(key, j.at("input_height").get<int>(), j.at("input_width").get<int>(),
                 j.at("grid").get<int>(),
                 decoder_input_from_string(j.at("input").get<std::string>()));
}

} // namespace splatmark
