// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace splatmark {

/// Seed plus bit length; the embedded message is a pure function of both.
struct WatermarkKey {
    std::uint64_t seed = 0;
    int n_bits = 32;

    /// The fixed binary message M.
    std::vector<int> message() const;

    /// Throws unless n_bits is one of the supported lengths {32, 48, 64}.
    void validate() const;
};

/// What the decoder reads: the LL2 wavelet subband of the rendered image
/// (the pipeline default), or the raw image for the pixel-domain ablation.
enum class DecoderInput { LowLow2, Pixel };

/// Frozen, key-seeded, differentiable message decoder. Average-pools its
/// input to a grid x grid patch per channel, flattens, and applies a fixed
/// projection with orthonormal rows (a whitened linear read-out). Immutable
/// after construction; nothing in the pipeline ever updates it.
class FrozenDecoder {
public:
    /// input_shape is the (height, width) the decoder expects: the LL2
    /// shape for LowLow2 input, the full render shape for Pixel input.
    /// Throws ValidationError if n_bits exceeds grid*grid*3 (rank deficit)
    /// or the shape is smaller than the pooling grid.
    static FrozenDecoder build(const WatermarkKey& key, int input_height, int input_width,
                               int grid = 8, DecoderInput input = DecoderInput::LowLow2);

    /// Logits, one per message bit: projection * pooled(input) + bias.
    std::vector<double> decode(const Image& input) const;

    /// Adjoint of decode: dL/dlogits -> dL/dinput. Exact transpose of the
    /// linear forward map.
    Image decode_backward(const std::vector<double>& d_logits) const;

    /// Thresholds decode(...) at logit 0 after the input transform:
    /// LL2 of dwt2(image, 2) for LowLow2 decoders, the image itself for
    /// Pixel decoders. Image height/width must match the decoder's render
    /// geometry.
    std::vector<int> extract_bits(const Image& image) const;

    int n_bits() const { return key_.n_bits; }
    const WatermarkKey& key() const { return key_; }
    int grid() const { return grid_; }
    int input_height() const { return input_height_; }
    int input_width() const { return input_width_; }
    DecoderInput input_kind() const { return input_; }
    const std::vector<double>& projection() const { return projection_; }
    const std::vector<double>& bias() const { return bias_; }

    /// {seed, n_bits, grid, input shape, input kind}; the projection is
    /// regenerated from the seed on load, never serialized numerically.
    std::string to_json() const;
    static FrozenDecoder from_json(const std::string& text);

private:
    FrozenDecoder() = default;

    WatermarkKey key_;
    int grid_ = 8;
    int input_height_ = 0;
    int input_width_ = 0;
    DecoderInput input_ = DecoderInput::LowLow2;
    std::vector<double> projection_; // n_bits x (grid*grid*3), row-major
    std::vector<double> bias_;       // n_bits, zero by construction
};

std::string to_string(DecoderInput input);
DecoderInput decoder_input_from_string(const std::string& name);

} // namespace splatmark
