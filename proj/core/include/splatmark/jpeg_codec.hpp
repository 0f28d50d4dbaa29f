// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/image.hpp"

#include <string>

namespace splatmark {

/// Encodes the [0,1] image as a baseline JPEG at the given quality (1-100)
/// and decodes it back. Everything stays in memory.
Image jpeg_roundtrip(const Image& image, int quality);

/// Codec identity string recorded in reports.
std::string jpeg_codec_id();

} // namespace splatmark
