// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/image.hpp"

#include <filesystem>
#include <string>

namespace splatmark {

/// Reads an 8- or 16-bit PNG into a 3-channel [0,1] image. Grayscale is
/// expanded, alpha stripped.
Image read_png(const std::filesystem::path& path);

/// Writes a [0,1] image as RGB PNG, 8 or 16 bits per sample. Out-of-range
/// samples are clamped. The file appears atomically (temp + rename).
void write_png(const Image& image, const std::filesystem::path& path, int bit_depth = 8);

/// Codec identity string recorded in reports.
std::string png_codec_id();

/// Atomically replaces `path` with `bytes` (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

} // namespace splatmark
