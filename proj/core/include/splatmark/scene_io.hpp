// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/cloud.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>

namespace splatmark {

/// Parses a scene JSON file (see README for the schema) and loads the view
/// images it references. Throws ValidationError naming the offending field
/// on schema violations, IoError on filesystem failures.
std::pair<GaussianCloud, TrainingSet> load_scene(const std::filesystem::path& path);

/// Writes a scene JSON next to a "<stem>_images/" directory of 16-bit PNGs.
/// Numeric fields are written with 17 significant digits so a load/save
/// round trip reproduces the cloud bit-exactly. All writes are atomic.
void save_scene(const GaussianCloud& cloud, const TrainingSet& set,
                const std::filesystem::path& path);

/// Deterministically builds a small synthetic scene: a colored blob of
/// Gaussians orbited by pinhole cameras, plus backdrop blobs, a band of
/// never-visible Gaussians and a few near-transparent ones, so contribution
/// pruning has real work to do. Ground-truth images are renders of the
/// synthesized cloud itself, making the scene exactly reconstructable at
/// the start of fine-tuning.
std::pair<GaussianCloud, TrainingSet> synthesize_toy_scene(std::uint64_t seed, int n_gaussians,
                                                           int n_views, int width, int height);

} // namespace splatmark
