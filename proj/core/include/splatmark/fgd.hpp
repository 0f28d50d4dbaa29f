// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "splatmark/cloud.hpp"
#include "splatmark/frequency.hpp"
#include "splatmark/renderer.hpp"

#include <string>
#include <vector>

namespace splatmark {

enum class ViewAggregation { Max, Sum };

/// Per-Gaussian rendering-quality contribution, aggregated over all
/// training views. Equals the gradient of the auxiliary loss with respect
/// to zeroed auxiliary colors.
struct ContributionMap {
    std::vector<Eigen::Vector3d> per_channel; // V, one entry per Gaussian
    std::vector<double> reduced;              // mean of |V| components

    std::size_t size() const { return reduced.size(); }

    /// Keeps the entries at `surviving` (ascending cloud indices).
    ContributionMap subset(const std::vector<int>& surviving) const;
};

struct FgdConfig {
    double prune_threshold = 1e-8;
    int patch_size = 16;
    double top_k_percent = 1.0;        // (0, 100]
    double split_quantile = 0.5;       // contributors at or below this v-bar quantile split
    double split_scale_divisor = 1.6;
    ViewAggregation aggregation = ViewAggregation::Max;
    ChannelReduction channel_reduction = ChannelReduction::Mean; // for patch scoring

    void validate() const;
};

struct FgdReport {
    int before_count = 0;
    int removed = 0;
    int split = 0;
    int after_count = 0;
    std::vector<double> per_view_psnr; // input render vs output render

    std::string to_json() const;
};

/// Eq.-style contribution measure: per view, E = |zero-color render - gt|
/// = gt itself, and V[i] accumulates sum_pixels E * alpha_i * T_i / (H*W)
/// per channel from the contributors buffer, aggregated across views.
ContributionMap measure_contribution(const GaussianCloud& cloud, const TrainingSet& set,
                                     ViewAggregation aggregation = ViewAggregation::Max);

/// Removes every Gaussian with reduced contribution < threshold, keeping
/// survivor order. Returns the pruned cloud and the removed indices.
/// Refuses (ValidationError) if nothing would survive.
std::pair<GaussianCloud, std::vector<int>> prune(const GaussianCloud& cloud,
                                                 const ContributionMap& contribution,
                                                 double threshold);

/// Tiles the image into non-overlapping patch_size^2 patches (trailing
/// partial patches skipped), scores them by high-frequency intensity and
/// returns the top ceil(K% * patch_count), ties broken by raster order.
std::vector<PatchSpectrumScore> select_high_freq_patches(const RenderOutput& render,
                                                         const FgdConfig& config);

/// Collects Gaussians contributing to any pixel of any selected patch,
/// then splits those with contribution at or below the split_quantile of
/// the collected set. Each parent becomes two children displaced along its
/// longest principal axis (minus offset first), scales divided by
/// split_scale_divisor, other parameters copied.
GaussianCloud split_in_patches(const GaussianCloud& cloud,
                               const std::vector<RenderOutput>& renders_per_view,
                               const std::vector<std::vector<PatchSpectrumScore>>& patches_per_view,
                               const ContributionMap& contribution, const FgdConfig& config);

/// Phase 1 (contribution pruning) followed by phase 2 (high-frequency
/// splitting); deterministic in (cloud, set, config).
std::pair<GaussianCloud, FgdReport> run_fgd(const GaussianCloud& cloud, const TrainingSet& set,
                                            const FgdConfig& config);

std::string to_string(ViewAggregation aggregation);
ViewAggregation view_aggregation_from_string(const std::string& name);

} // namespace splatmark
