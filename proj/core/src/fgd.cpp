// SPDX-License-Identifier: Apache-2.0
#include "splatmark/fgd.hpp"

#include "splatmark/errors.hpp"
#include "splatmark/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <utility>

namespace splatmark {

ContributionMap ContributionMap::subset(const std::vector<int>& surviving) const {
    ContributionMap out;
    out.per_channel.reserve(surviving.size());
    out.reduced.reserve(surviving.size());
    for (int idx : surviving) {
        out.per_channel.push_back(per_channel[idx]);
        out.reduced.push_back(reduced[idx]);
    }
    return out;
}

void FgdConfig::validate() const {
    if (prune_threshold < 0.0) throw ValidationError("FgdConfig: prune_threshold must be >= 0");
    if (patch_size < 2) throw ValidationError("FgdConfig: patch_size must be >= 2");
    if (top_k_percent < 0.0 || top_k_percent > 100.0)
        throw ValidationError("FgdConfig: top_k_percent must be in [0, 100]");
    if (split_quantile < 0.0 || split_quantile > 1.0)
        throw ValidationError("FgdConfig: split_quantile must be in [0, 1]");
    if (split_scale_divisor <= 0.0)
        throw ValidationError("FgdConfig: split_scale_divisor must be positive");
}

ContributionMap measure_contribution(const GaussianCloud& cloud, const TrainingSet& set,
                                     ViewAggregation aggregation) {
    const std::size_t n = cloud.size();
    std::vector<Eigen::Vector3d> aggregated(n, Eigen::Vector3d::Zero());

    for (const auto& [camera, ground_truth] : set.views) {
        // Rendering with the auxiliary colors zeroed leaves alpha and
        // transmittance untouched, so E = |0 - gt| = gt and the recorded
        // contributor weights are exactly the auxiliary-color gradients.
        const RenderOutput render = rasterize(cloud, camera);
        const double inv_pixels = 1.0 / (static_cast<double>(camera.width) * camera.height);

        std::vector<Eigen::Vector3d> view_contribution(n, Eigen::Vector3d::Zero());
        for (int y = 0; y < camera.height; ++y) {
            for (int x = 0; x < camera.width; ++x) {
                const auto& terms = render.at(y, x);
                if (terms.empty()) continue;
                const Eigen::Vector3d error(ground_truth(y, x, 0), ground_truth(y, x, 1),
                                            ground_truth(y, x, 2));
                for (const Contribution& term : terms)
                    view_contribution[term.source_index] +=
                        error * (term.alpha * term.transmittance * inv_pixels);
            }
        }
        if (aggregation == ViewAggregation::Max) {
            for (std::size_t i = 0; i < n; ++i)
                aggregated[i] = aggregated[i].cwiseMax(view_contribution[i].cwiseAbs());
        } else {
            for (std::size_t i = 0; i < n; ++i)
                aggregated[i] += view_contribution[i].cwiseAbs();
        }
    }

    ContributionMap map;
    map.per_channel = std::move(aggregated);
    map.reduced.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        map.reduced[i] = map.per_channel[i].cwiseAbs().mean();
    return map;
}

std::pair<GaussianCloud, std::vector<int>> prune(const GaussianCloud& cloud,
                                                 const ContributionMap& contribution,
                                                 double threshold) {
    if (threshold < 0.0) throw ValidationError("prune: threshold must be >= 0");
    if (contribution.size() != cloud.size())
        throw ValidationError("prune: contribution map does not match the cloud");

    GaussianCloud pruned;
    std::vector<int> removed;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (contribution.reduced[i] < threshold) {
            removed.push_back(static_cast<int>(i));
            continue;
        }
        pruned.positions.push_back(cloud.positions[i]);
        pruned.rotations.push_back(cloud.rotations[i]);
        pruned.log_scales.push_back(cloud.log_scales[i]);
        pruned.opacity_logits.push_back(cloud.opacity_logits[i]);
        pruned.colors.push_back(cloud.colors[i]);
    }
    if (pruned.size() == 0)
        throw ValidationError("prune: threshold would remove every Gaussian");
    return {std::move(pruned), std::move(removed)};
}

std::vector<PatchSpectrumScore> select_high_freq_patches(const RenderOutput& render,
                                                         const FgdConfig& config) {
    config.validate();
    const int patch = config.patch_size;
    const int rows = render.image.height() / patch; // trailing partial patches skipped
    const int cols = render.image.width() / patch;

    std::vector<PatchSpectrumScore> scores;
    scores.reserve(static_cast<std::size_t>(rows) * cols);
    Image tile(patch, patch, 3);
    for (int py = 0; py < rows; ++py) {
        for (int px = 0; px < cols; ++px) {
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    for (int c = 0; c < 3; ++c)
                        tile(y, x, c) = render.image(py * patch + y, px * patch + x, c);
            scores.push_back(PatchSpectrumScore{px * patch, py * patch,
                                                patch_intensity(tile, config.channel_reduction)});
        }
    }

    std::size_t keep = static_cast<std::size_t>(
        std::ceil(config.top_k_percent / 100.0 * static_cast<double>(scores.size())));
    keep = std::min(keep, scores.size());
    // Construction order is raster order, so a stable sort on intensity
    // alone gives the raster tie-break.
    std::stable_sort(scores.begin(), scores.end(),
                     [](const PatchSpectrumScore& a, const PatchSpectrumScore& b) {
                         return a.intensity > b.intensity;
                     });
    scores.resize(keep);
    return scores;
}

GaussianCloud split_in_patches(const GaussianCloud& cloud,
                               const std::vector<RenderOutput>& renders_per_view,
                               const std::vector<std::vector<PatchSpectrumScore>>& patches_per_view,
                               const ContributionMap& contribution, const FgdConfig& config) {
    config.validate();
    if (renders_per_view.size() != patches_per_view.size())
        throw ValidationError("split_in_patches: renders and patch selections do not pair up");
    if (contribution.size() != cloud.size())
        throw ValidationError("split_in_patches: contribution map does not match the cloud");

    std::size_t selected_patches = 0;
    std::vector<char> contributes(cloud.size(), 0);
    for (std::size_t v = 0; v < renders_per_view.size(); ++v) {
        const RenderOutput& render = renders_per_view[v];
        for (const PatchSpectrumScore& patch : patches_per_view[v]) {
            ++selected_patches;
            for (int y = patch.origin_y; y < patch.origin_y + config.patch_size; ++y)
                for (int x = patch.origin_x; x < patch.origin_x + config.patch_size; ++x)
                    for (const Contribution& term : render.at(y, x))
                        contributes[term.source_index] = 1;
        }
    }
    if (selected_patches == 0) return cloud;

    std::vector<double> collected_values;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (contributes[i]) collected_values.push_back(contribution.reduced[i]);
    if (collected_values.empty()) {
        std::cerr << "split_in_patches: selected patches have no tracked contributors; "
                     "cloud left unchanged\n";
        return cloud;
    }

    std::sort(collected_values.begin(), collected_values.end());
    const std::size_t q_index = static_cast<std::size_t>(
        std::floor(config.split_quantile * static_cast<double>(collected_values.size() - 1)));
    const double cutoff = collected_values[q_index];

    const double log_divisor = std::log(config.split_scale_divisor);
    GaussianCloud out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const bool split_this = contributes[i] && contribution.reduced[i] <= cutoff;
        if (!split_this) {
            out.positions.push_back(cloud.positions[i]);
            out.rotations.push_back(cloud.rotations[i]);
            out.log_scales.push_back(cloud.log_scales[i]);
            out.opacity_logits.push_back(cloud.opacity_logits[i]);
            out.colors.push_back(cloud.colors[i]);
            continue;
        }
        // Longest principal axis of the covariance ellipsoid.
        int axis = 0;
        for (int a = 1; a < 3; ++a)
            if (cloud.log_scales[i][a] > cloud.log_scales[i][axis]) axis = a;
        const Eigen::Matrix3d rot = quaternion_to_rotation(cloud.rotations[i]);
        const Eigen::Vector3d offset =
            rot.col(axis) * (std::exp(cloud.log_scales[i][axis]) * 0.5);
        const Eigen::Vector3d child_scales =
            cloud.log_scales[i] - Eigen::Vector3d::Constant(log_divisor);
        for (int child = 0; child < 2; ++child) { // minus offset first
            out.positions.push_back(cloud.positions[i] + (child == 0 ? -offset : offset));
            out.rotations.push_back(cloud.rotations[i]);
            out.log_scales.push_back(child_scales);
            out.opacity_logits.push_back(cloud.opacity_logits[i]);
            out.colors.push_back(cloud.colors[i]);
        }
    }
    return out;
}

std::pair<GaussianCloud, FgdReport> run_fgd(const GaussianCloud& cloud, const TrainingSet& set,
                                            const FgdConfig& config) {
    config.validate();
    cloud.validate();
    set.validate();

    FgdReport report;
    report.before_count = static_cast<int>(cloud.size());

    const ContributionMap contribution = measure_contribution(cloud, set, config.aggregation);
    auto [pruned, removed] = prune(cloud, contribution, config.prune_threshold);
    report.removed = static_cast<int>(removed.size());

    std::vector<int> surviving;
    surviving.reserve(pruned.size());
    {
        std::size_t next_removed = 0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (next_removed < removed.size() && removed[next_removed] == static_cast<int>(i)) {
                ++next_removed;
                continue;
            }
            surviving.push_back(static_cast<int>(i));
        }
    }
    const ContributionMap pruned_contribution = contribution.subset(surviving);

    std::vector<RenderOutput> renders;
    std::vector<std::vector<PatchSpectrumScore>> patches;
    renders.reserve(set.size());
    for (const auto& [camera, _] : set.views) renders.push_back(rasterize(pruned, camera));
    patches.reserve(renders.size());
    for (const RenderOutput& render : renders)
        patches.push_back(select_high_freq_patches(render, config));

    GaussianCloud result = split_in_patches(pruned, renders, patches, pruned_contribution, config);
    report.after_count = static_cast<int>(result.size());
    report.split = report.after_count - (report.before_count - report.removed);

    for (const auto& [camera, _] : set.views) {
        const Image before = rasterize(cloud, camera).image;
        const Image after = rasterize(result, camera).image;
        report.per_view_psnr.push_back(psnr(before, after).db);
    }
    return {std::move(result), std::move(report)};
}

std::string FgdReport::to_json() const {
    nlohmann::json j{{"before_count", before_count},
                     {"removed", removed},
                     {"split", split},
                     {"after_count", after_count},
                     {"per_view_psnr", per_view_psnr}};
    return j.dump(2);
}

std::string to_string(ViewAggregation aggregation) {
    return aggregation == ViewAggregation::Max ? "max" : "sum";
}

ViewAggregation view_aggregation_from_string(const std::string& name) {
    if (name == "max") return ViewAggregation::Max;
    if (name == "sum") return ViewAggregation::Sum;
    throw ValidationError("unknown view aggregation: " + name);
}

} // namespace splatmark
