// SPDX-License-Identifier: Apache-2.0
//
// splatmark: embed, extract and stress-test binary watermarks in Gaussian
// splat scenes.
//
// Subcommands: synth, fgd, embed, render, extract, attack, evaluate, sweep.
// Every subcommand accepts --config <json> whose flat keys mirror the long
// flag names; explicit flags override config values. Exits 0 on success,
// 1 on validation/usage errors, 2 on numeric failure.
#include "splatmark/attacks.hpp"
#include "splatmark/decoder.hpp"
#include "splatmark/errors.hpp"
#include "splatmark/evaluate.hpp"
#include "splatmark/fgd.hpp"
#include "splatmark/finetune.hpp"
#include "splatmark/metrics.hpp"
#include "splatmark/png_io.hpp"
#include "splatmark/renderer.hpp"
#include "splatmark/rng.hpp"
#include "splatmark/scene_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using nlohmann::json;
using namespace splatmark;

// --config <json>: flat object whose keys mirror the long option names.
// Loaded before parsing so explicit flags override it.
json load_config_from_argv(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) throw IoError(std::string("cannot open config: ") + argv[i + 1]);
            try {
                return json::parse(in);
            } catch (const json::parse_error& e) {
                throw ValidationError(std::string("config JSON parse error: ") + e.what());
            }
        }
    }
    return json::object();
}

template <typename T>
void config_default(const json& config, const std::string& key, T& value) {
    if (config.contains(key)) value = config.at(key).get<T>();
}

std::vector<CameraView> cameras_of(const TrainingSet& set) {
    std::vector<CameraView> views;
    views.reserve(set.size());
    for (const auto& [camera, _] : set.views) views.push_back(camera);
    return views;
}

std::string bits_to_string(const std::vector<int>& bits) {
    std::string out;
    out.reserve(bits.size());
    for (int b : bits) out += b ? '1' : '0';
    return out;
}

struct KeyOptions {
    std::uint64_t seed = 7;
    int bits = 32;
    int grid = 8;
    std::string input = "ll2";

    void attach(CLI::App* cmd, const json& config) {
        cmd->add_option("--key-seed", seed, "watermark key seed");
        cmd->add_option("--bits", bits, "message length (32, 48 or 64)");
        cmd->add_option("--decoder-grid", grid, "decoder pooling grid");
        cmd->add_option("--decoder-input", input, "decoder input: ll2 or pixel");
        config_default(config, "key-seed", seed);
        config_default(config, "bits", bits);
        config_default(config, "decoder-grid", grid);
        config_default(config, "decoder-input", input);
    }

    WatermarkKey key() const { return WatermarkKey{seed, bits}; }
    DecoderInput decoder_input() const { return decoder_input_from_string(input); }

    FrozenDecoder decoder_for(int height, int width) const {
        return decoder_input() == DecoderInput::LowLow2
                   ? FrozenDecoder::build(key(), height / 4, width / 4, grid,
                                          DecoderInput::LowLow2)
                   : FrozenDecoder::build(key(), height, width, grid, DecoderInput::Pixel);
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"watermark toolkit for Gaussian splat scenes"};
    app.require_subcommand(1);

    json config;
    try {
        config = load_config_from_argv(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its keys");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a deterministic toy scene");
    std::uint64_t synth_seed = 7;
    int synth_gaussians = 300, synth_views = 8, synth_width = 64, synth_height = 64;
    std::string synth_out = "scene.json";
    synth->add_option("--seed", synth_seed, "scene seed");
    synth->add_option("--gaussians", synth_gaussians, "number of gaussians");
    synth->add_option("--views", synth_views, "number of training views");
    synth->add_option("--width", synth_width, "render width");
    synth->add_option("--height", synth_height, "render height");
    synth->add_option("--out", synth_out, "output scene JSON path");
    config_default(config, "seed", synth_seed);
    config_default(config, "gaussians", synth_gaussians);
    config_default(config, "views", synth_views);
    config_default(config, "width", synth_width);
    config_default(config, "height", synth_height);

    // fgd
    auto* fgd_cmd = app.add_subcommand("fgd", "contribution pruning + high-frequency splitting");
    std::string fgd_scene, fgd_out = "fgd.json";
    FgdConfig fgd_config;
    std::string fgd_aggregation = "max", fgd_reduction = "mean";
    fgd_cmd->add_option("--scene", fgd_scene, "input scene JSON")->required();
    fgd_cmd->add_option("--out", fgd_out, "output scene JSON");
    fgd_cmd->add_option("--prune-threshold", fgd_config.prune_threshold, "contribution floor");
    fgd_cmd->add_option("--patch-size", fgd_config.patch_size, "spectrum patch size, pixels");
    fgd_cmd->add_option("--top-k-percent", fgd_config.top_k_percent, "patch selection percent");
    fgd_cmd->add_option("--split-quantile", fgd_config.split_quantile,
                        "contribution quantile below which tracked gaussians split");
    fgd_cmd->add_option("--split-scale-divisor", fgd_config.split_scale_divisor,
                        "child scale divisor");
    fgd_cmd->add_option("--aggregation", fgd_aggregation, "view aggregation: max or sum");
    fgd_cmd->add_option("--channel-reduction", fgd_reduction,
                        "patch intensity channel reduction: mean or sum");
    config_default(config, "prune-threshold", fgd_config.prune_threshold);
    config_default(config, "patch-size", fgd_config.patch_size);
    config_default(config, "top-k-percent", fgd_config.top_k_percent);
    config_default(config, "split-quantile", fgd_config.split_quantile);
    config_default(config, "split-scale-divisor", fgd_config.split_scale_divisor);
    config_default(config, "aggregation", fgd_aggregation);
    config_default(config, "channel-reduction", fgd_reduction);

    // embed
    auto* embed = app.add_subcommand("embed", "fine-tune the message into a scene");
    std::string embed_scene, embed_out = "watermarked.json", embed_log;
    FinetuneConfig embed_config;
    KeyOptions embed_key;
    embed->add_option("--scene", embed_scene, "input scene JSON (FGD output)")->required();
    embed->add_option("--out", embed_out, "output watermarked scene JSON");
    embed->add_option("--log", embed_log, "training log JSONL path");
    embed->add_option("--epochs", embed_config.epochs, "fine-tuning epochs");
    embed->add_option("--lr-position", embed_config.lr_position, "position learning rate");
    embed->add_option("--lr-color", embed_config.lr_color, "color learning rate");
    embed->add_option("--lr-opacity", embed_config.lr_opacity, "opacity learning rate");
    embed->add_option("--lr-scale", embed_config.lr_scale, "scale learning rate");
    embed->add_option("--lr-rotation", embed_config.lr_rotation, "rotation learning rate");
    embed->add_option("--lambda-rec", embed_config.weights.rec, "reconstruction weight");
    embed->add_option("--lambda-w", embed_config.weights.wavelet, "wavelet-subband weight");
    embed->add_option("--lambda-m", embed_config.weights.message, "message weight");
    embed->add_option("--shuffle-seed", embed_config.shuffle_seed, "view order seed");
    embed->add_option("--mask-beta", embed_config.mask_beta, "gradient mask strength");
    embed_key.attach(embed, config);
    config_default(config, "epochs", embed_config.epochs);
    config_default(config, "lr-position", embed_config.lr_position);
    config_default(config, "lr-color", embed_config.lr_color);
    config_default(config, "lr-opacity", embed_config.lr_opacity);
    config_default(config, "lr-scale", embed_config.lr_scale);
    config_default(config, "lr-rotation", embed_config.lr_rotation);
    config_default(config, "lambda-rec", embed_config.weights.rec);
    config_default(config, "lambda-w", embed_config.weights.wavelet);
    config_default(config, "lambda-m", embed_config.weights.message);
    config_default(config, "shuffle-seed", embed_config.shuffle_seed);
    config_default(config, "mask-beta", embed_config.mask_beta);

    // render
    auto* render_cmd = app.add_subcommand("render", "write per-view PNG renders");
    std::string render_scene, render_outdir = "renders";
    int render_depth = 8;
    render_cmd->add_option("--scene", render_scene, "scene JSON")->required();
    render_cmd->add_option("--outdir", render_outdir, "output directory");
    render_cmd->add_option("--bit-depth", render_depth, "PNG bit depth: 8 or 16");

    // extract
    auto* extract = app.add_subcommand("extract", "read the message back");
    std::string extract_image, extract_scene;
    int extract_view = -1;
    int extract_resize_w = 0, extract_resize_h = 0;
    KeyOptions extract_key;
    extract->add_option("--image", extract_image, "PNG to extract from");
    extract->add_option("--scene", extract_scene, "scene JSON to render and extract from");
    extract->add_option("--view", extract_view, "view index (default: all views)");
    extract->add_option("--resize-width", extract_resize_w,
                        "resize to this width before extraction");
    extract->add_option("--resize-height", extract_resize_h,
                        "resize to this height before extraction");
    extract_key.attach(extract, config);

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "apply a distortion spec");
    std::string attack_spec_json, attack_image_in, attack_image_out, attack_scene_in,
        attack_scene_out;
    attack_cmd->add_option("--spec", attack_spec_json, "AttackSpec JSON")->required();
    attack_cmd->add_option("--image", attack_image_in, "input PNG (image attacks)");
    attack_cmd->add_option("--out-image", attack_image_out, "output PNG");
    attack_cmd->add_option("--scene", attack_scene_in, "input scene JSON (model attacks)");
    attack_cmd->add_option("--out-scene", attack_scene_out, "output scene JSON");

    // evaluate
    auto* evaluate_cmd = app.add_subcommand("evaluate", "full distortion matrix -> report");
    std::string eval_scene, eval_original, eval_out = "report.json";
    std::uint64_t eval_attack_seed = 0;
    KeyOptions eval_key;
    evaluate_cmd->add_option("--scene", eval_scene, "watermarked scene JSON")->required();
    evaluate_cmd->add_option("--original", eval_original, "pre-embedding scene JSON")->required();
    evaluate_cmd->add_option("--out", eval_out, "report JSON path");
    evaluate_cmd->add_option("--attack-seed", eval_attack_seed, "distortion seed");
    eval_key.attach(evaluate_cmd, config);
    config_default(config, "attack-seed", eval_attack_seed);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "bit accuracy across distortion strengths");
    std::string sweep_scene, sweep_type = "gaussian_noise", sweep_out = "sweep.csv",
                sweep_strengths = "0.0,0.05,0.1,0.2";
    std::uint64_t sweep_seed = 0;
    KeyOptions sweep_key;
    sweep_cmd->add_option("--scene", sweep_scene, "watermarked scene JSON")->required();
    sweep_cmd->add_option("--type", sweep_type, "attack kind to sweep");
    sweep_cmd->add_option("--strengths", sweep_strengths, "comma-separated strengths");
    sweep_cmd->add_option("--out", sweep_out, "CSV output path");
    sweep_cmd->add_option("--attack-seed", sweep_seed, "distortion seed");
    sweep_key.attach(sweep_cmd, config);
    config_default(config, "type", sweep_type);
    config_default(config, "strengths", sweep_strengths);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*synth) {
            auto [cloud, set] =
                synthesize_toy_scene(synth_seed, synth_gaussians, synth_views, synth_width,
                                     synth_height);
            save_scene(cloud, set, synth_out);
            std::cout << "wrote " << synth_out << " (" << cloud.size() << " gaussians, "
                      << set.size() << " views)\n";
        } else if (*fgd_cmd) {
            fgd_config.aggregation = view_aggregation_from_string(fgd_aggregation);
            fgd_config.channel_reduction = fgd_reduction == "sum" ? ChannelReduction::Sum
                                                                  : ChannelReduction::Mean;
            auto [cloud, set] = load_scene(fgd_scene);
            auto [result, report] = run_fgd(cloud, set, fgd_config);
            save_scene(result, set, fgd_out);
            const std::filesystem::path report_path =
                std::filesystem::path(fgd_out).replace_extension(".fgd_report.json");
            write_file_atomic(report_path, report.to_json() + "\n");
            std::cout << "fgd: " << report.before_count << " -> " << report.after_count
                      << " gaussians (removed " << report.removed << ", split " << report.split
                      << ")\nwrote " << fgd_out << " and " << report_path.string() << "\n";
        } else if (*embed) {
            auto [cloud, set] = load_scene(embed_scene);
            embed_config.key = embed_key.key();
            embed_config.decoder_grid = embed_key.grid;
            embed_config.decoder_input = embed_key.decoder_input();
            auto [tuned, log] = finetune(cloud, set, embed_config);
            save_scene(tuned, set, embed_out);
            const std::string log_path =
                embed_log.empty()
                    ? std::filesystem::path(embed_out).replace_extension(".train.jsonl").string()
                    : embed_log;
            write_file_atomic(log_path, log.to_jsonl());
            const EpochRecord& last = log.epochs.back();
            std::cout << "embedded " << embed_config.key.n_bits << " bits in " << log.epochs.size()
                      << " epochs: bit_accuracy " << last.bit_accuracy << ", psnr "
                      << last.psnr_vs_original << " dB\nwrote " << embed_out << " and " << log_path
                      << "\n";
        } else if (*render_cmd) {
            auto [cloud, set] = load_scene(render_scene);
            std::filesystem::create_directories(render_outdir);
            for (std::size_t v = 0; v < set.size(); ++v) {
                char name[64];
                std::snprintf(name, sizeof(name), "view_%03zu.png", v);
                write_png(rasterize(cloud, set.views[v].first).image,
                          std::filesystem::path(render_outdir) / name, render_depth);
            }
            std::cout << "wrote " << set.size() << " renders to " << render_outdir << "\n";
        } else if (*extract) {
            const auto report_one = [&](const Image& image, const std::string& label) {
                Image input = image;
                if (extract_resize_w > 0 && extract_resize_h > 0)
                    input = resize_bilinear(image, extract_resize_h, extract_resize_w);
                const FrozenDecoder decoder =
                    extract_key.decoder_for(input.height(), input.width());
                const auto bits = decoder.extract_bits(input);
                const double accuracy = bit_accuracy(bits, extract_key.key().message());
                std::cout << label << " bits " << bits_to_string(bits) << " accuracy " << accuracy
                          << "\n";
                return accuracy;
            };
            if (!extract_image.empty()) {
                report_one(read_png(extract_image), extract_image);
            } else if (!extract_scene.empty()) {
                auto [cloud, set] = load_scene(extract_scene);
                double total = 0.0;
                int counted = 0;
                for (std::size_t v = 0; v < set.size(); ++v) {
                    if (extract_view >= 0 && static_cast<int>(v) != extract_view) continue;
                    total += report_one(rasterize(cloud, set.views[v].first).image,
                                        "view " + std::to_string(v));
                    ++counted;
                }
                if (counted == 0) throw ValidationError("extract: no such view index");
                std::cout << "mean accuracy " << total / counted << "\n";
            } else {
                throw ValidationError("extract: needs --image or --scene");
            }
        } else if (*attack_cmd) {
            const AttackSpec spec = AttackSpec::from_json(attack_spec_json);
            if (!attack_image_in.empty()) {
                if (attack_image_out.empty())
                    throw ValidationError("attack: --out-image required with --image");
                write_png(attack_image(read_png(attack_image_in), spec), attack_image_out);
                std::cout << "wrote " << attack_image_out << "\n";
            } else if (!attack_scene_in.empty()) {
                if (attack_scene_out.empty())
                    throw ValidationError("attack: --out-scene required with --scene");
                auto [cloud, set] = load_scene(attack_scene_in);
                save_scene(attack_model(cloud, spec), set, attack_scene_out);
                std::cout << "wrote " << attack_scene_out << "\n";
            } else {
                throw ValidationError("attack: needs --image or --scene");
            }
        } else if (*evaluate_cmd) {
            auto [watermarked, set] = load_scene(eval_scene);
            auto [original, original_set] = load_scene(eval_original);
            EvaluateConfig eval_config;
            eval_config.key = eval_key.key();
            eval_config.decoder_grid = eval_key.grid;
            eval_config.decoder_input = eval_key.decoder_input();
            eval_config.attack_seed = eval_attack_seed;
            const json snapshot{{"scene", eval_scene},
                                {"original", eval_original},
                                {"key-seed", eval_key.seed},
                                {"bits", eval_key.bits},
                                {"decoder-grid", eval_key.grid},
                                {"decoder-input", eval_key.input},
                                {"attack-seed", eval_attack_seed}};
            eval_config.config_snapshot = snapshot.dump();
            const EvalReport report = evaluate(watermarked, original, cameras_of(set), eval_config);
            write_file_atomic(eval_out, report.to_json() + "\n");
            std::cout << "bit_accuracy " << report.bit_accuracy << " psnr " << report.psnr
                      << " ssim " << report.ssim << "\n";
            for (const EvalRow& row : report.rows)
                std::cout << "  " << row.name << ": " << row.bit_accuracy << "\n";
            std::cout << "wrote " << eval_out << "\n";
        } else if (*sweep_cmd) {
            auto [cloud, set] = load_scene(sweep_scene);
            const int height = set.views.front().first.height;
            const int width = set.views.front().first.width;
            const FrozenDecoder decoder = sweep_key.decoder_for(height, width);
            const auto message = sweep_key.key().message();

            std::vector<Image> renders;
            for (const auto& [camera, _] : set.views)
                renders.push_back(rasterize(cloud, camera).image);

            AttackSpec spec_template;
            spec_template.kind = attack_kind_from_string(sweep_type);
            spec_template.seed = sweep_seed;

            std::vector<double> strengths;
            std::stringstream stream(sweep_strengths);
            std::string token;
            while (std::getline(stream, token, ',')) strengths.push_back(std::stod(token));

            const auto eval_point = [&](const AttackSpec& spec) {
                double acc = 0.0, quality = 0.0;
                for (std::size_t v = 0; v < renders.size(); ++v) {
                    AttackSpec seeded = spec;
                    seeded.seed = mix_seed(spec.seed, v + 1);
                    Image attacked;
                    if (seeded.is_model_attack()) {
                        attacked =
                            rasterize(attack_model(cloud, seeded), set.views[v].first).image;
                    } else {
                        attacked = attack_image(renders[v], seeded);
                        if (attacked.height() != height || attacked.width() != width)
                            attacked = resize_bilinear(attacked, height, width);
                    }
                    acc += bit_accuracy(decoder.extract_bits(attacked), message);
                    quality += psnr(attacked, renders[v]).db;
                }
                return std::make_pair(acc / renders.size(), quality / renders.size());
            };

            const auto curve = sweep(spec_template, strengths, eval_point);
            std::ostringstream csv;
            csv << "strength,bit_accuracy,psnr\n";
            for (const SweepPoint& p : curve) {
                char line[96];
                std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", p.strength,
                              p.bit_accuracy, p.psnr);
                csv << line;
            }
            write_file_atomic(sweep_out, csv.str());
            for (const SweepPoint& p : curve)
                std::cout << p.strength << " -> " << p.bit_accuracy << "\n";
            std::cout << "wrote " << sweep_out << "\n";
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
