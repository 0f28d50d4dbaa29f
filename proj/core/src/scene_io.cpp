// SPDX-License-Identifier: Apache-2.0
#include "splatmark/scene_io.hpp"

#include "splatmark/errors.hpp"
#include "splatmark/png_io.hpp"
#include "splatmark/renderer.hpp"
#include "splatmark/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace splatmark {

namespace {

using nlohmann::json;

double number_field(const json& obj, const std::string& field, const std::string& where) {
    if (!obj.contains(field))
        throw ValidationError("scene: missing field '" + field + "' in " + where);
    const json& v = obj.at(field);
    if (!v.is_number())
        throw ValidationError("scene: field '" + field + "' in " + where + " must be a number");
    return v.get<double>();
}

template <int N>
Eigen::Matrix<double, N, 1> vector_field(const json& obj, const std::string& field,
                                         const std::string& where) {
    if (!obj.contains(field))
        throw ValidationError("scene: missing field '" + field + "' in " + where);
    const json& v = obj.at(field);
    if (!v.is_array() || v.size() != N)
        throw ValidationError("scene: field '" + field + "' in " + where + " must be an array of " +
                              std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
        if (!v[i].is_number())
            throw ValidationError("scene: field '" + field + "' in " + where +
                                  " must contain only numbers");
        out[i] = v[i].get<double>();
    }
    return out;
}

// 17 significant digits: enough for an exact double round trip.
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_vec(const double* v, int n) {
    std::string out = "[";
    for (int i = 0; i < n; ++i) {
        if (i) out += ", ";
        out += fmt(v[i]);
    }
    return out + "]";
}

} // namespace

std::pair<GaussianCloud, TrainingSet> load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scene file: " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("scene: JSON parse error in " + path.string() + ": " + e.what());
    }
    if (!root.is_object() || !root.contains("gaussians") || !root.contains("views"))
        throw ValidationError("scene: top level must be an object with 'gaussians' and 'views'");
    const json& gaussians = root.at("gaussians");
    const json& views = root.at("views");
    if (!gaussians.is_array())
        throw ValidationError("scene: field 'gaussians' must be an array");
    if (!views.is_array())
        throw ValidationError("scene: field 'views' must be an array");

    GaussianCloud cloud;
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        const std::string where = "gaussians[" + std::to_string(i) + "]";
        const json& g = gaussians[i];
        if (!g.is_object()) throw ValidationError("scene: " + where + " must be an object");
        cloud.positions.push_back(vector_field<3>(g, "mu", where));
        cloud.rotations.push_back(vector_field<4>(g, "rot", where));
        cloud.log_scales.push_back(vector_field<3>(g, "log_scale", where));
        cloud.opacity_logits.push_back(number_field(g, "opacity_logit", where));
        cloud.colors.push_back(vector_field<3>(g, "rgb", where));
    }

    TrainingSet set;
    const std::filesystem::path base = path.parent_path();
    for (std::size_t i = 0; i < views.size(); ++i) {
        const std::string where = "views[" + std::to_string(i) + "]";
        const json& v = views[i];
        if (!v.is_object()) throw ValidationError("scene: " + where + " must be an object");

        CameraView camera;
        const Eigen::Matrix<double, 9, 1> r = vector_field<9>(v, "R", where);
        camera.rotation << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
        camera.translation = vector_field<3>(v, "t", where);
        camera.fx = number_field(v, "fx", where);
        camera.fy = number_field(v, "fy", where);
        camera.cx = number_field(v, "cx", where);
        camera.cy = number_field(v, "cy", where);
        camera.width = static_cast<int>(number_field(v, "width", where));
        camera.height = static_cast<int>(number_field(v, "height", where));

        if (!v.contains("image") || !v.at("image").is_string())
            throw ValidationError("scene: field 'image' in " + where + " must be a path string");
        std::filesystem::path image_path = v.at("image").get<std::string>();
        if (image_path.is_relative()) image_path = base / image_path;
        set.views.emplace_back(camera, read_png(image_path));
    }

    cloud.validate();
    set.validate();
    return {std::move(cloud), std::move(set)};
}

void save_scene(const GaussianCloud& cloud, const TrainingSet& set,
                const std::filesystem::path& path) {
    cloud.validate();
    set.validate();

    const std::string stem = path.stem().string();
    const std::filesystem::path image_dir = path.parent_path() / (stem + "_images");
    std::error_code ec;
    std::filesystem::create_directories(image_dir.empty() ? "." : image_dir, ec);
    if (ec) throw IoError("cannot create " + image_dir.string() + ": " + ec.message());

    std::ostringstream out;
    out << "{\n  \"gaussians\": [\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        out << "    {\"mu\": " << fmt_vec(cloud.positions[i].data(), 3)
            << ", \"rot\": " << fmt_vec(cloud.rotations[i].data(), 4)
            << ", \"log_scale\": " << fmt_vec(cloud.log_scales[i].data(), 3)
            << ", \"opacity_logit\": " << fmt(cloud.opacity_logits[i])
            << ", \"rgb\": " << fmt_vec(cloud.colors[i].data(), 3) << "}"
            << (i + 1 < cloud.size() ? "," : "") << "\n";
    }
    out << "  ],\n  \"views\": [\n";
    for (std::size_t i = 0; i < set.views.size(); ++i) {
        const CameraView& cam = set.views[i].first;
        char name[64];
        std::snprintf(name, sizeof(name), "view_%03zu.png", i);
        write_png(set.views[i].second, image_dir / name, 16);

        // Row-major rotation.
        double r[9];
        for (int row = 0; row < 3; ++row)
            for (int col = 0; col < 3; ++col) r[row * 3 + col] = cam.rotation(row, col);
        out << "    {\"R\": " << fmt_vec(r, 9) << ", \"t\": " << fmt_vec(cam.translation.data(), 3)
            << ", \"fx\": " << fmt(cam.fx) << ", \"fy\": " << fmt(cam.fy)
            << ", \"cx\": " << fmt(cam.cx) << ", \"cy\": " << fmt(cam.cy)
            << ", \"width\": " << cam.width << ", \"height\": " << cam.height << ", \"image\": \""
            << (stem + "_images/") << name << "\"}" << (i + 1 < set.views.size() ? "," : "")
            << "\n";
    }
    out << "  ]\n}\n";
    write_file_atomic(path, out.str());
}

namespace {

Eigen::Vector4d random_unit_quaternion(RandomStream& rng) {
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    return q / q.norm();
}

CameraView orbit_camera(double angle, double eye_height, double radius, double focal_scale,
                        int width, int height) {
    const Eigen::Vector3d eye(radius * std::sin(angle), eye_height, radius * std::cos(angle));
    const Eigen::Vector3d forward = (-eye).normalized(); // toward the origin
    const Eigen::Vector3d up(0.0, 1.0, 0.0);
    const Eigen::Vector3d right = up.cross(forward).normalized();
    const Eigen::Vector3d down = forward.cross(right);

    CameraView camera;
    camera.rotation.row(0) = right;
    camera.rotation.row(1) = down;
    camera.rotation.row(2) = forward;
    camera.translation = -camera.rotation * eye;
    camera.fx = camera.fy = focal_scale * std::max(width, height);
    camera.cx = 0.5 * (width - 1);
    camera.cy = 0.5 * (height - 1);
    camera.width = width;
    camera.height = height;
    return camera;
}

} // namespace

std::pair<GaussianCloud, TrainingSet> synthesize_toy_scene(std::uint64_t seed, int n_gaussians,
                                                           int n_views, int width, int height) {
    if (n_gaussians < 1) throw ValidationError("synthesize_toy_scene: n_gaussians must be >= 1");
    if (n_views < 1) throw ValidationError("synthesize_toy_scene: n_views must be >= 1");
    if (width < 16 || height < 16 || width % 4 != 0 || height % 4 != 0)
        throw ValidationError("synthesize_toy_scene: resolution must be >= 16 and divisible by 4");

    RandomStream rng(mix_seed(seed, 0));

    // Mixture: blob Gaussians carry the scene, backdrops tint whole regions
    // of the frame, floaters sit far below every camera frustum, ghosts are
    // in view but nearly transparent. Floaters and ghosts model the
    // redundancy of a fully trained splat model and give contribution
    // pruning something real to remove.
    const int n_floaters = n_gaussians >= 20 ? n_gaussians / 5 : 0;
    const int n_ghosts = n_gaussians >= 20 ? (n_gaussians * 3) / 25 : 0;
    const int n_backdrop = n_gaussians >= 20 ? n_gaussians / 12 : 0;
    const int n_core = n_gaussians - n_floaters - n_ghosts - n_backdrop;

    GaussianCloud cloud;
    auto add_gaussian = [&](const Eigen::Vector3d& mu, double scale_lo, double scale_hi,
                            double opacity_lo, double opacity_hi) {
        cloud.positions.push_back(mu);
        cloud.rotations.push_back(random_unit_quaternion(rng));
        Eigen::Vector3d ls;
        for (int a = 0; a < 3; ++a) ls[a] = std::log(rng.uniform(scale_lo, scale_hi));
        cloud.log_scales.push_back(ls);
        cloud.opacity_logits.push_back(logit(rng.uniform(opacity_lo, opacity_hi)));
        cloud.colors.push_back(Eigen::Vector3d(rng.uniform(0.1, 0.75), rng.uniform(0.1, 0.75),
                                               rng.uniform(0.1, 0.75)));
    };
    auto ball_point = [&](double radius) {
        Eigen::Vector3d dir(rng.normal(), rng.normal(), rng.normal());
        dir.normalize();
        return (radius * std::cbrt(rng.uniform()) * dir).eval();
    };

    for (int i = 0; i < n_core; ++i) add_gaussian(ball_point(1.0), 0.03, 0.16, 0.25, 0.9);
    for (int i = 0; i < n_backdrop; ++i) {
        Eigen::Vector3d p = ball_point(1.0);
        p *= 1.6 / std::max(0.3, p.norm());
        add_gaussian(p, 0.35, 0.8, 0.06, 0.2);
    }
    for (int i = 0; i < n_floaters; ++i) {
        // Far below the orbit plane: outside every camera's field of view.
        const Eigen::Vector3d p(rng.uniform(-2.0, 2.0), rng.uniform(-30.0, -20.0),
                                rng.uniform(-2.0, 2.0));
        add_gaussian(p, 0.05, 0.2, 0.3, 0.8);
    }
    for (int i = 0; i < n_ghosts; ++i) {
        add_gaussian(ball_point(1.0), 0.02, 0.1, 0.4, 0.6);
        cloud.opacity_logits.back() = rng.uniform(-14.0, -11.0); // nearly transparent
    }

    TrainingSet set;
    for (int v = 0; v < n_views; ++v) {
        const double angle =
            2.0 * std::numbers::pi * v / n_views + rng.uniform(-0.05, 0.05);
        const double eye_height = rng.uniform(0.6, 1.4);
        set.views.emplace_back(orbit_camera(angle, eye_height, 4.0, 1.8, width, height), Image());
    }
    for (auto& [camera, image] : set.views)
        image = rasterize(cloud, camera).image;

    cloud.validate();
    set.validate();
    return {std::move(cloud), std::move(set)};
}

} // namespace splatmark
