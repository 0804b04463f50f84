// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#include "skinpol/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "skinpol/manifest.hpp"
#include "skinpol/pfm.hpp"

namespace skinpol::scene {

namespace fs = std::filesystem;
using nlohmann::json;

HeightGradient height_gradient(const Texture &H) {
    HeightGradient g;
    g.du = Texture(H.width, H.height);
    g.dv = Texture(H.width, H.height);
    for (int y = 0; y < H.height; ++y)
        for (int x = 0; x < H.width; ++x) {
            if (x == 0)
                g.du.at(x, y) = H.at(1, y) - H.at(0, y);
            else if (x == H.width - 1)
                g.du.at(x, y) = H.at(x, y) - H.at(x - 1, y);
            else
                g.du.at(x, y) = 0.5 * (H.at(x + 1, y) - H.at(x - 1, y));
            if (y == 0)
                g.dv.at(x, y) = H.at(x, 1) - H.at(x, 0);
            else if (y == H.height - 1)
                g.dv.at(x, y) = H.at(x, y) - H.at(x, y - 1);
            else
                g.dv.at(x, y) = 0.5 * (H.at(x, y + 1) - H.at(x, y - 1));
        }
    return g;
}

std::vector<Vec3> normals_from_height(const HeightField &hf) {
    const HeightGradient g = height_gradient(hf.H);
    std::vector<Vec3> normals(hf.H.size());
    for (int y = 0; y < hf.H.height; ++y)
        for (int x = 0; x < hf.H.width; ++x)
            normals[static_cast<size_t>(y) * hf.H.width + x] =
                normal_from_gradient(hf, g.du.at(x, y), g.dv.at(x, y));
    return normals;
}

double shading_term(const Vec3 &n, const Vec3 &wi, double gamma_m) {
    if (gamma_m <= 0.0) throw std::invalid_argument("shading_term: distance must be positive");
    return std::max(0.0, dot(n, wi)) / (gamma_m * gamma_m);
}

SceneConfig SceneConfig::defaults() {
    SceneConfig s;
    s.response = spectral::ResponseMatrix::synthetic_default(s.grid);
    return s;
}

Vec3 SceneConfig::light_pos_mm() const {
    const double a = light_offset_deg * M_PI / 180.0;
    const double g = camera_distance_m * 1000.0;
    return {0.0, g * std::sin(a), g * std::cos(a)};
}

Vec3 rotate_pose(const ViewPose &pose, const Vec3 &v) {
    const double ay = pose.angle_deg * M_PI / 180.0;
    const double ax = pose.tilt_deg * M_PI / 180.0;
    // rotate about y, then about x
    const Vec3 r1{v.x * std::cos(ay) + v.z * std::sin(ay), v.y,
                  -v.x * std::sin(ay) + v.z * std::cos(ay)};
    return {r1.x, r1.y * std::cos(ax) - r1.z * std::sin(ax),
            r1.y * std::sin(ax) + r1.z * std::cos(ax)};
}

TexelFrame texel_frame(const SceneConfig &scene, const ViewPose &pose, int x, int y) {
    const double half = 0.5 * (scene.patch_texels - 1);
    const Vec3 local{(x - half) * scene.texel_pitch_mm, (y - half) * scene.texel_pitch_mm, 0.0};
    TexelFrame tf;
    tf.position = rotate_pose(pose, local);
    const Vec3 to_light = scene.light_pos_mm() - tf.position;
    const Vec3 to_cam = scene.camera_pos_mm() - tf.position;
    tf.gamma_m = norm(to_light) / 1000.0;
    tf.wi = normalize(to_light);
    tf.wo = normalize(to_cam);
    return tf;
}

namespace {

constexpr double kVisibilityCos = 1e-6;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double uniform01(std::uint64_t key) {
    return (static_cast<double>(splitmix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

// Deterministic texel-indexed Gaussian noise (Box-Muller on hashed keys).
double gaussian_noise(std::uint64_t seed, int view, int analyzer, int channel, int texel) {
    const std::uint64_t base =
        splitmix64(seed ^ splitmix64((std::uint64_t(view) << 40) ^
                                     (std::uint64_t(analyzer) << 32) ^
                                     (std::uint64_t(channel) << 24) ^ std::uint64_t(texel)));
    const double u1 = uniform01(base);
    const double u2 = uniform01(base ^ 0x5851f42d4c957f2dull);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct ShapeInfo {
    diffusion::GaussianMixture shape;  // unit weight sum
    int kernel_radius_texels = 0;
    // normalized discrete 2D kernel (separable per ladder variance), so the
    // explicit spatial sum distributes exactly the same mass as the
    // separable blur used to derive the totals
    std::vector<double> kernel;  // (2R+1)^2 row-major

    void build_kernel(double pitch) {
        const auto ladder = diffusion::variance_ladder();
        const int R = kernel_radius_texels;
        const int w = 2 * R + 1;
        kernel.assign(static_cast<size_t>(w) * w, 0.0);
        for (int j = 0; j < diffusion::kLadder; ++j) {
            if (shape.weights[j] == 0.0) continue;
            std::vector<double> taps(w);
            double sum = 0.0;
            for (int i = -R; i <= R; ++i) {
                taps[i + R] = std::exp(-(i * pitch) * (i * pitch) / (2.0 * ladder[j]));
                sum += taps[i + R];
            }
            for (double &t : taps) t /= sum;
            for (int dy = -R; dy <= R; ++dy)
                for (int dx = -R; dx <= R; ++dx)
                    kernel[static_cast<size_t>(dy + R) * w + (dx + R)] +=
                        shape.weights[j] * taps[dx + R] * taps[dy + R];
        }
    }
    double kernel_at(int dx, int dy) const {
        const int R = kernel_radius_texels;
        return kernel[static_cast<size_t>(dy + R) * (2 * R + 1) + (dx + R)];
    }
};

ShapeInfo default_shape(double pitch) {
    ShapeInfo s;
    s.shape.weights[2] = 1.0;  // sigma = 0.04 mm, effectively sub-texel
    const auto ladder = diffusion::variance_ladder();
    s.kernel_radius_texels =
        std::max(1, static_cast<int>(std::ceil(4.0 * std::sqrt(ladder[2]) / pitch)));
    return s;
}

bool has_bio(const ParameterMaps &p) {
    auto any = [](const Texture &t) {
        return std::any_of(t.data.begin(), t.data.end(), [](double v) { return v > 0.0; });
    };
    return any(p.C_m) || any(p.C_h_out) || any(p.C_h_in);
}

}  // namespace

PolarimetricFrame render_frame(const SceneConfig &scene, const ViewPose &pose,
                               const ParameterMaps &params, RenderMode mode) {
    const int n = scene.patch_texels;
    if (params.width() != n || params.height() != n)
        throw std::invalid_argument("render_frame: parameter maps do not match the patch size");
    if (mode == RenderMode::Simplified &&
        scene.light_offset_deg > scene.coaxial_threshold_deg)
        throw std::invalid_argument("render_frame: scene is not coaxial enough for simplified mode");

    HeightField hf;
    hf.H = params.H;
    hf.texel_pitch = scene.texel_pitch_mm;
    hf.s_u = hf.s_v = scene.texel_pitch_mm;
    const HeightGradient grad = height_gradient(params.H);
    const Vec3 up{0, 1, 0};

    PolarimetricFrame frame;
    frame.V = Texture(n, n);
    for (int c = 0; c < spectral::kChannels; ++c) {
        frame.I0.emplace_back(n, n);
        frame.I45.emplace_back(n, n);
        frame.I90.emplace_back(n, n);
        frame.I135.emplace_back(n, n);
    }

    // Per-texel world geometry and shading normals.
    std::vector<TexelFrame> frames(static_cast<size_t>(n) * n);
    std::vector<Vec3> normals(frames.size());
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const size_t i = static_cast<size_t>(y) * n + x;
            frames[i] = texel_frame(scene, pose, x, y);
            normals[i] = rotate_pose(pose, normal_from_gradient(hf, grad.du.at(x, y), grad.dv.at(x, y)));
        }

    ShapeInfo shape;
    if (mode == RenderMode::Full) {
        shape = default_shape(scene.texel_pitch_mm);
        if (has_bio(params)) {
            // Profile shape from the biophysical maps, fit at the median
            // total-reflectance texel with the layers combined.
            const auto spectra = spectral::ChromophoreSpectra::load(
                spectral::ChromophoreSpectra::default_path(), scene.grid);
            std::vector<std::pair<double, size_t>> intensity(frames.size());
            std::vector<spectral::TwoLayerOptics> optics(frames.size());
            for (size_t i = 0; i < frames.size(); ++i) {
                const auto bio = params.bio(static_cast<int>(i) % n, static_cast<int>(i) / n);
                optics[i] = spectral::two_layer_optics(bio, spectra, scene.grid,
                                                       scene.outer_thickness_mm,
                                                       params.eta.data[i]);
                double mean = 0.0;
                for (int b = 0; b < spectral::kBands; ++b) {
                    const auto cfg = diffusion::multipole_config(optics[i].outer.band(b),
                                                                 scene.pole_order);
                    mean += diffusion::total_reflectance(cfg);
                }
                intensity[i] = {mean / spectral::kBands, i};
            }
            std::nth_element(intensity.begin(), intensity.begin() + (intensity.size() - 1) / 2,
                             intensity.end());
            const size_t med = intensity[(intensity.size() - 1) / 2].second;
            // combined mixture averaged over bands, normalized
            diffusion::LayerProfileSet set;
            diffusion::GaussianMixture sum{};
            for (int b = 0; b < spectral::kBands; ++b) {
                const auto outer = optics[med].outer.band(b);
                const auto inner = optics[med].inner.band(b);
                const auto cfg_f = diffusion::multipole_config(outer, scene.pole_order);
                const auto cfg_b = diffusion::swap_boundaries(cfg_f);
                set.R_out_f = diffusion::fit_gaussian_mixture(diffusion::sample_profile(cfg_f, false)).mixture;
                set.T_out_f = diffusion::fit_gaussian_mixture(diffusion::sample_profile(cfg_f, true)).mixture;
                set.R_out_b = diffusion::fit_gaussian_mixture(diffusion::sample_profile(cfg_b, false)).mixture;
                set.T_out_b = diffusion::fit_gaussian_mixture(diffusion::sample_profile(cfg_b, true)).mixture;
                set.R_in_f = diffusion::fit_gaussian_mixture(
                                 diffusion::inner_reflectance_profile(
                                     inner, diffusion::Boundary::index_matched())).mixture;
                const auto combined = diffusion::combine_layers(set).mixture;
                for (int j = 0; j < diffusion::kLadder; ++j) sum.weights[j] += combined.weights[j];
            }
            shape.shape = sum.normalized();
            const auto ladder = diffusion::variance_ladder();
            int jmax = 0;
            const double wmax = *std::max_element(shape.shape.weights.begin(), shape.shape.weights.end(),
                                                  [](double a, double b) { return std::abs(a) < std::abs(b); });
            for (int j = 0; j < diffusion::kLadder; ++j)
                if (std::abs(shape.shape.weights[j]) > 1e-6 * std::abs(wmax)) jmax = j;
            shape.kernel_radius_texels = std::max(
                1, static_cast<int>(std::ceil(4.0 * std::sqrt(ladder[jmax]) / scene.texel_pitch_mm)));
        }
        shape.kernel_radius_texels = std::min(shape.kernel_radius_texels, n - 1);
        shape.build_kernel(scene.texel_pitch_mm);
    }

    const polar::StokesVector s_in{1.0, 1.0, 0.0, 0.0};
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const size_t i = static_cast<size_t>(y) * n + x;
            const TexelFrame &tf = frames[i];
            const Vec3 &nrm = normals[i];
            const double cos_i = dot(nrm, tf.wi);
            const double cos_o = dot(nrm, tf.wo);
            if (cos_i <= kVisibilityCos || cos_o <= kVisibilityCos) continue;
            frame.V.at(x, y) = 1.0;

            const auto geom = pbssrdf::make_geometry<double>(nrm, tf.wi, tf.wo, up);
            const double S = scene.light_power * shading_term(nrm, tf.wi, tf.gamma_m);
            const pbssrdf::TexelAppearance tex = params.texel(x, y);

            for (int c = 0; c < spectral::kChannels; ++c) {
                polar::StokesVector so{};
                if (mode == RenderMode::Simplified) {
                    const auto M = pbssrdf::simplified_coaxial_mueller(
                        geom, tex, c, tex.rho_sss_bar[c],
                        scene.coaxial_threshold_deg * M_PI / 180.0);
                    so = M * s_in;
                    so.s0 *= S;
                    so.s1 *= S;
                    so.s2 *= S;
                    so.s3 *= S;
                } else {
                    const auto Ms = pbssrdf::specular_mueller(geom, tex, c) +
                                    pbssrdf::single_scatter_mueller(geom, tex, c);
                    so = Ms * s_in;
                    so.s0 *= S;
                    so.s1 *= S;
                    so.s2 *= S;
                    so.s3 *= S;
                    // explicit spatial sum of the subsurface term
                    const int R = shape.kernel_radius_texels;
                    for (int dy = -R; dy <= R; ++dy)
                        for (int dx = -R; dx <= R; ++dx) {
                            const int xi = std::clamp(x + dx, 0, n - 1);
                            const int yi = std::clamp(y + dy, 0, n - 1);
                            const size_t ii = static_cast<size_t>(yi) * n + xi;
                            const Vec3 &ni = normals[ii];
                            const double ci = dot(ni, frames[ii].wi);
                            const double co_i = dot(ni, frames[ii].wo);
                            if (ci <= kVisibilityCos || co_i <= kVisibilityCos) continue;
                            const double w = shape.kernel_at(dx, dy);
                            if (w == 0.0) continue;
                            const auto gi = pbssrdf::make_geometry<double>(ni, frames[ii].wi,
                                                                           frames[ii].wo, up);
                            const double Si = scene.light_power *
                                              shading_term(ni, frames[ii].wi, frames[ii].gamma_m);
                            const auto Ps = pbssrdf::sss_mueller(
                                gi, geom, params.eta.at(xi, yi), tex.eta,
                                tex.rho_sss_bar[c] * w);
                            const auto contrib = Ps * s_in;
                            so.s0 += Si * contrib.s0;
                            so.s1 += Si * contrib.s1;
                            so.s2 += Si * contrib.s2;
                            so.s3 += Si * contrib.s3;
                        }
                }
                frame.I0[c].at(x, y) = 0.5 * (so.s0 + so.s1);
                frame.I90[c].at(x, y) = 0.5 * (so.s0 - so.s1);
                frame.I45[c].at(x, y) = 0.5 * (so.s0 + so.s2);
                frame.I135[c].at(x, y) = 0.5 * (so.s0 - so.s2);
            }
        }

    if (scene.noise_sigma > 0.0) {
        double peak = 0.0;
        for (const auto *mc : {&frame.I0, &frame.I45, &frame.I90, &frame.I135})
            for (const Texture &t : *mc)
                for (double v : t.data) peak = std::max(peak, v);
        const double sigma = scene.noise_sigma * peak;
        int analyzer = 0;
        for (auto *mc : {&frame.I0, &frame.I45, &frame.I90, &frame.I135}) {
            for (int c = 0; c < spectral::kChannels; ++c) {
                Texture &t = (*mc)[c];
                for (size_t i = 0; i < t.data.size(); ++i)
                    t.data[i] = std::max(
                        0.0, t.data[i] + sigma * gaussian_noise(scene.seed, pose.index,
                                                                analyzer, c, static_cast<int>(i)));
            }
            ++analyzer;
        }
    }
    return frame;
}

ObservationSet extract_observations(const PolarimetricFrame &frame) {
    ObservationSet obs;
    for (int c = 0; c < spectral::kChannels; ++c) {
        Texture sss = frame.I90[c];
        sss *= 2.0;
        obs.I_sss.push_back(std::move(sss));

        Texture zeta(frame.I135[c].width, frame.I135[c].height);
        Texture spec(zeta.width, zeta.height);
        for (size_t i = 0; i < zeta.data.size(); ++i) {
            zeta.data[i] = frame.I135[c].data[i] - frame.I45[c].data[i];
            spec.data[i] = frame.I0[c].data[i] - frame.I90[c].data[i];
        }
        obs.I_zeta.push_back(std::move(zeta));
        obs.I_s.push_back(std::move(spec));
    }
    return obs;
}

// derive_rho_sss_bar is implemented in inverse_bio.cpp on top of the
// differentiable biophysical forward model, so the synthesis and the
// inverse stage share one render path.

Dataset synth_views(const SceneConfig &scene, const ParameterMaps &ground_truth,
                    RenderMode mode) {
    if (scene.views.empty()) throw std::invalid_argument("synth_views: view count must be >= 1");
    Dataset ds;
    ds.scene = scene;
    for (size_t v = 0; v < scene.views.size(); ++v) {
        ViewPose pose = scene.views[v];
        pose.index = static_cast<int>(v);
        ds.frames.push_back(render_frame(scene, pose, ground_truth, mode));
        ds.observations.push_back(extract_observations(ds.frames.back()));
    }
    return ds;
}

namespace {

json scene_to_json(const SceneConfig &s) {
    json j;
    j["schema_version"] = 1;
    j["patch_texels"] = s.patch_texels;
    j["texel_pitch_mm"] = s.texel_pitch_mm;
    j["camera_distance_m"] = s.camera_distance_m;
    j["light_offset_deg"] = s.light_offset_deg;
    j["light_power"] = s.light_power;
    j["noise_sigma"] = s.noise_sigma;
    j["coaxial_threshold_deg"] = s.coaxial_threshold_deg;
    j["outer_thickness_mm"] = s.outer_thickness_mm;
    j["pole_order"] = s.pole_order;
    j["seed"] = s.seed;
    json views = json::array();
    for (const auto &v : s.views) views.push_back({{"angle_deg", v.angle_deg}, {"tilt_deg", v.tilt_deg}});
    j["views"] = views;
    j["spectral"] = {{"lo_nm", s.grid.lo_nm}, {"hi_nm", s.grid.hi_nm}};
    json resp = json::array();
    for (const auto &row : s.response.rows) resp.push_back(row);
    j["response"] = resp;
    return j;
}

SceneConfig scene_from_json(const json &j) {
    io::reject_unknown_keys(j,
                            {"schema_version", "patch_texels", "texel_pitch_mm",
                             "camera_distance_m", "light_offset_deg", "light_power",
                             "noise_sigma", "coaxial_threshold_deg", "outer_thickness_mm",
                             "pole_order", "seed", "views", "spectral", "response"},
                            "scene config");
    SceneConfig s;
    s.patch_texels = j.at("patch_texels").get<int>();
    s.texel_pitch_mm = j.at("texel_pitch_mm").get<double>();
    s.camera_distance_m = j.at("camera_distance_m").get<double>();
    s.light_offset_deg = j.at("light_offset_deg").get<double>();
    s.light_power = j.value("light_power", 1.0);
    s.noise_sigma = j.value("noise_sigma", 0.005);
    s.coaxial_threshold_deg = j.value("coaxial_threshold_deg", 6.0);
    s.outer_thickness_mm = j.value("outer_thickness_mm", 0.25);
    s.pole_order = j.value("pole_order", 2);
    s.seed = j.value("seed", std::uint64_t(1));
    if (s.light_offset_deg > s.coaxial_threshold_deg)
        throw std::runtime_error("scene config: light offset exceeds the coaxial threshold");
    if (s.camera_distance_m <= 0.0)
        throw std::runtime_error("scene config: camera distance must be positive");
    for (const auto &v : j.at("views")) {
        io::reject_unknown_keys(v, {"angle_deg", "tilt_deg"}, "scene config view");
        s.views.push_back({v.at("angle_deg").get<double>(), v.value("tilt_deg", 0.0)});
    }
    if (j.contains("spectral")) {
        io::reject_unknown_keys(j["spectral"], {"lo_nm", "hi_nm"}, "scene config spectral");
        s.grid.lo_nm = j["spectral"].value("lo_nm", 420.0);
        s.grid.hi_nm = j["spectral"].value("hi_nm", 670.0);
    }
    if (j.contains("response") && j["response"].is_string()) {
        if (j["response"].get<std::string>() != "synthetic_default")
            throw std::runtime_error("scene config: unknown response preset");
        s.response = spectral::ResponseMatrix::synthetic_default(s.grid);
    } else if (j.contains("response")) {
        const auto &resp = j["response"];
        if (resp.size() != spectral::kChannels)
            throw std::runtime_error("scene config: response must have 6 rows");
        for (int c = 0; c < spectral::kChannels; ++c)
            for (int b = 0; b < spectral::kBands; ++b)
                s.response.rows[c][b] = resp[c][b].get<double>();
        s.response.validate();
    } else {
        s.response = spectral::ResponseMatrix::synthetic_default(s.grid);
    }
    return s;
}

}  // namespace

SceneConfig SceneConfig::from_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scene config: " + path);
    json j;
    in >> j;
    return scene_from_json(j);
}

void SceneConfig::to_json_file(const std::string &path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scene config: " + path);
    out << scene_to_json(*this).dump(2) << "\n";
}

void write_maps(const std::string &dir, const ParameterMaps &maps) {
    fs::create_directories(dir);
    io::write_pfm(dir + "/eta.pfm", maps.eta);
    io::write_pfm(dir + "/alpha_s.pfm", maps.alpha_s);
    io::write_pfm(dir + "/alpha_ss.pfm", maps.alpha_ss);
    io::write_pfm(dir + "/H.pfm", maps.H);
    io::write_pfm(dir + "/C_m.pfm", maps.C_m);
    io::write_pfm(dir + "/beta_m.pfm", maps.beta_m);
    io::write_pfm(dir + "/C_h_out.pfm", maps.C_h_out);
    io::write_pfm(dir + "/C_h_in.pfm", maps.C_h_in);
    for (int c = 0; c < spectral::kChannels; ++c) {
        io::write_pfm(dir + "/rho_s_ch" + std::to_string(c) + ".pfm", maps.rho_s[c]);
        io::write_pfm(dir + "/rho_ss_ch" + std::to_string(c) + ".pfm", maps.rho_ss[c]);
        io::write_pfm(dir + "/rho_sss_bar_ch" + std::to_string(c) + ".pfm", maps.rho_sss_bar[c]);
    }
}

ParameterMaps read_maps(const std::string &dir) {
    ParameterMaps maps;
    maps.eta = io::read_pfm(dir + "/eta.pfm");
    maps.alpha_s = io::read_pfm(dir + "/alpha_s.pfm");
    maps.alpha_ss = io::read_pfm(dir + "/alpha_ss.pfm");
    maps.H = io::read_pfm(dir + "/H.pfm");
    maps.C_m = io::read_pfm(dir + "/C_m.pfm");
    maps.beta_m = io::read_pfm(dir + "/beta_m.pfm");
    maps.C_h_out = io::read_pfm(dir + "/C_h_out.pfm");
    maps.C_h_in = io::read_pfm(dir + "/C_h_in.pfm");
    for (int c = 0; c < spectral::kChannels; ++c) {
        maps.rho_s.push_back(io::read_pfm(dir + "/rho_s_ch" + std::to_string(c) + ".pfm"));
        maps.rho_ss.push_back(io::read_pfm(dir + "/rho_ss_ch" + std::to_string(c) + ".pfm"));
        maps.rho_sss_bar.push_back(io::read_pfm(dir + "/rho_sss_bar_ch" + std::to_string(c) + ".pfm"));
    }
    return maps;
}

std::string synth_dataset(const SceneConfig &scene, const ParameterMaps &ground_truth,
                          const std::string &out_dir, RenderMode mode) {
    if (scene.views.empty()) throw std::invalid_argument("synth_dataset: view count must be >= 1");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir))
        throw std::runtime_error("synth_dataset: cannot create output directory " + out_dir);

    io::RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = scene.seed;
    manifest.config_echo = scene_to_json(scene);
    manifest.chromophore_hash = io::hash_file(spectral::ChromophoreSpectra::default_path());

    scene.to_json_file(out_dir + "/scene.json");
    manifest.add_file(out_dir, "scene.json");

    const Dataset ds = synth_views(scene, ground_truth, mode);
    const std::array<const char *, 4> pol_names{"0", "45", "90", "135"};
    for (size_t v = 0; v < ds.frames.size(); ++v) {
        const auto &f = ds.frames[v];
        const std::array<const MultiChannel *, 4> imgs{&f.I0, &f.I45, &f.I90, &f.I135};
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < spectral::kChannels; ++c) {
                const std::string rel = "view" + std::to_string(v) + "_ch" + std::to_string(c) +
                                        "_pol" + pol_names[a] + ".pfm";
                io::write_pfm(out_dir + "/" + rel, (*imgs[a])[c]);
                manifest.add_file(out_dir, rel);
            }
        const std::string vis = "view" + std::to_string(v) + "_visibility.pfm";
        io::write_pfm(out_dir + "/" + vis, f.V);
        manifest.add_file(out_dir, vis);
    }

    write_maps(out_dir + "/gt", ground_truth);
    for (const auto &entry : fs::directory_iterator(out_dir + "/gt"))
        manifest.add_file(out_dir, "gt/" + entry.path().filename().string());

    const std::string manifest_path = out_dir + "/manifest.json";
    manifest.write(manifest_path);
    return manifest_path;
}

Dataset load_dataset(const std::string &dir) {
    io::RunManifest::load_verified(dir + "/manifest.json");
    Dataset ds;
    ds.scene = SceneConfig::from_json_file(dir + "/scene.json");
    const std::array<const char *, 4> pol_names{"0", "45", "90", "135"};
    for (size_t v = 0; v < ds.scene.views.size(); ++v) {
        PolarimetricFrame f;
        for (int c = 0; c < spectral::kChannels; ++c) {
            auto path = [&](const char *pol) {
                return dir + "/view" + std::to_string(v) + "_ch" + std::to_string(c) + "_pol" +
                       pol + ".pfm";
            };
            f.I0.push_back(io::read_pfm(path(pol_names[0])));
            f.I45.push_back(io::read_pfm(path(pol_names[1])));
            f.I90.push_back(io::read_pfm(path(pol_names[2])));
            f.I135.push_back(io::read_pfm(path(pol_names[3])));
        }
        f.V = io::read_pfm(dir + "/view" + std::to_string(v) + "_visibility.pfm");
        ds.frames.push_back(std::move(f));
        ds.observations.push_back(extract_observations(ds.frames.back()));
    }
    return ds;
}

}  // namespace skinpol::scene
