// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "skinpol/manifest.hpp"
#include "skinpol/scene.hpp"

using namespace skinpol;
using namespace skinpol::scene;

namespace {

SceneConfig small_scene(int n, double offset_deg, double noise) {
    SceneConfig cfg = SceneConfig::defaults();
    cfg.patch_texels = n;
    cfg.texel_pitch_mm = 0.2;
    cfg.light_offset_deg = offset_deg;
    cfg.noise_sigma = noise;
    cfg.views = {{0.0, 0.0}};
    return cfg;
}

ParameterMaps flat_maps(int n) {
    ParameterMaps m = ParameterMaps::allocate(n, n);
    for (int c = 0; c < spectral::kChannels; ++c) {
        std::fill(m.rho_s[c].data.begin(), m.rho_s[c].data.end(), 0.4);
        std::fill(m.rho_ss[c].data.begin(), m.rho_ss[c].data.end(), 0.3);
        std::fill(m.rho_sss_bar[c].data.begin(), m.rho_sss_bar[c].data.end(),
                  0.35 + 0.02 * c);
    }
    return m;
}

const spectral::ChromophoreSpectra &spectra() {
    static const auto s = spectral::ChromophoreSpectra::load(
        spectral::ChromophoreSpectra::default_path(), spectral::SpectralGrid{});
    return s;
}

}  // namespace

TEST_CASE("normals from a flat or ramped height field") {
    HeightField hf;
    hf.H = Texture(16, 16, 0.0);
    hf.s_u = hf.s_v = 1.0;
    const auto flat = normals_from_height(hf);
    for (const Vec3 &n : flat) {
        CHECK(n.x == doctest::Approx(0.0));
        CHECK(n.y == doctest::Approx(0.0));
        CHECK(n.z == doctest::Approx(1.0));
    }

    // linear ramp H = a u on unit tangents tilts every normal the same way
    const double a = 0.3;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) hf.H.at(x, y) = a * x;
    const auto ramp = normals_from_height(hf);
    const Vec3 want = normalize(Vec3{-a, 0.0, 1.0});
    for (const Vec3 &n : ramp) {
        CHECK(n.x == doctest::Approx(want.x).epsilon(1e-12));
        CHECK(n.y == doctest::Approx(want.y).epsilon(1e-12));
        CHECK(n.z == doctest::Approx(want.z).epsilon(1e-12));
    }
}

TEST_CASE("finite-difference normals track the analytic sinusoid") {
    const int n = 256;
    HeightField hf;
    hf.H = Texture(n, n);
    hf.s_u = hf.s_v = 1.0;
    const double k = 2.0 * M_PI * 3.0 / n;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) hf.H.at(x, y) = 0.8 * std::sin(k * x) * std::sin(k * y);
    const auto normals = normals_from_height(hf);
    double worst = 0.0;
    for (int y = 1; y < n - 1; ++y)
        for (int x = 1; x < n - 1; ++x) {
            const double du = 0.8 * k * std::cos(k * x) * std::sin(k * y);
            const double dv = 0.8 * k * std::sin(k * x) * std::cos(k * y);
            const Vec3 want = normalize(Vec3{-du, -dv, 1.0});
            const Vec3 &got = normals[static_cast<size_t>(y) * n + x];
            worst = std::max(worst, norm(got - want));
        }
    CHECK(worst < 1e-3);
}

TEST_CASE("shading term") {
    CHECK(shading_term(Vec3{0, 0, 1}, Vec3{0, 0, 1}, 1.0) == doctest::Approx(1.0));
    CHECK(shading_term(Vec3{0, 0, 1}, Vec3{0, 0, 1}, 2.0) == doctest::Approx(0.25));
    CHECK(shading_term(Vec3{0, 0, 1}, Vec3{0, 0, -1}, 1.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(shading_term(Vec3{0, 0, 1}, Vec3{0, 0, 1}, 0.0), std::invalid_argument);
}

TEST_CASE("render_frame basics") {
    const int n = 8;
    SceneConfig cfg = small_scene(n, 5.72, 0.0);

    // all albedos zero -> black frames, full visibility
    ParameterMaps zero = ParameterMaps::allocate(n, n);
    const auto black = render_frame(cfg, cfg.views[0], zero, RenderMode::Simplified);
    for (const auto *mc : {&black.I0, &black.I45, &black.I90, &black.I135})
        for (const Texture &t : *mc)
            for (double v : t.data) CHECK(v == 0.0);
    for (double v : black.V.data) CHECK(v == 1.0);

    // dimension mismatch and non-coaxial simplified mode are rejected
    ParameterMaps wrong = ParameterMaps::allocate(4, 4);
    CHECK_THROWS_AS(render_frame(cfg, cfg.views[0], wrong, RenderMode::Simplified),
                    std::invalid_argument);
    SceneConfig off = cfg;
    off.light_offset_deg = 11.0;
    CHECK_THROWS_AS(render_frame(off, off.views[0], zero, RenderMode::Simplified),
                    std::invalid_argument);

    // light-intensity linearity
    const ParameterMaps maps = flat_maps(n);
    const auto f1 = render_frame(cfg, cfg.views[0], maps, RenderMode::Simplified);
    SceneConfig bright = cfg;
    bright.light_power = 3.0;
    const auto f3 = render_frame(bright, bright.views[0], maps, RenderMode::Simplified);
    for (int c = 0; c < spectral::kChannels; ++c)
        for (size_t i = 0; i < f1.I0[c].data.size(); ++i)
            CHECK(f3.I0[c].data[i] == doctest::Approx(3.0 * f1.I0[c].data[i]).epsilon(1e-12));

    // forcing unpolarized output equalizes the four analyzers
    auto forced = f1;
    for (int c = 0; c < spectral::kChannels; ++c)
        for (size_t i = 0; i < forced.I0[c].data.size(); ++i) {
            const double s0 = forced.I0[c].data[i] + forced.I90[c].data[i];
            forced.I0[c].data[i] = forced.I90[c].data[i] = 0.5 * s0;
            forced.I45[c].data[i] = forced.I135[c].data[i] = 0.5 * s0;
        }
    for (int c = 0; c < spectral::kChannels; ++c)
        for (size_t i = 0; i < forced.I0[c].data.size(); ++i) {
            CHECK(forced.I0[c].data[i] == forced.I90[c].data[i]);
            CHECK(forced.I45[c].data[i] == forced.I135[c].data[i]);
            CHECK(forced.I0[c].data[i] == forced.I45[c].data[i]);
        }
}

TEST_CASE("analyzer outputs match the hand-composed Stokes projection") {
    const int n = 4;
    SceneConfig cfg = small_scene(n, 5.0, 0.0);
    ParameterMaps maps = flat_maps(n);
    // make the geometry non-trivial
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) maps.H.at(x, y) = 0.02 * x * y;
    const auto frame = render_frame(cfg, cfg.views[0], maps, RenderMode::Simplified);

    const int x = 2, y = 1, c = 3;
    HeightField hf;
    hf.H = maps.H;
    hf.s_u = hf.s_v = cfg.texel_pitch_mm;
    const auto grad = height_gradient(maps.H);
    const Vec3 nrm = normal_from_gradient(hf, grad.du.at(x, y), grad.dv.at(x, y));
    const auto tf = texel_frame(cfg, cfg.views[0], x, y);
    const auto geom = pbssrdf::make_geometry(nrm, tf.wi, tf.wo, Vec3{0, 1, 0});
    const double S = shading_term(nrm, tf.wi, tf.gamma_m);
    const auto M = pbssrdf::simplified_coaxial_mueller(geom, maps.texel(x, y), c,
                                                       maps.rho_sss_bar[c].at(x, y));
    const polar::StokesVector so = M * polar::StokesVector{1, 1, 0, 0};
    CHECK(frame.I0[c].at(x, y) == doctest::Approx(0.5 * S * (so.s0 + so.s1)).epsilon(1e-12));
    CHECK(frame.I90[c].at(x, y) == doctest::Approx(0.5 * S * (so.s0 - so.s1)).epsilon(1e-12));
    CHECK(frame.I45[c].at(x, y) == doctest::Approx(0.5 * S * (so.s0 + so.s2)).epsilon(1e-12));
    CHECK(frame.I135[c].at(x, y) == doctest::Approx(0.5 * S * (so.s0 - so.s2)).epsilon(1e-12));
}

TEST_CASE("observation extraction identities hold exactly on noise-free renders") {
    const int n = 8;
    SceneConfig cfg = small_scene(n, 5.72, 0.0);
    ParameterMaps maps = flat_maps(n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            maps.H.at(x, y) = 0.03 * std::sin(0.8 * x) * std::cos(0.5 * y);
    const auto frame = render_frame(cfg, cfg.views[0], maps, RenderMode::Simplified);
    const auto obs = extract_observations(frame);
    for (int c = 0; c < spectral::kChannels; ++c)
        for (size_t i = 0; i < obs.I_sss[c].data.size(); ++i) {
            CHECK(obs.I_sss[c].data[i] == 2.0 * frame.I90[c].data[i]);
            CHECK(obs.I_zeta[c].data[i] ==
                  frame.I135[c].data[i] - frame.I45[c].data[i]);
            CHECK(obs.I_s[c].data[i] == frame.I0[c].data[i] - frame.I90[c].data[i]);
        }

    // pure specular scene: no subsurface polarization signal
    ParameterMaps spec_only = maps;
    for (int c = 0; c < spectral::kChannels; ++c)
        std::fill(spec_only.rho_sss_bar[c].data.begin(), spec_only.rho_sss_bar[c].data.end(),
                  0.0);
    const auto fs = extract_observations(
        render_frame(cfg, cfg.views[0], spec_only, RenderMode::Simplified));
    for (int c = 0; c < spectral::kChannels; ++c)
        for (double v : fs.I_zeta[c].data) CHECK(std::abs(v) < 1e-15);

    // pure subsurface scene at exactly coaxial geometry: I_s carries only
    // the xi-weighted transmission term
    SceneConfig coax = small_scene(n, 0.0, 0.0);
    ParameterMaps sss_only = maps;
    for (int c = 0; c < spectral::kChannels; ++c) {
        std::fill(sss_only.rho_s[c].data.begin(), sss_only.rho_s[c].data.end(), 0.0);
        std::fill(sss_only.rho_ss[c].data.begin(), sss_only.rho_ss[c].data.end(), 0.0);
    }
    const auto fo = extract_observations(
        render_frame(coax, coax.views[0], sss_only, RenderMode::Simplified));
    const auto grad = height_gradient(sss_only.H);
    HeightField hf;
    hf.H = sss_only.H;
    hf.s_u = hf.s_v = coax.texel_pitch_mm;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const Vec3 nrm = normal_from_gradient(hf, grad.du.at(x, y), grad.dv.at(x, y));
            const auto tf = texel_frame(coax, coax.views[0], x, y);
            const auto geom = pbssrdf::make_geometry(nrm, tf.wi, tf.wo, Vec3{0, 1, 0});
            const double S = shading_term(nrm, tf.wi, tf.gamma_m);
            const auto tp = pbssrdf::transmission_pair(geom.cos_i, geom.cos_o, 1.4);
            const int c = 2;
            const double want =
                -S * sss_only.rho_sss_bar[c].at(x, y) * tp.ti_plus * tp.to_minus * geom.diff_o.xi;
            CHECK(fo.I_s[c].at(x, y) == doctest::Approx(want).epsilon(1e-9));
        }
}

TEST_CASE("raising outer absorption never raises the subsurface observation") {
    const int n = 8;
    SceneConfig cfg = small_scene(n, 5.72, 0.0);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int draw = 0; draw < 20; ++draw) {
        ParameterMaps lo = flat_maps(n);
        std::fill(lo.C_m.data.begin(), lo.C_m.data.end(), 0.03 + 0.05 * u(rng));
        std::fill(lo.beta_m.data.begin(), lo.beta_m.data.end(), 0.03 + 0.06 * u(rng));
        std::fill(lo.C_h_out.data.begin(), lo.C_h_out.data.end(), 0.02 + 0.06 * u(rng));
        std::fill(lo.C_h_in.data.begin(), lo.C_h_in.data.end(), 0.02 + 0.03 * u(rng));
        ParameterMaps hi = lo;
        for (double &v : hi.C_m.data) v += 0.02;  // raises sigma_a^out at every band

        lo.rho_sss_bar = derive_rho_sss_bar(cfg, lo, spectra());
        hi.rho_sss_bar = derive_rho_sss_bar(cfg, hi, spectra());
        const auto obs_lo = extract_observations(
            render_frame(cfg, cfg.views[0], lo, RenderMode::Simplified));
        const auto obs_hi = extract_observations(
            render_frame(cfg, cfg.views[0], hi, RenderMode::Simplified));
        for (int c = 0; c < spectral::kChannels; ++c)
            for (size_t i = 0; i < obs_lo.I_sss[c].data.size(); ++i)
                CHECK(obs_hi.I_sss[c].data[i] <= obs_lo.I_sss[c].data[i] + 1e-12);
    }
}

TEST_CASE("full and simplified renders agree on homogeneous patches") {
    const int n = 16;
    SceneConfig cfg = small_scene(n, 5.72, 0.0);
    ParameterMaps maps = flat_maps(n);
    std::fill(maps.C_m.data.begin(), maps.C_m.data.end(), 0.05);
    std::fill(maps.beta_m.data.begin(), maps.beta_m.data.end(), 0.05);
    std::fill(maps.C_h_out.data.begin(), maps.C_h_out.data.end(), 0.06);
    std::fill(maps.C_h_in.data.begin(), maps.C_h_in.data.end(), 0.03);
    maps.rho_sss_bar = derive_rho_sss_bar(cfg, maps, spectra());

    const auto simp = render_frame(cfg, cfg.views[0], maps, RenderMode::Simplified);
    const auto full = render_frame(cfg, cfg.views[0], maps, RenderMode::Full);
    double se = 0.0, ref = 0.0;
    for (int c = 0; c < spectral::kChannels; ++c) {
        const std::array<const MultiChannel *, 4> a{&simp.I0, &simp.I45, &simp.I90, &simp.I135};
        const std::array<const MultiChannel *, 4> b{&full.I0, &full.I45, &full.I90, &full.I135};
        for (int k = 0; k < 4; ++k)
            for (size_t i = 0; i < (*a[k])[c].data.size(); ++i) {
                const double d = (*a[k])[c].data[i] - (*b[k])[c].data[i];
                se += d * d;
                ref += (*b[k])[c].data[i] * (*b[k])[c].data[i];
            }
    }
    CHECK(std::sqrt(se / ref) < 0.03);
}

TEST_CASE("noise is deterministic, clamped and seed-keyed") {
    const int n = 8;
    SceneConfig cfg = small_scene(n, 5.72, 0.005);
    const ParameterMaps maps = flat_maps(n);
    const auto f1 = render_frame(cfg, cfg.views[0], maps, RenderMode::Simplified);
    const auto f2 = render_frame(cfg, cfg.views[0], maps, RenderMode::Simplified);
    SceneConfig other = cfg;
    other.seed = 99;
    const auto f3 = render_frame(other, other.views[0], maps, RenderMode::Simplified);
    bool any_diff = false;
    for (int c = 0; c < spectral::kChannels; ++c)
        for (size_t i = 0; i < f1.I0[c].data.size(); ++i) {
            CHECK(f1.I0[c].data[i] == f2.I0[c].data[i]);
            CHECK(f1.I0[c].data[i] >= 0.0);
            any_diff = any_diff || f1.I0[c].data[i] != f3.I0[c].data[i];
        }
    CHECK(any_diff);
}

TEST_CASE("synth_dataset writes the documented file set deterministically") {
    namespace fs = std::filesystem;
    const int n = 8;
    SceneConfig cfg = small_scene(n, 5.72, 0.005);
    const ParameterMaps maps = flat_maps(n);

    const std::string dir1 = "synth_test_a", dir2 = "synth_test_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    synth_dataset(cfg, maps, dir1);
    synth_dataset(cfg, maps, dir2);

    // views=1: exactly 24 analyzer images (4 analyzers x 6 channels)
    int analyzer_files = 0;
    for (const auto &e : fs::directory_iterator(dir1))
        if (e.path().filename().string().find("_pol") != std::string::npos) ++analyzer_files;
    CHECK(analyzer_files == 24);
    CHECK(fs::exists(dir1 + "/manifest.json"));

    // determinism: same seed gives byte-identical outputs
    for (const auto &e : fs::directory_iterator(dir1)) {
        const std::string name = e.path().filename().string();
        CHECK(io::hash_file(dir1 + "/" + name) == io::hash_file(dir2 + "/" + name));
    }

    // loading verifies checksums; tampering must fail
    CHECK_NOTHROW(load_dataset(dir1));
    {
        std::ofstream tamper(dir1 + "/view0_ch0_pol0.pfm", std::ios::app);
        tamper << "x";
    }
    CHECK_THROWS(load_dataset(dir1));

    fs::remove_all(dir1);
    fs::remove_all(dir2);

    SceneConfig noviews = cfg;
    noviews.views.clear();
    CHECK_THROWS_AS(synth_dataset(noviews, maps, dir1), std::invalid_argument);
    fs::remove_all(dir1);
}

TEST_CASE("scene config JSON round trip rejects unknown keys") {
    namespace fs = std::filesystem;
    SceneConfig cfg = small_scene(8, 5.72, 0.002);
    cfg.views = {{-10.0, 0.0}, {10.0, 4.0}};
    cfg.to_json_file("scene_test.json");
    const SceneConfig back = SceneConfig::from_json_file("scene_test.json");
    CHECK(back.patch_texels == cfg.patch_texels);
    CHECK(back.views.size() == 2);
    CHECK(back.views[1].tilt_deg == doctest::Approx(4.0));
    CHECK(back.response.rows[2][5] == doctest::Approx(cfg.response.rows[2][5]));

    std::ofstream bad("scene_bad.json");
    bad << R"({"patch_texels": 8, "texel_pitch_mm": 0.2, "camera_distance_m": 1.0,
               "light_offset_deg": 5.72, "views": [], "lambda_typo": 3})";
    bad.close();
    CHECK_THROWS(SceneConfig::from_json_file("scene_bad.json"));
    fs::remove("scene_test.json");
    fs::remove("scene_bad.json");
}
