// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "skinpol/inverse_polar.hpp"

using namespace skinpol;
using namespace skinpol::invpolar;

namespace {

scene::SceneConfig make_scene(int n, double offset_deg, double noise, int views) {
    scene::SceneConfig cfg = scene::SceneConfig::defaults();
    cfg.patch_texels = n;
    cfg.texel_pitch_mm = 0.2;
    cfg.light_offset_deg = offset_deg;
    cfg.noise_sigma = noise;
    for (int v = 0; v < views; ++v) {
        const double a = views == 1 ? 0.0 : -20.0 + 40.0 * v / (views - 1.0);
        cfg.views.push_back({a, (v % 3 == 1) ? 6.0 : (v % 3 == 2 ? -6.0 : 0.0)});
    }
    return cfg;
}

ParameterMaps ground_truth(int n, bool bumpy) {
    ParameterMaps gt = ParameterMaps::allocate(n, n);
    std::fill(gt.eta.data.begin(), gt.eta.data.end(), 1.44);
    std::fill(gt.alpha_s.data.begin(), gt.alpha_s.data.end(), 0.55);
    std::fill(gt.alpha_ss.data.begin(), gt.alpha_ss.data.end(), 0.95);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            if (bumpy)
                gt.H.at(x, y) = 0.04 * std::sin(2.0 * M_PI * 2.0 * x / n) *
                                std::cos(2.0 * M_PI * 1.0 * y / n);
            for (int c = 0; c < spectral::kChannels; ++c) {
                gt.rho_s[c].at(x, y) = 0.4 + 0.02 * c;
                gt.rho_ss[c].at(x, y) = 0.3;
                gt.rho_sss_bar[c].at(x, y) = 0.3 + 0.03 * c + (bumpy ? 0.05 * x / n : 0.0);
            }
        }
    return gt;
}

const LossWeights kWeights{};
const StageConfig kCfg{};

}  // namespace

TEST_CASE("data losses vanish when rendered equals observed") {
    const int n = 8;
    auto cfg = make_scene(n, 0.0, 0.0, 2);
    const auto gt = ground_truth(n, true);
    const auto data = scene::synth_views(cfg, gt);

    const auto loss = eval_polar_loss(data, gt, kWeights, Stage::Static, nullptr, nullptr, kCfg);
    CHECK(loss.sss < 1e-18);
    CHECK(loss.spec < 1e-18);
    CHECK(loss.azimuth < 1e-18);
    CHECK(loss.psi < 1e-10);
    // the ground-truth height field is non-zero, so only regularizers remain
    CHECK(loss.reg > 0.0);
}

TEST_CASE("visibility masks zero the data losses") {
    const int n = 6;
    auto cfg = make_scene(n, 0.0, 0.0, 2);
    const auto gt = ground_truth(n, false);
    auto data = scene::synth_views(cfg, gt);
    for (auto &f : data.frames) std::fill(f.V.data.begin(), f.V.data.end(), 0.0);

    ParameterMaps off = gt;
    for (double &v : off.rho_sss_bar[0].data) v += 0.3;  // large residual if unmasked
    const auto loss = eval_polar_loss(data, off, kWeights, Stage::Static, nullptr, nullptr, kCfg);
    CHECK(loss.sss == 0.0);
    CHECK(loss.spec == 0.0);
    CHECK(loss.azimuth == 0.0);
    CHECK(loss.psi == 0.0);
}

TEST_CASE("refractive-index loss rises away from the true index") {
    const int n = 8;
    auto cfg = make_scene(n, 0.0, 0.0, 3);
    const auto gt = ground_truth(n, true);
    const auto data = scene::synth_views(cfg, gt);

    auto at_eta = [&](double eta) {
        ParameterMaps m = gt;
        std::fill(m.eta.data.begin(), m.eta.data.end(), eta);
        return eval_polar_loss(data, m, kWeights, Stage::Static, nullptr, nullptr, kCfg).psi;
    };
    const double l0 = at_eta(1.44);
    const double l1 = at_eta(1.54);
    const double l2 = at_eta(1.64);
    CHECK(l0 < 1e-10);
    CHECK(l1 > l0);
    CHECK(l2 > l1);
}

TEST_CASE("texels with no subsurface signal are excluded without NaNs") {
    const int n = 6;
    auto cfg = make_scene(n, 0.0, 0.0, 2);
    ParameterMaps gt = ground_truth(n, false);
    for (int c = 0; c < spectral::kChannels; ++c)
        std::fill(gt.rho_sss_bar[c].data.begin(), gt.rho_sss_bar[c].data.end(), 0.0);
    const auto data = scene::synth_views(cfg, gt);
    const auto loss = eval_polar_loss(data, gt, kWeights, Stage::Static, nullptr, nullptr, kCfg);
    CHECK(std::isfinite(loss.total()));
    CHECK(loss.psi == 0.0);  // every texel sits below the observation floor
}

TEST_CASE("total static loss is invariant under a global pi azimuth shift") {
    // on a frontal coaxial view, negating H flips every in-plane normal
    // component, shifting the predicted azimuths by pi while zeniths and
    // every regularizer stay fixed
    const int n = 8;
    auto cfg = make_scene(n, 0.0, 0.0, 1);
    cfg.views = {{0.0, 0.0}};
    const auto gt = ground_truth(n, true);
    auto data = scene::synth_views(cfg, gt);
    data.observations.resize(1);
    data.frames.resize(1);

    ParameterMaps flipped = gt;
    for (double &v : flipped.H.data) v = -v;
    const auto a = eval_polar_loss(data, gt, kWeights, Stage::Static, nullptr, nullptr, kCfg);
    const auto b =
        eval_polar_loss(data, flipped, kWeights, Stage::Static, nullptr, nullptr, kCfg);
    CHECK(a.total() == doctest::Approx(b.total()).epsilon(1e-12));
}

TEST_CASE("gradient_check is exact on a quadratic test loss") {
    ParameterMaps at = ground_truth(6, true);
    auto loss = [](const ParameterMaps &m) {
        double s = 0.0;
        for (double v : m.H.data) s += 3.0 * v * v;
        for (double v : m.eta.data) s += (v - 1.2) * (v - 1.2);
        for (int c = 0; c < spectral::kChannels; ++c)
            for (double v : m.rho_s[c].data) s += 0.5 * v * v;
        return s;
    };
    auto grad = [](const ParameterMaps &m) {
        GradientMaps g = GradientMaps::allocate(m.width(), m.height());
        for (size_t i = 0; i < m.H.data.size(); ++i) {
            g.H.data[i] = 6.0 * m.H.data[i];
            g.eta.data[i] = 2.0 * (m.eta.data[i] - 1.2);
        }
        for (int c = 0; c < spectral::kChannels; ++c)
            for (size_t i = 0; i < m.rho_s[c].data.size(); ++i)
                g.rho_s[c].data[i] = m.rho_s[c].data[i];
        return g;
    };
    const auto rep = gradient_check(loss, grad, at, Stage::Static, 128, 77);
    CHECK(rep.max_rel_error < 1e-9);
}

TEST_CASE("full static loss gradient matches finite differences on an 8x8 patch") {
    const int n = 8;
    auto cfg = make_scene(n, 5.72, 0.002, 3);
    const auto gt = ground_truth(n, true);
    const auto data = scene::synth_views(cfg, gt);

    // evaluate away from the ground truth so every term is active
    ParameterMaps at = gt;
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (double &v : at.eta.data) v += 0.02 * u(rng);
    for (double &v : at.alpha_s.data) v += u(rng);
    for (double &v : at.alpha_ss.data) v -= std::abs(u(rng)) * 0.3;
    for (double &v : at.H.data) v += 0.02 * u(rng);
    for (int c = 0; c < spectral::kChannels; ++c)
        for (double &v : at.rho_sss_bar[c].data) v += 0.5 * std::abs(u(rng));

    const auto rep =
        gradient_check_polar(data, at, kWeights, Stage::Static, nullptr, 128, 1234);
    CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("dynamic loss gradient matches finite differences") {
    const int n = 8;
    auto cfg = make_scene(n, 5.72, 0.002, 1);
    const auto gt = ground_truth(n, true);
    const auto data = scene::synth_views(cfg, gt);

    ParameterMaps anchor = gt;
    ParameterMaps at = gt;
    std::mt19937_64 rng(66);
    std::uniform_real_distribution<double> u(-0.08, 0.08);
    for (double &v : at.H.data) v += 0.02 * u(rng);
    for (int c = 0; c < spectral::kChannels; ++c) {
        for (double &v : at.rho_s[c].data) v += std::abs(u(rng));
        for (double &v : at.rho_sss_bar[c].data) v += std::abs(u(rng));
    }
    const auto rep =
        gradient_check_polar(data, at, kWeights, Stage::Dynamic, &anchor, 128, 4321);
    CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("masked texels receive zero gradient") {
    const int n = 6;
    auto cfg = make_scene(n, 0.0, 0.0, 2);
    const auto gt = ground_truth(n, false);
    auto data = scene::synth_views(cfg, gt);
    for (auto &f : data.frames) std::fill(f.V.data.begin(), f.V.data.end(), 0.0);

    ParameterMaps neutral = ParameterMaps::allocate(n, n);  // flat, constant maps
    GradientMaps g = GradientMaps::allocate(n, n);
    eval_polar_loss(data, neutral, kWeights, Stage::Static, nullptr, &g, kCfg);
    for (double v : g.eta.data) CHECK(v == 0.0);
    for (double v : g.H.data) CHECK(v == 0.0);
    for (int c = 0; c < spectral::kChannels; ++c)
        for (double v : g.rho_sss_bar[c].data) CHECK(v == 0.0);
}

TEST_CASE("window-mean regularizer matches a direct convolution oracle") {
    const int n = 10;
    auto cfg = make_scene(n, 0.0, 0.0, 2);
    ParameterMaps maps = ground_truth(n, false);
    // checkerboard roughness
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) maps.alpha_s.at(x, y) = (x + y) % 2 ? 0.6 : 0.4;
    auto data = scene::synth_views(cfg, maps);
    for (auto &f : data.frames) std::fill(f.V.data.begin(), f.V.data.end(), 0.0);

    LossWeights w{};
    const auto loss = eval_polar_loss(data, maps, w, Stage::Static, nullptr, nullptr, kCfg);

    // direct 5x5 window-mean oracle (clipped at borders)
    double want = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double mean = 0.0;
            int cnt = 0;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= n || yy < 0 || yy >= n) continue;
                    mean += maps.alpha_s.at(xx, yy);
                    ++cnt;
                }
            const double r = maps.alpha_s.at(x, y) - mean / cnt;
            want += w.alpha_s_reg * r * r;
        }
    CHECK(want > 0.0);
    // remaining regularizer terms vanish for these maps (H = 0, constant
    // alpha_ss and eta)
    CHECK(loss.reg == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("regularizer trivia") {
    const int n = 8;
    auto cfg = make_scene(n, 0.0, 0.0, 2);
    ParameterMaps maps = ParameterMaps::allocate(n, n);
    auto data = scene::synth_views(cfg, maps);
    for (auto &f : data.frames) std::fill(f.V.data.begin(), f.V.data.end(), 0.0);

    // flat H, constant alpha and eta: regularizer is exactly zero
    const auto zero = eval_polar_loss(data, maps, kWeights, Stage::Static, nullptr, nullptr, kCfg);
    CHECK(zero.reg == 0.0);

    // constant-slope plane: Laplacian term zero, temporal term positive
    ParameterMaps plane = maps;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) plane.H.at(x, y) = 0.01 * x;
    const auto lp = eval_polar_loss(data, plane, kWeights, Stage::Static, nullptr, nullptr, kCfg);
    double htreg = 0.0;
    for (double v : plane.H.data) htreg += kWeights.H_treg * v * v;
    CHECK(lp.reg == doctest::Approx(htreg).epsilon(1e-12));
}

TEST_CASE("optimize_static holds a noise-free ground-truth fixed point") {
    const int n = 8;
    auto cfg = make_scene(n, 0.0, 0.0, 3);
    // zero-H, homogeneous-roughness truth makes every loss term vanish
    const auto gt = ground_truth(n, false);
    const auto data = scene::synth_views(cfg, gt);

    StageConfig c = kCfg;
    c.iterations = 5;
    const auto res = optimize_static(data, gt, c, kWeights);
    CHECK(!res.diverged);
    CHECK(res.trace.front().total() < 1e-10);
    CHECK(res.trace.back().total() <= res.trace.front().total() + 1e-8);
    for (size_t i = 0; i < gt.eta.data.size(); ++i) {
        CHECK(std::abs(res.maps.eta.data[i] - gt.eta.data[i]) < 1e-6);
        CHECK(std::abs(res.maps.H.data[i] - gt.H.data[i]) < 1e-6);
        CHECK(std::abs(res.maps.rho_sss_bar[0].data[i] - gt.rho_sss_bar[0].data[i]) < 1e-6);
    }
}

TEST_CASE("optimizer trace is monotone and reduces a perturbed start") {
    const int n = 12;
    auto cfg = make_scene(n, 5.72, 0.0, 5);
    const auto gt = ground_truth(n, true);
    const auto data = scene::synth_views(cfg, gt);

    ParameterMaps init = gt;
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> u(0.8, 1.2);
    for (double &v : init.eta.data) v = 1.0 + (v - 1.0) * u(rng);
    for (double &v : init.H.data) v = 0.0;
    for (int c = 0; c < spectral::kChannels; ++c)
        for (double &v : init.rho_sss_bar[c].data) v *= u(rng);
    init.clamp_to_bounds();

    StageConfig c = kCfg;
    c.iterations = 40;
    const auto res = optimize_static(data, init, c, kWeights);
    CHECK(!res.diverged);
    for (size_t i = 1; i < res.trace.size(); ++i)
        CHECK(res.trace[i].total() <= res.trace[i - 1].total() + 1e-15);
    CHECK(res.trace.back().total() < 0.2 * res.trace.front().total());

    // every degenerate-mask entry must be zero here (all texels seen)
    for (double v : res.degenerate_mask.data) CHECK(v == 0.0);
}

TEST_CASE("optimize_static requires at least two views") {
    const int n = 6;
    auto cfg = make_scene(n, 0.0, 0.0, 1);
    const auto gt = ground_truth(n, false);
    const auto data = scene::synth_views(cfg, gt);
    CHECK_THROWS_AS(optimize_static(data, gt, kCfg, kWeights), std::invalid_argument);
}

TEST_CASE("dynamic stage anchors to the static result") {
    const int n = 8;
    auto cfg = make_scene(n, 5.72, 0.0, 1);
    const auto anchor = ground_truth(n, true);
    const auto frame = scene::synth_views(cfg, anchor);

    StageConfig c = kCfg;
    c.stage = Stage::Dynamic;
    c.iterations = 10;
    const auto results = optimize_dynamic({frame}, anchor, c, kWeights);
    REQUIRE(results.size() == 1);
    CHECK(!results[0].diverged);
    // identical frame: recovered maps stay within 1% of the anchor
    for (size_t i = 0; i < anchor.H.data.size(); ++i) {
        CHECK(std::abs(results[0].maps.H.data[i] - anchor.H.data[i]) < 0.01);
        for (int ch = 0; ch < spectral::kChannels; ++ch)
            CHECK(std::abs(results[0].maps.rho_sss_bar[ch].data[i] -
                           anchor.rho_sss_bar[ch].data[i]) <
                  0.01 * std::max(1.0, anchor.rho_sss_bar[ch].data[i]));
    }
    // eta and roughness stay frozen
    for (size_t i = 0; i < anchor.eta.data.size(); ++i) {
        CHECK(results[0].maps.eta.data[i] == anchor.eta.data[i]);
        CHECK(results[0].maps.alpha_s.data[i] == anchor.alpha_s.data[i]);
    }
}

TEST_CASE("a dead frame keeps the previous maps and records a warning") {
    const int n = 6;
    auto cfg = make_scene(n, 5.72, 0.0, 1);
    const auto anchor = ground_truth(n, false);
    auto frame = scene::synth_views(cfg, anchor);
    for (auto &f : frame.frames) std::fill(f.V.data.begin(), f.V.data.end(), 0.0);

    StageConfig c = kCfg;
    c.stage = Stage::Dynamic;
    c.iterations = 3;
    const auto results = optimize_dynamic({frame}, anchor, c, kWeights);
    REQUIRE(results.size() == 1);
    CHECK(!results[0].diagnostics.empty());
    for (size_t i = 0; i < anchor.H.data.size(); ++i)
        CHECK(results[0].maps.H.data[i] == anchor.H.data[i]);
}
