// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "skinpol/pbssrdf.hpp"

using namespace skinpol;
using namespace skinpol::pbssrdf;
using polar::FresnelKind;
using polar::MuellerMatrix;
using polar::StokesVector;

namespace {

const Vec3 kUp{0, 1, 0};

Vec3 tilted_normal(std::mt19937_64 &rng, double max_tilt_rad) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double t = max_tilt_rad * std::sqrt(u(rng));
    const double p = 2.0 * M_PI * u(rng);
    return {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)};
}

Vec3 direction_about_z(double zenith, double azimuth) {
    return {std::sin(zenith) * std::cos(azimuth), std::sin(zenith) * std::sin(azimuth),
            std::cos(zenith)};
}

TexelAppearance random_skin_appearance(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TexelAppearance t;
    t.eta = 1.39 + 0.06 * u(rng);        // refractive-index range of the face table
    t.alpha_s = 0.51 + 0.14 * u(rng);    // specular roughness range
    t.alpha_ss = 0.95 + 0.035 * u(rng);  // single-scattering roughness range
    for (int c = 0; c < spectral::kChannels; ++c) {
        t.rho_s[c] = 0.2 + 0.6 * u(rng);
        t.rho_ss[c] = 0.1 + 0.5 * u(rng);
        t.rho_sss_bar[c] = 0.1 + 0.5 * u(rng);
    }
    return t;
}

double frobenius(const MuellerMatrix &m) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) s += m.m[i][j] * m.m[i][j];
    return std::sqrt(s);
}

MuellerMatrix diff(const MuellerMatrix &a, const MuellerMatrix &b) {
    MuellerMatrix d;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) d.m[i][j] = a.m[i][j] - b.m[i][j];
    return d;
}

// The general per-texel P = P_s + P_ss + P_sss with coincident entry and
// exit points.
MuellerMatrix full_p(const InteractionGeometry &geom, const TexelAppearance &tex, int channel) {
    return specular_mueller(geom, tex, channel) + single_scatter_mueller(geom, tex, channel) +
           sss_mueller(geom, geom, tex.eta, tex.eta, tex.rho_sss_bar[channel]);
}

}  // namespace

TEST_CASE("geometry invariants") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Vec3 n = tilted_normal(rng, 0.5);
        const Vec3 wi = direction_about_z(0.4 * u(rng), 2 * M_PI * u(rng));
        const Vec3 wo = direction_about_z(0.4 * u(rng), 2 * M_PI * u(rng));
        const auto g = make_geometry(n, wi, wo, kUp);
        const Vec3 h = normalize(wi + wo);
        CHECK(norm(g.h) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(g.h.x == doctest::Approx(h.x).epsilon(1e-12));
        CHECK(g.theta_d() ==
              doctest::Approx(std::acos(std::min(1.0, dot(h, wi)))).epsilon(1e-9));
        CHECK(g.spec_i.xi * g.spec_i.xi + g.spec_i.zeta * g.spec_i.zeta ==
              doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("microfacet kappa examples") {
    const Vec3 n{0, 0, 1};
    const auto head_on = make_geometry(n, n, n, kUp);

    // peak value: D(0) G / 4 with G = 1 head-on
    CHECK(microfacet_kappa(head_on, 1.0, 0.5) ==
          doctest::Approx(1.0 / (M_PI * 0.25) / 4.0).epsilon(1e-12));

    // 1/alpha^2 peak scaling
    const double k1 = microfacet_kappa(head_on, 1.0, 0.2);
    const double k2 = microfacet_kappa(head_on, 1.0, 0.1);
    CHECK(k2 / k1 == doctest::Approx(4.0).epsilon(1e-9));

    // grazing degeneracy
    const Vec3 grazing = normalize(Vec3{1.0, 0.0, 1e-8});
    const auto bad = make_geometry(n, grazing, n, kUp);
    CHECK_THROWS_AS(microfacet_kappa(bad, 1.0, 0.5), std::domain_error);
}

TEST_CASE("GGX normal distribution integrates to one") {
    for (double alpha : {0.2, 0.5, 0.9}) {
        double integral = 0.0;
        const int m = 4000;
        for (int i = 0; i < m; ++i) {
            const double th = (i + 0.5) * (M_PI / 2.0) / m;
            integral += ggx_distribution(std::cos(th), alpha) * std::cos(th) * std::sin(th) *
                        (M_PI / 2.0 / m);
        }
        integral *= 2.0 * M_PI;
        CHECK(integral == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("specular lobe equals kappa F^R when the rotation angles vanish") {
    // geometry confined to the y-z plane zeroes the halfway azimuth offset
    const Vec3 n{0, 0, 1};
    const Vec3 wi = normalize(Vec3{0.0, 0.25, 1.0});
    const Vec3 wo = normalize(Vec3{0.0, -0.1, 1.0});
    const auto g = make_geometry(n, wi, wo, kUp);
    CHECK(std::abs(g.spec_i.zeta) < 1e-12);  // phi = +-pi/2 -> sin 2phi = 0

    TexelAppearance tex;
    tex.rho_s[0] = 0.8;
    const auto M = specular_mueller(g, tex, 0);
    const double kappa = microfacet_kappa(g, tex.rho_s[0], tex.alpha_s);
    const auto f = polar::fresnel_from_cos(g.cos_d, 1.0, tex.eta);
    const auto FR =
        polar::fresnel_mueller_from_cos(f, FresnelKind::Reflection, g.cos_d, 1.0, tex.eta);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(M.m[i][j] == doctest::Approx(kappa * FR.m[i][j]).epsilon(1e-12));
}

TEST_CASE("microfacet lobes match the explicit composition oracle") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const Vec3 n = tilted_normal(rng, 0.4);
        const Vec3 wi = direction_about_z(0.05 + 0.5 * u(rng), 2 * M_PI * u(rng));
        const Vec3 wo = direction_about_z(0.05 + 0.5 * u(rng), 2 * M_PI * u(rng));
        if (dot(n, wi) < 0.05 || dot(n, wo) < 0.05) continue;
        const auto g = make_geometry(n, wi, wo, kUp);
        const auto tex = random_skin_appearance(rng);

        // oracle: three explicit multiplies with atan2 azimuths
        const StokesFrame<double> fi = stokes_frame(Vec3{-wi.x, -wi.y, -wi.z}, kUp);
        const StokesFrame<double> fo = stokes_frame(wo, kUp);
        const double phi_i = std::atan2(dot(g.h, fi.y), dot(g.h, fi.x));
        const double phi_o = std::atan2(dot(g.h, fo.y), dot(g.h, fo.x));
        const auto f = polar::fresnel_set(g.theta_d(), 1.0, tex.eta);
        const auto FR =
            polar::fresnel_mueller(f, FresnelKind::Reflection, g.theta_d(), 1.0, tex.eta);
        const double kappa = microfacet_kappa(g, tex.rho_s[0], tex.alpha_s);
        const auto oracle = (polar::rotation_mueller(-(phi_o - M_PI / 2.0)) * FR *
                             polar::rotation_mueller(phi_i - M_PI / 2.0)) *
                            kappa;

        const auto M = specular_mueller(g, tex, 0);
        CHECK(M.m[0][0] == doctest::Approx(kappa * f.r_plus()).epsilon(1e-12));
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                CHECK(M.m[r][c] == doctest::Approx(oracle.m[r][c]).epsilon(1e-9));

        // single scattering shares the structure with its own lobe
        const auto Mss = single_scatter_mueller(g, tex, 0);
        const double kss = microfacet_kappa(g, tex.rho_ss[0], tex.alpha_ss);
        CHECK(Mss.m[0][0] == doctest::Approx(kss * f.r_plus()).epsilon(1e-12));
        CHECK(Mss.m[1][1] ==
              doctest::Approx(M.m[1][1] * kss / kappa).epsilon(1e-9));
    }
}

TEST_CASE("albedo linearity is exact") {
    std::mt19937_64 rng(9);
    const Vec3 n = tilted_normal(rng, 0.3);
    const Vec3 wi = direction_about_z(0.3, 1.0);
    const Vec3 wo = direction_about_z(0.2, 4.0);
    const auto g = make_geometry(n, wi, wo, kUp);
    auto tex = random_skin_appearance(rng);
    auto tex2 = tex;
    tex2.rho_s[0] *= 2.0;
    const auto M = specular_mueller(g, tex, 0);
    const auto M2 = specular_mueller(g, tex2, 0);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(M2.m[i][j] == 2.0 * M.m[i][j]);
}

TEST_CASE("sss_mueller structure and the composed oracle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // depolarizer limit: normal incidence on both sides
    const Vec3 n{0, 0, 1};
    const auto head_on = make_geometry(n, n, n, kUp);
    const auto M0 = sss_mueller(head_on, head_on, 1.4, 1.4, 0.5);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != 0 || j != 0) CHECK(std::abs(M0.m[i][j]) < 1e-12);
    CHECK(M0.m[0][0] > 0.0);

    int tested = 0;
    for (int k = 0; k < 3000 && tested < 1000; ++k) {
        const Vec3 ni = tilted_normal(rng, 0.5);
        const Vec3 no = tilted_normal(rng, 0.5);
        const Vec3 wi = direction_about_z(0.6 * u(rng), 2 * M_PI * u(rng));
        const Vec3 wo = direction_about_z(0.6 * u(rng), 2 * M_PI * u(rng));
        if (dot(ni, wi) < 0.05 || dot(no, wo) < 0.05) continue;
        ++tested;
        const auto gi = make_geometry(ni, wi, wo, kUp);
        const auto go = make_geometry(no, wi, wo, kUp);
        const double eta_i = 1.35 + 0.2 * u(rng), eta_o = 1.35 + 0.2 * u(rng);
        const double rho = 0.1 + u(rng);
        const auto M = sss_mueller(gi, go, eta_i, eta_o, rho);

        // zero last row and column
        for (int i = 0; i < 4; ++i) {
            CHECK(M.m[3][i] == 0.0);
            CHECK(M.m[i][3] == 0.0);
        }

        // (0,0) entry is rho Ti+ To+
        const auto tp = transmission_pair(gi.cos_i, go.cos_o, eta_i, eta_o);
        CHECK(M.m[0][0] == doctest::Approx(rho * tp.ti_plus * tp.to_plus).epsilon(1e-12));

        // full composition oracle C(-phi_o) F_o D F_i C(phi_i)
        const StokesFrame<double> fi = stokes_frame(Vec3{-wi.x, -wi.y, -wi.z}, kUp);
        const StokesFrame<double> fo = stokes_frame(wo, kUp);
        const double phi_i = std::atan2(dot(ni, fi.y), dot(ni, fi.x));
        const double phi_o = std::atan2(dot(no, fo.y), dot(no, fo.x));
        const auto f_in = polar::fresnel_from_cos(gi.cos_i, 1.0, eta_i);
        const double cos_int = std::sqrt(1.0 - (1.0 - go.cos_o * go.cos_o) / (eta_o * eta_o));
        const auto f_out = polar::fresnel_from_cos(cos_int, eta_o, 1.0);
        const auto Fi = polar::fresnel_mueller_from_cos(f_in, FresnelKind::Transmission,
                                                        gi.cos_i, 1.0, eta_i);
        const auto Fo = polar::fresnel_mueller_from_cos(f_out, FresnelKind::Transmission,
                                                        cos_int, eta_o, 1.0);
        MuellerMatrix D{};
        D.m[0][0] = 1.0;
        const auto oracle = (polar::rotation_mueller(-(phi_o - M_PI / 2.0)) * Fo * D * Fi *
                             polar::rotation_mueller(phi_i - M_PI / 2.0)) *
                            rho;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(M.m[i][j] == doctest::Approx(oracle.m[i][j]).epsilon(1e-9));
    }
    CHECK(tested == 1000);
}

TEST_CASE("simplified coaxial matrix reductions") {
    std::mt19937_64 rng(13);
    const Vec3 w{0, 0, 1};

    // scattering-free reduction: kappa_bar R+ diag(1,1,-1,-1)
    for (int k = 0; k < 50; ++k) {
        const Vec3 n = tilted_normal(rng, 0.3);
        const auto g = make_geometry(n, w, w, kUp);
        auto tex = random_skin_appearance(rng);
        tex.rho_sss_bar.fill(0.0);
        const auto M = simplified_coaxial_mueller(g, tex, 0, 0.0);
        const double kbar = microfacet_kappa(g, tex.rho_s[0], tex.alpha_s) +
                            microfacet_kappa(g, tex.rho_ss[0], tex.alpha_ss);
        const auto f = polar::fresnel_from_cos(g.cos_d, 1.0, tex.eta);
        const double kr = kbar * f.r_plus();
        const double sign[4] = {1, 1, -1, -1};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(M.m[i][j] ==
                      doctest::Approx(i == j ? sign[i] * kr : 0.0).epsilon(1e-12));
    }

    // pure subsurface block keeps only the T products
    {
        const Vec3 n = tilted_normal(rng, 0.3);
        const auto g = make_geometry(n, w, w, kUp);
        auto tex = random_skin_appearance(rng);
        tex.rho_s.fill(0.0);
        tex.rho_ss.fill(0.0);
        const auto M = simplified_coaxial_mueller(g, tex, 0, 0.4);
        const auto tp = transmission_pair(g.cos_i, g.cos_o, tex.eta);
        CHECK(M.m[0][0] == doctest::Approx(0.4 * tp.ti_plus * tp.to_plus).epsilon(1e-12));
        CHECK(M.m[1][1] == doctest::Approx(0.0));
        CHECK(M.m[0][1] ==
              doctest::Approx(-0.4 * tp.ti_minus * tp.to_plus * g.diff_o.xi).epsilon(1e-12));
        CHECK(M.m[2][0] ==
              doctest::Approx(-0.4 * tp.ti_plus * tp.to_minus * g.diff_o.zeta).epsilon(1e-12));
    }

    // non-coaxial geometry is rejected
    const Vec3 wi_off = direction_about_z(0.2, 0.0);
    const auto bad = make_geometry(Vec3{0, 0, 1}, wi_off, w, kUp);
    TexelAppearance plain;
    plain.rho_s.fill(0.1);
    plain.rho_ss.fill(0.1);
    CHECK_THROWS_AS(simplified_coaxial_mueller(bad, plain, 0, 0.1), std::domain_error);
}

TEST_CASE("general P collapses to the simplified form at exact coaxial geometry") {
    std::mt19937_64 rng(17);
    const Vec3 w{0, 0, 1};
    double worst = 0.0;
    for (int k = 0; k < 400; ++k) {
        const Vec3 n = tilted_normal(rng, 5.0 * M_PI / 180.0);
        const auto g = make_geometry(n, w, w, kUp);
        const auto tex = random_skin_appearance(rng);
        const auto full = full_p(g, tex, 0);
        const auto simpl = simplified_coaxial_mueller(g, tex, 0, tex.rho_sss_bar[0]);
        worst = std::max(worst, frobenius(diff(full, simpl)) / frobenius(full));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("coaxial simplification stays below 5% at the 5.72 degree rig offset") {
    std::mt19937_64 rng(19);
    const double off = 5.72 * M_PI / 180.0;
    const Vec3 wo{0, 0, 1};
    const Vec3 wi = normalize(Vec3{0.0, std::sin(off), std::cos(off)});
    double worst = 0.0;
    for (int k = 0; k < 400; ++k) {
        const Vec3 n = tilted_normal(rng, 25.0 * M_PI / 180.0);
        const auto g = make_geometry(n, wi, wo, kUp);
        if (g.cos_i < 0.1 || g.cos_o < 0.1) continue;
        const auto tex = random_skin_appearance(rng);
        const auto full = full_p(g, tex, 0);
        const auto simpl = simplified_coaxial_mueller(g, tex, 0, tex.rho_sss_bar[0]);
        worst = std::max(worst, frobenius(diff(full, simpl)) / frobenius(full));
    }
    CHECK(worst < 0.05);
}

TEST_CASE("emitted Stokes vectors stay physical over random draws") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const StokesVector s_in{1, 1, 0, 0};
    int tested = 0;
    for (int k = 0; k < 30000 && tested < 10000; ++k) {
        const Vec3 n = tilted_normal(rng, 0.5);
        const Vec3 wi = direction_about_z(0.5 * u(rng), 2 * M_PI * u(rng));
        const Vec3 wo = direction_about_z(0.5 * u(rng), 2 * M_PI * u(rng));
        if (dot(n, wi) < 0.05 || dot(n, wo) < 0.05) continue;
        ++tested;
        const auto g = make_geometry(n, wi, wo, kUp);
        const auto tex = random_skin_appearance(rng);
        const auto out = full_p(g, tex, 0) * s_in;
        CHECK(out.s0 >= 0.0);
        if (out.s0 > 1e-12) CHECK(polar::degree_of_polarization(out) <= 1.0 + 1e-9);
    }
    CHECK(tested == 10000);
}
