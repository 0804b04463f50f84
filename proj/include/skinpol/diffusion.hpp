// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "skinpol/dual.hpp"
#include "skinpol/spectral_bio.hpp"
#include "skinpol/texture.hpp"

namespace skinpol::diffusion {

constexpr int kLadder = 9;
constexpr double kV0 = 1e-4;  // 0.01^2 mm^2, narrowest ladder variance

// v_j = 4^j v0: each wider Gaussian is two self-convolutions of the
// previous one.
std::array<double, kLadder> variance_ladder();

// Unit-integral 2D Gaussian, G(v, r) = exp(-r^2 / 2v) / (2 pi v).
inline double gauss2d(double v, double r) {
    return std::exp(-r * r / (2.0 * v)) / (2.0 * M_PI * v);
}

// Radially sampled diffusion profile (1/mm^2 amplitude over mm radii).
struct DiffusionProfile {
    std::vector<double> radii;
    std::vector<double> values;
};

// Weighted sum of ladder Gaussians. Weights may be negative; the weight
// sum tracks the profile's hemispherical integral.
struct GaussianMixture {
    std::array<double, kLadder> weights{};

    double total() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
    double eval(double r) const;
    GaussianMixture normalized() const;
};

// Average diffuse Fresnel reflectance (Egan polynomial fit, both branches).
// The two branches disagree at eta == 1 by more than 1e-6, so that input
// is rejected; physically matched boundaries are expressed with
// matched_below / eta_above == layer eta handled by the callers through
// F_dr = 0 instead of this fit.
double fresnel_diffuse_reflectance(double eta);

// Scalar multipole quantities, templated so the biophysical optimizer can
// differentiate the closed-form totals with respect to the coefficients.
// A slab of thickness d (d <= 0 means semi-infinite, dipole only) bounded
// by extrapolation constants A_top and A_bottom.
template <typename T>
struct PoleGeometryT {
    T sigma_a{}, sigma_s{};
    T sigma_t{}, alpha_prime{}, l{}, D{}, sigma_tr{};
    T zb_top{}, zb_bottom{};
    double d = 0.0;
    int n = 0;

    T spacing() const { return T(2.0) * (T(d) + zb_top + zb_bottom); }
    T z_real(int k) const { return T(double(k)) * spacing() + l; }
    T z_virtual(int k) const {
        return T(double(k)) * spacing() - l - T(2.0) * zb_top;
    }
};

template <typename T>
PoleGeometryT<T> pole_geometry(const T &sigma_a, const T &sigma_s, double d, int n,
                               double A_top, double A_bottom) {
    using std::sqrt;
    PoleGeometryT<T> g;
    g.sigma_a = sigma_a;
    g.sigma_s = sigma_s;
    g.sigma_t = sigma_a + sigma_s;
    g.alpha_prime = sigma_s / g.sigma_t;
    g.l = T(1.0) / g.sigma_t;
    g.D = T(1.0) / (T(3.0) * g.sigma_t);
    g.sigma_tr = sqrt(T(3.0) * sigma_a * g.sigma_t);
    g.zb_top = T(2.0 * A_top) * g.D;
    g.zb_bottom = T(2.0 * A_bottom) * g.D;
    g.d = d;
    g.n = d > 0.0 ? n : 0;  // semi-infinite slabs use the dipole
    return g;
}

// Hemispherical integral 2 pi Int R(r) r dr of the pole-sum profile,
// evaluated in closed form. The alpha'/2 prefactor comes from integrating
// the point-source influence term analytically.
template <typename T>
T closed_total(const PoleGeometryT<T> &g, bool transmittance) {
    using std::abs;
    using std::exp;
    T sum{};
    for (int k = -g.n; k <= g.n; ++k) {
        T zr = g.z_real(k);
        T zv = g.z_virtual(k);
        if (transmittance) {
            zr = T(g.d) - zr;
            zv = T(g.d) - zv;
        }
        const T er = exp(-g.sigma_tr * abs(zr));
        const T ev = exp(-g.sigma_tr * abs(zv));
        sum += (value_of(zr) >= 0.0 ? er : -er) - (value_of(zv) >= 0.0 ? ev : -ev);
    }
    return g.alpha_prime * T(0.5) * sum;
}

// Boundary condition of one slab face: either index-matched (an interior
// skin interface, F_dr = 0, A = 1) or a refractive interface with the
// given relative index resolved through the Egan fit.
struct Boundary {
    bool matched = true;
    double eta_rel = 1.0;

    static Boundary index_matched() { return {true, 1.0}; }
    static Boundary refractive(double eta_rel) { return {false, eta_rel}; }
    double extrapolation_A() const;
    double f_dr() const;
};

// Full multipole configuration for one layer at one band, with boundary
// extrapolation lengths resolved.
struct MultipoleConfig {
    PoleGeometryT<double> geom;
    Boundary top, bottom;
    double A_top = 1.0, A_bottom = 1.0;
    double F_dr_top = 0.0;

    double mean_free_path() const { return geom.l; }
    double transport_coefficient() const { return geom.sigma_tr; }
    std::vector<double> real_poles() const;
    std::vector<double> virtual_poles() const;
};

MultipoleConfig multipole_config(const spectral::BandOptics &layer, int n, Boundary top,
                                 Boundary bottom = Boundary::index_matched());

// Spec-shaped form: the top boundary is the layer-to-air interface (so a
// layer with eta exactly 1 is rejected by the Egan branch contract), the
// bottom boundary is index-matched.
MultipoleConfig multipole_config(const spectral::BandOptics &layer, int n);

// Swapping the upper and lower surfaces yields the backward profiles.
MultipoleConfig swap_boundaries(const MultipoleConfig &cfg);

double reflectance_profile(const MultipoleConfig &cfg, double r);
double transmittance_profile(const MultipoleConfig &cfg, double r);
double total_reflectance(const MultipoleConfig &cfg);
double total_transmittance(const MultipoleConfig &cfg);

// 256 log-spaced radii out to 30 transport mean free paths (clamped to
// [0.01, 50] mm).
DiffusionProfile sample_profile(const MultipoleConfig &cfg, bool transmittance);

// Semi-infinite dipole reflectance of the inner layer. The default top
// boundary is the layer-to-air interface so the profile is directly
// comparable with a thick outer slab; inside the two-layer stack the
// callers pass an index-matched boundary.
MultipoleConfig inner_reflectance_config(const spectral::BandOptics &layer);
MultipoleConfig inner_reflectance_config(const spectral::BandOptics &layer, Boundary top);
DiffusionProfile inner_reflectance_profile(const spectral::BandOptics &layer);
DiffusionProfile inner_reflectance_profile(const spectral::BandOptics &layer, Boundary top);

struct SogFit {
    GaussianMixture mixture;
    double rel_l2_error = 0.0;   // r-weighted relative L2 of the residual
    double condition = 0.0;      // normal-equations condition estimate
    bool ill_conditioned = false;
};

// Linear least squares on the fixed ladder minimizing the r-weighted
// residual integral, with a 1e-10 ridge. Flags (but still solves) systems
// whose condition estimate exceeds 1e12.
SogFit fit_gaussian_mixture(const DiffusionProfile &profile);

// Mixture convolution by exact variance addition, reprojected back onto
// the ladder with an integral-preserving least-squares fit.
GaussianMixture convolve(const GaussianMixture &a, const GaussianMixture &b);

struct LayerProfileSet {
    GaussianMixture R_out_f, T_out_f, R_out_b, T_out_b, R_in_f;
};

struct CombineResult {
    GaussianMixture mixture;
    int bounces_used = 0;
};

// Heterogeneous two-layer combination
//   R = R_out_f + sum_i T_out_f * R_in_f * [R_out_b * R_in_f]^i * T_out_b
// truncated when the next bounce falls below 1e-4 of the accumulated
// energy (hard cap max_bounce).
CombineResult combine_layers(const LayerProfileSet &profiles, int max_bounce = 10);

// Separable mixture blur: per-variance 1D kernels (each normalized to unit
// sum, truncated at four standard deviations) applied horizontally then
// vertically, weighted by the mixture. Clamp-to-edge borders.
Texture blur_separable(const Texture &map, const GaussianMixture &mixture,
                       double texel_pitch);

// Exact adjoint of blur_separable under the same border rule.
Texture blur_separable_adjoint(const Texture &grad, const GaussianMixture &mixture,
                               double texel_pitch);

struct SssTotalMaps {
    Texture R_out_f, T_out_f, R_out_b, T_out_b, R_in_f;
};
struct SssShapeSet {
    GaussianMixture R_out_f, T_out_f, R_out_b, T_out_b, R_in_f;  // unit weight sum
};

// Spatially varying subsurface texture: per-texel total-energy maps blurred
// through the layer chain with globally homogeneous normalized profile
// shapes. Truncation rule matches combine_layers on texture means.
Texture render_sss_texture(const SssTotalMaps &totals, const SssShapeSet &shapes,
                           double texel_pitch, int max_bounce = 10);

}  // namespace skinpol::diffusion
