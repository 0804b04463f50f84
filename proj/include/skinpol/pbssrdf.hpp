// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "skinpol/polar_core.hpp"
#include "skinpol/spectral_bio.hpp"
#include "skinpol/vec3.hpp"

namespace skinpol::pbssrdf {

using polar::FresnelKind;
using polar::FresnelSetT;
using polar::MuellerMatrixT;

// Doubled polarimetric azimuth (cos 2phi, sin 2phi) of vector u in the
// Stokes frame (x_axis, y_axis). Computed rationally so the values and
// derivatives stay finite near the frame axis; exactly on-axis the
// azimuth is degenerate and (1, 0) is returned.
template <typename T>
struct DoubledAzimuth {
    T xi;    // cos 2phi
    T zeta;  // sin 2phi
};

template <typename T>
DoubledAzimuth<T> doubled_azimuth(const Vec3T<T> &u, const Vec3T<T> &x_axis,
                                  const Vec3T<T> &y_axis) {
    const T px = dot(u, x_axis);
    const T py = dot(u, y_axis);
    const T rho2 = px * px + py * py;
    if (value_of(rho2) < 1e-24) return {T(1.0), T(0.0)};
    return {(px * px - py * py) / rho2, T(2.0) * px * py / rho2};
}

// Stokes frame of a propagation direction d: y is the camera up vector
// projected perpendicular to d, x completes the right-handed frame
// (x cross y = d).
template <typename T>
struct StokesFrame {
    Vec3T<T> x, y, d;
};

template <typename T>
StokesFrame<T> stokes_frame(const Vec3T<T> &propagation, const Vec3T<T> &up) {
    StokesFrame<T> f;
    f.d = propagation;
    const Vec3T<T> yp = up - f.d * dot(up, f.d);
    f.y = normalize(yp);
    f.x = cross(f.y, f.d);
    return f;
}

// All per-interaction geometry needed by the reflectance terms: cosines
// against the shading normal, the halfway vector, the difference angle,
// and the doubled azimuths of the specular (halfway) and diffuse (normal)
// lobes in the incident and exitant Stokes frames.
template <typename T>
struct InteractionGeometryT {
    Vec3T<T> n, wi, wo, h;
    T cos_i, cos_o;      // n.wi, n.wo
    T cos_h;             // n.h
    T cos_d;             // h.wi
    DoubledAzimuth<T> spec_i, spec_o;  // halfway-lobe azimuths
    DoubledAzimuth<T> diff_i, diff_o;  // normal-lobe azimuths

    double theta_i() const { return std::acos(value_of(cos_i)); }
    double theta_o() const { return std::acos(value_of(cos_o)); }
    double theta_h() const { return std::acos(value_of(cos_h)); }
    double theta_d() const { return std::acos(std::min(1.0, value_of(cos_d))); }
};
using InteractionGeometry = InteractionGeometryT<double>;

template <typename T>
InteractionGeometryT<T> make_geometry(const Vec3T<T> &n, const Vec3T<T> &wi,
                                      const Vec3T<T> &wo, const Vec3T<T> &up) {
    InteractionGeometryT<T> g;
    g.n = n;
    g.wi = wi;
    g.wo = wo;
    g.h = normalize(wi + wo);
    g.cos_i = dot(n, wi);
    g.cos_o = dot(n, wo);
    g.cos_h = dot(n, g.h);
    g.cos_d = dot(g.h, wi);

    const StokesFrame<T> fi = stokes_frame(-wi, up);  // incident light travels along -wi
    const StokesFrame<T> fo = stokes_frame(wo, up);
    g.spec_i = doubled_azimuth(g.h, fi.x, fi.y);
    g.spec_o = doubled_azimuth(g.h, fo.x, fo.y);
    g.diff_i = doubled_azimuth(n, fi.x, fi.y);
    g.diff_o = doubled_azimuth(n, fo.x, fo.y);
    return g;
}

// Per-texel appearance parameters; albedos are per camera channel.
struct TexelAppearance {
    double eta = 1.4;
    std::array<double, spectral::kChannels> rho_s{};
    double alpha_s = 0.5;
    std::array<double, spectral::kChannels> rho_ss{};
    double alpha_ss = 0.9;
    std::array<double, spectral::kChannels> rho_sss_bar{};

    void validate() const {
        auto check_albedo = [](const std::array<double, spectral::kChannels> &a) {
            for (double v : a)
                if (v < 0.0) throw std::invalid_argument("TexelAppearance: albedos must be nonnegative");
        };
        check_albedo(rho_s);
        check_albedo(rho_ss);
        check_albedo(rho_sss_bar);
        if (alpha_s <= 0.0 || alpha_s > 1.0 || alpha_ss <= 0.0 || alpha_ss > 1.0)
            throw std::invalid_argument("TexelAppearance: roughness must lie in (0,1]");
        if (eta < 1.0 || eta > 3.0)
            throw std::invalid_argument("TexelAppearance: eta must lie in [1,3]");
    }
};

// Isotropic GGX normal distribution, evaluated from cos(theta_h).
template <typename T>
T ggx_distribution(const T &cos_h, const T &alpha) {
    const T a2 = alpha * alpha;
    const T t = cos_h * cos_h * (a2 - T(1.0)) + T(1.0);
    return a2 / (T(M_PI) * t * t);
}

// Smith masking-shadowing, separable product of per-direction terms.
template <typename T>
T smith_g1(const T &cos_v, const T &alpha) {
    using std::sqrt;
    const T a2 = alpha * alpha;
    return T(2.0) * cos_v / (cos_v + sqrt(a2 + (T(1.0) - a2) * cos_v * cos_v));
}

template <typename T>
T smith_g(const T &cos_i, const T &cos_o, const T &alpha) {
    return smith_g1(cos_i, alpha) * smith_g1(cos_o, alpha);
}

// Microfacet lobe magnitude rho * D * G / (4 cos_i cos_o).
template <typename T>
T microfacet_kappa(const InteractionGeometryT<T> &geom, const T &rho, const T &alpha) {
    if (value_of(geom.cos_i) < 1e-6 || value_of(geom.cos_o) < 1e-6)
        throw std::domain_error("microfacet_kappa: grazing geometry");
    return rho * ggx_distribution(geom.cos_h, alpha) * smith_g(geom.cos_i, geom.cos_o, alpha) /
           (T(4.0) * geom.cos_i * geom.cos_o);
}

// Rotation into the interaction plane: C(phi - pi/2) built from the
// doubled azimuth, using cos(2phi - pi) = -xi and sin(2phi - pi) = -zeta.
template <typename T>
MuellerMatrixT<T> rotate_in(const DoubledAzimuth<T> &a) {
    return polar::rotation_from_doubled(-a.xi, -a.zeta);
}
// Rotation out of the interaction plane: C(-(phi - pi/2)).
template <typename T>
MuellerMatrixT<T> rotate_out(const DoubledAzimuth<T> &a) {
    return polar::rotation_from_doubled(-a.xi, a.zeta);
}

// Polarized microfacet lobe kappa * C(-vphi_o) F^R(theta_d; eta) C(vphi_i),
// shared by the specular and single-scattering terms.
template <typename T>
MuellerMatrixT<T> microfacet_lobe_mueller(const InteractionGeometryT<T> &geom,
                                          const T &eta, const T &kappa) {
    const FresnelSetT<T> f = polar::fresnel_from_cos(geom.cos_d, T(1.0), eta);
    const MuellerMatrixT<T> fr = polar::fresnel_mueller_from_cos(
        f, FresnelKind::Reflection, value_of(geom.cos_d), 1.0, value_of(eta));
    return (rotate_out(geom.spec_o) * fr * rotate_in(geom.spec_i)) * kappa;
}

template <typename T>
MuellerMatrixT<T> specular_mueller(const InteractionGeometryT<T> &geom,
                                   const TexelAppearance &tex, int channel) {
    const T kappa = microfacet_kappa(geom, T(tex.rho_s[channel]), T(tex.alpha_s));
    return microfacet_lobe_mueller(geom, T(tex.eta), kappa);
}

template <typename T>
MuellerMatrixT<T> single_scatter_mueller(const InteractionGeometryT<T> &geom,
                                         const TexelAppearance &tex, int channel) {
    const T kappa = microfacet_kappa(geom, T(tex.rho_ss[channel]), T(tex.alpha_ss));
    return microfacet_lobe_mueller(geom, T(tex.eta), kappa);
}

// In/out Fresnel transmission pair of the subsurface path: entry at the
// incidence cosine (air -> skin), exit at the refracted internal cosine
// (skin -> air).
template <typename T>
struct TransmissionPair {
    T ti_plus, ti_minus, to_plus, to_minus;
};

template <typename T>
TransmissionPair<T> transmission_pair(const T &cos_i, const T &cos_o, const T &eta_i,
                                      const T &eta_o) {
    using std::sqrt;
    const FresnelSetT<T> fi = polar::fresnel_from_cos(cos_i, T(1.0), eta_i);
    const T cos_int = sqrt(T(1.0) - (T(1.0) - cos_o * cos_o) / (eta_o * eta_o));
    const FresnelSetT<T> fo = polar::fresnel_from_cos(cos_int, eta_o, T(1.0));
    return {fi.t_plus(), fi.t_minus(), fo.t_plus(), fo.t_minus()};
}

template <typename T>
TransmissionPair<T> transmission_pair(const T &cos_i, const T &cos_o, const T &eta) {
    return transmission_pair(cos_i, cos_o, eta, eta);
}

// Subsurface Mueller matrix for one incident/exitant point pair, built
// entry by entry; the last row and column are identically zero (complete
// depolarization inside the medium).
template <typename T>
MuellerMatrixT<T> sss_mueller(const InteractionGeometryT<T> &geom_in,
                              const InteractionGeometryT<T> &geom_out, const T &eta_i,
                              const T &eta_o, const T &profile_value) {
    const TransmissionPair<T> t = transmission_pair(geom_in.cos_i, geom_out.cos_o, eta_i, eta_o);
    const T xi_i = geom_in.diff_i.xi, zeta_i = geom_in.diff_i.zeta;
    const T xi_o = geom_out.diff_o.xi, zeta_o = geom_out.diff_o.zeta;

    MuellerMatrixT<T> m;
    m.m[0][0] = t.ti_plus * t.to_plus;
    m.m[0][1] = -t.ti_minus * t.to_plus * xi_i;
    m.m[0][2] = -t.ti_minus * t.to_plus * zeta_i;
    m.m[1][0] = -t.ti_plus * t.to_minus * xi_o;
    m.m[1][1] = t.ti_minus * t.to_minus * xi_i * xi_o;
    m.m[1][2] = t.ti_minus * t.to_minus * zeta_i * xi_o;
    m.m[2][0] = -t.ti_plus * t.to_minus * zeta_o;
    m.m[2][1] = t.ti_minus * t.to_minus * xi_i * zeta_o;
    m.m[2][2] = t.ti_minus * t.to_minus * zeta_i * zeta_o;
    return m * profile_value;
}

constexpr double kCoaxialThresholdRad = 6.0 * M_PI / 180.0;

template <typename T>
void require_coaxial(const InteractionGeometryT<T> &geom,
                     double threshold = kCoaxialThresholdRad) {
    const double c = value_of(dot(geom.wi, geom.wo));
    if (c < std::cos(threshold))
        throw std::domain_error("simplified_coaxial_mueller: geometry is not near-coaxial");
}

// Near-coaxial simplification of P = P_s + P_ss + P_sss: microfacet terms
// collapse to kappa R+ diag(1,1,-1,-1) and the subsurface block keeps only
// the T++ / T-+ products with the exitant diffuse azimuth.
template <typename T>
MuellerMatrixT<T> simplified_coaxial_mueller(const InteractionGeometryT<T> &geom,
                                             const TexelAppearance &tex, int channel,
                                             const T &sss_sum,
                                             double threshold = kCoaxialThresholdRad) {
    require_coaxial(geom, threshold);
    const T eta = T(tex.eta);
    const T kappa_bar = microfacet_kappa(geom, T(tex.rho_s[channel]), T(tex.alpha_s)) +
                        microfacet_kappa(geom, T(tex.rho_ss[channel]), T(tex.alpha_ss));
    const FresnelSetT<T> fr = polar::fresnel_from_cos(geom.cos_d, T(1.0), eta);
    const T kr = kappa_bar * fr.r_plus();

    const TransmissionPair<T> t = transmission_pair(geom.cos_i, geom.cos_o, eta);
    const T xi = geom.diff_o.xi, zeta = geom.diff_o.zeta;

    MuellerMatrixT<T> m;
    m.m[0][0] = kr + sss_sum * t.ti_plus * t.to_plus;
    m.m[0][1] = -sss_sum * t.ti_minus * t.to_plus * xi;
    m.m[0][2] = sss_sum * t.ti_minus * t.to_plus * zeta;
    m.m[1][0] = -sss_sum * t.ti_plus * t.to_minus * xi;
    m.m[1][1] = kr;
    m.m[2][0] = -sss_sum * t.ti_plus * t.to_minus * zeta;
    m.m[2][2] = -kr;
    m.m[3][3] = -kr;
    return m;
}

}  // namespace skinpol::pbssrdf
