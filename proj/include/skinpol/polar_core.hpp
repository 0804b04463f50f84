// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "skinpol/dual.hpp"

namespace skinpol::polar {

// Stokes vector [s0, s1, s2, s3]: radiant intensity, 0/90 linear power,
// 45/135 linear power, circular power. A physical state satisfies s0 >= 0
// and sqrt(s1^2+s2^2+s3^2) <= s0.
template <typename T>
struct StokesVectorT {
    T s0{}, s1{}, s2{}, s3{};
};
using StokesVector = StokesVectorT<double>;

template <typename T>
struct MuellerMatrixT {
    std::array<std::array<T, 4>, 4> m{};

    static MuellerMatrixT identity() {
        MuellerMatrixT r;
        for (int i = 0; i < 4; ++i) r.m[i][i] = T(1.0);
        return r;
    }

    StokesVectorT<T> operator*(const StokesVectorT<T> &s) const {
        const std::array<T, 4> in{s.s0, s.s1, s.s2, s.s3};
        std::array<T, 4> out{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) out[i] += m[i][j] * in[j];
        return {out[0], out[1], out[2], out[3]};
    }

    MuellerMatrixT operator*(const MuellerMatrixT &o) const {
        MuellerMatrixT r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                T acc{};
                for (int k = 0; k < 4; ++k) acc += m[i][k] * o.m[k][j];
                r.m[i][j] = acc;
            }
        return r;
    }

    MuellerMatrixT operator+(const MuellerMatrixT &o) const {
        MuellerMatrixT r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
        return r;
    }

    MuellerMatrixT operator*(const T &s) const {
        MuellerMatrixT r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) r.m[i][j] = m[i][j] * s;
        return r;
    }
};
using MuellerMatrix = MuellerMatrixT<double>;

enum class FresnelKind { Reflection, Transmission };

// Power reflection coefficients and squared-amplitude transmission
// coefficients of a planar dielectric interface, plus the +/-/x
// combinations the Mueller forms are built from. The transmission
// coefficients are amplitude ratios squared; energy conservation holds
// as R + (eta2 cos(theta2))/(eta1 cos(theta1)) T = 1 per polarization.
template <typename T>
struct FresnelSetT {
    T r_perp{}, r_par{};
    T t_perp{}, t_par{};
    T cos_theta2{};  // refraction angle cosine (0 under TIR)
    bool tir = false;

    T r_plus() const { return (r_perp + r_par) * T(0.5); }
    T r_minus() const { return (r_perp - r_par) * T(0.5); }
    T r_cross() const {
        using std::sqrt;
        return sqrt(r_perp * r_par);
    }
    T t_plus() const { return (t_perp + t_par) * T(0.5); }
    T t_minus() const { return (t_perp - t_par) * T(0.5); }
    T t_cross() const {
        using std::sqrt;
        return sqrt(t_perp * t_par);
    }
};
using FresnelSet = FresnelSetT<double>;

inline void check_interface(double theta1, double eta1, double eta2) {
    if (!std::isfinite(eta1) || !std::isfinite(eta2) || eta1 <= 0.0 || eta2 <= 0.0)
        throw std::invalid_argument("fresnel_set: refractive indices must be finite and positive");
    if (!std::isfinite(theta1) || theta1 < 0.0 || theta1 >= M_PI / 2.0)
        throw std::invalid_argument("fresnel_set: incidence angle must lie in [0, pi/2)");
}

// Fresnel coefficients from the incidence cosine. Every coefficient is a
// rational function of cos(theta1) and cos(theta2), so this form stays
// smooth (and differentiable) at normal incidence where the angle itself
// has a square-root singularity in the direction dot product.
template <typename T>
FresnelSetT<T> fresnel_from_cos(const T &cos1, const T &eta1, const T &eta2) {
    check_interface(std::acos(std::min(1.0, value_of(cos1))), value_of(eta1), value_of(eta2));
    using std::sqrt;

    FresnelSetT<T> f;
    const T c1 = cos1;
    const T sin2_sq = (T(1.0) - c1 * c1) * (eta1 / eta2) * (eta1 / eta2);
    if (value_of(sin2_sq) >= 1.0) {
        f.r_perp = T(1.0);
        f.r_par = T(1.0);
        f.t_perp = T(0.0);
        f.t_par = T(0.0);
        f.cos_theta2 = T(0.0);
        f.tir = true;
        return f;
    }
    const T c2 = sqrt(T(1.0) - sin2_sq);
    f.cos_theta2 = c2;

    const T a = eta1 * c1, b = eta2 * c2;  // perpendicular denominator parts
    const T c = eta1 * c2, d = eta2 * c1;  // parallel denominator parts
    const T rp = (a - b) / (a + b);
    const T rl = (c - d) / (c + d);
    f.r_perp = rp * rp;
    f.r_par = rl * rl;
    const T tp = (T(2.0) * a) / (a + b);
    const T tl = (T(2.0) * a) / (c + d);
    f.t_perp = tp * tp;
    f.t_par = tl * tl;
    return f;
}

// Fresnel coefficients for incidence angle theta1 at an eta1 -> eta2
// interface. Under total internal reflection r = 1 and t = 0, keeping the
// energy balance continuous across the critical angle.
template <typename T>
FresnelSetT<T> fresnel_set(const T &theta1, const T &eta1, const T &eta2) {
    check_interface(value_of(theta1), value_of(eta1), value_of(eta2));
    using std::cos;
    return fresnel_from_cos(cos(theta1), eta1, eta2);
}

// Coordinate conversion (rotation) Mueller matrix: a rotator acting on the
// linear-polarization block with double-angle entries.
template <typename T>
MuellerMatrixT<T> rotation_from_doubled(const T &cos2t, const T &sin2t) {
    MuellerMatrixT<T> r;
    r.m[0][0] = T(1.0);
    r.m[1][1] = cos2t;
    r.m[1][2] = sin2t;
    r.m[2][1] = -sin2t;
    r.m[2][2] = cos2t;
    r.m[3][3] = T(1.0);
    return r;
}

template <typename T>
MuellerMatrixT<T> rotation_mueller(const T &angle) {
    using std::cos;
    using std::sin;
    return rotation_from_doubled(cos(T(2.0) * angle), sin(T(2.0) * angle));
}

// Fresnel Mueller matrix. The retardation shift is pi below the Brewster
// angle of the interface and 0 above it; it is applied uniformly to both
// reflection and transmission.
template <typename T>
MuellerMatrixT<T> fresnel_mueller_from_cos(const FresnelSetT<T> &f, FresnelKind kind,
                                           double cos1, double eta1, double eta2) {
    // cos(atan2(eta2, eta1)) = eta1 / hypot(eta1, eta2)
    const double cos_brewster = eta1 / std::hypot(eta1, eta2);
    const double cd = cos1 < cos_brewster ? 1.0 : -1.0;  // cos(delta)
    T plus, minus, crossv;
    if (kind == FresnelKind::Reflection) {
        plus = f.r_plus();
        minus = f.r_minus();
        crossv = f.r_cross();
    } else {
        plus = f.t_plus();
        minus = f.t_minus();
        crossv = f.t_cross();
    }
    MuellerMatrixT<T> r;
    r.m[0][0] = plus;
    r.m[0][1] = minus;
    r.m[1][0] = minus;
    r.m[1][1] = plus;
    r.m[2][2] = crossv * T(cd);
    r.m[3][3] = crossv * T(cd);
    // sin(delta) is identically 0 for delta in {0, pi}
    return r;
}

template <typename T>
MuellerMatrixT<T> fresnel_mueller(const FresnelSetT<T> &f, FresnelKind kind,
                                  const T &theta1, const T &eta1, const T &eta2) {
    return fresnel_mueller_from_cos(f, kind, std::cos(value_of(theta1)),
                                    value_of(eta1), value_of(eta2));
}

template <typename T>
T degree_of_polarization(const StokesVectorT<T> &s) {
    if (value_of(s.s0) <= 0.0)
        throw std::domain_error("degree_of_polarization: s0 must be positive");
    using std::sqrt;
    return sqrt(s.s1 * s.s1 + s.s2 * s.s2 + s.s3 * s.s3) / s.s0;
}

// Predicted degree of polarization of diffusely transmitted light exiting
// at zenith theta_o from a medium of index eta: |T^-/T^+| of the outgoing
// Fresnel transmission at the refracted geometry. Zero at normal exitance
// and monotone increasing toward grazing.
template <typename T>
T predicted_diffuse_dop_cos(const T &eta, const T &cos_o) {
    if (value_of(eta) <= 1.0)
        throw std::invalid_argument("predicted_diffuse_dop: eta must exceed 1");
    using std::abs;
    using std::sqrt;
    // internal incidence cosine from Snell: sin_in = sin_o / eta
    const T cos_in = sqrt(T(1.0) - (T(1.0) - cos_o * cos_o) / (eta * eta));
    const FresnelSetT<T> f = fresnel_from_cos(cos_in, eta, T(1.0));
    return abs(f.t_minus() / f.t_plus());
}

template <typename T>
T predicted_diffuse_dop(const T &eta, const T &theta_o) {
    if (value_of(theta_o) < 0.0 || value_of(theta_o) >= M_PI / 2.0)
        throw std::invalid_argument("predicted_diffuse_dop: theta_o must lie in [0, pi/2)");
    using std::cos;
    return predicted_diffuse_dop_cos(eta, cos(theta_o));
}

}  // namespace skinpol::polar
