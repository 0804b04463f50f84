// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace skinpol {

// Forward-mode dual number carrying N partial derivatives alongside the
// value. The whole polarimetric render path is templated on its scalar
// type, so seeding a Dual per texel yields loss gradients that are exact
// up to floating point (no finite differencing in the optimizer).
template <size_t N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}

    static Dual seed(double value, size_t slot) {
        Dual r(value);
        r.d[slot] = 1.0;
        return r;
    }

    Dual operator-() const {
        Dual r(-v);
        for (size_t i = 0; i < N; ++i) r.d[i] = -d[i];
        return r;
    }
    Dual &operator+=(const Dual &o) {
        v += o.v;
        for (size_t i = 0; i < N; ++i) d[i] += o.d[i];
        return *this;
    }
    Dual &operator-=(const Dual &o) {
        v -= o.v;
        for (size_t i = 0; i < N; ++i) d[i] -= o.d[i];
        return *this;
    }
    Dual &operator*=(const Dual &o) {
        for (size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
        v *= o.v;
        return *this;
    }
    Dual &operator/=(const Dual &o) {
        const double inv = 1.0 / o.v;
        for (size_t i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
        v *= inv;
        return *this;
    }

    friend Dual operator+(Dual a, const Dual &b) { return a += b; }
    friend Dual operator-(Dual a, const Dual &b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual &b) { return a *= b; }
    friend Dual operator/(Dual a, const Dual &b) { return a /= b; }

    friend bool operator<(const Dual &a, const Dual &b) { return a.v < b.v; }
    friend bool operator>(const Dual &a, const Dual &b) { return a.v > b.v; }
    friend bool operator<=(const Dual &a, const Dual &b) { return a.v <= b.v; }
    friend bool operator>=(const Dual &a, const Dual &b) { return a.v >= b.v; }
};

template <size_t N>
Dual<N> chain(double f, double dfdx, const Dual<N> &x) {
    Dual<N> r(f);
    for (size_t i = 0; i < N; ++i) r.d[i] = dfdx * x.d[i];
    return r;
}

template <size_t N>
Dual<N> sqrt(const Dual<N> &x) {
    const double s = std::sqrt(x.v);
    return chain(s, s > 0.0 ? 0.5 / s : 0.0, x);
}
template <size_t N>
Dual<N> exp(const Dual<N> &x) {
    const double e = std::exp(x.v);
    return chain(e, e, x);
}
template <size_t N>
Dual<N> log(const Dual<N> &x) {
    return chain(std::log(x.v), 1.0 / x.v, x);
}
template <size_t N>
Dual<N> sin(const Dual<N> &x) {
    return chain(std::sin(x.v), std::cos(x.v), x);
}
template <size_t N>
Dual<N> cos(const Dual<N> &x) {
    return chain(std::cos(x.v), -std::sin(x.v), x);
}
template <size_t N>
Dual<N> tan(const Dual<N> &x) {
    const double c = std::cos(x.v);
    return chain(std::tan(x.v), 1.0 / (c * c), x);
}
template <size_t N>
Dual<N> asin(const Dual<N> &x) {
    return chain(std::asin(x.v), 1.0 / std::sqrt(1.0 - x.v * x.v), x);
}
template <size_t N>
Dual<N> acos(const Dual<N> &x) {
    return chain(std::acos(x.v), -1.0 / std::sqrt(1.0 - x.v * x.v), x);
}
template <size_t N>
Dual<N> abs(const Dual<N> &x) {
    return x.v < 0.0 ? -x : x;
}
template <size_t N>
Dual<N> atan2(const Dual<N> &y, const Dual<N> &x) {
    const double denom = x.v * x.v + y.v * y.v;
    Dual<N> r(std::atan2(y.v, x.v));
    for (size_t i = 0; i < N; ++i)
        r.d[i] = (x.v * y.d[i] - y.v * x.d[i]) / denom;
    return r;
}
template <size_t N>
Dual<N> pow(const Dual<N> &x, double e) {
    return chain(std::pow(x.v, e), e * std::pow(x.v, e - 1.0), x);
}

template <size_t N>
double value_of(const Dual<N> &x) {
    return x.v;
}
inline double value_of(double x) { return x; }

}  // namespace skinpol
