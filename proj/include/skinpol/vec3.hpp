// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace skinpol {

template <typename T>
struct Vec3T {
    T x{}, y{}, z{};

    Vec3T() = default;
    Vec3T(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

    Vec3T operator+(const Vec3T &o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3T operator-(const Vec3T &o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3T operator*(const T &s) const { return {x * s, y * s, z * s}; }
    Vec3T operator-() const { return {-x, -y, -z}; }
};

template <typename T>
T dot(const Vec3T<T> &a, const Vec3T<T> &b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename T>
Vec3T<T> cross(const Vec3T<T> &a, const Vec3T<T> &b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename T>
T norm(const Vec3T<T> &a) {
    using std::sqrt;
    return sqrt(dot(a, a));
}

template <typename T>
Vec3T<T> normalize(const Vec3T<T> &a) {
    const T inv = T(1.0) / norm(a);
    return a * inv;
}

using Vec3 = Vec3T<double>;

}  // namespace skinpol
