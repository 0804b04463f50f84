// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace skinpol {

// Row-major single-channel 2D texture. Multi-channel data is stored as a
// vector of these (one texture per band/channel) so every stage can slice
// channels without striding games.
struct Texture {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Texture() = default;
    Texture(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    double &at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    // Clamp-to-edge access, used by the separable blur and stencil code.
    double clamped(int x, int y) const {
        if (x < 0) x = 0;
        if (x >= width) x = width - 1;
        if (y < 0) y = 0;
        if (y >= height) y = height - 1;
        return at(x, y);
    }

    size_t size() const { return data.size(); }
    bool same_shape(const Texture &o) const {
        return width == o.width && height == o.height;
    }

    Texture &operator+=(const Texture &o) {
        assert(same_shape(o));
        for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }
    Texture &operator*=(double s) {
        for (double &v : data) v *= s;
        return *this;
    }
    friend Texture operator*(Texture t, const Texture &o) {
        assert(t.same_shape(o));
        for (size_t i = 0; i < t.data.size(); ++i) t.data[i] *= o.data[i];
        return t;
    }
};

using MultiChannel = std::vector<Texture>;  // one Texture per channel/band

}  // namespace skinpol
