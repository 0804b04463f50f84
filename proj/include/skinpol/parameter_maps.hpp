// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>

#include "skinpol/pbssrdf.hpp"
#include "skinpol/spectral_bio.hpp"
#include "skinpol/texture.hpp"

namespace skinpol {

// Spatially varying appearance and biophysical parameters. Bounds:
// eta in [1,3], roughness in (0,1], albedos nonnegative, fractions in
// [0,1] with C_m + C_h_out <= 1.
struct ParameterMaps {
    Texture eta, alpha_s, alpha_ss;
    MultiChannel rho_s, rho_ss, rho_sss_bar;  // kChannels textures each
    Texture H;  // displacement, mm
    Texture C_m, beta_m, C_h_out, C_h_in;

    static ParameterMaps allocate(int w, int h) {
        ParameterMaps m;
        m.eta = Texture(w, h, 1.4);
        m.alpha_s = Texture(w, h, 0.5);
        m.alpha_ss = Texture(w, h, 0.9);
        m.H = Texture(w, h, 0.0);
        m.C_m = Texture(w, h, 0.0);
        m.beta_m = Texture(w, h, 0.0);
        m.C_h_out = Texture(w, h, 0.0);
        m.C_h_in = Texture(w, h, 0.0);
        for (int c = 0; c < spectral::kChannels; ++c) {
            m.rho_s.emplace_back(w, h, 0.0);
            m.rho_ss.emplace_back(w, h, 0.0);
            m.rho_sss_bar.emplace_back(w, h, 0.0);
        }
        return m;
    }

    int width() const { return eta.width; }
    int height() const { return eta.height; }

    pbssrdf::TexelAppearance texel(int x, int y) const {
        pbssrdf::TexelAppearance t;
        t.eta = eta.at(x, y);
        t.alpha_s = alpha_s.at(x, y);
        t.alpha_ss = alpha_ss.at(x, y);
        for (int c = 0; c < spectral::kChannels; ++c) {
            t.rho_s[c] = rho_s[c].at(x, y);
            t.rho_ss[c] = rho_ss[c].at(x, y);
            t.rho_sss_bar[c] = rho_sss_bar[c].at(x, y);
        }
        return t;
    }

    spectral::BiophysicalParams bio(int x, int y) const {
        return {C_m.at(x, y), beta_m.at(x, y), C_h_out.at(x, y), C_h_in.at(x, y)};
    }

    // Projects every map back into its feasible range, including the
    // C_m + C_h_out simplex constraint.
    void clamp_to_bounds() {
        auto clamp_tex = [](Texture &t, double lo, double hi) {
            for (double &v : t.data) v = std::clamp(v, lo, hi);
        };
        clamp_tex(eta, 1.0 + 1e-6, 3.0);
        clamp_tex(alpha_s, 1e-3, 1.0);
        clamp_tex(alpha_ss, 1e-3, 1.0);
        for (auto *mc : {&rho_s, &rho_ss, &rho_sss_bar})
            for (Texture &t : *mc) clamp_tex(t, 0.0, 1e6);
        clamp_tex(C_m, 0.0, 1.0);
        clamp_tex(beta_m, 0.0, 1.0);
        clamp_tex(C_h_out, 0.0, 1.0);
        clamp_tex(C_h_in, 0.0, 1.0);
        for (size_t i = 0; i < C_m.data.size(); ++i) {
            const double s = C_m.data[i] + C_h_out.data[i];
            if (s > 1.0) {
                C_m.data[i] /= s;
                C_h_out.data[i] /= s;
            }
        }
    }

    bool within_bounds() const {
        auto in = [](const Texture &t, double lo, double hi) {
            return std::all_of(t.data.begin(), t.data.end(),
                               [&](double v) { return v >= lo && v <= hi; });
        };
        bool ok = in(eta, 1.0, 3.0) && in(alpha_s, 0.0, 1.0) && in(alpha_ss, 0.0, 1.0);
        for (const auto *mc : {&rho_s, &rho_ss, &rho_sss_bar})
            for (const Texture &t : *mc) ok = ok && in(t, 0.0, 1e9);
        ok = ok && in(C_m, 0.0, 1.0) && in(beta_m, 0.0, 1.0) && in(C_h_out, 0.0, 1.0) &&
             in(C_h_in, 0.0, 1.0);
        for (size_t i = 0; i < C_m.data.size() && ok; ++i)
            ok = C_m.data[i] + C_h_out.data[i] <= 1.0 + 1e-12;
        return ok;
    }
};

}  // namespace skinpol
