// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace skinpol::spectral {

constexpr int kBands = 15;
constexpr int kChannels = 6;

// Fifteen uniform bands tiling [420, 670] nm.
struct SpectralGrid {
    double lo_nm = 420.0;
    double hi_nm = 670.0;

    double band_width() const { return (hi_nm - lo_nm) / kBands; }
    double center(int band) const { return lo_nm + (band + 0.5) * band_width(); }
    int band_containing(double lambda_nm) const;
    std::array<double, kBands> centers() const;
};

// Per-band absorption coefficients (1/mm) of the five skin chromophores,
// sampled at the grid band centers from the shipped data file.
struct ChromophoreSpectra {
    std::array<double, kBands> oxy{}, deoxy{}, eumelanin{}, pheomelanin{}, base{};

    // Loads the tabular data file (wavelength_nm oxy deoxy eumelanin
    // pheomelanin base, all 1/mm), interpolates to band centers and
    // validates the spectral-shape invariants.
    static ChromophoreSpectra load(const std::string &path, const SpectralGrid &grid);
    static std::string default_path();

    void validate(const SpectralGrid &grid) const;
};

// Volume fractions of the two-layer skin model. The oxy-hemoglobin
// fraction gamma is fixed at 0.75 for both layers.
struct BiophysicalParams {
    double C_m = 0.0;      // melanin fraction, outer layer
    double beta_m = 0.0;   // eumelanin fraction of melanin
    double C_h_out = 0.0;  // hemoglobin fraction, outer layer
    double C_h_in = 0.0;   // hemoglobin fraction, inner layer
    static constexpr double gamma = 0.75;

    void validate() const;
};

// Scalar optical coefficients of one layer at one band.
struct BandOptics {
    double sigma_a = 0.0;          // 1/mm
    double sigma_s_reduced = 0.0;  // 1/mm
    double thickness_d = 0.0;      // mm; <= 0 means semi-infinite
    double eta = 1.4;
};

// Per-band layer description assembled from biophysical parameters.
struct LayerOptics {
    std::array<double, kBands> sigma_a{};          // 1/mm
    std::array<double, kBands> sigma_s_reduced{};  // 1/mm
    double thickness_d = 0.0;                      // mm (outer layer only)
    double eta = 1.4;

    BandOptics band(int b) const { return {sigma_a[b], sigma_s_reduced[b], thickness_d, eta}; }
};

// Outer-layer absorption: melanin mix plus outer hemoglobin plus baseline
// remainder. Affine in every fraction parameter.
template <typename T>
T outer_absorption_band(const T &C_m, const T &beta_m, const T &C_h_out,
                        const ChromophoreSpectra &s, int band) {
    constexpr double g = BiophysicalParams::gamma;
    return C_m * (beta_m * s.eumelanin[band] + (T(1.0) - beta_m) * s.pheomelanin[band]) +
           C_h_out * (g * s.oxy[band] + (1.0 - g) * s.deoxy[band]) +
           (T(1.0) - C_m - C_h_out) * s.base[band];
}

// Inner-layer absorption: hemoglobin plus baseline remainder.
template <typename T>
T inner_absorption_band(const T &C_h_in, const ChromophoreSpectra &s, int band) {
    constexpr double g = BiophysicalParams::gamma;
    return C_h_in * (g * s.oxy[band] + (1.0 - g) * s.deoxy[band]) +
           (T(1.0) - C_h_in) * s.base[band];
}

std::array<double, kBands> outer_absorption(const BiophysicalParams &p,
                                            const ChromophoreSpectra &s);
std::array<double, kBands> inner_absorption(const BiophysicalParams &p,
                                            const ChromophoreSpectra &s);

// Reduced scattering power-law fit of the outer layer at wavelength
// lambda (nm); the inner layer scatters at half the outer rate. The fit
// value is interpreted as 1/mm throughout the engine: at 1/cm the outer
// layer would be optically thinner than one mean free path over most of
// the plausible skin range and the multipole transmittance degenerates.
struct ReducedScattering {
    double outer = 0.0;  // 1/mm
    double inner = 0.0;  // 1/mm
};
ReducedScattering reduced_scattering(double lambda_nm);

// Assembles both layers' per-band optics in 1/mm.
struct TwoLayerOptics {
    LayerOptics outer;
    LayerOptics inner;  // semi-infinite (thickness_d = 0)
};
TwoLayerOptics two_layer_optics(const BiophysicalParams &p, const ChromophoreSpectra &s,
                                const SpectralGrid &grid, double outer_thickness_mm,
                                double eta);

// 6x15 camera response. Rows are camera channels ordered
// [B_lo, B_hi, G_lo, G_hi, R_lo, R_hi]; each RGB channel is split into a
// lower and an upper half-band curve.
struct ResponseMatrix {
    std::array<std::array<double, kBands>, kChannels> rows{};

    static ResponseMatrix synthetic_default(const SpectralGrid &grid);
    // Nonnegativity and full channel rank; throws on violation.
    void validate() const;
};

std::array<double, kChannels> channel_project(const std::vector<double> &spectral,
                                              const ResponseMatrix &response);
std::array<double, kChannels> channel_project(const std::array<double, kBands> &spectral,
                                              const ResponseMatrix &response);

// Three-channel display projection: sums the low/high half-channel pairs
// back into R, G, B.
std::array<double, 3> display_project(const std::array<double, kChannels> &channels);

}  // namespace skinpol::spectral
