// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "skinpol/diffusion.hpp"
#include "skinpol/parameter_maps.hpp"
#include "skinpol/scene.hpp"
#include "skinpol/spectral_bio.hpp"
#include "skinpol/texture.hpp"

namespace skinpol::invbio {

// Everything the biophysical forward model needs besides the maps.
struct BioModel {
    spectral::SpectralGrid grid;
    spectral::ResponseMatrix response;
    spectral::ChromophoreSpectra spectra;
    double outer_thickness_mm = 0.25;
    int pole_order = 2;
    double texel_pitch_mm = 0.2;
    double eta = 1.4;

    static BioModel from_scene(const scene::SceneConfig &scene,
                               const spectral::ChromophoreSpectra &spectra, double eta);
};

struct BioMaps {
    Texture C_m, beta_m, C_h_out, C_h_in;

    static BioMaps allocate(int w, int h, double c_m = 0.05, double beta = 0.06,
                            double c_h_out = 0.05, double c_h_in = 0.03);
    int width() const { return C_m.width; }
    int height() const { return C_m.height; }
    // clamp to [0,1] and project onto C_m + C_h_out <= 1; returns true if
    // any value needed projection.
    bool project_feasible();
};

// Per-texel closed-form layer totals of one band, templated so the
// optimizer can differentiate them against the four fractions.
template <typename T>
struct BandTotalsT {
    T R_out_f{}, T_out_f{}, R_out_b{}, T_out_b{}, R_in_f{};
};

template <typename T>
BandTotalsT<T> band_totals(const T &C_m, const T &beta_m, const T &C_h_out, const T &C_h_in,
                           int band, const BioModel &model) {
    const T sa_out = spectral::outer_absorption_band(C_m, beta_m, C_h_out, model.spectra, band);
    const T sa_in = spectral::inner_absorption_band(C_h_in, model.spectra, band);
    const auto rs = spectral::reduced_scattering(model.grid.center(band));
    const double ss_out = rs.outer;  // formula value used as 1/mm (see ledger)
    const double ss_in = rs.inner;
    const double A = diffusion::Boundary::refractive(model.eta).extrapolation_A();

    const auto g_f = diffusion::pole_geometry(sa_out, T(ss_out), model.outer_thickness_mm,
                                              model.pole_order, A, 1.0);
    const auto g_b = diffusion::pole_geometry(sa_out, T(ss_out), model.outer_thickness_mm,
                                              model.pole_order, 1.0, A);
    const auto g_in = diffusion::pole_geometry(sa_in, T(ss_in), 0.0, 0, 1.0, 1.0);

    BandTotalsT<T> t;
    t.R_out_f = diffusion::closed_total(g_f, false);
    t.T_out_f = diffusion::closed_total(g_f, true);
    t.R_out_b = diffusion::closed_total(g_b, false);
    t.T_out_b = diffusion::closed_total(g_b, true);
    t.R_in_f = diffusion::closed_total(g_in, false);
    return t;
}

// Per-texel multi-layer interaction of the totals only (no spatial blur),
// the coarse-level render. Truncates like combine_layers.
template <typename T>
T coarse_intensity(const BandTotalsT<T> &t, int max_bounce = 10) {
    T out = t.R_out_f;
    T chain = t.T_out_f * t.R_in_f;
    double accum = std::abs(value_of(out));
    for (int i = 0; i <= max_bounce; ++i) {
        const T term = chain * t.T_out_b;
        if (std::abs(value_of(term)) < 1e-4 * accum) break;
        out += term;
        accum += std::abs(value_of(term));
        chain = chain * t.R_out_b * t.R_in_f;
    }
    return out;
}

// Frozen per-band profile shapes (normalized mixtures) fit at one texel.
struct ShapeTable {
    std::vector<diffusion::SssShapeSet> bands;  // kBands entries
    std::vector<double> fit_errors;             // 5 per band, relative L2
    size_t median_texel = 0;
};

// Fits the five per-layer SoG shapes per band at the median-intensity
// texel of the coarse render (ties broken toward the lowest index).
ShapeTable fit_shapes(const BioModel &model, const BioMaps &maps);

// Fine-level forward: blur chain over per-texel totals with the frozen
// shapes, projected to the camera channels.
MultiChannel render_bio_channels(const BioModel &model, const BioMaps &maps,
                                 const ShapeTable &shapes, bool fine,
                                 std::vector<Texture> *bands_out = nullptr);

struct BioSchedule {
    int coarse_iterations = 1000;
    int full_iterations = 250;
    int coarse_downsample = 8;
    double learning_rate = 0.02;
    bool verbose = false;
};

struct BioOptState {
    BioMaps maps;
    ShapeTable shapes;
    double residual = 0.0;
    int sog_refits = 0;
};

// One exact least-squares refit of the SoG shapes from the current maps.
void fit_sog_step(const BioModel &model, BioOptState &state);

// One projected gradient step on the photometric residual against the
// 6-channel target; fine selects the blur-chain render. Returns the
// residual after the step.
double fit_bio_step(const BioModel &model, BioOptState &state, const MultiChannel &target,
                    bool fine, double &lr);

struct BioResult {
    BioMaps maps;
    ShapeTable shapes;
    std::vector<double> trace;  // residual per alternation
    bool aborted = false;
    std::string diagnostics;
};

// Coarse phase on downsampled maps (totals only), then full-resolution
// alternations of SoG refits and bio steps. Aborts after 50 consecutive
// non-decreasing alternations.
BioResult coordinate_descent(const BioModel &model, const MultiChannel &target,
                             const BioSchedule &schedule, const BioMaps &init);

// Residual of the current state against a target (sum of squared channel
// differences over texels).
double bio_residual(const BioModel &model, const BioMaps &maps, const ShapeTable &shapes,
                    const MultiChannel &target, bool fine);

// Gradient of bio_residual with respect to the four fraction maps, with
// the shapes frozen.
void bio_residual_gradient(const BioModel &model, const BioMaps &maps,
                           const ShapeTable &shapes, const MultiChannel &target, bool fine,
                           BioMaps &grad);

struct Edit {
    std::string parameter;  // C_m | beta_m | C_h_out | C_h_in
    std::string op;         // scale | set
    double value = 1.0;
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive region; -1 = full extent
};

std::vector<Edit> load_edits(const std::string &json_path);

// Extracts the biophysical maps from a full parameter-map set.
BioMaps bio_maps_from_parameters(const ParameterMaps &params);

// Applies scalar edits with clamping and simplex projection; appends a
// warning line per clipped edit.
BioMaps edit_parameters(const BioMaps &maps, const std::vector<Edit> &edits,
                        std::vector<std::string> *warnings = nullptr);

}  // namespace skinpol::invbio
