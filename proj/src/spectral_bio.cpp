// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#include "skinpol/spectral_bio.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace skinpol::spectral {

int SpectralGrid::band_containing(double lambda_nm) const {
    if (lambda_nm < lo_nm || lambda_nm > hi_nm)
        throw std::out_of_range("SpectralGrid: wavelength outside grid");
    int b = static_cast<int>((lambda_nm - lo_nm) / band_width());
    return std::min(b, kBands - 1);
}

std::array<double, kBands> SpectralGrid::centers() const {
    std::array<double, kBands> c{};
    for (int b = 0; b < kBands; ++b) c[b] = center(b);
    return c;
}

std::string ChromophoreSpectra::default_path() {
    if (const char *env = std::getenv("SKINPOL_DATA"); env && *env)
        return std::string(env);
    return std::string(SKINPOL_DATA_DIR) + "/chromophores.txt";
}

namespace {

struct DataRow {
    double lambda;
    std::array<double, 5> v;
};

double interp(const std::vector<DataRow> &rows, double lambda, int col) {
    if (lambda <= rows.front().lambda) return rows.front().v[col];
    if (lambda >= rows.back().lambda) return rows.back().v[col];
    for (size_t i = 1; i < rows.size(); ++i) {
        if (lambda <= rows[i].lambda) {
            const double t = (lambda - rows[i - 1].lambda) / (rows[i].lambda - rows[i - 1].lambda);
            return (1.0 - t) * rows[i - 1].v[col] + t * rows[i].v[col];
        }
    }
    return rows.back().v[col];
}

}  // namespace

ChromophoreSpectra ChromophoreSpectra::load(const std::string &path, const SpectralGrid &grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("chromophore data file not found: " + path);

    std::vector<DataRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        DataRow r{};
        if (!(ss >> r.lambda >> r.v[0] >> r.v[1] >> r.v[2] >> r.v[3] >> r.v[4]))
            throw std::runtime_error("chromophore data file: malformed row in " + path);
        rows.push_back(r);
    }
    if (rows.size() < 2) throw std::runtime_error("chromophore data file: too few rows");
    if (!std::is_sorted(rows.begin(), rows.end(),
                        [](const DataRow &a, const DataRow &b) { return a.lambda < b.lambda; }))
        throw std::runtime_error("chromophore data file: wavelengths must be increasing");

    ChromophoreSpectra s;
    for (int b = 0; b < kBands; ++b) {
        const double c = grid.center(b);
        s.oxy[b] = interp(rows, c, 0);
        s.deoxy[b] = interp(rows, c, 1);
        s.eumelanin[b] = interp(rows, c, 2);
        s.pheomelanin[b] = interp(rows, c, 3);
        s.base[b] = interp(rows, c, 4);
    }
    s.validate(grid);
    return s;
}

void ChromophoreSpectra::validate(const SpectralGrid &grid) const {
    auto all_positive = [](const std::array<double, kBands> &a) {
        return std::all_of(a.begin(), a.end(), [](double v) { return v > 0.0; });
    };
    if (!all_positive(oxy) || !all_positive(deoxy) || !all_positive(eumelanin) ||
        !all_positive(pheomelanin) || !all_positive(base))
        throw std::runtime_error("chromophore spectra: all coefficients must be positive");

    for (int b = 1; b < kBands; ++b) {
        if (eumelanin[b] >= eumelanin[b - 1] || pheomelanin[b] >= pheomelanin[b - 1])
            throw std::runtime_error("chromophore spectra: melanin absorption must decrease with wavelength");
    }
    const int b560 = grid.band_containing(560.0);
    const int b650 = grid.band_containing(650.0);
    if (oxy[b560] < 10.0 * oxy[b650])
        throw std::runtime_error("chromophore spectra: oxy-hemoglobin 560/650 nm contrast below 10x");
}

void BiophysicalParams::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(C_m) || !in01(beta_m) || !in01(C_h_out) || !in01(C_h_in))
        throw std::invalid_argument("BiophysicalParams: fractions must lie in [0,1]");
    if (C_m + C_h_out > 1.0)
        throw std::invalid_argument("BiophysicalParams: C_m + C_h_out must not exceed 1");
}

std::array<double, kBands> outer_absorption(const BiophysicalParams &p,
                                            const ChromophoreSpectra &s) {
    p.validate();
    std::array<double, kBands> out{};
    for (int b = 0; b < kBands; ++b)
        out[b] = outer_absorption_band(p.C_m, p.beta_m, p.C_h_out, s, b);
    return out;
}

std::array<double, kBands> inner_absorption(const BiophysicalParams &p,
                                            const ChromophoreSpectra &s) {
    if (p.C_h_in < 0.0 || p.C_h_in > 1.0)
        throw std::invalid_argument("inner_absorption: C_h_in must lie in [0,1]");
    std::array<double, kBands> out{};
    for (int b = 0; b < kBands; ++b) out[b] = inner_absorption_band(p.C_h_in, s, b);
    return out;
}

ReducedScattering reduced_scattering(double lambda_nm) {
    if (lambda_nm < 420.0 || lambda_nm > 670.0)
        throw std::out_of_range("reduced_scattering: wavelength outside [420,670] nm");
    ReducedScattering r;
    r.outer = 14.74 * std::pow(lambda_nm, -0.22) + 2.2e11 * std::pow(lambda_nm, -4.0);
    r.inner = 0.5 * r.outer;
    return r;
}

TwoLayerOptics two_layer_optics(const BiophysicalParams &p, const ChromophoreSpectra &s,
                                const SpectralGrid &grid, double outer_thickness_mm,
                                double eta) {
    if (outer_thickness_mm <= 0.0)
        throw std::invalid_argument("two_layer_optics: outer thickness must be positive");
    TwoLayerOptics two;
    two.outer.thickness_d = outer_thickness_mm;
    two.outer.eta = eta;
    two.inner.thickness_d = 0.0;
    two.inner.eta = eta;
    two.outer.sigma_a = outer_absorption(p, s);
    two.inner.sigma_a = inner_absorption(p, s);
    for (int b = 0; b < kBands; ++b) {
        const ReducedScattering rs = reduced_scattering(grid.center(b));
        two.outer.sigma_s_reduced[b] = rs.outer;
        two.inner.sigma_s_reduced[b] = rs.inner;
    }
    return two;
}

ResponseMatrix ResponseMatrix::synthetic_default(const SpectralGrid &grid) {
    // Six unimodal half-channel curves: RGB bumps split into a lower and an
    // upper half, mimicking a left/right anaglyph-filter pair over sRGB
    // sensors. Each row is normalized to unit sum.
    struct Bump {
        double center, sigma;
    };
    const std::array<Bump, kChannels> bumps{{
        {440.0, 14.0},  // B low
        {478.0, 14.0},  // B high
        {515.0, 15.0},  // G low
        {556.0, 15.0},  // G high
        {596.0, 16.0},  // R low
        {642.0, 16.0},  // R high
    }};
    ResponseMatrix r;
    for (int c = 0; c < kChannels; ++c) {
        double sum = 0.0;
        for (int b = 0; b < kBands; ++b) {
            const double x = (grid.center(b) - bumps[c].center) / bumps[c].sigma;
            r.rows[c][b] = std::exp(-0.5 * x * x);
            sum += r.rows[c][b];
        }
        for (int b = 0; b < kBands; ++b) r.rows[c][b] /= sum;
    }
    r.validate();
    return r;
}

void ResponseMatrix::validate() const {
    Eigen::MatrixXd m(kChannels, kBands);
    for (int c = 0; c < kChannels; ++c)
        for (int b = 0; b < kBands; ++b) {
            if (rows[c][b] < 0.0)
                throw std::runtime_error("ResponseMatrix: responses must be nonnegative");
            m(c, b) = rows[c][b];
        }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double tol = 1e-10 * svd.singularValues()(0);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > tol) ++rank;
    if (rank < kChannels)
        throw std::runtime_error("ResponseMatrix: channel responses are rank deficient");
}

std::array<double, kChannels> channel_project(const std::vector<double> &spectral,
                                              const ResponseMatrix &response) {
    if (spectral.size() != kBands)
        throw std::invalid_argument("channel_project: expected 15 spectral bands");
    std::array<double, kChannels> out{};
    for (int c = 0; c < kChannels; ++c)
        for (int b = 0; b < kBands; ++b) out[c] += response.rows[c][b] * spectral[b];
    return out;
}

std::array<double, kChannels> channel_project(const std::array<double, kBands> &spectral,
                                              const ResponseMatrix &response) {
    return channel_project(std::vector<double>(spectral.begin(), spectral.end()), response);
}

std::array<double, 3> display_project(const std::array<double, kChannels> &ch) {
    // [B_lo,B_hi,G_lo,G_hi,R_lo,R_hi] -> RGB
    return {ch[4] + ch[5], ch[2] + ch[3], ch[0] + ch[1]};
}

}  // namespace skinpol::spectral
