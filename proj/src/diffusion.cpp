// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#include "skinpol/diffusion.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

namespace skinpol::diffusion {

std::array<double, kLadder> variance_ladder() {
    std::array<double, kLadder> v{};
    double x = kV0;
    for (int j = 0; j < kLadder; ++j, x *= 4.0) v[j] = x;
    return v;
}

double GaussianMixture::eval(double r) const {
    static const auto ladder = variance_ladder();
    double s = 0.0;
    for (int j = 0; j < kLadder; ++j) s += weights[j] * gauss2d(ladder[j], r);
    return s;
}

GaussianMixture GaussianMixture::normalized() const {
    const double t = total();
    if (t == 0.0) throw std::domain_error("GaussianMixture: cannot normalize zero mixture");
    GaussianMixture r = *this;
    for (double &w : r.weights) w /= t;
    return r;
}

double fresnel_diffuse_reflectance(double eta) {
    const double lo = -0.4399 + 0.7099 / eta - 0.3319 / (eta * eta) +
                      0.0636 / (eta * eta * eta);
    const double hi = -1.440 / (eta * eta) + 0.710 / eta + 0.668 + 0.0636 * eta;
    if (eta == 1.0) {
        if (std::abs(lo - hi) > 1e-6)
            throw std::invalid_argument(
                "fresnel_diffuse_reflectance: branch fits disagree at eta=1; "
                "use a matched boundary instead");
        return 0.5 * (lo + hi);
    }
    return eta < 1.0 ? lo : hi;
}

double Boundary::f_dr() const { return matched ? 0.0 : fresnel_diffuse_reflectance(eta_rel); }

double Boundary::extrapolation_A() const {
    const double f = f_dr();
    return (1.0 + f) / (1.0 - f);
}

MultipoleConfig multipole_config(const spectral::BandOptics &layer, int n, Boundary top,
                                 Boundary bottom) {
    if (layer.sigma_a <= 0.0 || layer.sigma_s_reduced <= 0.0)
        throw std::invalid_argument("multipole_config: layer coefficients must be positive");
    if (n < 0) throw std::invalid_argument("multipole_config: pole order must be nonnegative");

    MultipoleConfig cfg;
    cfg.top = top;
    cfg.bottom = bottom;
    cfg.F_dr_top = top.f_dr();
    cfg.A_top = top.extrapolation_A();
    cfg.A_bottom = bottom.extrapolation_A();
    cfg.geom = pole_geometry(layer.sigma_a, layer.sigma_s_reduced, layer.thickness_d, n,
                             cfg.A_top, cfg.A_bottom);
    return cfg;
}

MultipoleConfig multipole_config(const spectral::BandOptics &layer, int n) {
    return multipole_config(layer, n, Boundary::refractive(layer.eta),
                            Boundary::index_matched());
}

MultipoleConfig swap_boundaries(const MultipoleConfig &cfg) {
    return multipole_config({cfg.geom.sigma_a, cfg.geom.sigma_s, cfg.geom.d, 0.0},
                            cfg.geom.n, cfg.bottom, cfg.top);
}

std::vector<double> MultipoleConfig::real_poles() const {
    std::vector<double> z;
    for (int k = -geom.n; k <= geom.n; ++k) z.push_back(geom.z_real(k));
    return z;
}
std::vector<double> MultipoleConfig::virtual_poles() const {
    std::vector<double> z;
    for (int k = -geom.n; k <= geom.n; ++k) z.push_back(geom.z_virtual(k));
    return z;
}

namespace {

// Influence of a point source at depth z on the surface at radius r.
double point_source(double alpha_prime, double sigma_tr, double z, double r) {
    const double dz = std::sqrt(r * r + z * z);
    return alpha_prime * z * (1.0 + sigma_tr * dz) * std::exp(-sigma_tr * dz) /
           (4.0 * M_PI * dz * dz * dz);
}

}  // namespace

double reflectance_profile(const MultipoleConfig &cfg, double r) {
    if (r < 0.0) throw std::invalid_argument("reflectance_profile: r must be nonnegative");
    const auto &g = cfg.geom;
    double sum = 0.0;
    for (int k = -g.n; k <= g.n; ++k)
        sum += point_source(g.alpha_prime, g.sigma_tr, g.z_real(k), r) -
               point_source(g.alpha_prime, g.sigma_tr, g.z_virtual(k), r);
    return sum;
}

double transmittance_profile(const MultipoleConfig &cfg, double r) {
    if (r < 0.0) throw std::invalid_argument("transmittance_profile: r must be nonnegative");
    const auto &g = cfg.geom;
    double sum = 0.0;
    for (int k = -g.n; k <= g.n; ++k)
        sum += point_source(g.alpha_prime, g.sigma_tr, g.d - g.z_real(k), r) -
               point_source(g.alpha_prime, g.sigma_tr, g.d - g.z_virtual(k), r);
    return sum;
}

double total_reflectance(const MultipoleConfig &cfg) { return closed_total(cfg.geom, false); }
double total_transmittance(const MultipoleConfig &cfg) { return closed_total(cfg.geom, true); }

DiffusionProfile sample_profile(const MultipoleConfig &cfg, bool transmittance) {
    constexpr int kSamples = 256;
    const double r_min = 1e-4;
    const double r_max = std::clamp(30.0 / cfg.geom.sigma_tr, 0.01, 50.0);
    DiffusionProfile p;
    p.radii.resize(kSamples);
    p.values.resize(kSamples);
    const double lr0 = std::log(r_min), lr1 = std::log(r_max);
    for (int i = 0; i < kSamples; ++i) {
        const double r = std::exp(lr0 + (lr1 - lr0) * i / (kSamples - 1.0));
        p.radii[i] = r;
        p.values[i] = transmittance ? transmittance_profile(cfg, r) : reflectance_profile(cfg, r);
    }
    return p;
}

MultipoleConfig inner_reflectance_config(const spectral::BandOptics &layer, Boundary top) {
    spectral::BandOptics semi = layer;
    semi.thickness_d = 0.0;  // semi-infinite
    return multipole_config(semi, 0, top, Boundary::index_matched());
}

MultipoleConfig inner_reflectance_config(const spectral::BandOptics &layer) {
    return inner_reflectance_config(layer, Boundary::refractive(layer.eta));
}

DiffusionProfile inner_reflectance_profile(const spectral::BandOptics &layer, Boundary top) {
    return sample_profile(inner_reflectance_config(layer, top), false);
}

DiffusionProfile inner_reflectance_profile(const spectral::BandOptics &layer) {
    return sample_profile(inner_reflectance_config(layer), false);
}

namespace {

struct WeightedDesign {
    Eigen::MatrixXd A;    // samples x ladder, sqrt(weight)-scaled
    Eigen::VectorXd b;    // sqrt(weight)-scaled targets
    Eigen::VectorXd wgt;  // quadrature weights r_i dr_i
};

WeightedDesign build_design(const std::vector<double> &radii, const std::vector<double> &values) {
    static const auto ladder = variance_ladder();
    const int m = static_cast<int>(radii.size());
    WeightedDesign d;
    d.A.resize(m, kLadder);
    d.b.resize(m);
    d.wgt.resize(m);
    for (int i = 0; i < m; ++i) {
        const double r = radii[i];
        const double dr = (i == 0 ? radii[1] - radii[0]
                                  : (i == m - 1 ? radii[m - 1] - radii[m - 2]
                                                : 0.5 * (radii[i + 1] - radii[i - 1])));
        d.wgt(i) = r * dr;
        const double sw = std::sqrt(d.wgt(i));
        for (int j = 0; j < kLadder; ++j) d.A(i, j) = sw * gauss2d(ladder[j], r);
        d.b(i) = sw * values[i];
    }
    return d;
}

constexpr double kRidge = 1e-10;
constexpr double kConditionLimit = 1e12;

}  // namespace

SogFit fit_gaussian_mixture(const DiffusionProfile &profile) {
    if (profile.radii.size() != profile.values.size() || profile.radii.size() < kLadder)
        throw std::invalid_argument("fit_gaussian_mixture: bad profile sampling");
    const double peak = *std::max_element(profile.values.begin(), profile.values.end(),
                                          [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (std::abs(profile.values.back()) > 1e-6 * std::abs(peak) + 1e-300)
        throw std::invalid_argument("fit_gaussian_mixture: profile tail not negligible");

    const WeightedDesign d = build_design(profile.radii, profile.values);
    Eigen::MatrixXd N = d.A.transpose() * d.A;
    const Eigen::VectorXd rhs = d.A.transpose() * d.b;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(N);
    const double emax = es.eigenvalues().maxCoeff();
    const double emin = std::max(es.eigenvalues().minCoeff(), 0.0);

    SogFit fit;
    fit.condition = emin > 0.0 ? emax / emin : std::numeric_limits<double>::infinity();
    fit.ill_conditioned = fit.condition > kConditionLimit;
    N.diagonal().array() += kRidge * emax;
    const Eigen::VectorXd w = N.ldlt().solve(rhs);
    for (int j = 0; j < kLadder; ++j) fit.mixture.weights[j] = w(j);

    const Eigen::VectorXd resid = d.A * w - d.b;
    const double denom = d.b.squaredNorm();
    fit.rel_l2_error = denom > 0.0 ? std::sqrt(resid.squaredNorm() / denom) : 0.0;
    return fit;
}

namespace {

// Reprojection of an off-ladder Gaussian G(v) onto the ladder: r-weighted
// least squares with the weight sum constrained to 1, so convolution
// preserves total energy exactly.
std::array<double, kLadder> project_gaussian(double v) {
    static const auto ladder = variance_ladder();
    constexpr int kSamples = 256;
    const double r_min = 1e-3, r_max = 30.0;
    std::vector<double> radii(kSamples), values(kSamples);
    const double lr0 = std::log(r_min), lr1 = std::log(r_max);
    for (int i = 0; i < kSamples; ++i) {
        radii[i] = std::exp(lr0 + (lr1 - lr0) * i / (kSamples - 1.0));
        values[i] = gauss2d(v, radii[i]);
    }
    const WeightedDesign d = build_design(radii, values);
    Eigen::MatrixXd N = d.A.transpose() * d.A;
    N.diagonal().array() += kRidge * N.trace();

    // KKT system for the sum-to-one equality constraint.
    Eigen::MatrixXd K(kLadder + 1, kLadder + 1);
    K.setZero();
    K.topLeftCorner(kLadder, kLadder) = N;
    K.topRightCorner(kLadder, 1).setOnes();
    K.bottomLeftCorner(1, kLadder).setOnes();
    Eigen::VectorXd rhs(kLadder + 1);
    rhs.head(kLadder) = d.A.transpose() * d.b;
    rhs(kLadder) = 1.0;
    const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);

    std::array<double, kLadder> w{};
    for (int j = 0; j < kLadder; ++j) w[j] = sol(j);
    return w;
}

// pair_projection(a, b) = ladder weights of G(v_a + v_b)
using ProjTable = std::array<std::array<std::array<double, kLadder>, kLadder>, kLadder>;

const std::array<double, kLadder> &pair_projection(int a, int b) {
    static const auto table = [] {
        const auto ladder = variance_ladder();
        auto t = std::make_unique<ProjTable>();
        for (int i = 0; i < kLadder; ++i)
            for (int j = i; j < kLadder; ++j) {
                (*t)[i][j] = project_gaussian(ladder[i] + ladder[j]);
                (*t)[j][i] = (*t)[i][j];
            }
        return t;
    }();
    return (*table)[a][b];
}

}  // namespace

GaussianMixture convolve(const GaussianMixture &a, const GaussianMixture &b) {
    GaussianMixture out;
    for (int i = 0; i < kLadder; ++i) {
        if (a.weights[i] == 0.0) continue;
        for (int j = 0; j < kLadder; ++j) {
            if (b.weights[j] == 0.0) continue;
            const double w = a.weights[i] * b.weights[j];
            const auto &proj = pair_projection(i, j);
            for (int k = 0; k < kLadder; ++k) out.weights[k] += w * proj[k];
        }
    }
    return out;
}

CombineResult combine_layers(const LayerProfileSet &profiles, int max_bounce) {
    constexpr double kTruncation = 1e-4;
    CombineResult res;
    res.mixture = profiles.R_out_f;
    double accum_energy = std::abs(res.mixture.total());

    // term_i = T_out_f * R_in_f * [R_out_b * R_in_f]^i * T_out_b
    GaussianMixture chain = convolve(profiles.T_out_f, profiles.R_in_f);
    for (int i = 0; i <= max_bounce; ++i) {
        const GaussianMixture term = convolve(chain, profiles.T_out_b);
        const double term_energy = std::abs(term.total());
        if (term_energy < kTruncation * accum_energy) break;
        for (int k = 0; k < kLadder; ++k) res.mixture.weights[k] += term.weights[k];
        accum_energy += term_energy;
        res.bounces_used = i + 1;
        chain = convolve(convolve(chain, profiles.R_out_b), profiles.R_in_f);
    }
    return res;
}

namespace {

struct Kernel1D {
    int radius = 0;
    std::vector<double> taps;  // size 2*radius+1, unit sum
};

Kernel1D make_kernel(double variance, double pitch) {
    Kernel1D k;
    const double sigma = std::sqrt(variance);
    k.radius = std::max(0, static_cast<int>(std::ceil(4.0 * sigma / pitch)));
    k.taps.resize(2 * k.radius + 1);
    double sum = 0.0;
    for (int i = -k.radius; i <= k.radius; ++i) {
        const double x = i * pitch;
        const double t = std::exp(-x * x / (2.0 * variance));
        k.taps[i + k.radius] = t;
        sum += t;
    }
    for (double &t : k.taps) t /= sum;
    return k;
}

Texture blur_pass_h(const Texture &in, const Kernel1D &k) {
    Texture out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -k.radius; i <= k.radius; ++i)
                acc += k.taps[i + k.radius] * in.clamped(x + i, y);
            out.at(x, y) = acc;
        }
    return out;
}

Texture blur_pass_v(const Texture &in, const Kernel1D &k) {
    Texture out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -k.radius; i <= k.radius; ++i)
                acc += k.taps[i + k.radius] * in.clamped(x, y + i);
            out.at(x, y) = acc;
        }
    return out;
}

// Adjoint of a clamped gather pass: scatter each output contribution back
// to the clamped source texel.
Texture adjoint_pass_h(const Texture &g, const Kernel1D &k) {
    Texture out(g.width, g.height);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const double v = g.at(x, y);
            for (int i = -k.radius; i <= k.radius; ++i) {
                const int sx = std::clamp(x + i, 0, g.width - 1);
                out.at(sx, y) += k.taps[i + k.radius] * v;
            }
        }
    return out;
}

Texture adjoint_pass_v(const Texture &g, const Kernel1D &k) {
    Texture out(g.width, g.height);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const double v = g.at(x, y);
            for (int i = -k.radius; i <= k.radius; ++i) {
                const int sy = std::clamp(y + i, 0, g.height - 1);
                out.at(x, sy) += k.taps[i + k.radius] * v;
            }
        }
    return out;
}

}  // namespace

Texture blur_separable(const Texture &map, const GaussianMixture &mixture,
                       double texel_pitch) {
    if (texel_pitch <= 0.0) throw std::invalid_argument("blur_separable: pitch must be positive");
    static const auto ladder = variance_ladder();
    Texture out(map.width, map.height);
    for (int j = 0; j < kLadder; ++j) {
        if (mixture.weights[j] == 0.0) continue;
        const Kernel1D k = make_kernel(ladder[j], texel_pitch);
        Texture blurred = blur_pass_v(blur_pass_h(map, k), k);
        for (size_t i = 0; i < out.size(); ++i)
            out.data[i] += mixture.weights[j] * blurred.data[i];
    }
    return out;
}

Texture blur_separable_adjoint(const Texture &grad, const GaussianMixture &mixture,
                               double texel_pitch) {
    if (texel_pitch <= 0.0) throw std::invalid_argument("blur_separable_adjoint: pitch must be positive");
    static const auto ladder = variance_ladder();
    Texture out(grad.width, grad.height);
    for (int j = 0; j < kLadder; ++j) {
        if (mixture.weights[j] == 0.0) continue;
        const Kernel1D k = make_kernel(ladder[j], texel_pitch);
        Texture back = adjoint_pass_h(adjoint_pass_v(grad, k), k);
        for (size_t i = 0; i < out.size(); ++i)
            out.data[i] += mixture.weights[j] * back.data[i];
    }
    return out;
}

namespace {

double texture_mean(const Texture &t) {
    double s = 0.0;
    for (double v : t.data) s += v;
    return s / static_cast<double>(t.size());
}

}  // namespace

Texture render_sss_texture(const SssTotalMaps &totals, const SssShapeSet &shapes,
                           double texel_pitch, int max_bounce) {
    constexpr double kTruncation = 1e-4;
    for (const GaussianMixture *m :
         {&shapes.R_out_f, &shapes.T_out_f, &shapes.R_out_b, &shapes.T_out_b, &shapes.R_in_f})
        if (std::abs(m->total() - 1.0) > 1e-9)
            throw std::invalid_argument("render_sss_texture: shapes must have unit weight sum");

    Texture out = blur_separable(totals.R_out_f, shapes.R_out_f, texel_pitch);
    double accum = std::abs(texture_mean(out));

    Texture chain = blur_separable(totals.T_out_f, shapes.T_out_f, texel_pitch);
    for (int i = 0; i <= max_bounce; ++i) {
        Texture q = blur_separable(chain * totals.R_in_f, shapes.R_in_f, texel_pitch);
        Texture term = blur_separable(q * totals.T_out_b, shapes.T_out_b, texel_pitch);
        const double term_energy = std::abs(texture_mean(term));
        if (term_energy < kTruncation * accum) break;
        out += term;
        accum += term_energy;
        chain = blur_separable(q * totals.R_out_b, shapes.R_out_b, texel_pitch);
    }
    return out;
}

}  // namespace skinpol::diffusion
