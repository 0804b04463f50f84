// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#include "skinpol/inverse_polar.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "skinpol/dual.hpp"
#include "skinpol/pbssrdf.hpp"

namespace skinpol::invpolar {

namespace {

constexpr int kSlotEta = 0, kSlotAlphaS = 1, kSlotAlphaSS = 2;
constexpr int kSlotRhoS = 3, kSlotRhoSS = 4, kSlotRhoSSS = 5;
constexpr int kSlotHu = 6, kSlotHv = 7;
using D8 = Dual<8>;

constexpr double kGeomCosFloor = 1e-4;

struct Rot3 {
    double m[3][3];
};

Rot3 pose_matrix(const scene::ViewPose &pose) {
    const double ay = pose.angle_deg * M_PI / 180.0;
    const double ax = pose.tilt_deg * M_PI / 180.0;
    const double cy = std::cos(ay), sy = std::sin(ay);
    const double cx = std::cos(ax), sx = std::sin(ax);
    // R = Rx(ax) * Ry(ay)
    Rot3 r{{{cy, 0, sy}, {sx * sy, cx, -sx * cy}, {-cx * sy, sx, cx * cy}}};
    return r;
}

template <typename T>
Vec3T<T> apply(const Rot3 &r, const Vec3T<T> &v) {
    return {T(r.m[0][0]) * v.x + T(r.m[0][1]) * v.y + T(r.m[0][2]) * v.z,
            T(r.m[1][0]) * v.x + T(r.m[1][1]) * v.y + T(r.m[1][2]) * v.z,
            T(r.m[2][0]) * v.x + T(r.m[2][1]) * v.y + T(r.m[2][2]) * v.z};
}

struct PreparedView {
    Rot3 rot;
    std::vector<scene::TexelFrame> frames;
    Texture w_phi;  // normalized mean of observed I_sss
};

struct Prepared {
    std::vector<PreparedView> views;
    double sss_floor_abs = 0.0;
};

Prepared prepare(const scene::Dataset &data, const StageConfig &cfg) {
    Prepared p;
    const int n = data.scene.patch_texels;
    double peak = 0.0;
    for (size_t v = 0; v < data.observations.size(); ++v) {
        PreparedView pv;
        scene::ViewPose pose = data.scene.views[v];
        pv.rot = pose_matrix(pose);
        pv.frames.resize(static_cast<size_t>(n) * n);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                pv.frames[static_cast<size_t>(y) * n + x] =
                    scene::texel_frame(data.scene, pose, x, y);

        pv.w_phi = Texture(n, n);
        double wmax = 0.0;
        for (size_t i = 0; i < pv.w_phi.data.size(); ++i) {
            double mean = 0.0;
            for (int c = 0; c < spectral::kChannels; ++c) {
                const double v_sss = data.observations[v].I_sss[c].data[i];
                mean += v_sss;
                peak = std::max(peak, v_sss);
            }
            pv.w_phi.data[i] = mean / spectral::kChannels;
            wmax = std::max(wmax, pv.w_phi.data[i]);
        }
        if (wmax > 0.0)
            for (double &w : pv.w_phi.data) w /= wmax;
        p.views.push_back(std::move(pv));
    }
    p.sss_floor_abs = cfg.sss_floor_rel * peak;
    return p;
}

template <typename T>
T seed_if_dual(double v, int slot) {
    if constexpr (std::is_same_v<T, D8>)
        return D8::seed(v, slot);
    else
        return v;
}

// Per-texel, per-view data-loss accumulation, shared between the plain
// (loss only) and dual (loss + gradients) paths.
template <typename T>
void accumulate_data_losses(const scene::Dataset &data, const Prepared &prep,
                            const ParameterMaps &maps, const LossWeights &w, Stage stage,
                            LossBreakdown &loss, GradientMaps *grad) {
    const int n = maps.width();
    const scene::HeightGradient hgrad = scene::height_gradient(maps.H);
    scene::HeightField hf;
    hf.texel_pitch = data.scene.texel_pitch_mm;
    hf.s_u = hf.s_v = data.scene.texel_pitch_mm;

    const double w_sss = stage == Stage::Static ? w.sss : w.dyn_sss;
    const double w_spec = stage == Stage::Static ? w.spec : w.dyn_spec;
    const double w_az = stage == Stage::Static ? w.azimuth : w.dyn_azimuth;
    const bool use_psi = stage == Stage::Static;

    const Vec3T<T> up{T(0.0), T(1.0), T(0.0)};

    for (size_t v = 0; v < data.observations.size(); ++v) {
        const auto &obs = data.observations[v];
        const auto &vis = data.frames[v].V;
        const PreparedView &pv = prep.views[v];

        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const size_t i = static_cast<size_t>(y) * n + x;
                if (vis.data[i] == 0.0) continue;

                const T Hu = seed_if_dual<T>(hgrad.du.at(x, y), kSlotHu);
                const T Hv = seed_if_dual<T>(hgrad.dv.at(x, y), kSlotHv);
                const Vec3T<T> n_local = scene::normal_from_gradient(hf, Hu, Hv);
                const Vec3T<T> nrm = apply(pv.rot, n_local);
                const scene::TexelFrame &tf = pv.frames[i];
                const Vec3T<T> wi{T(tf.wi.x), T(tf.wi.y), T(tf.wi.z)};
                const Vec3T<T> wo{T(tf.wo.x), T(tf.wo.y), T(tf.wo.z)};

                const T cos_i = dot(nrm, wi);
                const T cos_o = dot(nrm, wo);
                if (value_of(cos_i) < kGeomCosFloor || value_of(cos_o) < kGeomCosFloor)
                    continue;

                const auto geom = pbssrdf::make_geometry(nrm, wi, wo, up);
                const T S = cos_i * T(data.scene.light_power / (tf.gamma_m * tf.gamma_m));

                const T eta = seed_if_dual<T>(maps.eta.at(x, y), kSlotEta);
                const T alpha_s = seed_if_dual<T>(maps.alpha_s.at(x, y), kSlotAlphaS);
                const T alpha_ss = seed_if_dual<T>(maps.alpha_ss.at(x, y), kSlotAlphaSS);

                const T kgeo_s = pbssrdf::ggx_distribution(geom.cos_h, alpha_s) *
                                 pbssrdf::smith_g(cos_i, cos_o, alpha_s) /
                                 (T(4.0) * cos_i * cos_o);
                const T kgeo_ss = pbssrdf::ggx_distribution(geom.cos_h, alpha_ss) *
                                  pbssrdf::smith_g(cos_i, cos_o, alpha_ss) /
                                  (T(4.0) * cos_i * cos_o);
                const auto fr = polar::fresnel_from_cos(geom.cos_d, T(1.0), eta);
                const T r_plus = fr.r_plus();
                const auto tp = pbssrdf::transmission_pair(cos_i, cos_o, eta);
                const T Tpp = tp.ti_plus * tp.to_plus;
                const T Tpm = tp.ti_plus * tp.to_minus;
                const T zeta = geom.diff_o.zeta;
                const T xi = geom.diff_o.xi;
                const T psi_hat = use_psi ? polar::predicted_diffuse_dop_cos(eta, cos_o) : T(0.0);

                const double wphi = pv.w_phi.data[i];

                for (int c = 0; c < spectral::kChannels; ++c) {
                    const T rho_s = seed_if_dual<T>(maps.rho_s[c].at(x, y), kSlotRhoS);
                    const T rho_ss = seed_if_dual<T>(maps.rho_ss[c].at(x, y), kSlotRhoSS);
                    const T rho_b = seed_if_dual<T>(maps.rho_sss_bar[c].at(x, y), kSlotRhoSSS);

                    const double o_sss = obs.I_sss[c].data[i];
                    const double o_zeta = obs.I_zeta[c].data[i];
                    const double o_s = obs.I_s[c].data[i];

                    const T spec_term = (rho_s * kgeo_s + rho_ss * kgeo_ss) * r_plus * S;
                    const T i_sss_hat = S * rho_b * Tpp;
                    const T i_zeta_hat = S * rho_b * Tpm * zeta;
                    const T i_xi_hat = -S * rho_b * Tpm * xi;
                    const T i_s_hat = spec_term + i_xi_hat;
                    const T i_xi_obs = T(o_s) - spec_term;

                    const T r_sss = i_sss_hat - T(o_sss);
                    const T r_spec = i_s_hat - T(o_s);
                    const T r_zeta = i_zeta_hat - T(o_zeta);
                    const T r_xi = i_xi_hat - i_xi_obs;

                    T texel_loss = T(w_sss) * r_sss * r_sss + T(w_spec) * r_spec * r_spec +
                                   T(w_az * wphi) * (r_zeta * r_zeta + r_xi * r_xi);

                    if (use_psi && o_sss > prep.sss_floor_abs) {
                        const T mag2 = T(o_zeta * o_zeta) + i_xi_obs * i_xi_obs;
                        if (value_of(mag2) > 1e-40) {
                            using std::sqrt;
                            const T psi_obs = sqrt(mag2) / T(o_sss);
                            const T r_psi = psi_hat - psi_obs;
                            texel_loss += T(w.psi) * r_psi * r_psi;
                            loss.psi += w.psi * value_of(r_psi * r_psi);
                        } else {
                            const T r_psi = psi_hat;
                            texel_loss += T(w.psi) * r_psi * r_psi;
                            loss.psi += w.psi * value_of(r_psi * r_psi);
                        }
                    }

                    loss.sss += w_sss * value_of(r_sss * r_sss);
                    loss.spec += w_spec * value_of(r_spec * r_spec);
                    loss.azimuth += w_az * wphi * value_of(r_zeta * r_zeta + r_xi * r_xi);

                    if constexpr (std::is_same_v<T, D8>) {
                        if (grad) {
                            grad->eta.at(x, y) += texel_loss.d[kSlotEta];
                            grad->alpha_s.at(x, y) += texel_loss.d[kSlotAlphaS];
                            grad->alpha_ss.at(x, y) += texel_loss.d[kSlotAlphaSS];
                            grad->rho_s[c].at(x, y) += texel_loss.d[kSlotRhoS];
                            grad->rho_ss[c].at(x, y) += texel_loss.d[kSlotRhoSS];
                            grad->rho_sss_bar[c].at(x, y) += texel_loss.d[kSlotRhoSSS];

                            // scatter dH/du, dH/dv through the finite-difference stencil
                            const double gu = texel_loss.d[kSlotHu];
                            const double gv = texel_loss.d[kSlotHv];
                            if (x == 0) {
                                grad->H.at(1, y) += gu;
                                grad->H.at(0, y) -= gu;
                            } else if (x == n - 1) {
                                grad->H.at(x, y) += gu;
                                grad->H.at(x - 1, y) -= gu;
                            } else {
                                grad->H.at(x + 1, y) += 0.5 * gu;
                                grad->H.at(x - 1, y) -= 0.5 * gu;
                            }
                            if (y == 0) {
                                grad->H.at(x, 1) += gv;
                                grad->H.at(x, 0) -= gv;
                            } else if (y == n - 1) {
                                grad->H.at(x, y) += gv;
                                grad->H.at(x, y - 1) -= gv;
                            } else {
                                grad->H.at(x, y + 1) += 0.5 * gv;
                                grad->H.at(x, y - 1) -= 0.5 * gv;
                            }
                        }
                    }
                }
            }
    }
}

// Window-mean smoothness: sum (p - mean5x5(p))^2 with clipped windows.
double window_mean_reg(const Texture &p, double weight, Texture *grad) {
    const int n = p.width;
    Texture mean(n, p.height);
    Texture count(n, p.height);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < n; ++x) {
            double s = 0.0;
            int cnt = 0;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= n || yy < 0 || yy >= p.height) continue;
                    s += p.at(xx, yy);
                    ++cnt;
                }
            mean.at(x, y) = s / cnt;
            count.at(x, y) = cnt;
        }
    double loss = 0.0;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < n; ++x) {
            const double r = p.at(x, y) - mean.at(x, y);
            loss += weight * r * r;
            if (grad) {
                grad->at(x, y) += 2.0 * weight * r;
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        if (xx < 0 || xx >= n || yy < 0 || yy >= p.height) continue;
                        grad->at(xx, yy) -= 2.0 * weight * r / count.at(x, y);
                    }
            }
        }
    return loss;
}

// Squared interior Laplacian of the displacement map.
double laplacian_reg(const Texture &H, double weight, Texture *grad) {
    double loss = 0.0;
    for (int y = 1; y < H.height - 1; ++y)
        for (int x = 1; x < H.width - 1; ++x) {
            const double lap = H.at(x + 1, y) + H.at(x - 1, y) + H.at(x, y + 1) +
                               H.at(x, y - 1) - 4.0 * H.at(x, y);
            loss += weight * lap * lap;
            if (grad) {
                const double c = 2.0 * weight * lap;
                grad->at(x + 1, y) += c;
                grad->at(x - 1, y) += c;
                grad->at(x, y + 1) += c;
                grad->at(x, y - 1) += c;
                grad->at(x, y) -= 4.0 * c;
            }
        }
    return loss;
}

double squared_reg(const Texture &p, double weight, Texture *grad) {
    double loss = 0.0;
    for (size_t i = 0; i < p.data.size(); ++i) {
        loss += weight * p.data[i] * p.data[i];
        if (grad) grad->data[i] += 2.0 * weight * p.data[i];
    }
    return loss;
}

double anchored_reg(const MultiChannel &p, const MultiChannel &anchor, double weight,
                    MultiChannel *grad) {
    double loss = 0.0;
    for (int c = 0; c < spectral::kChannels; ++c)
        for (size_t i = 0; i < p[c].data.size(); ++i) {
            const double r = p[c].data[i] - anchor[c].data[i];
            loss += weight * r * r;
            if (grad) (*grad)[c].data[i] += 2.0 * weight * r;
        }
    return loss;
}

// Intensity-weighted subsurface anchor with W = |mean(anchor) - mean(p)|;
// the weight's own dependence on the maps is kept in the gradient.
double weighted_sss_anchor(const MultiChannel &p, const MultiChannel &anchor, double weight,
                           MultiChannel *grad) {
    const size_t npix = p[0].data.size();
    double loss = 0.0;
    for (size_t i = 0; i < npix; ++i) {
        double mean_p = 0.0, mean_a = 0.0, sum_sq = 0.0;
        for (int c = 0; c < spectral::kChannels; ++c) {
            mean_p += p[c].data[i];
            mean_a += anchor[c].data[i];
            const double r = p[c].data[i] - anchor[c].data[i];
            sum_sq += r * r;
        }
        mean_p /= spectral::kChannels;
        mean_a /= spectral::kChannels;
        const double W = std::abs(mean_a - mean_p);
        loss += weight * W * sum_sq;
        if (grad) {
            const double dW = (mean_a - mean_p) >= 0.0 ? -1.0 / spectral::kChannels
                                                       : 1.0 / spectral::kChannels;
            for (int c = 0; c < spectral::kChannels; ++c) {
                const double r = p[c].data[i] - anchor[c].data[i];
                (*grad)[c].data[i] += weight * (W * 2.0 * r + dW * sum_sq);
            }
        }
    }
    return loss;
}

double regularizer_losses(const ParameterMaps &maps, const LossWeights &w, Stage stage,
                          const ParameterMaps *anchor, GradientMaps *grad) {
    double reg = 0.0;
    if (stage == Stage::Static) {
        reg += squared_reg(maps.H, w.H_treg, grad ? &grad->H : nullptr);
        reg += laplacian_reg(maps.H, w.H_sreg, grad ? &grad->H : nullptr);
        reg += window_mean_reg(maps.alpha_s, w.alpha_s_reg, grad ? &grad->alpha_s : nullptr);
        reg += window_mean_reg(maps.alpha_ss, w.alpha_ss_reg, grad ? &grad->alpha_ss : nullptr);
        reg += window_mean_reg(maps.eta, w.eta_reg, grad ? &grad->eta : nullptr);
    } else {
        if (!anchor) throw std::invalid_argument("dynamic stage requires anchor maps");
        reg += squared_reg(maps.H, w.dyn_H_treg, grad ? &grad->H : nullptr);
        reg += laplacian_reg(maps.H, w.dyn_H_sreg, grad ? &grad->H : nullptr);
        reg += anchored_reg(maps.rho_s, anchor->rho_s, w.dyn_rho_s, grad ? &grad->rho_s : nullptr);
        reg += anchored_reg(maps.rho_ss, anchor->rho_ss, w.dyn_rho_ss,
                            grad ? &grad->rho_ss : nullptr);
        reg += weighted_sss_anchor(maps.rho_sss_bar, anchor->rho_sss_bar, w.dyn_rho_sss,
                                   grad ? &grad->rho_sss_bar : nullptr);
    }
    return reg;
}

}  // namespace

GradientMaps GradientMaps::allocate(int w, int h) {
    GradientMaps g;
    g.eta = Texture(w, h);
    g.alpha_s = Texture(w, h);
    g.alpha_ss = Texture(w, h);
    g.H = Texture(w, h);
    for (int c = 0; c < spectral::kChannels; ++c) {
        g.rho_s.emplace_back(w, h);
        g.rho_ss.emplace_back(w, h);
        g.rho_sss_bar.emplace_back(w, h);
    }
    return g;
}

void GradientMaps::clear() {
    auto zero = [](Texture &t) { std::fill(t.data.begin(), t.data.end(), 0.0); };
    zero(eta);
    zero(alpha_s);
    zero(alpha_ss);
    zero(H);
    for (auto *mc : {&rho_s, &rho_ss, &rho_sss_bar})
        for (Texture &t : *mc) zero(t);
}

LossBreakdown eval_polar_loss(const scene::Dataset &data, const ParameterMaps &maps,
                              const LossWeights &weights, Stage stage,
                              const ParameterMaps *anchor, GradientMaps *grad,
                              const StageConfig &cfg) {
    if (maps.width() != data.scene.patch_texels)
        throw std::invalid_argument("eval_polar_loss: map size does not match the scene patch");
    const Prepared prep = prepare(data, cfg);
    LossBreakdown loss;
    if (grad) {
        grad->clear();
        accumulate_data_losses<D8>(data, prep, maps, weights, stage, loss, grad);
    } else {
        accumulate_data_losses<double>(data, prep, maps, weights, stage, loss, nullptr);
    }
    loss.reg = regularizer_losses(maps, weights, stage, anchor, grad);
    return loss;
}

ParameterMaps default_init(const scene::Dataset &data) {
    const int n = data.scene.patch_texels;
    ParameterMaps maps = ParameterMaps::allocate(n, n);

    // Back-solve mean albedos from the observations at the flat-geometry
    // initialization (eta 1.4, alpha_s 0.5, alpha_ss 0.9, H = 0).
    std::array<double, spectral::kChannels> num_sss{}, num_s{};
    double den_sss = 0.0, den_s = 0.0;
    const Vec3 up{0, 1, 0};
    scene::HeightField hf;
    hf.texel_pitch = data.scene.texel_pitch_mm;
    hf.s_u = hf.s_v = data.scene.texel_pitch_mm;

    for (size_t v = 0; v < data.observations.size(); ++v) {
        scene::ViewPose pose = data.scene.views[v];
        const Rot3 rot = pose_matrix(pose);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const size_t i = static_cast<size_t>(y) * n + x;
                if (data.frames[v].V.data[i] == 0.0) continue;
                const auto tf = scene::texel_frame(data.scene, pose, x, y);
                const Vec3 nrm = apply(rot, Vec3{0, 0, 1});
                const double cos_i = dot(nrm, tf.wi);
                const double cos_o = dot(nrm, tf.wo);
                if (cos_i < kGeomCosFloor || cos_o < kGeomCosFloor) continue;
                const auto geom = pbssrdf::make_geometry(nrm, tf.wi, tf.wo, up);
                const double S =
                    data.scene.light_power * cos_i / (tf.gamma_m * tf.gamma_m);
                const auto tp = pbssrdf::transmission_pair(cos_i, cos_o, 1.4);
                const auto fr = polar::fresnel_from_cos(geom.cos_d, 1.0, 1.4);
                const double kgs = pbssrdf::ggx_distribution(geom.cos_h, 0.5) *
                                   pbssrdf::smith_g(cos_i, cos_o, 0.5) / (4.0 * cos_i * cos_o);
                const double kgss = pbssrdf::ggx_distribution(geom.cos_h, 0.9) *
                                    pbssrdf::smith_g(cos_i, cos_o, 0.9) / (4.0 * cos_i * cos_o);
                den_sss += S * tp.ti_plus * tp.to_plus;
                den_s += S * (kgs + kgss) * fr.r_plus();
                for (int c = 0; c < spectral::kChannels; ++c) {
                    num_sss[c] += data.observations[v].I_sss[c].data[i];
                    num_s[c] += data.observations[v].I_s[c].data[i];
                }
            }
    }
    for (int c = 0; c < spectral::kChannels; ++c) {
        const double rho_b = den_sss > 0.0 ? std::max(0.0, num_sss[c] / den_sss) : 0.0;
        const double rho = den_s > 0.0 ? std::max(0.0, num_s[c] / den_s) : 0.0;
        std::fill(maps.rho_sss_bar[c].data.begin(), maps.rho_sss_bar[c].data.end(), rho_b);
        std::fill(maps.rho_s[c].data.begin(), maps.rho_s[c].data.end(), rho);
        std::fill(maps.rho_ss[c].data.begin(), maps.rho_ss[c].data.end(), rho);
    }
    maps.clamp_to_bounds();
    return maps;
}

namespace {

struct RmsState {
    GradientMaps acc;
    double lr;
};

void rms_update(Texture &param, const Texture &grad, Texture &acc, double lr) {
    for (size_t i = 0; i < param.data.size(); ++i) {
        const double g = grad.data[i];
        acc.data[i] = 0.9 * acc.data[i] + 0.1 * g * g;
        param.data[i] -= lr * g / (std::sqrt(acc.data[i]) + 1e-8);
    }
}

struct OptimizedMapRefs {
    std::vector<std::pair<Texture *, Texture *>> pairs;  // (param, grad)
};

OptimizedMapRefs map_refs(ParameterMaps &maps, GradientMaps &grad, Stage stage) {
    OptimizedMapRefs r;
    if (stage == Stage::Static) {
        r.pairs.push_back({&maps.eta, &grad.eta});
        r.pairs.push_back({&maps.alpha_s, &grad.alpha_s});
        r.pairs.push_back({&maps.alpha_ss, &grad.alpha_ss});
    }
    r.pairs.push_back({&maps.H, &grad.H});
    for (int c = 0; c < spectral::kChannels; ++c) {
        r.pairs.push_back({&maps.rho_s[c], &grad.rho_s[c]});
        r.pairs.push_back({&maps.rho_ss[c], &grad.rho_ss[c]});
        r.pairs.push_back({&maps.rho_sss_bar[c], &grad.rho_sss_bar[c]});
    }
    return r;
}

Texture degenerate_mask(const scene::Dataset &data) {
    const int n = data.scene.patch_texels;
    Texture mask(n, n, 1.0);
    for (const auto &f : data.frames)
        for (size_t i = 0; i < mask.data.size(); ++i)
            if (f.V.data[i] > 0.0) mask.data[i] = 0.0;
    return mask;
}

OptimizeResult run_stage(const scene::Dataset &data, const ParameterMaps &init,
                         const StageConfig &cfg, const LossWeights &weights,
                         const ParameterMaps *anchor) {
    OptimizeResult res;
    res.maps = init;
    res.maps.clamp_to_bounds();
    res.degenerate_mask = degenerate_mask(data);

    GradientMaps grad = GradientMaps::allocate(init.width(), init.height());
    GradientMaps acc = GradientMaps::allocate(init.width(), init.height());
    double lr = cfg.learning_rate;

    LossBreakdown current =
        eval_polar_loss(data, res.maps, weights, cfg.stage, anchor, nullptr, cfg);
    const double initial_total = current.total();
    res.trace.push_back(current);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        eval_polar_loss(data, res.maps, weights, cfg.stage, anchor, &grad, cfg);
        ParameterMaps backup = res.maps;

        auto refs = map_refs(res.maps, grad, cfg.stage);
        auto acc_refs = map_refs(res.maps, acc, cfg.stage);  // same layout, acc textures
        for (size_t k = 0; k < refs.pairs.size(); ++k)
            rms_update(*refs.pairs[k].first, *refs.pairs[k].second,
                       *acc_refs.pairs[k].second, lr);
        res.maps.clamp_to_bounds();

        const LossBreakdown next =
            eval_polar_loss(data, res.maps, weights, cfg.stage, anchor, nullptr, cfg);
        if (next.total() > current.total()) {
            res.maps = std::move(backup);
            lr *= cfg.backoff;
            res.trace.push_back(current);
            if (lr < 1e-10) break;
        } else {
            current = next;
            res.trace.push_back(current);
            lr = std::min(lr * 1.1, cfg.learning_rate);
        }
        if (current.total() > 10.0 * initial_total + 1e-300) {
            std::ostringstream diag;
            diag << "divergence at iteration " << iter << ": loss " << current.total()
                 << " vs initial " << initial_total;
            res.diverged = true;
            res.diagnostics = diag.str();
            break;
        }
        if (cfg.verbose && iter % 10 == 0)
            std::fprintf(stderr, "  iter %3d loss %.6e lr %.2e\n", iter, current.total(), lr);
    }
    return res;
}

}  // namespace

OptimizeResult optimize_static(const scene::Dataset &data, const ParameterMaps &init,
                               const StageConfig &cfg, const LossWeights &weights) {
    if (data.observations.size() < 2)
        throw std::invalid_argument("optimize_static: dataset needs at least 2 views");
    StageConfig c = cfg;
    c.stage = Stage::Static;
    return run_stage(data, init, c, weights, nullptr);
}

std::vector<OptimizeResult> optimize_dynamic(const std::vector<scene::Dataset> &frame_data,
                                             const ParameterMaps &static_result,
                                             const StageConfig &cfg,
                                             const LossWeights &weights) {
    StageConfig c = cfg;
    c.stage = Stage::Dynamic;
    std::vector<OptimizeResult> results;
    const ParameterMaps *prev = &static_result;
    for (const auto &frame : frame_data) {
        bool any_visible = false;
        for (const auto &f : frame.frames)
            for (double v : f.V.data) any_visible = any_visible || v > 0.0;
        if (!any_visible) {
            OptimizeResult dead;
            dead.maps = *prev;
            dead.degenerate_mask = degenerate_mask(frame);
            dead.diagnostics = "frame has no visible texels; keeping previous maps";
            results.push_back(std::move(dead));
            prev = &results.back().maps;
            continue;
        }
        ParameterMaps init = *prev;
        // eta and roughness stay pinned to the static reconstruction
        init.eta = static_result.eta;
        init.alpha_s = static_result.alpha_s;
        init.alpha_ss = static_result.alpha_ss;
        results.push_back(run_stage(frame, init, c, weights, &static_result));
        prev = &results.back().maps;
    }
    return results;
}

namespace {

struct Coordinate {
    int which;  // index into the checked-map list
    int x, y;
};

}  // namespace

GradientCheckReport gradient_check(const LossFn &loss, const GradFn &grad,
                                   const ParameterMaps &at, Stage stage, int samples,
                                   std::uint64_t seed) {
    ParameterMaps maps = at;
    GradientMaps g = grad(maps);

    std::vector<std::pair<Texture *, Texture *>> checked;
    GradientMaps dummy = g;  // layout reference
    {
        auto refs = map_refs(maps, g, stage);
        checked = refs.pairs;
    }

    double gscale = 0.0;
    for (auto &[p, gr] : checked)
        for (double v : gr->data) gscale = std::max(gscale, std::abs(v));

    std::mt19937_64 rng(seed);
    GradientCheckReport rep;
    rep.samples = samples;
    for (int s = 0; s < samples; ++s) {
        const int which = static_cast<int>(rng() % checked.size());
        Texture *param = checked[which].first;
        Texture *gmap = checked[which].second;
        const int x = static_cast<int>(rng() % param->width);
        const int y = static_cast<int>(rng() % param->height);

        const double v0 = param->at(x, y);
        const double h = std::max(1e-4 * std::abs(v0), 1e-6);
        param->at(x, y) = v0 + h;
        const double lp = loss(maps);
        param->at(x, y) = v0 - h;
        const double lm = loss(maps);
        param->at(x, y) = v0;

        const double fd = (lp - lm) / (2.0 * h);
        const double an = gmap->at(x, y);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8 * gscale, 1e-14});
        rep.max_rel_error = std::max(rep.max_rel_error, std::abs(fd - an) / denom);
    }
    return rep;
}

GradientCheckReport gradient_check_polar(const scene::Dataset &data, const ParameterMaps &at,
                                         const LossWeights &weights, Stage stage,
                                         const ParameterMaps *anchor, int samples,
                                         std::uint64_t seed) {
    StageConfig cfg;
    cfg.stage = stage;
    auto loss = [&](const ParameterMaps &m) {
        return eval_polar_loss(data, m, weights, stage, anchor, nullptr, cfg).total();
    };
    auto grad = [&](const ParameterMaps &m) {
        GradientMaps g = GradientMaps::allocate(m.width(), m.height());
        eval_polar_loss(data, m, weights, stage, anchor, &g, cfg);
        return g;
    };
    return gradient_check(loss, grad, at, stage, samples, seed);
}

}  // namespace skinpol::invpolar
