// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#include "skinpol/inverse_bio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skinpol/dual.hpp"
#include "skinpol/manifest.hpp"

namespace skinpol::invbio {

using D4 = Dual<4>;

BioModel BioModel::from_scene(const scene::SceneConfig &scene,
                              const spectral::ChromophoreSpectra &spectra, double eta) {
    BioModel m;
    m.grid = scene.grid;
    m.response = scene.response;
    m.spectra = spectra;
    m.outer_thickness_mm = scene.outer_thickness_mm;
    m.pole_order = scene.pole_order;
    m.texel_pitch_mm = scene.texel_pitch_mm;
    m.eta = eta;
    return m;
}

BioMaps BioMaps::allocate(int w, int h, double c_m, double beta, double c_h_out,
                          double c_h_in) {
    BioMaps m;
    m.C_m = Texture(w, h, c_m);
    m.beta_m = Texture(w, h, beta);
    m.C_h_out = Texture(w, h, c_h_out);
    m.C_h_in = Texture(w, h, c_h_in);
    return m;
}

bool BioMaps::project_feasible() {
    bool clipped = false;
    auto clamp01 = [&](Texture &t) {
        for (double &v : t.data) {
            const double c = std::clamp(v, 0.0, 1.0);
            clipped = clipped || c != v;
            v = c;
        }
    };
    clamp01(C_m);
    clamp01(beta_m);
    clamp01(C_h_out);
    clamp01(C_h_in);
    for (size_t i = 0; i < C_m.data.size(); ++i) {
        const double s = C_m.data[i] + C_h_out.data[i];
        if (s > 1.0) {
            C_m.data[i] /= s;
            C_h_out.data[i] /= s;
            clipped = true;
        }
    }
    return clipped;
}

namespace {

// Shapes below this fraction of the dominant weight are dropped (and the
// mixture renormalized) before blurring; forward and adjoint stay
// consistent because both use the truncated shape.
diffusion::GaussianMixture truncate_shape(const diffusion::GaussianMixture &m) {
    double wmax = 0.0;
    for (double w : m.weights) wmax = std::max(wmax, std::abs(w));
    diffusion::GaussianMixture out;
    for (int j = 0; j < diffusion::kLadder; ++j)
        out.weights[j] = std::abs(m.weights[j]) >= 1e-3 * wmax ? m.weights[j] : 0.0;
    return out.normalized();
}

size_t median_intensity_texel(const BioModel &model, const BioMaps &maps) {
    const size_t npix = maps.C_m.data.size();
    std::vector<std::pair<double, size_t>> ranked(npix);
    for (size_t i = 0; i < npix; ++i) {
        double total = 0.0;
        for (int b = 0; b < spectral::kBands; ++b) {
            const auto t = band_totals<double>(maps.C_m.data[i], maps.beta_m.data[i],
                                               maps.C_h_out.data[i], maps.C_h_in.data[i], b,
                                               model);
            total += coarse_intensity(t);
        }
        ranked[i] = {total, i};
    }
    std::sort(ranked.begin(), ranked.end());
    return ranked[(ranked.size() - 1) / 2].second;
}

spectral::BandOptics outer_band_optics(const BioModel &model, double c_m, double beta,
                                       double c_h_out, int band) {
    const auto rs = spectral::reduced_scattering(model.grid.center(band));
    return {spectral::outer_absorption_band(c_m, beta, c_h_out, model.spectra, band),
            rs.outer, model.outer_thickness_mm, model.eta};
}

spectral::BandOptics inner_band_optics(const BioModel &model, double c_h_in, int band) {
    const auto rs = spectral::reduced_scattering(model.grid.center(band));
    return {spectral::inner_absorption_band(c_h_in, model.spectra, band), rs.inner, 0.0,
            model.eta};
}

}  // namespace

ShapeTable fit_shapes(const BioModel &model, const BioMaps &maps) {
    ShapeTable table;
    table.median_texel = median_intensity_texel(model, maps);
    const size_t i = table.median_texel;
    const double c_m = maps.C_m.data[i], beta = maps.beta_m.data[i];
    const double c_ho = maps.C_h_out.data[i], c_hi = maps.C_h_in.data[i];

    for (int b = 0; b < spectral::kBands; ++b) {
        const auto outer = outer_band_optics(model, c_m, beta, c_ho, b);
        const auto inner = inner_band_optics(model, c_hi, b);
        const auto cfg_f = diffusion::multipole_config(outer, model.pole_order);
        const auto cfg_b = diffusion::swap_boundaries(cfg_f);
        const auto cfg_in =
            diffusion::inner_reflectance_config(inner, diffusion::Boundary::index_matched());

        diffusion::SssShapeSet set;
        auto fit = [&](const diffusion::DiffusionProfile &p, diffusion::GaussianMixture &dst) {
            const auto f = diffusion::fit_gaussian_mixture(p);
            table.fit_errors.push_back(f.rel_l2_error);
            dst = truncate_shape(f.mixture);
        };
        fit(diffusion::sample_profile(cfg_f, false), set.R_out_f);
        fit(diffusion::sample_profile(cfg_f, true), set.T_out_f);
        fit(diffusion::sample_profile(cfg_b, false), set.R_out_b);
        fit(diffusion::sample_profile(cfg_b, true), set.T_out_b);
        fit(diffusion::sample_profile(cfg_in, false), set.R_in_f);
        table.bands.push_back(set);
    }
    return table;
}

namespace {

struct BandChainRecord {
    Texture out;
    std::vector<Texture> P, Q;  // intermediates per added bounce
    diffusion::SssTotalMaps totals;
};

BandChainRecord forward_band(const BioModel &model, const BioMaps &maps,
                             const diffusion::SssShapeSet &shapes, int band, bool fine,
                             int max_bounce = 10) {
    const int w = maps.width(), h = maps.height();
    BandChainRecord rec;
    rec.totals.R_out_f = Texture(w, h);
    rec.totals.T_out_f = Texture(w, h);
    rec.totals.R_out_b = Texture(w, h);
    rec.totals.T_out_b = Texture(w, h);
    rec.totals.R_in_f = Texture(w, h);
    for (size_t i = 0; i < maps.C_m.data.size(); ++i) {
        const auto t = band_totals<double>(maps.C_m.data[i], maps.beta_m.data[i],
                                           maps.C_h_out.data[i], maps.C_h_in.data[i], band,
                                           model);
        rec.totals.R_out_f.data[i] = t.R_out_f;
        rec.totals.T_out_f.data[i] = t.T_out_f;
        rec.totals.R_out_b.data[i] = t.R_out_b;
        rec.totals.T_out_b.data[i] = t.T_out_b;
        rec.totals.R_in_f.data[i] = t.R_in_f;
    }

    if (!fine) {
        rec.out = Texture(w, h);
        for (size_t i = 0; i < rec.out.data.size(); ++i) {
            BandTotalsT<double> t{rec.totals.R_out_f.data[i], rec.totals.T_out_f.data[i],
                                  rec.totals.R_out_b.data[i], rec.totals.T_out_b.data[i],
                                  rec.totals.R_in_f.data[i]};
            rec.out.data[i] = coarse_intensity(t, max_bounce);
        }
        return rec;
    }

    constexpr double kTruncation = 1e-4;
    auto mean_abs = [](const Texture &t) {
        double s = 0.0;
        for (double v : t.data) s += v;
        return std::abs(s / static_cast<double>(t.size()));
    };
    const double pitch = model.texel_pitch_mm;
    rec.out = diffusion::blur_separable(rec.totals.R_out_f, shapes.R_out_f, pitch);
    double accum = mean_abs(rec.out);
    Texture P = diffusion::blur_separable(rec.totals.T_out_f, shapes.T_out_f, pitch);
    for (int i = 0; i <= max_bounce; ++i) {
        Texture Q = diffusion::blur_separable(P * rec.totals.R_in_f, shapes.R_in_f, pitch);
        Texture term = diffusion::blur_separable(Q * rec.totals.T_out_b, shapes.T_out_b, pitch);
        const double e = mean_abs(term);
        if (e < kTruncation * accum) break;
        rec.P.push_back(P);
        rec.Q.push_back(Q);
        rec.out += term;
        accum += e;
        P = diffusion::blur_separable(Q * rec.totals.R_out_b, shapes.R_out_b, pitch);
    }
    return rec;
}

// Adjoint of the fine blur chain: propagates d(loss)/d(out) back to the
// five total maps.
diffusion::SssTotalMaps backward_band(const BioModel &model, const BandChainRecord &rec,
                                      const diffusion::SssShapeSet &shapes,
                                      const Texture &d_out) {
    const double pitch = model.texel_pitch_mm;
    const int w = d_out.width, h = d_out.height;
    diffusion::SssTotalMaps d;
    d.R_out_f = diffusion::blur_separable_adjoint(d_out, shapes.R_out_f, pitch);
    d.T_out_f = Texture(w, h);
    d.R_out_b = Texture(w, h);
    d.T_out_b = Texture(w, h);
    d.R_in_f = Texture(w, h);

    const int B = static_cast<int>(rec.P.size());
    Texture dP(w, h);  // adjoint of P_{i+1}, zero beyond the last bounce
    for (int i = B - 1; i >= 0; --i) {
        // term_i = blurTb(Q_i * T_out_b), P_{i+1} = blurRb(Q_i * R_out_b)
        Texture dQi(w, h);
        {
            Texture t = diffusion::blur_separable_adjoint(d_out, shapes.T_out_b, pitch);
            for (size_t k = 0; k < dQi.data.size(); ++k) {
                dQi.data[k] += t.data[k] * rec.totals.T_out_b.data[k];
                d.T_out_b.data[k] += t.data[k] * rec.Q[i].data[k];
            }
        }
        {
            Texture t = diffusion::blur_separable_adjoint(dP, shapes.R_out_b, pitch);
            for (size_t k = 0; k < dQi.data.size(); ++k) {
                dQi.data[k] += t.data[k] * rec.totals.R_out_b.data[k];
                d.R_out_b.data[k] += t.data[k] * rec.Q[i].data[k];
            }
        }
        // Q_i = blurRin(P_i * R_in_f)
        Texture t = diffusion::blur_separable_adjoint(dQi, shapes.R_in_f, pitch);
        Texture dP_next(w, h);
        for (size_t k = 0; k < t.data.size(); ++k) {
            dP_next.data[k] = t.data[k] * rec.totals.R_in_f.data[k];
            d.R_in_f.data[k] += t.data[k] * rec.P[i].data[k];
        }
        dP = std::move(dP_next);
    }
    {
        Texture t = diffusion::blur_separable_adjoint(dP, shapes.T_out_f, pitch);
        for (size_t k = 0; k < t.data.size(); ++k) d.T_out_f.data[k] += t.data[k];
    }
    return d;
}

}  // namespace

MultiChannel render_bio_channels(const BioModel &model, const BioMaps &maps,
                                 const ShapeTable &shapes, bool fine,
                                 std::vector<Texture> *bands_out) {
    const int w = maps.width(), h = maps.height();
    MultiChannel out;
    for (int c = 0; c < spectral::kChannels; ++c) out.emplace_back(w, h);
    std::vector<double> spectral_val(spectral::kBands);
    std::vector<Texture> bands(spectral::kBands);
    for (int b = 0; b < spectral::kBands; ++b)
        bands[b] = forward_band(model, maps, fine ? shapes.bands[b] : diffusion::SssShapeSet{},
                                b, fine)
                       .out;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            for (int b = 0; b < spectral::kBands; ++b) spectral_val[b] = bands[b].at(x, y);
            const auto ch = spectral::channel_project(spectral_val, model.response);
            for (int c = 0; c < spectral::kChannels; ++c) out[c].at(x, y) = ch[c];
        }
    if (bands_out) *bands_out = std::move(bands);
    return out;
}

double bio_residual(const BioModel &model, const BioMaps &maps, const ShapeTable &shapes,
                    const MultiChannel &target, bool fine) {
    const MultiChannel pred = render_bio_channels(model, maps, shapes, fine);
    double r = 0.0;
    for (int c = 0; c < spectral::kChannels; ++c)
        for (size_t i = 0; i < pred[c].data.size(); ++i) {
            const double e = pred[c].data[i] - target[c].data[i];
            r += e * e;
        }
    return r;
}

void bio_residual_gradient(const BioModel &model, const BioMaps &maps,
                           const ShapeTable &shapes, const MultiChannel &target, bool fine,
                           BioMaps &grad) {
    const int w = maps.width(), h = maps.height();
    const size_t npix = maps.C_m.data.size();
    std::fill(grad.C_m.data.begin(), grad.C_m.data.end(), 0.0);
    std::fill(grad.beta_m.data.begin(), grad.beta_m.data.end(), 0.0);
    std::fill(grad.C_h_out.data.begin(), grad.C_h_out.data.end(), 0.0);
    std::fill(grad.C_h_in.data.begin(), grad.C_h_in.data.end(), 0.0);

    std::vector<BandChainRecord> recs(spectral::kBands);
    for (int b = 0; b < spectral::kBands; ++b)
        recs[b] = forward_band(model, maps, fine ? shapes.bands[b] : diffusion::SssShapeSet{},
                               b, fine);

    // channel residuals
    std::vector<Texture> err;
    for (int c = 0; c < spectral::kChannels; ++c) err.emplace_back(w, h);
    std::vector<double> spectral_val(spectral::kBands);
    for (size_t i = 0; i < npix; ++i) {
        for (int b = 0; b < spectral::kBands; ++b) spectral_val[b] = recs[b].out.data[i];
        const auto ch = spectral::channel_project(spectral_val, model.response);
        for (int c = 0; c < spectral::kChannels; ++c)
            err[c].data[i] = ch[c] - target[c].data[i];
    }

    for (int b = 0; b < spectral::kBands; ++b) {
        // d(loss)/d(band output)
        Texture d_out(w, h);
        for (size_t i = 0; i < npix; ++i) {
            double g = 0.0;
            for (int c = 0; c < spectral::kChannels; ++c)
                g += 2.0 * err[c].data[i] * model.response.rows[c][b];
            d_out.data[i] = g;
        }

        diffusion::SssTotalMaps d_totals;
        if (fine) {
            d_totals = backward_band(model, recs[b], shapes.bands[b], d_out);
        } else {
            // coarse: per-texel chain rule through the scalar interaction
            d_totals.R_out_f = Texture(w, h);
            d_totals.T_out_f = Texture(w, h);
            d_totals.R_out_b = Texture(w, h);
            d_totals.T_out_b = Texture(w, h);
            d_totals.R_in_f = Texture(w, h);
            using D5 = Dual<5>;
            for (size_t i = 0; i < npix; ++i) {
                BandTotalsT<D5> t;
                t.R_out_f = D5::seed(recs[b].totals.R_out_f.data[i], 0);
                t.T_out_f = D5::seed(recs[b].totals.T_out_f.data[i], 1);
                t.R_out_b = D5::seed(recs[b].totals.R_out_b.data[i], 2);
                t.T_out_b = D5::seed(recs[b].totals.T_out_b.data[i], 3);
                t.R_in_f = D5::seed(recs[b].totals.R_in_f.data[i], 4);
                const D5 out = coarse_intensity(t);
                d_totals.R_out_f.data[i] = d_out.data[i] * out.d[0];
                d_totals.T_out_f.data[i] = d_out.data[i] * out.d[1];
                d_totals.R_out_b.data[i] = d_out.data[i] * out.d[2];
                d_totals.T_out_b.data[i] = d_out.data[i] * out.d[3];
                d_totals.R_in_f.data[i] = d_out.data[i] * out.d[4];
            }
        }

        // per-texel chain rule from totals to the four fractions
        for (size_t i = 0; i < npix; ++i) {
            const auto t = band_totals<D4>(D4::seed(maps.C_m.data[i], 0),
                                           D4::seed(maps.beta_m.data[i], 1),
                                           D4::seed(maps.C_h_out.data[i], 2),
                                           D4::seed(maps.C_h_in.data[i], 3), b, model);
            const std::array<const Texture *, 5> dms{&d_totals.R_out_f, &d_totals.T_out_f,
                                                     &d_totals.R_out_b, &d_totals.T_out_b,
                                                     &d_totals.R_in_f};
            const std::array<const D4 *, 5> vals{&t.R_out_f, &t.T_out_f, &t.R_out_b,
                                                 &t.T_out_b, &t.R_in_f};
            for (int m = 0; m < 5; ++m) {
                const double dm = dms[m]->data[i];
                if (dm == 0.0) continue;
                grad.C_m.data[i] += dm * vals[m]->d[0];
                grad.beta_m.data[i] += dm * vals[m]->d[1];
                grad.C_h_out.data[i] += dm * vals[m]->d[2];
                grad.C_h_in.data[i] += dm * vals[m]->d[3];
            }
        }
    }
}

void fit_sog_step(const BioModel &model, BioOptState &state) {
    state.shapes = fit_shapes(model, state.maps);
    ++state.sog_refits;
}

namespace {

struct RmsAcc {
    BioMaps acc;
};

void rms_step(Texture &p, const Texture &g, Texture &acc, double lr) {
    for (size_t i = 0; i < p.data.size(); ++i) {
        acc.data[i] = 0.9 * acc.data[i] + 0.1 * g.data[i] * g.data[i];
        p.data[i] -= lr * g.data[i] / (std::sqrt(acc.data[i]) + 1e-8);
    }
}

}  // namespace

double fit_bio_step(const BioModel &model, BioOptState &state, const MultiChannel &target,
                    bool fine, double &lr) {
    static thread_local BioMaps grad;  // reused scratch
    if (grad.width() != state.maps.width() || grad.height() != state.maps.height())
        grad = BioMaps::allocate(state.maps.width(), state.maps.height());
    bio_residual_gradient(model, state.maps, state.shapes, target, fine, grad);

    const double before = bio_residual(model, state.maps, state.shapes, target, fine);
    BioMaps backup = state.maps;
    // plain projected gradient descent with per-step normalization
    double gmax = 1e-30;
    for (const Texture *t : {&grad.C_m, &grad.beta_m, &grad.C_h_out, &grad.C_h_in})
        for (double v : t->data) gmax = std::max(gmax, std::abs(v));
    auto step = [&](Texture &p, const Texture &g) {
        for (size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * g.data[i] / gmax;
    };
    step(state.maps.C_m, grad.C_m);
    step(state.maps.beta_m, grad.beta_m);
    step(state.maps.C_h_out, grad.C_h_out);
    step(state.maps.C_h_in, grad.C_h_in);
    state.maps.project_feasible();

    const double after = bio_residual(model, state.maps, state.shapes, target, fine);
    if (after > before) {
        state.maps = std::move(backup);
        lr *= 0.5;
        state.residual = before;
        return before;
    }
    lr = std::min(lr * 1.1, 0.05);
    state.residual = after;
    return after;
}

namespace {

Texture downsample_box(const Texture &t, int f) {
    const int w = std::max(1, t.width / f), h = std::max(1, t.height / f);
    Texture out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            int cnt = 0;
            for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx) {
                    const int xx = x * f + dx, yy = y * f + dy;
                    if (xx < t.width && yy < t.height) {
                        s += t.at(xx, yy);
                        ++cnt;
                    }
                }
            out.at(x, y) = s / cnt;
        }
    return out;
}

Texture upsample_nearest(const Texture &t, int w, int h, int f) {
    Texture out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = t.at(std::min(x / f, t.width - 1), std::min(y / f, t.height - 1));
    return out;
}

}  // namespace

BioResult coordinate_descent(const BioModel &model, const MultiChannel &target,
                             const BioSchedule &schedule, const BioMaps &init) {
    BioResult res;
    const int w = target[0].width, h = target[0].height;

    // Coarse phase: downsampled maps and targets, totals-only render.
    const int f = std::max(1, schedule.coarse_downsample);
    MultiChannel coarse_target;
    for (const Texture &t : target) coarse_target.push_back(downsample_box(t, f));

    BioOptState state;
    state.maps.C_m = downsample_box(init.C_m, f);
    state.maps.beta_m = downsample_box(init.beta_m, f);
    state.maps.C_h_out = downsample_box(init.C_h_out, f);
    state.maps.C_h_in = downsample_box(init.C_h_in, f);
    state.maps.project_feasible();

    BioModel coarse_model = model;
    coarse_model.texel_pitch_mm = model.texel_pitch_mm * f;

    double lr = schedule.learning_rate;
    for (int it = 0; it < schedule.coarse_iterations; ++it) {
        const double r = fit_bio_step(coarse_model, state, coarse_target, false, lr);
        res.trace.push_back(r);
        if (schedule.verbose && it % 100 == 0)
            std::fprintf(stderr, "  bio coarse %4d residual %.6e\n", it, r);
        if (lr < 1e-12) break;
    }

    // Full resolution with the blur-chain render and SoG alternation.
    BioOptState fine;
    fine.maps.C_m = upsample_nearest(state.maps.C_m, w, h, f);
    fine.maps.beta_m = upsample_nearest(state.maps.beta_m, w, h, f);
    fine.maps.C_h_out = upsample_nearest(state.maps.C_h_out, w, h, f);
    fine.maps.C_h_in = upsample_nearest(state.maps.C_h_in, w, h, f);
    fine.maps.project_feasible();
    fit_sog_step(model, fine);

    lr = schedule.learning_rate;
    double best = std::numeric_limits<double>::infinity();
    int non_decreasing = 0;
    for (int it = 0; it < schedule.full_iterations; ++it) {
        fit_sog_step(model, fine);
        const double r = fit_bio_step(model, fine, target, true, lr);
        res.trace.push_back(r);
        if (schedule.verbose && it % 25 == 0)
            std::fprintf(stderr, "  bio fine %4d residual %.6e\n", it, r);
        if (r < best - 1e-15 * std::max(1.0, best)) {
            best = r;
            non_decreasing = 0;
        } else if (++non_decreasing >= 50) {
            std::ostringstream diag;
            diag << "residual non-decreasing for 50 alternations at iteration " << it
                 << " (residual " << r << ")";
            res.aborted = true;
            res.diagnostics = diag.str();
            break;
        }
        if (lr < 1e-12) break;
    }
    res.maps = fine.maps;
    res.shapes = fine.shapes;
    return res;
}

std::vector<Edit> load_edits(const std::string &json_path) {
    std::ifstream in(json_path);
    if (!in) throw std::runtime_error("cannot open edit script: " + json_path);
    nlohmann::json j;
    in >> j;
    if (!j.is_array()) throw std::runtime_error("edit script must be a JSON array");
    std::vector<Edit> edits;
    for (const auto &e : j) {
        io::reject_unknown_keys(e, {"parameter", "op", "value", "x0", "y0", "x1", "y1"},
                                "edit");
        Edit ed;
        ed.parameter = e.at("parameter").get<std::string>();
        ed.op = e.at("op").get<std::string>();
        ed.value = e.at("value").get<double>();
        ed.x0 = e.value("x0", 0);
        ed.y0 = e.value("y0", 0);
        ed.x1 = e.value("x1", -1);
        ed.y1 = e.value("y1", -1);
        edits.push_back(ed);
    }
    return edits;
}

BioMaps bio_maps_from_parameters(const ParameterMaps &params) {
    BioMaps m;
    m.C_m = params.C_m;
    m.beta_m = params.beta_m;
    m.C_h_out = params.C_h_out;
    m.C_h_in = params.C_h_in;
    return m;
}

BioMaps edit_parameters(const BioMaps &maps, const std::vector<Edit> &edits,
                        std::vector<std::string> *warnings) {
    BioMaps out = maps;
    for (const Edit &e : edits) {
        Texture *t = nullptr;
        if (e.parameter == "C_m") t = &out.C_m;
        else if (e.parameter == "beta_m") t = &out.beta_m;
        else if (e.parameter == "C_h_out") t = &out.C_h_out;
        else if (e.parameter == "C_h_in") t = &out.C_h_in;
        else throw std::invalid_argument("edit_parameters: unknown parameter " + e.parameter);
        if (e.op != "scale" && e.op != "set")
            throw std::invalid_argument("edit_parameters: unknown op " + e.op);

        const int x1 = e.x1 < 0 ? t->width - 1 : e.x1;
        const int y1 = e.y1 < 0 ? t->height - 1 : e.y1;
        for (int y = e.y0; y <= y1; ++y)
            for (int x = e.x0; x <= x1; ++x)
                t->at(x, y) = e.op == "scale" ? t->at(x, y) * e.value : e.value;
    }
    if (out.project_feasible() && warnings)
        warnings->push_back("edit_parameters: values clipped back into the feasible range");
    return out;
}

}  // namespace skinpol::invbio

namespace skinpol::scene {

// The biophysical forward model runs with a single refractive index (the
// boundary extrapolation constant is spatially pooled); the mean of the
// eta map is used.
MultiChannel derive_rho_sss_bar(const SceneConfig &scene, const ParameterMaps &params,
                                const spectral::ChromophoreSpectra &spectra) {
    double eta_mean = 0.0;
    for (double v : params.eta.data) eta_mean += v;
    eta_mean /= static_cast<double>(params.eta.data.size());

    const auto model = invbio::BioModel::from_scene(scene, spectra, eta_mean);
    const auto maps = invbio::bio_maps_from_parameters(params);
    const auto shapes = invbio::fit_shapes(model, maps);
    return invbio::render_bio_channels(model, maps, shapes, true);
}

}  // namespace skinpol::scene
