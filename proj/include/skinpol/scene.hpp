// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "skinpol/diffusion.hpp"
#include "skinpol/parameter_maps.hpp"
#include "skinpol/pbssrdf.hpp"
#include "skinpol/texture.hpp"
#include "skinpol/vec3.hpp"

namespace skinpol::scene {

// Planar patch with a displacement texture; tangents t_u, t_v with
// original lengths s_u, s_v (mm per texel step) and base normal n.
struct HeightField {
    Texture H;  // mm
    double texel_pitch = 0.2;
    Vec3 t_u{1, 0, 0}, t_v{0, 1, 0}, n{0, 0, 1};
    double s_u = 0.2, s_v = 0.2;
};

// Non-unit normal from the displacement gradient (mm per texel unit),
// normalized by the caller through normalize().
template <typename T>
Vec3T<T> normal_from_gradient(const HeightField &hf, const T &dH_du, const T &dH_dv) {
    Vec3T<T> tu{T(hf.t_u.x), T(hf.t_u.y), T(hf.t_u.z)};
    Vec3T<T> tv{T(hf.t_v.x), T(hf.t_v.y), T(hf.t_v.z)};
    Vec3T<T> nn{T(hf.n.x), T(hf.n.y), T(hf.n.z)};
    const Vec3T<T> raw = tu * (dH_du * T(-hf.s_u)) + tv * (dH_dv * T(-hf.s_v)) +
                         nn * T(hf.s_u * hf.s_v);
    return normalize(raw);
}

// Central differences in the interior, one-sided at borders.
struct HeightGradient {
    Texture du, dv;
};
HeightGradient height_gradient(const Texture &H);

std::vector<Vec3> normals_from_height(const HeightField &hf);

double shading_term(const Vec3 &n, const Vec3 &wi, double gamma_m);

// One patch pose: rotation about the in-plane y axis then about x. The
// index keys the deterministic per-view noise stream.
struct ViewPose {
    double angle_deg = 0.0;
    double tilt_deg = 0.0;
    int index = 0;
};

struct SceneConfig {
    int patch_texels = 64;
    double texel_pitch_mm = 0.2;
    double camera_distance_m = 1.0;
    double light_offset_deg = 5.72;
    double light_power = 1.0;
    double noise_sigma = 0.005;  // relative to the frame peak
    double coaxial_threshold_deg = 6.0;
    double outer_thickness_mm = 0.25;
    int pole_order = 2;
    std::uint64_t seed = 1;
    std::vector<ViewPose> views;
    spectral::SpectralGrid grid;
    spectral::ResponseMatrix response = spectral::ResponseMatrix::synthetic_default({});

    static SceneConfig defaults();
    // JSON round trip; unknown keys are rejected.
    static SceneConfig from_json_file(const std::string &path);
    void to_json_file(const std::string &path) const;

    Vec3 camera_pos_mm() const { return {0, 0, camera_distance_m * 1000.0}; }
    Vec3 light_pos_mm() const;
};

// Four-analyzer six-channel capture of one view.
struct PolarimetricFrame {
    MultiChannel I0, I45, I90, I135;  // kChannels textures each
    Texture V;
};

struct ObservationSet {
    MultiChannel I_sss, I_zeta, I_s;
};

enum class RenderMode { Full, Simplified };

// Per-texel world geometry of one view (positions are planar; the
// displacement map acts through the shading normals).
struct TexelFrame {
    Vec3 position;  // mm
    Vec3 wi, wo;    // unit, toward light / camera
    double gamma_m; // light distance, m
};
TexelFrame texel_frame(const SceneConfig &scene, const ViewPose &pose, int x, int y);
Vec3 rotate_pose(const ViewPose &pose, const Vec3 &v);

PolarimetricFrame render_frame(const SceneConfig &scene, const ViewPose &pose,
                               const ParameterMaps &params, RenderMode mode);

ObservationSet extract_observations(const PolarimetricFrame &frame);

// Derives the 6-channel rho_sss_bar textures from the biophysical maps
// through the two-layer diffusion pipeline (15-band subsurface texture
// projected onto the camera channels).
MultiChannel derive_rho_sss_bar(const SceneConfig &scene, const ParameterMaps &params,
                                const spectral::ChromophoreSpectra &spectra);

// In-memory dataset: frames plus derived observations per view.
struct Dataset {
    SceneConfig scene;
    std::vector<PolarimetricFrame> frames;
    std::vector<ObservationSet> observations;
};

Dataset synth_views(const SceneConfig &scene, const ParameterMaps &ground_truth,
                    RenderMode mode = RenderMode::Simplified);

// Writes frames, visibility, ground-truth maps, the scene config and a
// checksummed manifest; returns the manifest path.
std::string synth_dataset(const SceneConfig &scene, const ParameterMaps &ground_truth,
                          const std::string &out_dir,
                          RenderMode mode = RenderMode::Simplified);

Dataset load_dataset(const std::string &dir);

// Parameter-map directory I/O (one PFM per scalar map / channel).
void write_maps(const std::string &dir, const ParameterMaps &maps);
ParameterMaps read_maps(const std::string &dir);

}  // namespace skinpol::scene
