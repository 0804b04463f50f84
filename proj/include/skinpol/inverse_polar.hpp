// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "skinpol/parameter_maps.hpp"
#include "skinpol/scene.hpp"

namespace skinpol::invpolar {

// Loss weights of the static and dynamic stages.
struct LossWeights {
    double psi = 0.002;
    double sss = 1.0;
    double spec = 1.0;
    double azimuth = 1.0;
    double H_treg = 1.0;
    double H_sreg = 1000.0;
    double alpha_s_reg = 200.0;
    double alpha_ss_reg = 200.0;
    double eta_reg = 400.0;

    double dyn_sss = 1.0;
    double dyn_spec = 1.0;
    double dyn_azimuth = 0.2;
    double dyn_H_treg = 0.001;
    double dyn_H_sreg = 500.0;
    double dyn_rho_s = 0.01;
    double dyn_rho_ss = 0.01;
    double dyn_rho_sss = 0.01;
};

enum class Stage { Static, Dynamic };

struct StageConfig {
    Stage stage = Stage::Static;
    int iterations = 150;
    int patch_size = 256;
    int apron = 16;
    double learning_rate = 1e-2;
    double backoff = 0.5;
    double sss_floor_rel = 1e-6;  // observation floor for the DoP loss
    bool verbose = false;
};

struct LossBreakdown {
    double sss = 0.0, spec = 0.0, psi = 0.0, azimuth = 0.0, reg = 0.0;
    double total() const { return sss + spec + psi + azimuth + reg; }
};

struct GradientMaps {
    Texture eta, alpha_s, alpha_ss, H;
    MultiChannel rho_s, rho_ss, rho_sss_bar;

    static GradientMaps allocate(int w, int h);
    void clear();
};

// Weighted loss of the polarimetric stage over every view of the dataset;
// fills analytic gradients when grad is non-null. The dynamic stage takes
// the frame-0 anchor maps for its temporal regularizers.
LossBreakdown eval_polar_loss(const scene::Dataset &data, const ParameterMaps &maps,
                              const LossWeights &weights, Stage stage,
                              const ParameterMaps *anchor, GradientMaps *grad,
                              const StageConfig &cfg);

// Spec'd initialization: eta 1.4, alpha_s 0.5, alpha_ss 0.9, H = 0 and
// albedos back-solved from the mean observations.
ParameterMaps default_init(const scene::Dataset &data);

struct OptimizeResult {
    ParameterMaps maps;
    std::vector<LossBreakdown> trace;
    Texture degenerate_mask;  // 1 where no view ever saw the texel
    bool diverged = false;
    std::string diagnostics;
};

OptimizeResult optimize_static(const scene::Dataset &data, const ParameterMaps &init,
                               const StageConfig &cfg, const LossWeights &weights);

// Per-frame optimization with eta and the roughness maps frozen to the
// static result; albedos and H are re-estimated per frame with anchored
// regularizers. Frames whose visibility is identically zero keep the
// previous frame's maps (a warning is recorded in diagnostics).
std::vector<OptimizeResult> optimize_dynamic(const std::vector<scene::Dataset> &frame_data,
                                             const ParameterMaps &static_result,
                                             const StageConfig &cfg,
                                             const LossWeights &weights);

struct GradientCheckReport {
    double max_rel_error = 0.0;
    int samples = 0;
};

// Central finite differences against the analytic gradients on randomly
// sampled map coordinates.
using LossFn = std::function<double(const ParameterMaps &)>;
using GradFn = std::function<GradientMaps(const ParameterMaps &)>;
GradientCheckReport gradient_check(const LossFn &loss, const GradFn &grad,
                                   const ParameterMaps &at, Stage stage, int samples,
                                   std::uint64_t seed);

// Convenience wrapper running the check on the full polarimetric loss.
GradientCheckReport gradient_check_polar(const scene::Dataset &data, const ParameterMaps &at,
                                         const LossWeights &weights, Stage stage,
                                         const ParameterMaps *anchor, int samples,
                                         std::uint64_t seed);

}  // namespace skinpol::invpolar
