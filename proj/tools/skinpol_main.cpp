// Copyright 2026 The skinpol Authors
// SPDX-License-Identifier: Apache-2.0
//
// skinpol command-line front end: synth | fit-polar | fit-bio | render |
// edit | report. Exit codes: 0 success, 1 runtime failure, 2 usage or
// configuration error.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "skinpol/inverse_bio.hpp"
#include "skinpol/inverse_polar.hpp"
#include "skinpol/manifest.hpp"
#include "skinpol/pfm.hpp"
#include "skinpol/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace skinpol;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void write_summary(const std::string &dir, const json &summary) {
    std::ofstream out(dir + "/summary.json");
    out << summary.dump(2) << "\n";
}

io::RunManifest base_manifest(const std::string &command, std::uint64_t seed, int workers) {
    io::RunManifest m;
    m.command = command;
    m.seed = seed;
    m.workers = workers;
    m.chromophore_hash = io::hash_file(spectral::ChromophoreSpectra::default_path());
    return m;
}

// Demo ground truth: homogeneous tone-II-like skin with a sinusoidal
// displacement field and a circular hemoglobin patch.
ParameterMaps demo_ground_truth(const scene::SceneConfig &cfg,
                                const spectral::ChromophoreSpectra &spectra) {
    const int n = cfg.patch_texels;
    ParameterMaps gt = ParameterMaps::allocate(n, n);
    std::fill(gt.eta.data.begin(), gt.eta.data.end(), 1.42);
    std::fill(gt.alpha_s.data.begin(), gt.alpha_s.data.end(), 0.57);
    std::fill(gt.alpha_ss.data.begin(), gt.alpha_ss.data.end(), 0.97);
    std::fill(gt.C_m.data.begin(), gt.C_m.data.end(), 0.05);
    std::fill(gt.beta_m.data.begin(), gt.beta_m.data.end(), 0.05);
    std::fill(gt.C_h_out.data.begin(), gt.C_h_out.data.end(), 0.06);
    std::fill(gt.C_h_in.data.begin(), gt.C_h_in.data.end(), 0.03);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            gt.H.at(x, y) = 0.05 * std::sin(2.0 * M_PI * 3.0 * x / n) *
                            std::cos(2.0 * M_PI * 2.0 * y / n);
            const double dx = x - 0.3 * n, dy = y - 0.6 * n;
            if (dx * dx + dy * dy < 0.01 * n * n) gt.C_h_out.at(x, y) = 0.10;
            for (int c = 0; c < spectral::kChannels; ++c) {
                gt.rho_s[c].at(x, y) = 0.35 + 0.03 * c / spectral::kChannels;
                gt.rho_ss[c].at(x, y) = 0.30;
            }
        }
    gt.rho_sss_bar = scene::derive_rho_sss_bar(cfg, gt, spectra);
    return gt;
}

void write_trace_csv(const std::string &path,
                     const std::vector<invpolar::LossBreakdown> &trace) {
    std::ofstream out(path);
    out << "iteration,sss,spec,psi,azimuth,reg,total\n";
    for (size_t i = 0; i < trace.size(); ++i)
        out << i << "," << trace[i].sss << "," << trace[i].spec << "," << trace[i].psi << ","
            << trace[i].azimuth << "," << trace[i].reg << "," << trace[i].total() << "\n";
}

int cmd_synth(const std::string &config_path, const std::string &gt_dir,
              const std::string &preset, const std::string &out_dir, std::uint64_t seed,
              int workers) {
    Timer timer;
    scene::SceneConfig cfg = scene::SceneConfig::from_json_file(config_path);
    if (seed != 0) cfg.seed = seed;
    const auto spectra =
        spectral::ChromophoreSpectra::load(spectral::ChromophoreSpectra::default_path(), cfg.grid);

    ParameterMaps gt;
    if (!gt_dir.empty()) {
        gt = scene::read_maps(gt_dir);
    } else if (preset == "demo") {
        gt = demo_ground_truth(cfg, spectra);
    } else {
        std::cerr << "synth: either --gt or --preset demo is required\n";
        return 2;
    }

    scene::synth_dataset(cfg, gt, out_dir);

    // extend the dataset manifest with run metadata
    io::RunManifest m = io::RunManifest::load_verified(out_dir + "/manifest.json");
    m.command = "synth";
    m.seed = cfg.seed;
    m.workers = workers;
    m.elapsed_seconds = timer.seconds();
    m.chromophore_hash = io::hash_file(spectral::ChromophoreSpectra::default_path());
    m.write(out_dir + "/manifest.json");

    write_summary(out_dir, {{"command", "synth"},
                            {"views", cfg.views.size()},
                            {"patch", cfg.patch_texels},
                            {"elapsed_seconds", m.elapsed_seconds}});
    std::cout << "synth: wrote " << m.files.size() << " files to " << out_dir << "\n";
    return 0;
}

int cmd_fit_polar(const std::string &dataset_dir, const std::string &stage,
                  const std::string &anchor_dir, const std::string &out_dir, int iterations,
                  std::uint64_t seed, int workers) {
    Timer timer;
    fs::create_directories(out_dir);
    invpolar::StageConfig cfg;
    invpolar::LossWeights weights;
    if (iterations > 0) cfg.iterations = iterations;

    if (stage == "static") {
        const scene::Dataset data = scene::load_dataset(dataset_dir);
        cfg.stage = invpolar::Stage::Static;
        const ParameterMaps init = invpolar::default_init(data);
        const auto res = invpolar::optimize_static(data, init, cfg, weights);
        scene::write_maps(out_dir, res.maps);
        io::write_pfm(out_dir + "/degenerate_mask.pfm", res.degenerate_mask);
        write_trace_csv(out_dir + "/trace.csv", res.trace);
        if (res.diverged) {
            std::cerr << "fit-polar: " << res.diagnostics << "\n";
            return 1;
        }
        io::RunManifest m = base_manifest("fit-polar", seed, workers);
        m.config_echo = {{"dataset", dataset_dir}, {"stage", stage},
                         {"iterations", cfg.iterations}};
        for (const auto &entry : fs::directory_iterator(out_dir))
            if (entry.path().filename() != "manifest.json")
                m.add_file(out_dir, entry.path().filename().string());
        m.elapsed_seconds = timer.seconds();
        m.write(out_dir + "/manifest.json");
        write_summary(out_dir, {{"command", "fit-polar"},
                                {"stage", stage},
                                {"final_loss", res.trace.back().total()},
                                {"elapsed_seconds", m.elapsed_seconds}});
        std::cout << "fit-polar: final loss " << res.trace.back().total() << "\n";
        return 0;
    }
    if (stage != "dynamic") {
        std::cerr << "fit-polar: stage must be static or dynamic\n";
        return 2;
    }
    if (anchor_dir.empty()) {
        std::cerr << "fit-polar: dynamic stage requires --anchor\n";
        return 2;
    }
    const ParameterMaps anchor = scene::read_maps(anchor_dir);
    std::vector<scene::Dataset> frames;
    for (int f = 0;; ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame%03d", f);
        const std::string dir = dataset_dir + "/" + name;
        if (!fs::exists(dir)) break;
        frames.push_back(scene::load_dataset(dir));
    }
    if (frames.empty()) {
        std::cerr << "fit-polar: no frameNNN subdirectories under " << dataset_dir << "\n";
        return 2;
    }
    cfg.stage = invpolar::Stage::Dynamic;
    const auto results = invpolar::optimize_dynamic(frames, anchor, cfg, invpolar::LossWeights{});
    for (size_t f = 0; f < results.size(); ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame%03zu", f);
        scene::write_maps(out_dir + "/" + name, results[f].maps);
        write_trace_csv(out_dir + "/" + name + "/trace.csv", results[f].trace);
        if (!results[f].diagnostics.empty())
            std::cerr << "fit-polar[" << f << "]: " << results[f].diagnostics << "\n";
    }
    io::RunManifest m = base_manifest("fit-polar", seed, workers);
    m.config_echo = {{"dataset", dataset_dir}, {"stage", stage}, {"frames", results.size()}};
    m.elapsed_seconds = timer.seconds();
    m.write(out_dir + "/manifest.json");
    write_summary(out_dir, {{"command", "fit-polar"},
                            {"stage", stage},
                            {"frames", results.size()},
                            {"elapsed_seconds", m.elapsed_seconds}});
    std::cout << "fit-polar: optimized " << results.size() << " frames\n";
    return 0;
}

int cmd_fit_bio(const std::string &maps_dir, const std::string &config_path,
                const std::string &out_dir, std::uint64_t seed, int workers) {
    Timer timer;
    fs::create_directories(out_dir);
    const scene::SceneConfig cfg = scene::SceneConfig::from_json_file(config_path);
    const auto spectra =
        spectral::ChromophoreSpectra::load(spectral::ChromophoreSpectra::default_path(), cfg.grid);
    const ParameterMaps stage1 = scene::read_maps(maps_dir);

    double eta_mean = 0.0;
    for (double v : stage1.eta.data) eta_mean += v;
    eta_mean /= static_cast<double>(stage1.eta.data.size());

    const auto model = invbio::BioModel::from_scene(cfg, spectra, eta_mean);
    const auto init = invbio::BioMaps::allocate(stage1.width(), stage1.height());
    const auto res =
        invbio::coordinate_descent(model, stage1.rho_sss_bar, invbio::BioSchedule{}, init);

    io::write_pfm(out_dir + "/C_m.pfm", res.maps.C_m);
    io::write_pfm(out_dir + "/beta_m.pfm", res.maps.beta_m);
    io::write_pfm(out_dir + "/C_h_out.pfm", res.maps.C_h_out);
    io::write_pfm(out_dir + "/C_h_in.pfm", res.maps.C_h_in);
    {
        std::ofstream trace(out_dir + "/trace.csv");
        trace << "alternation,residual\n";
        for (size_t i = 0; i < res.trace.size(); ++i) trace << i << "," << res.trace[i] << "\n";
    }
    io::RunManifest m = base_manifest("fit-bio", seed, workers);
    m.config_echo = {{"maps", maps_dir}, {"config", config_path}};
    for (const auto &entry : fs::directory_iterator(out_dir))
        if (entry.path().filename() != "manifest.json")
            m.add_file(out_dir, entry.path().filename().string());
    m.elapsed_seconds = timer.seconds();
    m.write(out_dir + "/manifest.json");
    write_summary(out_dir, {{"command", "fit-bio"},
                            {"final_residual", res.trace.empty() ? 0.0 : res.trace.back()},
                            {"aborted", res.aborted},
                            {"elapsed_seconds", m.elapsed_seconds}});
    if (res.aborted) {
        std::cerr << "fit-bio: " << res.diagnostics << "\n";
        return 1;
    }
    std::cout << "fit-bio: final residual "
              << (res.trace.empty() ? 0.0 : res.trace.back()) << "\n";
    return 0;
}

int cmd_render(const std::string &maps_dir, const std::string &config_path,
               const std::string &mode_str, const std::string &out_dir,
               const std::string &reference_dir, int view, bool unpolarized,
               std::uint64_t seed, int workers) {
    Timer timer;
    if (mode_str != "full" && mode_str != "simplified") {
        std::cerr << "render: mode must be full or simplified\n";
        return 2;
    }
    fs::create_directories(out_dir);
    scene::SceneConfig cfg = scene::SceneConfig::from_json_file(config_path);
    cfg.noise_sigma = 0.0;
    const ParameterMaps maps = scene::read_maps(maps_dir);
    if (view < 0 || view >= static_cast<int>(cfg.views.size())) {
        std::cerr << "render: view index out of range\n";
        return 2;
    }
    scene::ViewPose pose = cfg.views[view];
    pose.index = view;
    const auto mode =
        mode_str == "full" ? scene::RenderMode::Full : scene::RenderMode::Simplified;
    scene::PolarimetricFrame frame = render_frame(cfg, pose, maps, mode);

    if (unpolarized) {
        // debug: strip the polarized components (forces s1 = s2 = 0)
        for (int c = 0; c < spectral::kChannels; ++c)
            for (size_t i = 0; i < frame.I0[c].data.size(); ++i) {
                const double s0 = frame.I0[c].data[i] + frame.I90[c].data[i];
                frame.I0[c].data[i] = frame.I90[c].data[i] = 0.5 * s0;
                frame.I45[c].data[i] = frame.I135[c].data[i] = 0.5 * s0;
            }
    }

    io::RunManifest m = base_manifest("render", seed, workers);
    const std::array<const char *, 4> pol_names{"0", "45", "90", "135"};
    const std::array<const MultiChannel *, 4> imgs{&frame.I0, &frame.I45, &frame.I90,
                                                   &frame.I135};
    for (int a = 0; a < 4; ++a)
        for (int c = 0; c < spectral::kChannels; ++c) {
            const std::string rel =
                "ch" + std::to_string(c) + "_pol" + std::string(pol_names[a]) + ".pfm";
            io::write_pfm(out_dir + "/" + rel, (*imgs[a])[c]);
            m.add_file(out_dir, rel);
        }
    // degree / angle of linear polarization per channel
    for (int c = 0; c < spectral::kChannels; ++c) {
        Texture dop(frame.I0[c].width, frame.I0[c].height);
        Texture aolp(dop.width, dop.height);
        for (size_t i = 0; i < dop.data.size(); ++i) {
            const double s0 = frame.I0[c].data[i] + frame.I90[c].data[i];
            const double s1 = frame.I0[c].data[i] - frame.I90[c].data[i];
            const double s2 = frame.I45[c].data[i] - frame.I135[c].data[i];
            dop.data[i] = s0 > 0.0 ? std::sqrt(s1 * s1 + s2 * s2) / s0 : 0.0;
            aolp.data[i] = 0.5 * std::atan2(s2, s1);
        }
        io::write_pfm(out_dir + "/dop_ch" + std::to_string(c) + ".pfm", dop);
        io::write_pfm(out_dir + "/aolp_ch" + std::to_string(c) + ".pfm", aolp);
        m.add_file(out_dir, "dop_ch" + std::to_string(c) + ".pfm");
        m.add_file(out_dir, "aolp_ch" + std::to_string(c) + ".pfm");
    }

    json summary{{"command", "render"}, {"mode", mode_str}, {"view", view}};
    if (!reference_dir.empty()) {
        const scene::Dataset ref = scene::load_dataset(reference_dir);
        double se = 0.0, norm = 0.0;
        size_t count = 0;
        const auto &rf = ref.frames.at(view);
        const std::array<const MultiChannel *, 4> refs{&rf.I0, &rf.I45, &rf.I90, &rf.I135};
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < spectral::kChannels; ++c)
                for (size_t i = 0; i < (*imgs[a])[c].data.size(); ++i) {
                    const double d = (*imgs[a])[c].data[i] - (*refs[a])[c].data[i];
                    se += d * d;
                    norm = std::max(norm, std::abs((*refs[a])[c].data[i]));
                    ++count;
                }
        const double rmse = std::sqrt(se / count);
        summary["rmse"] = rmse;
        summary["rmse_relative_to_peak"] = norm > 0.0 ? rmse / norm : 0.0;
        std::cout << "render: RMSE vs reference view " << view << " = " << rmse << "\n";
    }
    m.config_echo = {{"maps", maps_dir}, {"config", config_path}, {"mode", mode_str}};
    m.elapsed_seconds = timer.seconds();
    m.write(out_dir + "/manifest.json");
    summary["elapsed_seconds"] = m.elapsed_seconds;
    write_summary(out_dir, summary);
    return 0;
}

int cmd_edit(const std::string &maps_dir, const std::string &edits_path,
             const std::string &out_dir, std::uint64_t seed, int workers) {
    Timer timer;
    fs::create_directories(out_dir);
    ParameterMaps maps = scene::read_maps(maps_dir);
    const auto edits = invbio::load_edits(edits_path);
    std::vector<std::string> warnings;
    const auto edited = invbio::edit_parameters(invbio::bio_maps_from_parameters(maps), edits,
                                                &warnings);
    maps.C_m = edited.C_m;
    maps.beta_m = edited.beta_m;
    maps.C_h_out = edited.C_h_out;
    maps.C_h_in = edited.C_h_in;
    scene::write_maps(out_dir, maps);
    for (const auto &w : warnings) std::cerr << "edit: " << w << "\n";

    io::RunManifest m = base_manifest("edit", seed, workers);
    m.config_echo = {{"maps", maps_dir}, {"edits", edits_path}};
    for (const auto &entry : fs::directory_iterator(out_dir))
        if (entry.path().filename() != "manifest.json")
            m.add_file(out_dir, entry.path().filename().string());
    m.elapsed_seconds = timer.seconds();
    m.write(out_dir + "/manifest.json");
    write_summary(out_dir, {{"command", "edit"},
                            {"edits", edits.size()},
                            {"warnings", warnings.size()},
                            {"elapsed_seconds", m.elapsed_seconds}});
    return 0;
}

int cmd_report(const std::vector<std::string> &run_dirs, const std::string &out_path) {
    json rows = json::array();
    for (const auto &dir : run_dirs) {
        json row{{"run", dir}};
        const std::string summary_path = dir + "/summary.json";
        if (fs::exists(summary_path)) {
            std::ifstream in(summary_path);
            json s;
            in >> s;
            row["summary"] = s;
        } else {
            row["summary"] = nullptr;
        }
        rows.push_back(row);
    }
    std::ofstream md(out_path + ".md");
    std::ofstream csv(out_path + ".csv");
    md << "# skinpol run report\n\n| run | command | key metrics |\n|---|---|---|\n";
    csv << "run,command,metrics\n";
    for (const auto &row : rows) {
        const auto &s = row["summary"];
        const std::string cmd = s.is_null() ? "?" : s.value("command", "?");
        std::string metrics;
        if (!s.is_null())
            for (auto it = s.begin(); it != s.end(); ++it)
                if (it.key() != "command") metrics += it.key() + "=" + it.value().dump() + " ";
        md << "| " << row["run"].get<std::string>() << " | " << cmd << " | " << metrics
           << " |\n";
        csv << row["run"].get<std::string>() << "," << cmd << "," << metrics << "\n";
    }
    std::cout << "report: wrote " << out_path << ".md and .csv\n";
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"skinpol: polarimetric skin appearance synthesis and inversion"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int workers = 1;
    app.add_option("--seed", seed, "override the run seed");
    app.add_option("--workers", workers, "worker count recorded in manifests");

    std::string config, gt_dir, preset, out_dir, dataset_dir, stage = "static", anchor_dir,
                maps_dir, mode = "simplified", edits_path, reference_dir, report_out = "report";
    int iterations = -1, view = 0;
    bool unpolarized = false;
    std::vector<std::string> run_dirs;

    auto *synth = app.add_subcommand("synth", "synthesize a polarimetric dataset");
    synth->add_option("--config", config, "scene config JSON")->required();
    synth->add_option("--gt", gt_dir, "ground-truth parameter maps directory");
    synth->add_option("--preset", preset, "built-in ground truth (demo)");
    synth->add_option("--out", out_dir, "output directory")->required();

    auto *fitp = app.add_subcommand("fit-polar", "polarimetric inverse rendering");
    fitp->add_option("--dataset", dataset_dir, "dataset directory")->required();
    fitp->add_option("--stage", stage, "static | dynamic");
    fitp->add_option("--anchor", anchor_dir, "static result maps (dynamic stage)");
    fitp->add_option("--iterations", iterations, "optimizer iterations");
    fitp->add_option("--out", out_dir, "output directory")->required();

    auto *fitb = app.add_subcommand("fit-bio", "biophysical decomposition");
    fitb->add_option("--maps", maps_dir, "stage-1 parameter maps directory")->required();
    fitb->add_option("--config", config, "scene config JSON")->required();
    fitb->add_option("--out", out_dir, "output directory")->required();

    auto *rend = app.add_subcommand("render", "render parameter maps");
    rend->add_option("--maps", maps_dir, "parameter maps directory")->required();
    rend->add_option("--config", config, "scene config JSON")->required();
    rend->add_option("--mode", mode, "full | simplified");
    rend->add_option("--view", view, "view index");
    rend->add_option("--reference", reference_dir, "dataset for RMSE comparison");
    rend->add_flag("--unpolarized", unpolarized, "debug: force unpolarized output");
    rend->add_option("--out", out_dir, "output directory")->required();

    auto *edit = app.add_subcommand("edit", "apply biophysical parameter edits");
    edit->add_option("--maps", maps_dir, "parameter maps directory")->required();
    edit->add_option("--edits", edits_path, "JSON edit script")->required();
    edit->add_option("--out", out_dir, "output directory")->required();

    auto *report = app.add_subcommand("report", "aggregate run summaries");
    report->add_option("--runs", run_dirs, "run directories")->required();
    report->add_option("--out", report_out, "output basename");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(config, gt_dir, preset, out_dir, seed, workers);
        if (fitp->parsed())
            return cmd_fit_polar(dataset_dir, stage, anchor_dir, out_dir, iterations, seed,
                                 workers);
        if (fitb->parsed()) return cmd_fit_bio(maps_dir, config, out_dir, seed, workers);
        if (rend->parsed())
            return cmd_render(maps_dir, config, mode, out_dir, reference_dir, view,
                              unpolarized, seed, workers);
        if (edit->parsed()) return cmd_edit(maps_dir, edits_path, out_dir, seed, workers);
        if (report->parsed()) return cmd_report(run_dirs, report_out);
    } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
