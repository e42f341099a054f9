#pragma once

// Command-line front end. run_cli() is the whole program; tools/eitmag.cpp only
// forwards main() to it so the commands can be exercised in-process by tests.
//
// Exit codes: 0 success, 2 configuration/usage, 3 output I/O, 4 input format.

#include "eitmag/config.hpp"
#include "eitmag/core.hpp"
#include "eitmag/field_model.hpp"
#include "eitmag/recon.hpp"
#include "eitmag/stack_sim.hpp"
#include "eitmag/stackio.hpp"

#include "CLI11.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace eitmag::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kWriteIo = 3, kInputFormat = 4 };

namespace detail {

inline std::string g4(double v) {
    std::array<char, 48> buf{};
    std::snprintf(buf.data(), buf.size(), "%.4g", v);
    return buf.data();
}

inline std::string g9(double v) {
    std::array<char, 48> buf{};
    std::snprintf(buf.data(), buf.size(), "%.9g", v);
    return buf.data();
}

struct ConfigOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value configuration file");
        cmd->add_option("--set", overrides, "override one key (key=value), repeatable");
        cmd->add_option("--seed", seed, "noise seed (overrides noise.seed)");
    }

    RunConfig load() const {
        RunConfig cfg;
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            if (!is) {
                throw ConfigError("cannot open config file " + config_path);
            }
            apply_config_text(cfg, is);
        }
        for (const std::string& o : overrides) {
            apply_override(cfg, o);
        }
        if (seed) {
            cfg.noise.seed = *seed;
        }
        cfg.validate();
        return cfg;
    }
};

// Input errors: unreadable or malformed files map to the input-format exit code.
template <class F>
auto read_input(F&& f) {
    try {
        return f();
    } catch (const IoError& e) {
        throw FormatError(e.what());
    }
}

inline std::string diagnostics_text(const ReconDiagnostics& d) {
    std::string out;
    out += "pixels " + std::to_string(d.pixels) + "\n";
    out += "masked_in " + std::to_string(d.masked_in) + "\n";
    out += "peak_at_edge " + std::to_string(d.peak_at_edge) + "\n";
    out += "valid " + std::to_string(d.valid) + "\n";
    out += "peak_failure_fraction " + g9(d.failure_fraction()) + "\n";
    out += "min_B_mG " + (d.valid ? g9(gauss_to_milligauss(d.min_G)) : std::string("nan")) + "\n";
    out += "max_B_mG " + (d.valid ? g9(gauss_to_milligauss(d.max_G)) : std::string("nan")) + "\n";
    return out;
}

inline std::vector<double> parse_point_mm(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        v.push_back(eitmag::detail::parse_double("--point", eitmag::detail::trim(item)) * 1e-3);
    }
    if (v.size() != 3) {
        throw ConfigError("--point expects three comma-separated values in mm");
    }
    return v;
}

}  // namespace detail

inline int cmd_simulate(const RunConfig& cfg, const std::string& out_path, unsigned threads, std::ostream& out,
                        std::ostream& err) {
    for (const std::string& w : acquisition_warnings(cfg.noise, cfg.camera)) {
        err << "warning: " << w << "\n";
    }
    const ImageStack stack = simulate_stack(cfg.resolved_scene(), cfg.sweep(), cfg.noise, cfg.camera, threads);
    const std::size_t bytes = write_stack(stack, std::filesystem::path(out_path));
    out << "simulated " << stack.camera.width << "x" << stack.camera.height << "x" << stack.frame_count()
        << " stack (detunings " << stack.frame_count() << ", seed " << cfg.noise.seed << ") -> " << out_path << " ("
        << bytes << " bytes)\n";
    return kOk;
}

inline int cmd_reconstruct(const std::string& stack_path, const RunConfig& cfg, const std::string& prefix,
                           unsigned threads, std::ostream& err) {
    const ImageStack stack = detail::read_input([&] { return read_stack(std::filesystem::path(stack_path)); });
    const Reconstruction r = reconstruct_map(stack, cfg.scene.line, cfg.recon, threads);
    const ReconDiagnostics& d = r.diagnostics;

    double lo = 0.0;
    double hi = 1.0;
    if (d.valid > 0) {
        lo = d.min_G;
        hi = d.max_G > d.min_G ? d.max_G : d.min_G + 1e-9;
    }
    export_field_csv(r.map, std::filesystem::path(prefix + ".csv"));
    write_file_atomic(prefix + ".pgm", preview_pgm(r.map, lo, hi));
    const std::string diag = detail::diagnostics_text(d);
    write_file_atomic(prefix + ".diag.txt", diag);
    err << diag;
    if (d.masked_in > 0 && d.peak_at_edge == d.masked_in) {
        err << "warning: no resonance found inside the beam (100% peak failures)\n";
    }
    return kOk;
}

inline int cmd_compare(const std::string& path_a, const std::string& path_b, const RunConfig& cfg,
                       const std::string& prefix, std::ostream& err) {
    const FieldMap a = detail::read_input([&] { return read_field_csv(std::filesystem::path(path_a)); });
    std::optional<FieldMap> b;
    if (!path_b.empty()) {
        b = detail::read_input([&] { return read_field_csv(std::filesystem::path(path_b)); });
        if (b->width != a.width || b->height != a.height) {
            err << "error: maps differ in size (" << a.width << "x" << a.height << " vs " << b->width << "x"
                << b->height << ")\n";
            return kUsage;
        }
    }

    const Scene scene = cfg.resolved_scene();
    CameraConfig geometry = cfg.camera;
    geometry.width = a.width;
    geometry.height = a.height;
    geometry.pixel_pitch_m = a.pixel_pitch_m;

    double max_diff = 0.0;
    double sum2 = 0.0;
    std::size_t count = 0;
    for (int iy = 0; iy < a.height; ++iy) {
        for (int ix = 0; ix < a.width; ++ix) {
            if (!a.is_valid(ix, iy)) continue;
            double reference = 0.0;
            if (b) {
                if (!b->is_valid(ix, iy)) continue;
                reference = b->at(ix, iy);
            } else {
                reference = pixel_field(ix, iy, scene.field, geometry);
            }
            const double diff = a.at(ix, iy) - reference;
            max_diff = std::max(max_diff, std::abs(diff));
            sum2 += diff * diff;
            ++count;
        }
    }
    if (count == 0) {
        err << "error: no valid pixels to compare\n";
        return kUsage;
    }
    const double rms = std::sqrt(sum2 / static_cast<double>(count));

    std::string stats = "compared_pixels " + std::to_string(count) + "\n";
    stats += "reference " + std::string(b ? "map" : to_string(scene.field.model)) + "\n";
    stats += "max_abs_diff_mG " + detail::g9(gauss_to_milligauss(max_diff)) + "\n";
    stats += "rms_diff_mG " + detail::g9(gauss_to_milligauss(rms)) + "\n";
    if (b) {
        stats += "uncertainty_rms_mG " + detail::g9(gauss_to_milligauss(uncertainty_map(a, *b).rms_G)) + "\n";
    }

    // y = 0 slice: measured, bare Biot-Savart, and shielded model.
    std::string slice = "x_m,B_measured_G,B_biot_savart_G,B_shielded_G\n";
    const int row = a.height / 2;
    for (int ix = 0; ix < a.width; ++ix) {
        if (!a.is_valid(ix, row)) continue;
        const Vec2 p = a.position(ix, row);
        const Vec2 bare = bare_wire_field_2d(p, scene.field.wire);
        slice += eitmag::detail::format_g(p[0]) + "," + eitmag::detail::format_g(a.at(ix, row)) + "," +
                 eitmag::detail::format_g(tesla_to_gauss(norm(bare))) + ",";
        try {
            const Vec2 s = shielded_wire_field(p, scene.field.wire, cfg.shield);
            slice += eitmag::detail::format_g(tesla_to_gauss(norm(s)));
        } catch (const DomainError&) {
        }
        slice += "\n";
    }
    write_file_atomic(prefix + ".stats.txt", stats);
    write_file_atomic(prefix + ".slice.csv", slice);
    err << stats;
    return kOk;
}

inline int cmd_sensitivity(double gamma_Hz, double snr, double n, double gm_Hz_per_G, std::ostream& out) {
    const double db = theoretical_sensitivity(gamma_Hz, snr, n, gm_Hz_per_G);
    out << "delta_B = " << detail::g4(db) << " G = " << detail::g4(gauss_to_milligauss(db)) << " mG\n";
    return kOk;
}

inline int cmd_gradtensor(const RunConfig& cfg, const Vec3& point_wire_frame, double h_m, std::ostream& out) {
    const Scene scene = cfg.resolved_scene();
    const double standoff = scene.field.wire.standoff_m;
    auto field = [&](const Vec3& p) { return scene_field_vector(scene.field, {p[0] - standoff, p[1], p[2]}); };
    const GradientTensor t = gradient_tensor(field, point_wire_frame, h_m);
    const MaxwellResiduals r = maxwell_residuals(t);

    // 1 T/m = 1e4 mG/mm
    constexpr double kMgPerMmPerTeslaPerM = 1.0e4;
    out << "gradient tensor dB_i/dx_j [mG/mm] (rows Bx,By,Bz; columns x,y,z)\n";
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            std::array<char, 32> buf{};
            std::snprintf(buf.data(), buf.size(), "%14.6e", t(i, j) * kMgPerMmPerTeslaPerM);
            out << buf.data();
        }
        out << "\n";
    }
    out << "divergence [mG/mm] " << detail::g9(r.divergence * kMgPerMmPerTeslaPerM) << "\n";
    out << "curl [mG/mm] " << detail::g9(r.curl[0] * kMgPerMmPerTeslaPerM) << " "
        << detail::g9(r.curl[1] * kMgPerMmPerTeslaPerM) << " " << detail::g9(r.curl[2] * kMgPerMmPerTeslaPerM)
        << "\n";
    constexpr double kTolerance = 1e-6;
    const bool pass = r.max_abs() <= kTolerance * t.max_abs_entry();
    out << "maxwell check (residual <= 1e-6 x max entry): " << (pass ? "PASS" : "FAIL") << "\n";
    return kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"EIT magnetic-field imaging: simulate, reconstruct and analyse image stacks", "eitmag"};
    app.require_subcommand(1);

    detail::ConfigOptions sim_opts;
    std::string sim_out;
    unsigned threads = 1;
    auto* simulate = app.add_subcommand("simulate", "synthesize a detuning-swept image stack");
    sim_opts.attach(simulate);
    simulate->add_option("--out", sim_out, "output stack file")->required();
    simulate->add_option("--threads", threads, "worker threads (results do not depend on it)");

    detail::ConfigOptions rec_opts;
    std::string rec_stack;
    std::string rec_out = "field";
    auto* reconstruct = app.add_subcommand("reconstruct", "recover the field map from a stack");
    rec_opts.attach(reconstruct);
    reconstruct->add_option("stack", rec_stack, "input stack file")->required();
    reconstruct->add_option("--out", rec_out, "output prefix (.csv, .pgm, .diag.txt)");
    reconstruct->add_option("--threads", threads, "worker threads");

    detail::ConfigOptions cmp_opts;
    std::string cmp_a;
    std::string cmp_b;
    std::string cmp_out = "compare";
    auto* compare = app.add_subcommand("compare", "compare a field map with another map or the analytic scene");
    cmp_opts.attach(compare);
    compare->add_option("map_a", cmp_a, "field-map CSV")->required();
    compare->add_option("map_b", cmp_b, "second field-map CSV (omit to compare with the configured scene)");
    compare->add_option("--out", cmp_out, "output prefix (.stats.txt, .slice.csv)");

    double gamma_kHz = 2.0;
    double snr = 0.0;
    double n_samples = 10.0;
    double gm_MHz = 0.7;
    auto* sensitivity = app.add_subcommand("sensitivity", "field resolution of a Lorentzian peak search");
    sensitivity->add_option("--gamma-kHz", gamma_kHz, "resonance FWHM");
    sensitivity->add_option("--snr", snr, "signal-to-noise ratio")->required();
    sensitivity->add_option("--n", n_samples, "samples per resonance width");
    sensitivity->add_option("--gm-MHz-per-G", gm_MHz, "gyromagnetic ratio");

    detail::ConfigOptions grad_opts;
    std::string point = "20.1,0,0";
    double h_um = 1.0;
    auto* gradtensor = app.add_subcommand("gradtensor", "finite-difference field gradient and Maxwell residuals");
    grad_opts.attach(gradtensor);
    gradtensor->add_option("--point", point, "x,y,z in mm, measured from the wire");
    gradtensor->add_option("--h-um", h_um, "stencil step");

    std::string defaults_out;
    auto* defaults = app.add_subcommand("print-defaults", "print the default configuration file");
    defaults->add_option("--out", defaults_out, "write to a file instead of standard output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate) {
            return cmd_simulate(sim_opts.load(), sim_out, threads, out, err);
        }
        if (*reconstruct) {
            return cmd_reconstruct(rec_stack, rec_opts.load(), rec_out, threads, err);
        }
        if (*compare) {
            return cmd_compare(cmp_a, cmp_b, cmp_opts.load(), cmp_out, err);
        }
        if (*sensitivity) {
            return cmd_sensitivity(gamma_kHz * 1e3, snr, n_samples, gm_MHz * 1e6, out);
        }
        if (*gradtensor) {
            const std::vector<double> p = detail::parse_point_mm(point);
            return cmd_gradtensor(grad_opts.load(), {p[0], p[1], p[2]}, h_um * 1e-6, out);
        }
        if (*defaults) {
            const std::string text = format_config(RunConfig{});
            if (defaults_out.empty()) {
                out << text;
            } else {
                write_file_atomic(defaults_out, text);
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << "\n";
        return kUsage;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kInputFormat;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kWriteIo;
    }
    return kUsage;
}

}  // namespace eitmag::cli
