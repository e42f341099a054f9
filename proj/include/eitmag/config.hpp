#pragma once

// Flat "section.key = value" run configuration. Every physical quantity carries its
// unit in the key name; values are converted to SI once, here.

#include "eitmag/core.hpp"
#include "eitmag/eit_optics.hpp"
#include "eitmag/field_model.hpp"
#include "eitmag/recon.hpp"
#include "eitmag/stack_sim.hpp"

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace eitmag {

struct RunConfig {
    Scene scene;
    ShieldConfig shield;  // used by the shielded model and by comparisons
    double sweep_center_offset_Hz = 61.0e3;  // relative to the hyperfine frequency
    SweepConfig sweep_shape;                 // span and step; centre derived
    CameraConfig camera;
    NoiseConfig noise{0.5, 1};
    ReconConfig recon;

    SweepConfig sweep() const {
        SweepConfig s = sweep_shape;
        s.center_Hz = scene.line.hfs_frequency_Hz + sweep_center_offset_Hz;
        return s;
    }

    /// Scene with the shield attached, ready for the simulator.
    Scene resolved_scene() const {
        Scene s = scene;
        s.field.shield = shield;
        return s;
    }

    void validate() const {
        try {
            resolved_scene().validate();
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
        sweep().validate();
        camera.validate();
        noise.validate();
        recon.validate();
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline double parse_double(std::string_view key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size() && std::isfinite(d)) {
            return d;
        }
    } catch (const std::logic_error&) {
    }
    throw ConfigError(std::string(key) + ": expected a number, got '" + v + "'");
}

inline long long parse_integer(std::string_view key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used == v.size()) {
            return i;
        }
    } catch (const std::logic_error&) {
    }
    throw ConfigError(std::string(key) + ": expected an integer, got '" + v + "'");
}

inline std::string fmt(double v) {
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.12g", v);
    return buf.data();
}

}  // namespace detail

struct ConfigKey {
    std::string_view name;
    std::string_view help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

inline const std::vector<ConfigKey>& config_keys() {
    using detail::fmt;
    using detail::parse_double;
    using detail::parse_integer;

    // Real-valued key stored as `unit * value` in SI.
    auto real = [](std::string_view name, std::string_view help, double unit, auto member) {
        return ConfigKey{
            name, help, [=](const RunConfig& c) { return fmt(member(c) / unit); },
            [=](RunConfig& c, const std::string& v) { member(c) = parse_double(name, v) * unit; }};
    };
    auto integer = [](std::string_view name, std::string_view help, auto member) {
        return ConfigKey{name, help, [=](const RunConfig& c) { return std::to_string(member(c)); },
                         [=](RunConfig& c, const std::string& v) {
                             const long long i = parse_integer(name, v);
                             if (i < -2147483647LL || i > 2147483647LL) {
                                 throw ConfigError(std::string(name) + ": integer out of range");
                             }
                             member(c) = static_cast<int>(i);
                         }};
    };

    static const std::vector<ConfigKey> keys = {
        {"scene.model", "bare | linearized | shielded | uniform",
         [](const RunConfig& c) { return std::string(to_string(c.scene.field.model)); },
         [](RunConfig& c, const std::string& v) { c.scene.field.model = field_model_from_string(v); }},
        real("scene.current_mA", "wire current", 1e-3, [](auto& c) -> auto& { return c.scene.field.wire.current_A; }),
        real("scene.standoff_mm", "wire to beam-axis distance (wire sits at -x)", 1e-3,
             [](auto& c) -> auto& { return c.scene.field.wire.standoff_m; }),
        real("scene.uniform_field_mG", "field along +y for the uniform model", 1e-7,
             [](auto& c) -> auto& { return c.scene.field.uniform_field_T; }),
        real("shield.radius_mm", "inner radius of the permeable cylinder", 1e-3,
             [](auto& c) -> auto& { return c.shield.radius_m; }),
        real("shield.mu_r", "relative permeability", 1.0, [](auto& c) -> auto& { return c.shield.mu_r; }),
        real("shield.offset_x_mm", "shield axis relative to the beam axis", 1e-3,
             [](auto& c) -> auto& { return c.shield.center_offset_m[0]; }),
        real("shield.offset_y_mm", "", 1e-3, [](auto& c) -> auto& { return c.shield.center_offset_m[1]; }),
        real("line.hfs_GHz", "ground-state hyperfine splitting", 1e9,
             [](auto& c) -> auto& { return c.scene.line.hfs_frequency_Hz; }),
        real("line.gm_MHz_per_G", "gyromagnetic ratio", 1e6,
             [](auto& c) -> auto& { return c.scene.line.gyromagnetic_Hz_per_G; }),
        real("line.fwhm_kHz", "EIT resonance full width", 1e3, [](auto& c) -> auto& { return c.scene.line.fwhm_Hz; }),
        real("line.contrast", "peak height of each resonance (transmission units)", 1.0,
             [](auto& c) -> auto& { return c.scene.line.contrast; }),
        real("line.baseline", "off-resonance transmission", 1.0, [](auto& c) -> auto& { return c.scene.line.baseline; }),
        real("line.light_shift_Hz", "constant resonance offset", 1.0,
             [](auto& c) -> auto& { return c.scene.line.light_shift_offset_Hz; }),
        real("beam.fwhm_x_mm", "beam intensity FWHM along x", 1e-3, [](auto& c) -> auto& { return c.scene.beam.fwhm_x_m; }),
        real("beam.fwhm_y_mm", "beam intensity FWHM along y", 1e-3, [](auto& c) -> auto& { return c.scene.beam.fwhm_y_m; }),
        real("beam.center_x_mm", "", 1e-3, [](auto& c) -> auto& { return c.scene.beam.center_m[0]; }),
        real("beam.center_y_mm", "", 1e-3, [](auto& c) -> auto& { return c.scene.beam.center_m[1]; }),
        real("beam.scale", "peak transmitted intensity (full scale = camera.full_scale)", 1.0,
             [](auto& c) -> auto& { return c.scene.beam.scale; }),
        real("sweep.center_offset_kHz", "sweep centre minus the hyperfine frequency", 1e3,
             [](auto& c) -> auto& { return c.sweep_center_offset_Hz; }),
        real("sweep.span_kHz", "", 1e3, [](auto& c) -> auto& { return c.sweep_shape.span_Hz; }),
        real("sweep.step_Hz", "", 1.0, [](auto& c) -> auto& { return c.sweep_shape.step_Hz; }),
        real("camera.pixel_pitch_um", "object-plane pixel size", 1e-6,
             [](auto& c) -> auto& { return c.camera.pixel_pitch_m; }),
        integer("camera.width_px", "", [](auto& c) -> auto& { return c.camera.width; }),
        integer("camera.height_px", "", [](auto& c) -> auto& { return c.camera.height; }),
        integer("camera.bit_depth", "ADC resolution", [](auto& c) -> auto& { return c.camera.bit_depth; }),
        real("camera.full_scale", "transmission mapped to the maximum DN", 1.0,
             [](auto& c) -> auto& { return c.camera.full_scale; }),
        integer("camera.frames_averaged", "frames averaged per detuning",
                [](auto& c) -> auto& { return c.camera.frames_averaged; }),
        real("camera.frame_rate_Hz", "metadata only", 1.0, [](auto& c) -> auto& { return c.camera.frame_rate_Hz; }),
        real("noise.sigma_frame", "per-frame additive noise std (transmission units)", 1.0,
             [](auto& c) -> auto& { return c.noise.sigma_frame; }),
        {"noise.seed", "64-bit seed",
         [](const RunConfig& c) { return std::to_string(c.noise.seed); },
         [](RunConfig& c, const std::string& v) {
             try {
                 std::size_t used = 0;
                 const unsigned long long s = std::stoull(v, &used);
                 if (used == v.size() && v.front() != '-') {
                     c.noise.seed = s;
                     return;
                 }
             } catch (const std::logic_error&) {
             }
             throw ConfigError("noise.seed: expected an unsigned integer, got '" + v + "'");
         }},
        integer("recon.lowpass_window", "odd moving-average length (samples)",
                [](auto& c) -> auto& { return c.recon.lowpass_window; }),
        {"recon.branch", "plus | minus",
         [](const RunConfig& c) { return std::string(to_string(c.recon.branch)); },
         [](RunConfig& c, const std::string& v) { c.recon.branch = branch_from_string(v); }},
        real("recon.mask_threshold", "fraction of the brightest pixel kept", 1.0,
             [](auto& c) -> auto& { return c.recon.mask_threshold; }),
        {"recon.refine", "argmax | parabolic",
         [](const RunConfig& c) { return std::string(to_string(c.recon.refine)); },
         [](RunConfig& c, const std::string& v) { c.recon.refine = refine_from_string(v); }},
    };
    return keys;
}

/// Applies one "key = value" assignment. Unknown keys are rejected.
inline void apply_setting(RunConfig& cfg, std::string_view key, const std::string& value) {
    const std::string k = detail::trim(key);
    for (const ConfigKey& entry : config_keys()) {
        if (entry.name == k) {
            entry.set(cfg, detail::trim(value));
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + k + "'");
}

/// Parses "key=value" (as given to --set).
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("override must look like key=value: '" + std::string(assignment) + "'");
    }
    apply_setting(cfg, assignment.substr(0, eq), std::string(assignment.substr(eq + 1)));
}

/// Applies a config file on top of `cfg`. '#' starts a comment.
inline void apply_config_text(RunConfig& cfg, std::istream& is) {
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string t = detail::trim(line);
        if (t.empty()) {
            continue;
        }
        try {
            apply_override(cfg, t);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline std::string format_config(const RunConfig& cfg) {
    std::string out =
        "# EIT field-imaging run configuration.\n"
        "# Regenerate with: eitmag print-defaults\n";
    std::string_view section;
    for (const ConfigKey& k : config_keys()) {
        const std::string_view sec = k.name.substr(0, k.name.find('.'));
        if (sec != section) {
            out += "\n";
            section = sec;
        }
        std::string line = std::string(k.name) + " = " + k.get(cfg);
        if (!k.help.empty()) {
            line.resize(std::max<std::size_t>(line.size() + 1, 36), ' ');
            line += "# " + std::string(k.help);
        }
        out += line + "\n";
    }
    return out;
}

}  // namespace eitmag
