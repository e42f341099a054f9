#pragma once

// Synthetic camera stacks: per-pixel EIT transmission through the beam profile,
// frame-averaged Gaussian noise and ADC quantization.
//
// Pixel (ix, iy) is centred at ((ix - W/2) * pitch, (iy - H/2) * pitch) in the beam
// frame (integer division), so pixel (W/2, H/2) sits on the beam axis and row H/2 is
// the y = 0 slice.

#include "eitmag/core.hpp"
#include "eitmag/eit_optics.hpp"
#include "eitmag/field_model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace eitmag {

enum class FieldModelKind { bare, linearized, shielded, uniform };

inline std::string_view to_string(FieldModelKind k) {
    switch (k) {
        case FieldModelKind::bare: return "bare";
        case FieldModelKind::linearized: return "linearized";
        case FieldModelKind::shielded: return "shielded";
        case FieldModelKind::uniform: return "uniform";
    }
    return "bare";
}

inline FieldModelKind field_model_from_string(std::string_view s) {
    if (s == "bare") return FieldModelKind::bare;
    if (s == "linearized") return FieldModelKind::linearized;
    if (s == "shielded") return FieldModelKind::shielded;
    if (s == "uniform") return FieldModelKind::uniform;
    throw ConfigError("unknown field model '" + std::string(s) + "'");
}

struct WireScene {
    FieldModelKind model = FieldModelKind::bare;
    WireConfig wire;
    std::optional<ShieldConfig> shield;
    double uniform_field_T = 0.0;  // along +y, uniform model only

    void validate() const {
        wire.validate();
        if (model == FieldModelKind::shielded) {
            if (!shield) {
                throw ConfigError("shielded model requires a shield configuration");
            }
            validate_shield(*shield, wire);
        }
        if (!std::isfinite(uniform_field_T)) {
            throw ConfigError("uniform field must be finite");
        }
    }
};

/// Field vector of the scene at a beam-frame point [T]. z is ignored by every model.
inline Vec3 scene_field_vector(const WireScene& s, const Vec3& p) {
    switch (s.model) {
        case FieldModelKind::bare: {
            const WireConfig& w = s.wire;
            return wire_field_vector({p[0] + w.standoff_m, p[1], p[2]}, w);
        }
        case FieldModelKind::linearized:
            return {0.0, linearized_wire_field(p[0], s.wire), 0.0};
        case FieldModelKind::shielded: {
            const Vec2 b = shielded_wire_field({p[0], p[1]}, s.wire, s.shield.value());
            return {b[0], b[1], 0.0};
        }
        case FieldModelKind::uniform:
            return {0.0, s.uniform_field_T, 0.0};
    }
    return {};
}

/// Resonance-relevant field [T]: transverse magnitude, or the signed scalar of the linear model.
inline double scene_field_scalar(const WireScene& s, const Vec2& p) {
    if (s.model == FieldModelKind::linearized) {
        return linearized_wire_field(p[0], s.wire);
    }
    const Vec3 b = scene_field_vector(s, {p[0], p[1], 0.0});
    return std::hypot(b[0], b[1]);
}

struct CameraConfig {
    double pixel_pitch_m = 10.0e-6;
    int width = 200;
    int height = 200;
    int bit_depth = 12;
    double full_scale = 1.0;
    int frames_averaged = 200;
    double frame_rate_Hz = 30.0;  // metadata only

    void validate() const {
        if (!(pixel_pitch_m > 0.0)) throw ConfigError("pixel pitch must be positive");
        if (width < 1 || height < 1) throw ConfigError("camera dimensions must be >= 1");
        if (bit_depth < 1 || bit_depth > 16) throw ConfigError("bit depth must lie in [1, 16]");
        if (!(full_scale > 0.0)) throw ConfigError("full scale must be positive");
        if (frames_averaged < 1) throw ConfigError("frames_averaged must be >= 1");
        if (!(frame_rate_Hz > 0.0)) throw ConfigError("frame rate must be positive");
    }

    std::uint32_t max_dn() const { return (std::uint32_t{1} << bit_depth) - 1U; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

struct SweepConfig {
    double center_Hz = 6.834e9 + 61.0e3;
    double span_Hz = 20.0e3;
    double step_Hz = 200.0;

    void validate() const {
        if (!(span_Hz > 0.0)) throw ConfigError("sweep span must be positive");
        if (!(step_Hz > 0.0) || step_Hz > span_Hz) throw ConfigError("sweep step must lie in (0, span]");
        if (!std::isfinite(center_Hz)) throw ConfigError("sweep centre must be finite");
    }

    std::size_t point_count() const {
        return static_cast<std::size_t>(std::floor(span_Hz / step_Hz + 1e-9)) + 1U;
    }

    std::vector<double> detunings() const {
        std::vector<double> out(point_count());
        const double start = center_Hz - 0.5 * span_Hz;
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] = start + static_cast<double>(k) * step_Hz;
        }
        return out;
    }
};

struct NoiseConfig {
    double sigma_frame = 0.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(sigma_frame >= 0.0) || !std::isfinite(sigma_frame)) {
            throw ConfigError("sigma_frame must be >= 0");
        }
    }
};

/// Everything the camera sees: the field source, the resonance, and the beam.
struct Scene {
    WireScene field;
    EitLineParams line;
    BeamProfile beam;

    void validate() const {
        field.validate();
        line.validate();
        beam.validate();
    }
};

/// Non-fatal acquisition checks: averaged noise should stay above one LSB.
inline std::vector<std::string> acquisition_warnings(const NoiseConfig& noise, const CameraConfig& camera) {
    std::vector<std::string> out;
    const double averaged = noise.sigma_frame / std::sqrt(static_cast<double>(camera.frames_averaged));
    const double lsb = camera.full_scale / static_cast<double>(camera.max_dn());
    if (noise.sigma_frame > 0.0 && averaged < lsb) {
        out.push_back("averaged noise (" + std::to_string(averaged) + ") is below one ADC step (" +
                      std::to_string(lsb) + "); detection will be quantization limited");
    }
    return out;
}

inline Vec2 pixel_position(int ix, int iy, const CameraConfig& camera) {
    return {static_cast<double>(ix - camera.width / 2) * camera.pixel_pitch_m,
            static_cast<double>(iy - camera.height / 2) * camera.pixel_pitch_m};
}

/// Field at the pixel centre [G].
inline double pixel_field(int ix, int iy, const WireScene& scene, const CameraConfig& camera) {
    if (ix < 0 || iy < 0 || ix >= camera.width || iy >= camera.height) {
        throw DomainError("pixel index out of range");
    }
    return tesla_to_gauss(scene_field_scalar(scene, pixel_position(ix, iy, camera)));
}

/// Round-half-up ADC conversion of a transmission value.
inline std::uint16_t quantize(double value, const CameraConfig& camera) {
    const double clamped = std::clamp(value, 0.0, camera.full_scale);
    const double scaled = clamped / camera.full_scale * static_cast<double>(camera.max_dn());
    return static_cast<std::uint16_t>(std::floor(scaled + 0.5));
}

inline double dequantize(std::uint16_t dn, const CameraConfig& camera) {
    return static_cast<double>(dn) * camera.full_scale / static_cast<double>(camera.max_dn());
}

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// (0, 1), 53-bit resolution; never returns 0 so log() is safe.
constexpr double to_open_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Stateless counter-based normal stream keyed by (seed, ix, iy). The draw for sample k
/// depends only on the key and k, never on evaluation order.
class PixelRng {
public:
    PixelRng(std::uint64_t seed, int ix, int iy)
        : key_(detail::splitmix64(detail::splitmix64(detail::splitmix64(seed) ^ static_cast<std::uint32_t>(ix)) ^
                                  (static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)) << 32))) {}

    /// Standard normal variate for counter k (Box-Muller).
    double normal(std::uint64_t k) const {
        const std::uint64_t base = detail::splitmix64(key_ ^ detail::splitmix64(k));
        const double u1 = detail::to_open_unit(detail::splitmix64(base));
        const double u2 = detail::to_open_unit(detail::splitmix64(base + 1));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
};

/// Noise-free detected signal (beam x transmission) over the sweep.
inline std::vector<double> ideal_pixel_trace(int ix, int iy, const Scene& scene, const SweepConfig& sweep,
                                             const CameraConfig& camera) {
    const Vec2 pos = pixel_position(ix, iy, camera);
    const double intensity = scene.beam.scale * beam_intensity(pos[0], pos[1], scene.beam);
    const double field_G = pixel_field(ix, iy, scene.field, camera);
    const std::vector<double> det = sweep.detunings();
    std::vector<double> out(det.size());
    for (std::size_t k = 0; k < det.size(); ++k) {
        out[k] = intensity * transmission(det[k], field_G, scene.line);
    }
    return out;
}

/// Mean of `frames_averaged` i.i.d. N(0, sigma_frame) frames added to `ideal`. The mean of
/// N normals is drawn directly as one N(0, sigma/sqrt(N)) variate.
inline double averaged_sample(double ideal, const NoiseConfig& noise, const CameraConfig& camera,
                              const PixelRng& rng, std::size_t k) {
    if (noise.sigma_frame == 0.0) {
        return ideal;
    }
    const double sigma = noise.sigma_frame / std::sqrt(static_cast<double>(camera.frames_averaged));
    return ideal + sigma * rng.normal(k);
}

inline std::vector<std::uint16_t> simulate_pixel_trace(int ix, int iy, const Scene& scene, const SweepConfig& sweep,
                                                       const NoiseConfig& noise, const CameraConfig& camera,
                                                       const PixelRng& rng) {
    const std::vector<double> ideal = ideal_pixel_trace(ix, iy, scene, sweep, camera);
    std::vector<std::uint16_t> out(ideal.size());
    for (std::size_t k = 0; k < ideal.size(); ++k) {
        out[k] = quantize(averaged_sample(ideal[k], noise, camera, rng, k), camera);
    }
    return out;
}

struct ImageStack {
    std::vector<double> detunings_Hz;
    std::vector<std::uint16_t> frames;  // detuning-major, then y, then x
    CameraConfig camera;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t frame_count() const { return detunings_Hz.size(); }

    std::size_t index(std::size_t k, int ix, int iy) const {
        return k * camera.pixel_count() + static_cast<std::size_t>(iy) * static_cast<std::size_t>(camera.width) +
               static_cast<std::size_t>(ix);
    }
    std::uint16_t at(std::size_t k, int ix, int iy) const { return frames[index(k, ix, iy)]; }

    std::vector<double> trace(int ix, int iy) const {
        std::vector<double> out(frame_count());
        for (std::size_t k = 0; k < out.size(); ++k) {
            out[k] = static_cast<double>(at(k, ix, iy));
        }
        return out;
    }

    /// Throws FormatError when the shape, ordering or DN range is inconsistent.
    void validate() const {
        try {
            camera.validate();
        } catch (const ConfigError& e) {
            throw FormatError(std::string("camera: ") + e.what());
        }
        if (frames.size() != frame_count() * camera.pixel_count()) {
            throw FormatError("frame payload does not match detunings x width x height");
        }
        for (std::size_t k = 1; k < detunings_Hz.size(); ++k) {
            if (!(detunings_Hz[k] > detunings_Hz[k - 1])) {
                throw FormatError("detunings must be strictly increasing");
            }
        }
        const std::uint32_t limit = camera.max_dn();
        for (std::uint16_t dn : frames) {
            if (dn > limit) {
                throw FormatError("DN exceeds the camera bit depth");
            }
        }
    }
};

inline nlohmann::json scene_metadata(const Scene& scene, const SweepConfig& sweep, const NoiseConfig& noise) {
    const WireScene& f = scene.field;
    nlohmann::json m;
    m["geometry"] = "wire at (-standoff, 0) in the beam frame; field grows toward -x; pixel (W/2,H/2) on beam axis";
    m["field_model"] = std::string(to_string(f.model));
    m["wire"] = {{"current_A", f.wire.current_A}, {"standoff_m", f.wire.standoff_m}};
    if (f.shield) {
        m["shield"] = {{"radius_m", f.shield->radius_m},
                       {"mu_r", f.shield->mu_r},
                       {"center_offset_m", {f.shield->center_offset_m[0], f.shield->center_offset_m[1]}}};
    }
    if (f.model == FieldModelKind::uniform) {
        m["uniform_field_T"] = f.uniform_field_T;
    }
    const EitLineParams& p = scene.line;
    m["line"] = {{"hfs_frequency_Hz", p.hfs_frequency_Hz},
                 {"gyromagnetic_Hz_per_G", p.gyromagnetic_Hz_per_G},
                 {"fwhm_Hz", p.fwhm_Hz},
                 {"contrast", p.contrast},
                 {"baseline", p.baseline},
                 {"light_shift_offset_Hz", p.light_shift_offset_Hz}};
    m["beam"] = {{"fwhm_x_m", scene.beam.fwhm_x_m},
                 {"fwhm_y_m", scene.beam.fwhm_y_m},
                 {"center_m", {scene.beam.center_m[0], scene.beam.center_m[1]}},
                 {"scale", scene.beam.scale}};
    m["sweep"] = {{"center_Hz", sweep.center_Hz}, {"span_Hz", sweep.span_Hz}, {"step_Hz", sweep.step_Hz}};
    m["noise"] = {{"sigma_frame", noise.sigma_frame}, {"seed", noise.seed}};
    return m;
}

/// Full stack. Bit-identical for identical inputs regardless of `threads`.
inline ImageStack simulate_stack(const Scene& scene, const SweepConfig& sweep, const NoiseConfig& noise,
                                 const CameraConfig& camera, unsigned threads = 1) {
    scene.validate();
    sweep.validate();
    noise.validate();
    camera.validate();

    ImageStack stack;
    stack.detunings_Hz = sweep.detunings();
    stack.camera = camera;
    stack.frames.assign(stack.detunings_Hz.size() * camera.pixel_count(), 0);
    stack.metadata = scene_metadata(scene, sweep, noise);

    auto fill_rows = [&](int row_begin, int row_end) {
        for (int iy = row_begin; iy < row_end; ++iy) {
            for (int ix = 0; ix < camera.width; ++ix) {
                const PixelRng rng(noise.seed, ix, iy);
                const auto trace = simulate_pixel_trace(ix, iy, scene, sweep, noise, camera, rng);
                for (std::size_t k = 0; k < trace.size(); ++k) {
                    stack.frames[stack.index(k, ix, iy)] = trace[k];
                }
            }
        }
    };

    threads = std::clamp(threads, 1U, static_cast<unsigned>(camera.height));
    if (threads == 1) {
        fill_rows(0, camera.height);
    } else {
        std::vector<std::jthread> pool;
        const int chunk = (camera.height + static_cast<int>(threads) - 1) / static_cast<int>(threads);
        for (int begin = 0; begin < camera.height; begin += chunk) {
            pool.emplace_back(fill_rows, begin, std::min(camera.height, begin + chunk));
        }
    }
    return stack;
}

}  // namespace eitmag
