#pragma once

// Field-map reconstruction from a detuning-swept image stack: brightness mask,
// zero-phase smoothing, per-pixel peak localization, and detuning -> field inversion.

#include "eitmag/core.hpp"
#include "eitmag/eit_optics.hpp"
#include "eitmag/stack_sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace eitmag {

enum class Branch { plus, minus };
enum class Refine { argmax, parabolic };

inline std::string_view to_string(Branch b) { return b == Branch::plus ? "plus" : "minus"; }
inline std::string_view to_string(Refine r) { return r == Refine::argmax ? "argmax" : "parabolic"; }

inline Branch branch_from_string(std::string_view s) {
    if (s == "plus") return Branch::plus;
    if (s == "minus") return Branch::minus;
    throw ConfigError("unknown branch '" + std::string(s) + "'");
}

inline Refine refine_from_string(std::string_view s) {
    if (s == "argmax") return Refine::argmax;
    if (s == "parabolic") return Refine::parabolic;
    throw ConfigError("unknown refinement '" + std::string(s) + "'");
}

struct ReconConfig {
    int lowpass_window = 7;
    Branch branch = Branch::plus;
    double mask_threshold = 0.5;
    Refine refine = Refine::parabolic;

    void validate() const {
        if (lowpass_window < 1 || lowpass_window % 2 == 0) {
            throw ConfigError("lowpass window must be odd and >= 1");
        }
        if (!(mask_threshold > 0.0 && mask_threshold < 1.0)) {
            throw ConfigError("mask threshold must lie in (0, 1)");
        }
    }
};

/// The maximum sits on the first or last sample: the sweep missed the resonance.
class PeakAtEdge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FieldMap {
    static constexpr double kMasked = std::numeric_limits<double>::quiet_NaN();

    int width = 0;
    int height = 0;
    double pixel_pitch_m = 10.0e-6;
    std::vector<double> values_G;     // NaN where masked
    std::vector<std::uint8_t> valid;  // 1 = valid
    nlohmann::json provenance = nlohmann::json::object();

    FieldMap() = default;
    FieldMap(int w, int h, double pitch)
        : width(w), height(h), pixel_pitch_m(pitch),
          values_G(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), kMasked),
          valid(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

    std::size_t index(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(width) + static_cast<std::size_t>(ix);
    }
    bool is_valid(int ix, int iy) const { return valid[index(ix, iy)] != 0; }
    double at(int ix, int iy) const { return values_G[index(ix, iy)]; }

    void set(int ix, int iy, double value_G) {
        values_G[index(ix, iy)] = value_G;
        valid[index(ix, iy)] = 1;
    }
    void mask_out(int ix, int iy) {
        values_G[index(ix, iy)] = kMasked;
        valid[index(ix, iy)] = 0;
    }

    std::size_t valid_count() const {
        return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
    }

    /// Pixel centre in the beam frame, same convention as the simulator.
    Vec2 position(int ix, int iy) const {
        return {static_cast<double>(ix - width / 2) * pixel_pitch_m,
                static_cast<double>(iy - height / 2) * pixel_pitch_m};
    }

    void validate() const {
        const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
        if (width < 1 || height < 1 || values_G.size() != n || valid.size() != n) {
            throw FormatError("field map dimensions are inconsistent");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (valid[i] != 0 && !std::isfinite(values_G[i])) {
                throw FormatError("valid field-map entries must be finite");
            }
            if (valid[i] == 0 && !std::isnan(values_G[i])) {
                throw FormatError("masked field-map entries must carry the NaN sentinel");
            }
        }
    }
};

/// Centred moving average; the window shrinks symmetrically near the ends so the
/// output has the input's length and no phase shift.
inline std::vector<double> lowpass(std::span<const double> trace, int window) {
    if (trace.empty()) {
        throw DomainError("cannot filter an empty trace");
    }
    if (window < 1 || window % 2 == 0) {
        throw DomainError("lowpass window must be odd and >= 1");
    }
    if (static_cast<std::size_t>(window) > trace.size()) {
        throw DomainError("lowpass window longer than the trace");
    }
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(trace.size());
    const std::ptrdiff_t half = window / 2;
    std::vector<double> out(trace.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const std::ptrdiff_t h = std::min({half, i, n - 1 - i});
        double sum = 0.0;
        for (std::ptrdiff_t j = i - h; j <= i + h; ++j) {
            sum += trace[static_cast<std::size_t>(j)];
        }
        out[static_cast<std::size_t>(i)] = sum / static_cast<double>(2 * h + 1);
    }
    return out;
}

struct PeakResult {
    bool at_edge = false;
    std::size_t index = 0;  // grid argmax
    double detuning_Hz = 0.0;
};

/// Non-throwing peak search; see locate_peak().
inline PeakResult find_peak(std::span<const double> trace, std::span<const double> detunings, Refine refine) {
    if (trace.size() < 3 || trace.size() != detunings.size()) {
        throw DomainError("peak search needs >= 3 samples with matching detunings");
    }
    const double step = (detunings.back() - detunings.front()) / static_cast<double>(detunings.size() - 1);
    for (std::size_t k = 1; k < detunings.size(); ++k) {
        const double d = detunings[k] - detunings[k - 1];
        if (!(d > 0.0) || std::abs(d - step) > 1e-6 * step) {
            throw DomainError("detunings must be strictly increasing with a uniform step");
        }
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
        if (trace[k] > trace[best]) {  // strict: ties resolve to the lower detuning
            best = k;
        }
    }
    PeakResult r;
    r.index = best;
    r.detuning_Hz = detunings[best];
    if (best == 0 || best + 1 == trace.size()) {
        r.at_edge = true;
        return r;
    }
    if (refine == Refine::parabolic) {
        const double ym = trace[best - 1];
        const double y0 = trace[best];
        const double yp = trace[best + 1];
        const double curvature = ym - 2.0 * y0 + yp;
        if (curvature < 0.0) {
            r.detuning_Hz += 0.5 * (ym - yp) / curvature * step;
        }
    }
    return r;
}

/// Detuning of the trace maximum, optionally refined by a 3-point parabola.
inline double locate_peak(std::span<const double> trace, std::span<const double> detunings, Refine refine) {
    const PeakResult r = find_peak(trace, detunings, refine);
    if (r.at_edge) {
        throw PeakAtEdge("trace maximum lies on the sweep edge");
    }
    return r.detuning_Hz;
}

/// Inverts Delta_HFS +/- 2 g_m B for the selected Zeeman branch [G].
inline double detuning_to_field(double nu_peak_Hz, const EitLineParams& p, Branch branch) {
    const double shift = nu_peak_Hz - p.hfs_frequency_Hz - p.light_shift_offset_Hz;
    const double b = shift / (2.0 * p.gyromagnetic_Hz_per_G);
    return branch == Branch::plus ? b : -b;
}

inline double median(std::vector<double> v) {
    if (v.empty()) {
        throw DomainError("median of an empty set");
    }
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
}

struct ReconDiagnostics {
    std::size_t pixels = 0;
    std::size_t masked_in = 0;     // passed the brightness mask
    std::size_t peak_at_edge = 0;  // masked in, but the maximum sat on a sweep edge
    std::size_t valid = 0;
    double min_G = std::numeric_limits<double>::quiet_NaN();
    double max_G = std::numeric_limits<double>::quiet_NaN();

    double failure_fraction() const {
        return masked_in == 0 ? 0.0 : static_cast<double>(peak_at_edge) / static_cast<double>(masked_in);
    }
};

struct Reconstruction {
    FieldMap map;
    ReconDiagnostics diagnostics;
};

/// Per-pixel brightness used for masking: median DN over the sweep.
inline std::vector<double> brightness_image(const ImageStack& stack) {
    std::vector<double> out(stack.camera.pixel_count());
    for (int iy = 0; iy < stack.camera.height; ++iy) {
        for (int ix = 0; ix < stack.camera.width; ++ix) {
            out[static_cast<std::size_t>(iy) * static_cast<std::size_t>(stack.camera.width) +
                static_cast<std::size_t>(ix)] = median(stack.trace(ix, iy));
        }
    }
    return out;
}

inline Reconstruction reconstruct_map(const ImageStack& stack, const EitLineParams& p, const ReconConfig& cfg,
                                      unsigned threads = 1) {
    stack.validate();
    p.validate();
    cfg.validate();
    if (stack.frame_count() < 3) {
        throw FormatError("reconstruction needs at least 3 detunings");
    }
    if (static_cast<std::size_t>(cfg.lowpass_window) > stack.frame_count()) {
        throw ConfigError("lowpass window longer than the sweep");
    }

    const CameraConfig& cam = stack.camera;
    Reconstruction out{FieldMap(cam.width, cam.height, cam.pixel_pitch_m), {}};
    const std::vector<double> brightness = brightness_image(stack);
    const double threshold = cfg.mask_threshold * *std::max_element(brightness.begin(), brightness.end());

    std::vector<std::uint8_t> in_mask(brightness.size(), 0);
    std::vector<std::uint8_t> edge(brightness.size(), 0);

    auto rows = [&](int row_begin, int row_end) {
        for (int iy = row_begin; iy < row_end; ++iy) {
            for (int ix = 0; ix < cam.width; ++ix) {
                const std::size_t i = out.map.index(ix, iy);
                // Zero-brightness stacks mask nothing in.
                if (!(brightness[i] >= threshold) || brightness[i] <= 0.0) {
                    continue;
                }
                in_mask[i] = 1;
                const std::vector<double> raw = stack.trace(ix, iy);
                const std::vector<double> smooth = lowpass(raw, cfg.lowpass_window);
                const PeakResult peak = find_peak(smooth, stack.detunings_Hz, cfg.refine);
                if (peak.at_edge) {
                    edge[i] = 1;
                    continue;
                }
                out.map.set(ix, iy, detuning_to_field(peak.detuning_Hz, p, cfg.branch));
            }
        }
    };

    threads = std::clamp(threads, 1U, static_cast<unsigned>(cam.height));
    if (threads == 1) {
        rows(0, cam.height);
    } else {
        std::vector<std::jthread> pool;
        const int chunk = (cam.height + static_cast<int>(threads) - 1) / static_cast<int>(threads);
        for (int begin = 0; begin < cam.height; begin += chunk) {
            pool.emplace_back(rows, begin, std::min(cam.height, begin + chunk));
        }
    }

    ReconDiagnostics& d = out.diagnostics;
    d.pixels = brightness.size();
    for (std::size_t i = 0; i < brightness.size(); ++i) {
        d.masked_in += in_mask[i];
        d.peak_at_edge += edge[i];
        if (out.map.valid[i] != 0) {
            ++d.valid;
            const double v = out.map.values_G[i];
            d.min_G = std::isnan(d.min_G) ? v : std::min(d.min_G, v);
            d.max_G = std::isnan(d.max_G) ? v : std::max(d.max_G, v);
        }
    }

    out.map.provenance = {
        {"lowpass_window", cfg.lowpass_window},
        {"branch", std::string(to_string(cfg.branch))},
        {"mask_threshold", cfg.mask_threshold},
        {"refine", std::string(to_string(cfg.refine))},
        {"sweep", {{"first_Hz", stack.detunings_Hz.front()},
                   {"last_Hz", stack.detunings_Hz.back()},
                   {"count", stack.frame_count()}}},
        {"line", {{"hfs_frequency_Hz", p.hfs_frequency_Hz},
                  {"gyromagnetic_Hz_per_G", p.gyromagnetic_Hz_per_G},
                  {"light_shift_offset_Hz", p.light_shift_offset_Hz}}},
    };
    return out;
}

struct Uncertainty {
    std::vector<double> per_pixel_G;  // NaN outside the common mask
    double rms_G = 0.0;
    std::size_t count = 0;
};

/// Single-run spread from two repeated maps: |a - b| / sqrt(2) on the common mask.
inline Uncertainty uncertainty_map(const FieldMap& a, const FieldMap& b) {
    if (a.width != b.width || a.height != b.height) {
        throw DomainError("field maps differ in size");
    }
    Uncertainty u;
    u.per_pixel_G.assign(a.values_G.size(), FieldMap::kMasked);
    double sum2 = 0.0;
    for (std::size_t i = 0; i < a.values_G.size(); ++i) {
        if (a.valid[i] != 0 && b.valid[i] != 0) {
            const double e = std::abs(a.values_G[i] - b.values_G[i]) / std::numbers::sqrt2;
            u.per_pixel_G[i] = e;
            sum2 += e * e;
            ++u.count;
        }
    }
    if (u.count == 0) {
        throw DomainError("field maps share no valid pixels");
    }
    u.rms_G = std::sqrt(sum2 / static_cast<double>(u.count));
    return u;
}

/// Shot-limited field resolution of a Lorentzian peak search:
/// dB = gamma / (2 g_m * snr * sqrt(n)) [G].
inline double theoretical_sensitivity(double gamma_Hz, double snr, double n, double gm_Hz_per_G) {
    if (!(gamma_Hz > 0.0) || !(snr > 0.0) || !(n > 0.0) || !(gm_Hz_per_G > 0.0)) {
        throw DomainError("sensitivity inputs must all be positive");
    }
    return gamma_Hz / (2.0 * gm_Hz_per_G * snr * std::sqrt(n));
}

/// Median per-pixel S/N measured from two repeated stacks over the valid pixels of `mask`.
/// Signal: smoothed peak height of the run average above its median. Noise: per-sample
/// single-run std estimated from the run difference.
inline double measured_snr(const ImageStack& a, const ImageStack& b, const FieldMap& mask, int lowpass_window) {
    if (a.frames.size() != b.frames.size() || a.camera.width != mask.width || a.camera.height != mask.height) {
        throw DomainError("stacks and mask differ in size");
    }
    std::vector<double> ratios;
    const std::size_t n = a.frame_count();
    for (int iy = 0; iy < mask.height; ++iy) {
        for (int ix = 0; ix < mask.width; ++ix) {
            if (!mask.is_valid(ix, iy)) {
                continue;
            }
            std::vector<double> mean(n);
            double diff2 = 0.0;
            double diff_mean = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double va = a.at(k, ix, iy);
                const double vb = b.at(k, ix, iy);
                mean[k] = 0.5 * (va + vb);
                diff_mean += va - vb;
            }
            diff_mean /= static_cast<double>(n);
            for (std::size_t k = 0; k < n; ++k) {
                const double d = a.at(k, ix, iy) - b.at(k, ix, iy) - diff_mean;
                diff2 += d * d;
            }
            const double noise = std::sqrt(diff2 / static_cast<double>(n - 1)) / std::numbers::sqrt2;
            const std::vector<double> smooth = lowpass(mean, lowpass_window);
            const double signal = *std::max_element(smooth.begin(), smooth.end()) - median(mean);
            if (noise > 0.0) {
                ratios.push_back(signal / noise);
            }
        }
    }
    if (ratios.empty()) {
        throw DomainError("no pixels with measurable noise");
    }
    return median(std::move(ratios));
}

}  // namespace eitmag
