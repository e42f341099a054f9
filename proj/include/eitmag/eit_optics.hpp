#pragma once

// Phenomenological EIT transmission: two Lorentzian windows at the Zeeman-shifted
// two-photon resonances, on a constant background, seen through a Gaussian beam.

#include "eitmag/core.hpp"

#include <cmath>
#include <numbers>
#include <utility>

namespace eitmag {

struct EitLineParams {
    double hfs_frequency_Hz = 6.834e9;
    double gyromagnetic_Hz_per_G = 0.7e6;
    double fwhm_Hz = 2.0e3;
    double contrast = 0.2;
    double baseline = 0.5;
    double light_shift_offset_Hz = 0.0;

    void validate() const {
        if (!(fwhm_Hz > 0.0) || !std::isfinite(fwhm_Hz)) {
            throw ConfigError("EIT linewidth must be positive");
        }
        if (!(gyromagnetic_Hz_per_G > 0.0) || !std::isfinite(gyromagnetic_Hz_per_G)) {
            throw ConfigError("gyromagnetic ratio must be positive");
        }
        if (!(contrast >= 0.0 && contrast <= 1.0)) {
            throw ConfigError("contrast must lie in [0, 1]");
        }
        if (!(baseline >= 0.0 && baseline < 1.0)) {
            throw ConfigError("baseline must lie in [0, 1)");
        }
        // Both windows may overlap at B = 0; transmission must stay <= 1 there.
        if (baseline + 2.0 * contrast > 1.0 + 1e-12) {
            throw ConfigError("baseline + 2*contrast must not exceed 1");
        }
        if (!std::isfinite(hfs_frequency_Hz) || !std::isfinite(light_shift_offset_Hz)) {
            throw ConfigError("line frequencies must be finite");
        }
    }
};

struct ResonancePair {
    double minus_Hz;
    double plus_Hz;
};

/// Two-photon detunings of the Zeeman pair, Delta_HFS +/- 2 g_m |B| (+ light shift).
inline ResonancePair resonance_detunings(double field_G, const EitLineParams& p) {
    const double split = 2.0 * p.gyromagnetic_Hz_per_G * std::abs(field_G);
    const double center = p.hfs_frequency_Hz + p.light_shift_offset_Hz;
    return {center - split, center + split};
}

/// Unit-height Lorentzian with full width `fwhm` centred on `center`.
inline double lorentzian(double x, double center, double fwhm) {
    const double hw = 0.5 * fwhm;
    const double d = x - center;
    return hw * hw / (d * d + hw * hw);
}

inline double transmission(double detuning_Hz, double field_G, const EitLineParams& p) {
    const auto [lo, hi] = resonance_detunings(field_G, p);
    return p.baseline +
           p.contrast * (lorentzian(detuning_Hz, lo, p.fwhm_Hz) + lorentzian(detuning_Hz, hi, p.fwhm_Hz));
}

struct BeamProfile {
    double fwhm_x_m = 1.8e-3;
    double fwhm_y_m = 1.4e-3;
    Vec2 center_m{0.0, 0.0};
    double scale = 1.0;

    void validate() const {
        if (!(fwhm_x_m > 0.0) || !(fwhm_y_m > 0.0)) {
            throw ConfigError("beam FWHM must be positive");
        }
        if (!(scale >= 0.0) || !std::isfinite(scale)) {
            throw ConfigError("beam scale must be non-negative");
        }
    }
};

/// Normalized Gaussian intensity (peak 1 at the centre, before `scale`).
inline double beam_intensity(double x_m, double y_m, const BeamProfile& b) {
    const double dx = (x_m - b.center_m[0]) / b.fwhm_x_m;
    const double dy = (y_m - b.center_m[1]) / b.fwhm_y_m;
    return std::exp(-4.0 * std::numbers::ln2 * (dx * dx + dy * dy));
}

}  // namespace eitmag
