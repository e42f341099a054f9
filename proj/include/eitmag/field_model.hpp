#pragma once

// Magnetostatic forward models for a long straight wire running parallel to the
// optical axis, optionally inside a permeable cylindrical shield.
//
// Frames:
//  * wire frame: the wire passes through the origin along WireConfig::axis.
//    wire_field_vector() and the gradient-tensor tools work here.
//  * beam frame: the optical (beam) axis is the z axis through the origin and the
//    wire sits at (-standoff, 0). The field therefore grows toward -x. The 2-D
//    models (bare_wire_field_2d, shielded_wire_field) and the camera use this frame.

#include "eitmag/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace eitmag {

struct WireConfig {
    double current_A = 0.438;
    double standoff_m = 20.1e-3;  // wire to beam axis
    Vec3 axis{0.0, 0.0, 1.0};     // current direction

    void validate() const {
        if (!std::isfinite(current_A)) {
            throw DomainError("wire current must be finite");
        }
        if (!(standoff_m > 0.0) || !std::isfinite(standoff_m)) {
            throw DomainError("wire standoff must be positive");
        }
        if (!all_finite(axis) || std::abs(norm(axis) - 1.0) > 1e-12) {
            throw DomainError("wire axis must be a unit vector");
        }
    }
};

struct ShieldConfig {
    double radius_m = 30.0e-3;
    double mu_r = 1.0e5;
    Vec2 center_offset_m{0.0, 0.0};  // shield axis relative to the beam axis
};

/// Wire location in the beam frame.
inline Vec2 wire_position(const WireConfig& wire) { return {-wire.standoff_m, 0.0}; }

inline void validate_shield(const ShieldConfig& shield, const WireConfig& wire) {
    if (!(shield.radius_m > 0.0) || !std::isfinite(shield.radius_m)) {
        throw DomainError("shield radius must be positive");
    }
    if (!(shield.mu_r >= 1.0) || !std::isfinite(shield.mu_r)) {
        throw DomainError("shield relative permeability must be >= 1");
    }
    if (!(norm(wire_position(wire) - shield.center_offset_m) < shield.radius_m)) {
        throw DomainError("wire must lie strictly inside the shield");
    }
}

/// |B| = mu0 I / (2 pi rho). Signed by the current.
inline double wire_field_magnitude(double rho_m, const WireConfig& wire) {
    if (!(rho_m > 0.0)) {
        throw DomainError("field diverges on the wire axis (rho must be > 0)");
    }
    return kMu0 * wire.current_A / (2.0 * std::numbers::pi * rho_m);
}

/// Azimuthal field of the wire (wire frame), right-handed about the current direction.
inline Vec3 wire_field_vector(const Vec3& point, const WireConfig& wire) {
    const Vec3& axis = wire.axis;
    const Vec3 radial = point - dot(point, axis) * axis;
    const double rho = norm(radial);
    if (!(rho > 0.0)) {
        throw DomainError("point lies on the wire axis");
    }
    const double b = wire_field_magnitude(rho, wire);
    return (b / rho) * cross(axis, radial);
}

/// First-order expansion of the wire field about the beam axis; dx > 0 moves away from the wire.
inline double linearized_wire_field(double dx_m, const WireConfig& wire) {
    const double b0 = kMu0 * wire.current_A / (2.0 * std::numbers::pi * wire.standoff_m);
    return b0 * (1.0 - dx_m / wire.standoff_m);
}

namespace detail {

// Current along +z (per unit of the wire's z-projection) for the 2-D models.
inline double planar_current(const WireConfig& wire) {
    if (std::abs(std::abs(wire.axis[2]) - 1.0) > 1e-12) {
        throw DomainError("2-D field models require the wire axis along the optical axis");
    }
    return wire.current_A * wire.axis[2];
}

// Field at `point` of an infinite line current along +z located at `source`.
inline Vec2 line_current_field(const Vec2& point, const Vec2& source, double current_A) {
    const Vec2 d = point - source;
    const double r2 = dot(d, d);
    if (!(r2 > 0.0)) {
        throw DomainError("point coincides with a line current");
    }
    const double k = kMu0 * current_A / (2.0 * std::numbers::pi * r2);
    return {-k * d[1], k * d[0]};
}

}  // namespace detail

/// Bare-wire field in the beam frame.
inline Vec2 bare_wire_field_2d(const Vec2& point, const WireConfig& wire) {
    return detail::line_current_field(point, wire_position(wire), detail::planar_current(wire));
}

struct ImageCurrent {
    Vec2 position_m;  // beam frame
    double current_A;
    bool at_infinity;
};

/// Image of the wire in a permeable cylinder: strength I (mu_r - 1)/(mu_r + 1) at the
/// inverse point R^2/a along the ray from the shield axis through the wire.
inline ImageCurrent image_current(const WireConfig& wire, const ShieldConfig& shield) {
    const Vec2 rel = wire_position(wire) - shield.center_offset_m;
    const double a = norm(rel);
    const double strength =
        detail::planar_current(wire) * (shield.mu_r - 1.0) / (shield.mu_r + 1.0);
    if (a == 0.0) {
        return {{0.0, 0.0}, strength, true};
    }
    const double scale = shield.radius_m * shield.radius_m / (a * a);
    return {shield.center_offset_m + scale * rel, strength, false};
}

/// Field inside a single permeable cylindrical shield (beam frame).
inline Vec2 shielded_wire_field(const Vec2& point, const WireConfig& wire, const ShieldConfig& shield) {
    wire.validate();
    validate_shield(shield, wire);
    if (!(norm(point - shield.center_offset_m) < shield.radius_m)) {
        throw DomainError("point lies outside the shield");
    }
    Vec2 b = bare_wire_field_2d(point, wire);
    const ImageCurrent image = image_current(wire, shield);
    if (!image.at_infinity && image.current_A != 0.0) {
        b = b + detail::line_current_field(point, image.position_m, image.current_A);
    }
    return b;
}

/// dB_i/dx_j, row i = field component, column j = derivative direction [T/m].
struct GradientTensor {
    std::array<std::array<double, 3>, 3> d{};

    double operator()(int i, int j) const { return d[i][j]; }

    double max_abs_entry() const {
        double m = 0.0;
        for (const auto& row : d) {
            for (double v : row) {
                m = std::max(m, std::abs(v));
            }
        }
        return m;
    }
};

/// Central-difference estimate of the field Jacobian. Exact for affine fields.
template <class Field>
GradientTensor gradient_tensor(Field&& field, const Vec3& point, double h) {
    if (!(h > 0.0)) {
        throw DomainError("stencil step must be positive");
    }
    GradientTensor t;
    for (int j = 0; j < 3; ++j) {
        Vec3 plus = point;
        Vec3 minus = point;
        plus[j] += h;
        minus[j] -= h;
        const Vec3 fp = field(plus);
        const Vec3 fm = field(minus);
        for (int i = 0; i < 3; ++i) {
            t.d[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    return t;
}

/// The four source-free constraints: div B = 0 and curl B = 0.
struct MaxwellResiduals {
    static constexpr int kConstraintCount = 4;

    double divergence = 0.0;
    Vec3 curl{};

    std::array<double, kConstraintCount> as_array() const {
        return {divergence, curl[0], curl[1], curl[2]};
    }
    double max_abs() const {
        double m = 0.0;
        for (double v : as_array()) {
            m = std::max(m, std::abs(v));
        }
        return m;
    }
};

inline MaxwellResiduals maxwell_residuals(const GradientTensor& t) {
    MaxwellResiduals r;
    r.divergence = t.d[0][0] + t.d[1][1] + t.d[2][2];
    r.curl = {t.d[2][1] - t.d[1][2], t.d[0][2] - t.d[2][0], t.d[1][0] - t.d[0][1]};
    return r;
}

}  // namespace eitmag
