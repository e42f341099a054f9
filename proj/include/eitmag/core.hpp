#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace eitmag {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

/// Permeability of free space [T·m/A].
inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;

inline constexpr double kTeslaPerGauss = 1.0e-4;

constexpr double tesla_to_gauss(double t) { return t / kTeslaPerGauss; }
constexpr double gauss_to_tesla(double g) { return g * kTeslaPerGauss; }
constexpr double gauss_to_milligauss(double g) { return g * 1.0e3; }
constexpr double milligauss_to_gauss(double mg) { return mg * 1.0e-3; }

/// Input outside the domain of a physical model (field on a wire axis, non-positive radius, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent serialized data.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or unknown key.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Small fixed-size vector helpers. Kept free functions so Vec2/Vec3 stay plain aggregates.

constexpr Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
constexpr Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
constexpr Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
constexpr Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
constexpr Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
constexpr Vec2 operator*(double s, const Vec2& a) { return {s * a[0], s * a[1]}; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
constexpr double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double norm(const Vec2& a) { return std::hypot(a[0], a[1]); }

inline bool all_finite(const Vec3& a) {
    return std::isfinite(a[0]) && std::isfinite(a[1]) && std::isfinite(a[2]);
}

}  // namespace eitmag
