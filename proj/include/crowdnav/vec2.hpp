#pragma once

#include <cmath>

namespace crowdnav {

/// 2D vector in meters (or m/s for velocities). All simulator state is built
/// from these; components must stay finite.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }

    constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    /// z-component of the 3D cross product; sign tells which side of *this o lies on.
    constexpr double det(const Vec2& o) const { return x * o.y - y * o.x; }
    constexpr double norm_sq() const { return x * x + y * y; }
    double norm() const { return std::sqrt(norm_sq()); }

    Vec2 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
    }

    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline constexpr Vec2 operator*(double s, const Vec2& v) { return {v.x * s, v.y * s}; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * M_PI;
    double x = std::fmod(a + M_PI, two_pi);
    if (x <= 0.0) x += two_pi;
    return x - M_PI;
}

inline constexpr double deg_to_rad(double deg) { return deg * (M_PI / 180.0); }

/// Clamps v to Euclidean norm <= max_norm.
inline Vec2 clamp_norm(const Vec2& v, double max_norm) {
    double n = v.norm();
    if (n > max_norm && n > 0.0) return v * (max_norm / n);
    return v;
}

}  // namespace crowdnav
