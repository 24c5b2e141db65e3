#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <span>

// Angle conventions: headings are measured counter-clockwise from +x in the
// horizontal plane and live in [0, 2*pi); elevations are positive upward and
// live in [-pi/2, pi/2]. Everything is in radians.

namespace oikg::geometry {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct RelativePose {
    double heading = 0.0;
    double elevation = 0.0;
    double length = 0.0;
};

struct NearestView {
    std::size_t index = 0;
    double distance = 0.0;
};

double wrap_angle(double radians);

/// Minimal circular displacement between two angles, in [0, pi].
double angular_distance(double a, double b);

/// [sin(heading), cos(heading), sin(elevation), cos(elevation)]
std::array<double, 4> trig_embed(double heading, double elevation);

RelativePose relative_pose(const Vec3& from, const Vec3& to);

/// Endpoint reached by travelling `pose` from `from`; inverse of relative_pose.
Vec3 apply_pose(const Vec3& from, const RelativePose& pose);

/// Closest view heading to `heading`. Ties go to the lowest index.
NearestView nearest_view(double heading, std::span<const double> view_headings);

double distance(const Vec3& a, const Vec3& b);

}  // namespace oikg::geometry
