#include "oikg/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "oikg/errors.hpp"

namespace oikg::geometry {

namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string(what) + ": non-finite angle");
    }
}

}  // namespace

double wrap_angle(double radians) {
    require_finite(radians, "wrap_angle");
    double r = std::fmod(radians, kTwoPi);
    if (r < 0.0) {
        r += kTwoPi;
    }
    // -tiny + 2pi rounds to 2pi
    if (r >= kTwoPi) {
        r = 0.0;
    }
    return r;
}

double angular_distance(double a, double b) {
    require_finite(a, "angular_distance");
    require_finite(b, "angular_distance");
    const double delta = a - b;
    return std::abs(std::atan2(std::sin(delta), std::cos(delta)));
}

std::array<double, 4> trig_embed(double heading, double elevation) {
    require_finite(heading, "trig_embed");
    require_finite(elevation, "trig_embed");
    return {std::sin(heading), std::cos(heading), std::sin(elevation), std::cos(elevation)};
}

double distance(const Vec3& a, const Vec3& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double dz = b.z - a.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

RelativePose relative_pose(const Vec3& from, const Vec3& to) {
    const double dx = to.x - from.x;
    const double dy = to.y - from.y;
    const double dz = to.z - from.z;
    if (!std::isfinite(dx) || !std::isfinite(dy) || !std::isfinite(dz)) {
        throw std::invalid_argument("relative_pose: non-finite position");
    }
    const double horizontal = std::hypot(dx, dy);
    const double length = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (length == 0.0) {
        throw DegeneratePoseError("relative_pose: coincident endpoints");
    }
    RelativePose pose;
    pose.heading = wrap_angle(std::atan2(dy, dx));
    pose.elevation = std::atan2(dz, horizontal);
    pose.length = length;
    return pose;
}

Vec3 apply_pose(const Vec3& from, const RelativePose& pose) {
    const double horizontal = pose.length * std::cos(pose.elevation);
    return {from.x + horizontal * std::cos(pose.heading),
            from.y + horizontal * std::sin(pose.heading),
            from.z + pose.length * std::sin(pose.elevation)};
}

NearestView nearest_view(double heading, std::span<const double> view_headings) {
    if (view_headings.empty()) {
        throw std::invalid_argument("nearest_view: empty view list");
    }
    NearestView best{0, angular_distance(heading, view_headings[0])};
    for (std::size_t i = 1; i < view_headings.size(); ++i) {
        const double d = angular_distance(heading, view_headings[i]);
        if (d < best.distance) {
            best = {i, d};
        }
    }
    return best;
}

}  // namespace oikg::geometry
