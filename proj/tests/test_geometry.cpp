#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oikg/errors.hpp"
#include "oikg/geometry.hpp"

using namespace oikg::geometry;

namespace {

double brute_angle(double a, double b) {
    double best = 1e300;
    for (int k = -4; k <= 4; ++k) best = std::min(best, std::abs(a - b + 2.0 * k * kPi));
    return best;
}

}  // namespace

TEST_CASE("wrap_angle") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(kTwoPi + 0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(wrap_angle(-0.25) == doctest::Approx(kTwoPi - 0.25).epsilon(1e-15));
    CHECK(wrap_angle(kTwoPi) == 0.0);
    CHECK(wrap_angle(-1e-18) < kTwoPi);
    CHECK_THROWS_AS(wrap_angle(std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(wrap_angle(INFINITY), std::invalid_argument);
}

TEST_CASE("angular_distance examples") {
    CHECK(angular_distance(1.3, 1.3) == 0.0);
    CHECK(angular_distance(0.0, kPi) == doctest::Approx(kPi).epsilon(1e-15));
    CHECK(std::abs(angular_distance(0.1, kTwoPi - 0.1) - 0.2) < 1e-12);
}

TEST_CASE("angular_distance properties on random triples") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3 * kPi, 3 * kPi);
    for (int i = 0; i < 20000; ++i) {
        const double a = u(rng), b = u(rng), c = u(rng);
        const double ab = angular_distance(a, b);
        CHECK(std::abs(ab - brute_angle(a, b)) <= 1e-12);
        CHECK(ab == angular_distance(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= kPi);
        CHECK(ab <= angular_distance(a, c) + angular_distance(c, b) + 1e-12);
    }
    CHECK(angular_distance(0.3, 0.3 + kTwoPi) < 1e-12);
}

TEST_CASE("trig_embed") {
    auto z = trig_embed(0, 0);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 1.0);
    CHECK(z[2] == 0.0);
    CHECK(z[3] == 1.0);
    auto q = trig_embed(kPi / 2, 0);
    CHECK(std::abs(q[0] - 1) < 1e-12);
    CHECK(std::abs(q[1]) < 1e-12);
    auto d = trig_embed(kPi, -kPi / 2);
    const double expect[4] = {0, -1, -1, 0};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(d[i] - expect[i]) < 1e-12);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int i = 0; i < 1000; ++i) {
        auto t = trig_embed(u(rng), u(rng));
        CHECK(std::abs(t[0] * t[0] + t[1] * t[1] - 1) < 1e-12);
        CHECK(std::abs(t[2] * t[2] + t[3] * t[3] - 1) < 1e-12);
    }
}

TEST_CASE("relative_pose") {
    auto p = relative_pose({0, 0, 0}, {1, 0, 0});
    CHECK(p.heading == 0.0);
    CHECK(p.elevation == 0.0);
    CHECK(p.length == 1.0);
    p = relative_pose({0, 0, 0}, {0, 1, 0});
    CHECK(std::abs(p.heading - kPi / 2) < 1e-15);
    p = relative_pose({0, 0, 0}, {1, 1, 1});
    CHECK(std::abs(p.heading - kPi / 4) < 1e-15);
    CHECK(std::abs(p.elevation - std::atan2(1, std::sqrt(2.0))) < 1e-15);
    CHECK(std::abs(p.length - std::sqrt(3.0)) < 1e-15);
    p = relative_pose({0, 0, 0}, {0, -1, 0});
    CHECK(std::abs(p.heading - 3 * kPi / 2) < 1e-15);
    CHECK_THROWS_AS(relative_pose({1, 2, 3}, {1, 2, 3}), oikg::DegeneratePoseError);
}

TEST_CASE("relative_pose round trip") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-20, 20);
    for (int i = 0; i < 5000; ++i) {
        Vec3 a{u(rng), u(rng), u(rng) / 10}, b{u(rng), u(rng), u(rng) / 10};
        if (a == b) continue;
        Vec3 c = apply_pose(a, relative_pose(a, b));
        CHECK(distance(b, c) <= 1e-9);
    }
}

TEST_CASE("nearest_view") {
    const std::vector<double> four{0, kPi / 2, kPi, 3 * kPi / 2};
    auto r = nearest_view(0, four);
    CHECK(r.index == 0);
    CHECK(r.distance == 0.0);
    r = nearest_view(kPi / 4 + 0.01, four);
    CHECK(r.index == 1);
    CHECK(std::abs(r.distance - (kPi / 4 - 0.01)) < 1e-12);
    const std::vector<double> two{0, kPi / 2};
    r = nearest_view(kPi / 4, two);
    CHECK(r.index == 0);
    CHECK(std::abs(r.distance - kPi / 4) < 1e-15);
    r = nearest_view(kTwoPi - 0.05, four);
    CHECK(r.index == 0);
    CHECK_THROWS(nearest_view(0.0, std::vector<double>{}));
}
