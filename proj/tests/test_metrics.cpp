#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oikg/metrics.hpp"

using namespace oikg;
using namespace oikg::metrics;
using fixtures::node;

namespace {

EpisodeResult result(const NavGraph& g, std::vector<NodeId> exec, std::vector<NodeId> gt) {
    return EpisodeResult{std::move(exec), std::move(gt), &g, nullptr};
}

}  // namespace

TEST_CASE("navigation error and the success boundary") {
    NavGraph g = NavGraph::build({node(0, 0, 0), node(1, 3, 0), node(2, 3.0001, 4)}, {{0, 1}, {0, 2}});
    auto r = result(g, {0}, {1});
    CHECK(navigation_error(r) == 3.0);
    CHECK(success(r) == 1.0);
    NavGraph h = NavGraph::build({node(0, 0, 0), node(1, 3.0001, 0)}, {{0, 1}});
    CHECK(success(result(h, {0}, {1})) == 0.0);
    CHECK(success(result(h, {1}, {1})) == 1.0);
    CHECK(navigation_error(result(h, {1}, {1})) == 0.0);
    // geodesic, not straight-line
    NavGraph bend = NavGraph::build({node(0, 0, 0), node(1, 2, 2), node(2, 0, 2.5)}, {{0, 1}, {1, 2}});
    auto b = result(bend, {0}, {2});
    CHECK(success(b) == 0.0);
    CHECK(success(b, {kSuccessThreshold, true}) == 1.0);
}

TEST_CASE("SPL fixture") {
    // gt 0->1 is 10 m; executed 0->2->1 is 6.25 + 6.25 m
    NavGraph g = NavGraph::build({node(0, 0, 0), node(1, 10, 0), node(2, 5, 3.75)}, {{0, 1}, {0, 2}, {2, 1}});
    auto r = result(g, {0, 2, 1}, {0, 1});
    CHECK(trajectory_length(r) == 12.5);
    CHECK(std::abs(spl(r) - 0.8) <= 1e-12);
    auto direct = result(g, {0, 1}, {0, 1});
    CHECK(spl(direct) == 1.0);
    auto fail = result(g, {0, 2}, {0, 1});
    CHECK(spl(fail) == 0.0);
    // start == goal
    CHECK(spl(result(g, {0}, {0})) == 1.0);
}

TEST_CASE("trajectory length of a single node is zero") {
    NavGraph g = fixtures::chain(3);
    CHECK(trajectory_length(result(g, {1}, {0, 1})) == 0.0);
    CHECK(trajectory_length(result(g, {0, 1, 2, 1}, {0, 1})) == 3.0);
}

TEST_CASE("dtw matches exhaustive warping") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        std::uniform_int_distribution<int> len(1, 6), id(0, 9);
        std::vector<NodeId> p(static_cast<std::size_t>(len(rng))), q(static_cast<std::size_t>(len(rng)));
        for (auto& x : p) x = id(rng);
        for (auto& x : q) x = id(rng);
        std::vector<double> table(100);
        for (auto& v : table) v = std::uniform_real_distribution<double>(0, 5)(rng);
        auto d = [&](NodeId a, NodeId b) { return a == b ? 0.0 : table[static_cast<std::size_t>(std::min(a, b) * 10 + std::max(a, b))]; };
        CHECK(std::abs(dtw(p, q, d) - fixtures::dtw_exhaustive(p, q, d)) <= 1e-9);
    }
    CHECK_THROWS_AS(dtw(std::vector<NodeId>{}, std::vector<NodeId>{1}, [](NodeId, NodeId) { return 0.0; }), std::invalid_argument);
}

TEST_CASE("nDTW hand case") {
    NavGraph g = NavGraph::build({node(0, 0, 0), node(1, 3, 0)}, {{0, 1}});
    auto r = result(g, {0}, {0, 1});
    CHECK(std::abs(ndtw(r) - std::exp(-0.5)) <= 1e-9);
    CHECK(ndtw(result(g, {0, 1}, {0, 1})) == 1.0);
    // equal paths regardless of the repeated node
    CHECK(ndtw(result(g, {0, 0, 1}, {0, 1})) == 1.0);
}

TEST_CASE("metric bounds on random episodes") {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 40; ++k) {
        NavGraph g = fixtures::random_graph(8, 0.3, rng, true);
        DistanceTable t(g);
        for (int e = 0; e < 10; ++e) {
            NodeId a = static_cast<NodeId>(rng() % 8), b = static_cast<NodeId>(rng() % 8);
            std::vector<NodeId> gt = shortest_path(g, a, b).path;
            std::vector<NodeId> exec{a};
            const int steps = static_cast<int>(rng() % 6);
            for (int s = 0; s < steps; ++s) {
                auto out = g.out_edges(exec.back());
                exec.push_back(out[rng() % out.size()].to);
            }
            EpisodeResult r{exec, gt, &g, &t};
            MetricRow m = evaluate(r);
            CHECK(m.spl <= m.sr);
            CHECK(m.sdtw <= m.ndtw);
            CHECK(std::abs(m.sdtw - m.sr * m.ndtw) <= 1e-15);
            CHECK(m.sdtw == sdtw(r));
            CHECK(m.ndtw > 0.0);
            CHECK(m.ndtw <= 1.0);
            CHECK(m.ne >= 0.0);
            EpisodeResult plain{exec, gt, &g, nullptr};
            CHECK(std::abs(evaluate(plain).ne - m.ne) < 1e-12);
        }
    }
}

TEST_CASE("aggregate and formatting") {
    std::vector<MetricRow> rows{{1, 2, 1, 0.5, 0.9, 0.9}, {3, 4, 0, 0, 0.5, 0}};
    Summary s = aggregate(rows);
    CHECK(s.count == 2);
    CHECK(s.mean.tl == 2.0);
    CHECK(s.mean.sr == 0.5);
    CHECK(s.mean.ndtw == doctest::Approx(0.7));
    CHECK(aggregate(std::vector<MetricRow>{}).count == 0);
    CHECK(percent(0.5) == "50.00");
    CHECK(percent(1.0 / 3.0) == "33.33");
    CHECK(fixed(2.0, 3) == "2.000");
    CHECK(fixed(kUnreachable, 2) == "inf");
}
