#pragma once

// Small graphs and brute-force oracles shared by the test binaries.

#include <algorithm>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "oikg/navgraph.hpp"

namespace fixtures {

using oikg::NavGraph;
using oikg::NavNode;
using oikg::NodeId;

inline NavNode node(NodeId id, double x, double y, double z = 0.0, int room = 0, std::vector<int> objects = {0}) {
    return NavNode{id, {x, y, z}, room, std::move(objects)};
}

/// 0-1-2-...-(n-1) along +x with unit spacing.
inline NavGraph chain(int n) {
    std::vector<NavNode> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (int i = 0; i < n; ++i) {
        nodes.push_back(node(i, i, 0));
        if (i > 0) edges.emplace_back(i - 1, i);
    }
    return NavGraph::build(nodes, edges);
}

/// Unit square 0(0,0) 1(1,0) 2(1,1) 3(0,1) with its four sides.
inline NavGraph square() {
    return NavGraph::build({node(0, 0, 0), node(1, 1, 0), node(2, 1, 1), node(3, 0, 1)},
                           {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
}

/// Nodes on a jittered grid with random connections; may be disconnected.
inline NavGraph random_graph(int n, double p, std::mt19937_64& rng, bool connected = false) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        std::vector<NavNode> nodes;
        for (int i = 0; i < n; ++i) nodes.push_back(node(i, (i % 4) * 2.0 + u(rng), (i / 4) * 2.0 + u(rng), u(rng) * 0.2));
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                if (u(rng) < p) edges.emplace_back(a, b);
            }
        }
        if (connected) {
            for (int i = 1; i < n; ++i) {
                bool linked = false;
                for (auto [a, b] : edges) linked = linked || a == i || b == i;
                if (!linked) edges.emplace_back(static_cast<int>(rng() % static_cast<unsigned>(i)), i);
            }
        }
        NavGraph g = NavGraph::build(nodes, edges);
        if (!connected) return g;
        // reject if disconnected
        std::vector<int> seen(static_cast<std::size_t>(n), 0);
        std::vector<NodeId> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            NodeId v = stack.back();
            stack.pop_back();
            for (const auto& e : g.out_edges(v)) {
                if (!seen[static_cast<std::size_t>(e.to)]) {
                    seen[static_cast<std::size_t>(e.to)] = 1;
                    stack.push_back(e.to);
                }
            }
        }
        if (std::all_of(seen.begin(), seen.end(), [](int s) { return s != 0; })) return g;
    }
}

/// All simple paths from a to b (exhaustive DFS).
inline std::vector<std::vector<NodeId>> simple_paths(const NavGraph& g, NodeId a, NodeId b) {
    std::vector<std::vector<NodeId>> out;
    std::vector<NodeId> cur{a};
    std::set<NodeId> on{a};
    std::function<void(NodeId)> dfs = [&](NodeId v) {
        if (v == b) {
            out.push_back(cur);
            return;
        }
        for (const auto& e : g.out_edges(v)) {
            if (on.count(e.to)) continue;
            on.insert(e.to);
            cur.push_back(e.to);
            dfs(e.to);
            cur.pop_back();
            on.erase(e.to);
        }
    };
    dfs(a);
    return out;
}

/// All-pairs distances by Floyd-Warshall, indexed by node id (ids must be 0..n-1).
inline std::vector<std::vector<double>> floyd_warshall(const NavGraph& g) {
    const std::size_t n = g.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0;
        for (const auto& e : g.out_edges(static_cast<NodeId>(i))) d[i][static_cast<std::size_t>(e.to)] = e.pose.length;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    return d;
}

/// Minimum warping cost over every monotone alignment, by plain enumeration.
inline double dtw_exhaustive(const std::vector<NodeId>& p, const std::vector<NodeId>& q,
                             const std::function<double(NodeId, NodeId)>& d) {
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        acc += d(p[i], q[j]);
        if (i + 1 == p.size() && j + 1 == q.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < p.size()) walk(i + 1, j, acc);
        if (j + 1 < q.size()) walk(i, j + 1, acc);
        if (i + 1 < p.size() && j + 1 < q.size()) walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

/// Brute-force recovery label. `fw` from floyd_warshall; first hops come from
/// the lexicographically smallest of the shortest simple paths. Returns -1 for STOP.
struct LabelOracle {
    const NavGraph* g;
    std::vector<std::vector<double>> fw;
    std::vector<std::vector<NodeId>> hop;  // hop[a][b], -1 if none

    explicit LabelOracle(const NavGraph& graph) : g(&graph), fw(floyd_warshall(graph)) {
        const std::size_t n = graph.size();
        hop.assign(n, std::vector<NodeId>(n, -1));
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                if (a == b) continue;
                auto all = simple_paths(graph, static_cast<NodeId>(a), static_cast<NodeId>(b));
                if (all.empty()) continue;
                auto len = [&](const std::vector<NodeId>& path) {
                    double l = 0;
                    for (std::size_t i = 1; i < path.size(); ++i) l += graph.find_edge(path[i - 1], path[i])->pose.length;
                    return l;
                };
                double best = std::numeric_limits<double>::infinity();
                for (const auto& path : all) best = std::min(best, len(path));
                std::vector<NodeId> lex;
                for (const auto& path : all) {
                    if (len(path) <= best + 1e-9 && (lex.empty() || path < lex)) lex = path;
                }
                hop[a][b] = lex[1];
            }
        }
    }

    NodeId label(NodeId current, const std::vector<NodeId>& visited, const std::set<NodeId>& frontier,
                 const std::vector<NodeId>& gt) const {
        auto at = [](NodeId x) { return static_cast<std::size_t>(x); };
        NodeId target = gt.back();
        double best = std::numeric_limits<double>::infinity();
        for (NodeId x : gt) {
            if (std::find(visited.begin(), visited.end(), x) != visited.end()) continue;
            if (fw[at(current)][at(x)] < best) {
                best = fw[at(current)][at(x)];
                target = x;
            }
        }
        if (target == current) return -1;
        const NodeId h = hop[at(current)][at(target)];
        if (h >= 0 && frontier.count(h)) return h;
        NodeId out = -1;
        double od = fw[at(current)][at(target)];
        for (NodeId f : frontier) {
            if (fw[at(f)][at(target)] < od) {
                od = fw[at(f)][at(target)];
                out = f;
            }
        }
        return out;
    }
};

}  // namespace fixtures
