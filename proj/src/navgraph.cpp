#include "oikg/navgraph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

#include "oikg/errors.hpp"

namespace oikg {

namespace {

constexpr double kTieTolerance = 1e-9;

bool within_tolerance(double candidate, double best) {
    return candidate <= best + kTieTolerance * std::max(1.0, std::abs(best));
}

// Dijkstra over dense indices. `allowed` filters relaxed nodes (the source is
// always expanded).
std::vector<double> dijkstra(const NavGraph& g, std::size_t src, const std::function<bool(NodeId)>* allowed) {
    const std::size_t n = g.size();
    std::vector<double> dist(n, kUnreachable);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[src] = 0.0;
    queue.emplace(0.0, src);
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[u]) {
            continue;
        }
        for (const DirectedEdge& e : g.out_edges(g.id_at(u))) {
            if (allowed != nullptr && !(*allowed)(e.to)) {
                continue;
            }
            const std::size_t v = g.index_of(e.to);
            const double nd = d + e.pose.length;
            if (nd < dist[v]) {
                dist[v] = nd;
                queue.emplace(nd, v);
            }
        }
    }
    return dist;
}

// First hop from `u` towards the node whose distance field is `to_dst`:
// the smallest-id neighbour that stays on a shortest path.
std::optional<NodeId> greedy_hop(const NavGraph& g, NodeId u, const std::vector<double>& to_dst,
                                 const std::function<bool(NodeId)>* allowed) {
    const double du = to_dst[g.index_of(u)];
    for (const DirectedEdge& e : g.out_edges(u)) {
        if (allowed != nullptr && !(*allowed)(e.to)) {
            continue;
        }
        const double dv = to_dst[g.index_of(e.to)];
        if (dv < du && within_tolerance(e.pose.length + dv, du)) {
            return e.to;
        }
    }
    return std::nullopt;
}

ShortestPath shortest_path_impl(const NavGraph& g, NodeId src, NodeId dst,
                                const std::function<bool(NodeId)>* allowed) {
    if (!g.contains(src) || !g.contains(dst)) {
        throw std::invalid_argument("shortest_path: unknown node id");
    }
    ShortestPath result;
    if (src == dst) {
        result.path = {src};
        result.length = 0.0;
        return result;
    }
    std::function<bool(NodeId)> gate;
    if (allowed != nullptr) {
        gate = [&](NodeId id) { return id == src || id == dst || (*allowed)(id); };
    }
    const auto* gate_ptr = allowed != nullptr ? &gate : nullptr;
    // The graph is symmetric, so distances from dst are distances to dst.
    const std::vector<double> to_dst = dijkstra(g, g.index_of(dst), gate_ptr);
    if (!std::isfinite(to_dst[g.index_of(src)])) {
        return result;
    }
    result.path.push_back(src);
    result.length = 0.0;
    NodeId u = src;
    while (u != dst) {
        const auto hop = greedy_hop(g, u, to_dst, gate_ptr);
        if (!hop) {
            throw InvalidStateError("shortest_path: failed to reconstruct path");
        }
        result.length += g.find_edge(u, *hop)->pose.length;
        result.path.push_back(*hop);
        u = *hop;
    }
    return result;
}

}  // namespace

NavGraph NavGraph::build(std::vector<NavNode> nodes, const std::vector<std::pair<NodeId, NodeId>>& connections) {
    NavGraph g;
    std::sort(nodes.begin(), nodes.end(), [](const NavNode& a, const NavNode& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        NavNode& n = nodes[i];
        if (n.id < 0) {
            throw SchemaError("node id " + std::to_string(n.id) + " is negative");
        }
        if (i > 0 && nodes[i - 1].id == n.id) {
            throw SchemaError("duplicate node id " + std::to_string(n.id));
        }
        if (!std::isfinite(n.position.x) || !std::isfinite(n.position.y) || !std::isfinite(n.position.z)) {
            throw SchemaError("node " + std::to_string(n.id) + " has a non-finite position");
        }
        std::sort(n.objects.begin(), n.objects.end());
        n.objects.erase(std::unique(n.objects.begin(), n.objects.end()), n.objects.end());
    }
    g.nodes_ = std::move(nodes);
    g.out_.resize(g.nodes_.size());
    for (const auto& [a, b] : connections) {
        if (!g.contains(a) || !g.contains(b)) {
            throw SchemaError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") has a dangling endpoint");
        }
        if (a == b) {
            throw SchemaError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") is a self loop");
        }
        const auto& pa = g.node(a).position;
        const auto& pb = g.node(b).position;
        if (pa == pb) {
            throw SchemaError("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") joins coincident nodes");
        }
        for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
            auto& list = g.out_[g.index_of(from)];
            const bool exists = std::any_of(list.begin(), list.end(), [to = to](const DirectedEdge& e) { return e.to == to; });
            if (!exists) {
                list.push_back({from, to, geometry::relative_pose(g.node(from).position, g.node(to).position)});
            }
        }
    }
    for (auto& list : g.out_) {
        std::sort(list.begin(), list.end(), [](const DirectedEdge& x, const DirectedEdge& y) { return x.to < y.to; });
    }
    return g;
}

std::size_t NavGraph::edge_count() const {
    std::size_t total = 0;
    for (const auto& list : out_) {
        total += list.size();
    }
    return total;
}

bool NavGraph::contains(NodeId id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const NavNode& n, NodeId v) { return n.id < v; });
    return it != nodes_.end() && it->id == id;
}

std::size_t NavGraph::index_of(NodeId id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id, [](const NavNode& n, NodeId v) { return n.id < v; });
    if (it == nodes_.end() || it->id != id) {
        throw std::invalid_argument("unknown node id " + std::to_string(id));
    }
    return static_cast<std::size_t>(it - nodes_.begin());
}

const NavNode& NavGraph::node(NodeId id) const { return nodes_[index_of(id)]; }

std::span<const DirectedEdge> NavGraph::out_edges(NodeId id) const { return out_[index_of(id)]; }

const DirectedEdge* NavGraph::find_edge(NodeId from, NodeId to) const {
    if (!contains(from)) {
        return nullptr;
    }
    const auto& list = out_[index_of(from)];
    auto it = std::lower_bound(list.begin(), list.end(), to, [](const DirectedEdge& e, NodeId v) { return e.to < v; });
    return (it != list.end() && it->to == to) ? &*it : nullptr;
}

std::vector<std::pair<NodeId, NodeId>> NavGraph::connections() const {
    std::vector<std::pair<NodeId, NodeId>> result;
    for (const auto& list : out_) {
        for (const auto& e : list) {
            if (e.from < e.to) {
                result.emplace_back(e.from, e.to);
            }
        }
    }
    return result;
}

ShortestPath shortest_path(const NavGraph& g, NodeId src, NodeId dst) {
    return shortest_path_impl(g, src, dst, nullptr);
}

ShortestPath shortest_path_within(const NavGraph& g, NodeId src, NodeId dst,
                                  const std::function<bool(NodeId)>& allowed) {
    return shortest_path_impl(g, src, dst, &allowed);
}

std::vector<double> single_source_distances(const NavGraph& g, NodeId src) {
    return dijkstra(g, g.index_of(src), nullptr);
}

double geodesic_distance(const NavGraph& g, NodeId a, NodeId b) {
    if (!g.contains(a) || !g.contains(b)) {
        throw std::invalid_argument("geodesic_distance: unknown node id");
    }
    if (a == b) {
        return 0.0;
    }
    return dijkstra(g, g.index_of(a), nullptr)[g.index_of(b)];
}

double path_length(const NavGraph& g, std::span<const NodeId> path) {
    if (path.empty()) {
        throw std::invalid_argument("path_length: empty path");
    }
    if (!g.contains(path[0])) {
        throw std::invalid_argument("path_length: unknown node id " + std::to_string(path[0]));
    }
    double total = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const DirectedEdge* e = g.find_edge(path[i - 1], path[i]);
        if (e == nullptr) {
            throw std::invalid_argument("path_length: nodes " + std::to_string(path[i - 1]) + " and " +
                                        std::to_string(path[i]) + " are not connected");
        }
        total += e->pose.length;
    }
    return total;
}

DistanceTable::DistanceTable(const NavGraph& g) {
    const std::size_t n = g.size();
    ids_.reserve(n);
    for (const auto& node : g.nodes()) {
        ids_.push_back(node.id);
    }
    dist_.assign(n * n, kUnreachable);
    next_hop_.assign(n * n, -1);
    for (std::size_t dst = 0; dst < n; ++dst) {
        const std::vector<double> to_dst = dijkstra(g, dst, nullptr);
        for (std::size_t src = 0; src < n; ++src) {
            dist_[src * n + dst] = to_dst[src];
            if (src != dst && std::isfinite(to_dst[src])) {
                next_hop_[src * n + dst] = greedy_hop(g, ids_[src], to_dst, nullptr).value_or(-1);
            }
        }
    }
}

std::size_t DistanceTable::index(NodeId id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) {
        throw std::invalid_argument("DistanceTable: unknown node id " + std::to_string(id));
    }
    return static_cast<std::size_t>(it - ids_.begin());
}

double DistanceTable::at(NodeId a, NodeId b) const { return dist_[index(a) * ids_.size() + index(b)]; }

std::optional<NodeId> DistanceTable::first_hop(NodeId a, NodeId b) const {
    const NodeId hop = next_hop_[index(a) * ids_.size() + index(b)];
    if (hop < 0) {
        return std::nullopt;
    }
    return hop;
}

PathGraph::PathGraph(const NavGraph& base, NodeId start, FrontierMode mode) : base_(&base), mode_(mode) {
    if (!base.contains(start)) {
        throw std::invalid_argument("PathGraph: unknown start node " + std::to_string(start));
    }
    visited_.push_back(start);
    visited_set_.insert(start);
    recompute_frontier();
}

bool PathGraph::is_visited(NodeId id) const { return visited_set_.count(id) != 0; }

void PathGraph::recompute_frontier() {
    frontier_.clear();
    auto add_neighbours = [&](NodeId v) {
        for (const DirectedEdge& e : base_->out_edges(v)) {
            if (!is_visited(e.to)) {
                frontier_.insert(e.to);
            }
        }
    };
    if (mode_ == FrontierMode::Local) {
        add_neighbours(current());
    } else {
        for (NodeId v : visited_) {
            add_neighbours(v);
        }
    }
}

void PathGraph::advance(NodeId chosen) {
    if (terminal_) {
        throw IllegalActionError("PathGraph: episode already terminated");
    }
    if (chosen == current()) {
        terminal_ = true;
        return;
    }
    if (frontier_.count(chosen) == 0) {
        throw IllegalActionError("PathGraph: node " + std::to_string(chosen) + " is not a frontier candidate");
    }
    visited_.push_back(chosen);
    visited_set_.insert(chosen);
    ++step_;
    recompute_frontier();
}

PathGraph expand_path_graph(const PathGraph& pg, NodeId chosen) {
    PathGraph next = pg;
    next.advance(chosen);
    return next;
}

std::optional<NodeId> nearest_unvisited_gt(const PathGraph& pg, std::span<const NodeId> gt_path,
                                           const DistanceTable& distances) {
    std::optional<NodeId> best;
    double best_distance = kUnreachable;
    for (NodeId v : gt_path) {
        if (pg.is_visited(v)) {
            continue;
        }
        const double d = distances.at(pg.current(), v);
        if (!best || d < best_distance) {
            best = v;
            best_distance = d;
        }
    }
    return best;
}

std::optional<NodeId> nearest_unvisited_gt(const PathGraph& pg, std::span<const NodeId> gt_path) {
    const NavGraph& g = pg.base();
    const std::vector<double> dist = single_source_distances(g, pg.current());
    std::optional<NodeId> best;
    double best_distance = kUnreachable;
    for (NodeId v : gt_path) {
        if (pg.is_visited(v)) {
            continue;
        }
        const double d = dist[g.index_of(v)];
        if (!best || d < best_distance) {
            best = v;
            best_distance = d;
        }
    }
    return best;
}

}  // namespace oikg
