#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "oikg/geometry.hpp"

namespace oikg {

using NodeId = std::int32_t;

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct NavNode {
    NodeId id = 0;
    geometry::Vec3 position;
    int room = 0;
    std::vector<int> objects;  // sorted, unique
};

struct DirectedEdge {
    NodeId from = 0;
    NodeId to = 0;
    geometry::RelativePose pose;
};

/// Static environment connectivity. Immutable after build(); safe to share
/// across threads. Every connection is stored as two directed edges and the
/// out-edge list of each node is sorted by target id.
class NavGraph {
public:
    NavGraph() = default;

    /// Throws SchemaError on duplicate ids, self loops or dangling endpoints.
    static NavGraph build(std::vector<NavNode> nodes, const std::vector<std::pair<NodeId, NodeId>>& connections);

    std::size_t size() const { return nodes_.size(); }
    std::size_t edge_count() const;
    bool contains(NodeId id) const;
    const NavNode& node(NodeId id) const;
    std::span<const NavNode> nodes() const { return nodes_; }
    std::span<const DirectedEdge> out_edges(NodeId id) const;
    const DirectedEdge* find_edge(NodeId from, NodeId to) const;

    /// Dense index in [0, size()) ordered by id.
    std::size_t index_of(NodeId id) const;
    NodeId id_at(std::size_t index) const { return nodes_[index].id; }

    /// Undirected connection list (from < to), sorted; the inverse of build().
    std::vector<std::pair<NodeId, NodeId>> connections() const;

private:
    std::vector<NavNode> nodes_;                   // sorted by id
    std::vector<std::vector<DirectedEdge>> out_;   // parallel to nodes_
};

struct ShortestPath {
    std::vector<NodeId> path;  // empty when unreachable
    double length = kUnreachable;
};

/// Dijkstra over edge lengths. Among equal-length paths the lexicographically
/// smallest id sequence wins. Throws std::invalid_argument on unknown ids.
ShortestPath shortest_path(const NavGraph& g, NodeId src, NodeId dst);

/// Same as shortest_path but only through nodes accepted by `allowed`
/// (src and dst are always allowed).
ShortestPath shortest_path_within(const NavGraph& g, NodeId src, NodeId dst,
                                  const std::function<bool(NodeId)>& allowed);

double geodesic_distance(const NavGraph& g, NodeId a, NodeId b);

/// Distances from `src` to every node, indexed by NavGraph::index_of.
std::vector<double> single_source_distances(const NavGraph& g, NodeId src);

/// Sum of edge lengths along `path`; throws std::invalid_argument if two
/// consecutive nodes are not connected.
double path_length(const NavGraph& g, std::span<const NodeId> path);

/// All-pairs geodesic distances, computed once for repeated queries.
class DistanceTable {
public:
    DistanceTable() = default;
    explicit DistanceTable(const NavGraph& g);

    double at(NodeId a, NodeId b) const;
    /// First hop of shortest_path(a, b); nullopt if a == b or unreachable.
    std::optional<NodeId> first_hop(NodeId a, NodeId b) const;

private:
    std::size_t index(NodeId id) const;

    std::vector<NodeId> ids_;
    std::vector<double> dist_;       // row-major n x n
    std::vector<NodeId> next_hop_;   // row-major n x n, -1 when none
};

enum class FrontierMode {
    Global,  // out-neighbours of any visited node
    Local,   // out-neighbours of the current node only
};

/// The agent's incrementally grown exploration graph.
class PathGraph {
public:
    PathGraph(const NavGraph& base, NodeId start, FrontierMode mode = FrontierMode::Global);

    const NavGraph& base() const { return *base_; }
    NodeId current() const { return visited_.back(); }
    NodeId start() const { return visited_.front(); }
    const std::vector<NodeId>& visited() const { return visited_; }
    const std::set<NodeId>& frontier() const { return frontier_; }
    int step() const { return step_; }
    bool terminal() const { return terminal_; }
    FrontierMode mode() const { return mode_; }
    bool is_visited(NodeId id) const;

    /// Move to a frontier node, or STOP when `chosen == current()`.
    /// Throws IllegalActionError otherwise.
    void advance(NodeId chosen);

private:
    void recompute_frontier();

    const NavGraph* base_;
    FrontierMode mode_;
    std::vector<NodeId> visited_;
    std::set<NodeId> visited_set_;
    std::set<NodeId> frontier_;
    int step_ = 0;
    bool terminal_ = false;
};

PathGraph expand_path_graph(const PathGraph& pg, NodeId chosen);

/// Unvisited gt node closest (geodesically) to the current node; ties go to
/// the earliest position in gt_path. nullopt when every gt node is visited.
std::optional<NodeId> nearest_unvisited_gt(const PathGraph& pg, std::span<const NodeId> gt_path);
std::optional<NodeId> nearest_unvisited_gt(const PathGraph& pg, std::span<const NodeId> gt_path,
                                           const DistanceTable& distances);

}  // namespace oikg
