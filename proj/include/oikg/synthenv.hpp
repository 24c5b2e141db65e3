#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oikg/navgraph.hpp"

namespace oikg {

struct EnvParams {
    int node_count = 30;
    double connection_radius = 5.0;  // meters
    double extent = 20.0;            // side of the square floor area, meters
    double height_extent = 0.3;      // node z is drawn from [0, height_extent]
    int visual_dim = 32;             // D_v; the last vocab::kRoomCount dims hold the room one-hot
    int views = 36;                  // 36 (12 headings x 3 elevations) or 12 (one elevation)
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
};

void validate(const EnvParams& p);

struct Environment {
    EnvParams params;
    NavGraph graph;
    std::vector<std::vector<double>> latents;  // per node (NavGraph index), dim visual_dim - room one-hot
    std::vector<double> background;            // dim visual_dim
};

/// Seeded random geometric graph with room clustering and object placement.
/// Retries layouts until connected; throws GenerationError when retries run out.
Environment generate_environment(const EnvParams& p);

/// Latent table and background derived from (seed, graph) for an environment
/// loaded from disk.
Environment attach_latents(NavGraph graph, const EnvParams& p);

struct ViewLayout {
    std::vector<double> headings;    // per view
    std::vector<double> elevations;  // per view
    int heading_bins = 12;
    std::vector<double> elevation_levels;
};

ViewLayout make_view_layout(int views);

struct View {
    double heading = 0.0;
    double elevation = 0.0;
    std::vector<double> visual;
};

struct Observation {
    NodeId node = 0;
    std::vector<View> views;

    std::vector<double> headings() const;
};

/// Panorama at `node`: each view shows the neighbour it faces (latent + room
/// one-hot) or the background, plus seeded Gaussian noise. Angles are exact.
Observation render_observation(const NavGraph& g, NodeId node, const std::vector<std::vector<double>>& latents,
                               const std::vector<double>& background, double sigma, const ViewLayout& layout,
                               std::uint64_t noise_seed);
Observation render_observation(const Environment& env, NodeId node);

/// Observations of every node, indexed by NavGraph::index_of.
std::vector<Observation> render_all(const Environment& env);

struct Instruction {
    std::vector<int> tokens;
    std::vector<bool> location_mask;
    std::vector<bool> object_mask;
    std::vector<NodeId> gt_path;
    std::string text;

    NodeId goal() const { return gt_path.back(); }
};

Instruction generate_instruction(const NavGraph& g, const std::vector<NodeId>& gt_path, std::uint64_t seed);

enum class PathMode { Shortest, Detour };

struct Episode {
    int env = 0;
    NodeId start = 0;
    Instruction instruction;
};

/// Start/goal pair 3..12 hops apart with a shortest or detoured gt path.
Episode make_episode(const NavGraph& g, std::uint64_t seed, PathMode mode);

std::string to_string(PathMode mode);
PathMode parse_path_mode(const std::string& s);

}  // namespace oikg
