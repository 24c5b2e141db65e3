#include "oikg/synthenv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "oikg/errors.hpp"
#include "oikg/rng.hpp"
#include "oikg/vocabulary.hpp"

namespace oikg {

namespace {

constexpr int kLayoutRetries = 200;
constexpr int kEpisodeRetries = 500;
constexpr int kWaypointRetries = 50;
constexpr int kMinHops = 3;
constexpr int kMaxHops = 12;

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

std::vector<int> cluster_rooms(const std::vector<geometry::Vec3>& pos, Rng& rng) {
    const int n = static_cast<int>(pos.size());
    int k = std::uniform_int_distribution<int>(4, 8)(rng);
    k = std::min(k, n);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::pair<double, double>> centers;
    for (int c = 0; c < k; ++c) {
        centers.emplace_back(pos[order[c]].x, pos[order[c]].y);
    }
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int iter = 0; iter < 25; ++iter) {
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double dx = pos[i].x - centers[c].first;
                const double dy = pos[i].y - centers[c].second;
                const double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    assign[i] = c;
                }
            }
        }
        for (int c = 0; c < k; ++c) {
            double sx = 0.0, sy = 0.0;
            int count = 0;
            for (int i = 0; i < n; ++i) {
                if (assign[i] == c) {
                    sx += pos[i].x;
                    sy += pos[i].y;
                    ++count;
                }
            }
            if (count > 0) {
                centers[c] = {sx / count, sy / count};
            }
        }
    }
    std::vector<int> rooms(vocab::kRoomCount);
    std::iota(rooms.begin(), rooms.end(), 0);
    std::shuffle(rooms.begin(), rooms.end(), rng);
    for (auto& a : assign) {
        a = rooms[a];
    }
    return assign;
}

std::vector<double> gaussian_vector(std::size_t dim, Rng rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(dim);
    for (auto& x : v) {
        x = normal(rng);
    }
    return v;
}

std::size_t latent_dim(const EnvParams& p) { return static_cast<std::size_t>(p.visual_dim - vocab::kRoomCount); }

}  // namespace

void validate(const EnvParams& p) {
    if (p.node_count < 2) throw std::invalid_argument("EnvParams: node_count must be >= 2");
    if (!(p.connection_radius > 0.0)) throw std::invalid_argument("EnvParams: connection_radius must be > 0");
    if (!(p.extent > 0.0)) throw std::invalid_argument("EnvParams: extent must be > 0");
    if (!(p.height_extent >= 0.0)) throw std::invalid_argument("EnvParams: height_extent must be >= 0");
    if (!(p.noise_sigma >= 0.0)) throw std::invalid_argument("EnvParams: noise_sigma must be >= 0");
    if (p.visual_dim < vocab::kRoomCount) {
        throw std::invalid_argument("EnvParams: visual_dim must be >= " + std::to_string(vocab::kRoomCount));
    }
    if (p.views != 36 && p.views != 12) throw std::invalid_argument("EnvParams: views must be 36 or 12");
}

Environment attach_latents(NavGraph graph, const EnvParams& p) {
    validate(p);
    Environment env;
    env.params = p;
    env.graph = std::move(graph);
    for (const NavNode& n : env.graph.nodes()) {
        env.latents.push_back(gaussian_vector(latent_dim(p), make_rng(p.seed, "env.latent", static_cast<std::uint64_t>(n.id))));
    }
    env.background = gaussian_vector(latent_dim(p), make_rng(p.seed, "env.background"));
    env.background.resize(static_cast<std::size_t>(p.visual_dim), 0.0);
    return env;
}

Environment generate_environment(const EnvParams& p) {
    validate(p);
    const auto n = static_cast<std::size_t>(p.node_count);
    for (int attempt = 0; attempt < kLayoutRetries; ++attempt) {
        Rng rng = make_rng(p.seed, "env.layout", static_cast<std::uint64_t>(attempt));
        std::uniform_real_distribution<double> planar(0.0, p.extent);
        std::uniform_real_distribution<double> vertical(0.0, p.height_extent);
        std::vector<geometry::Vec3> pos(n);
        for (auto& v : pos) {
            v.x = planar(rng);
            v.y = planar(rng);
            v.z = p.height_extent > 0.0 ? vertical(rng) : 0.0;
        }
        std::vector<std::pair<NodeId, NodeId>> edges;
        UnionFind uf(n);
        bool coincident = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d = geometry::distance(pos[i], pos[j]);
                coincident = coincident || d == 0.0;
                if (d <= p.connection_radius) {
                    edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
                    uf.unite(i, j);
                }
            }
        }
        std::size_t components = 0;
        for (std::size_t i = 0; i < n; ++i) {
            components += uf.find(i) == i ? 1 : 0;
        }
        if (components != 1 || coincident) {
            continue;
        }
        const std::vector<int> rooms = cluster_rooms(pos, rng);
        std::vector<NavNode> nodes(n);
        std::vector<int> objects(vocab::kObjectCount);
        for (std::size_t i = 0; i < n; ++i) {
            nodes[i].id = static_cast<NodeId>(i);
            nodes[i].position = pos[i];
            nodes[i].room = rooms[i];
            const int count = std::uniform_int_distribution<int>(1, 3)(rng);
            std::iota(objects.begin(), objects.end(), 0);
            std::shuffle(objects.begin(), objects.end(), rng);
            nodes[i].objects.assign(objects.begin(), objects.begin() + count);
        }
        return attach_latents(NavGraph::build(std::move(nodes), edges), p);
    }
    throw GenerationError("generate_environment: no connected layout after " + std::to_string(kLayoutRetries) +
                          " attempts (seed " + std::to_string(p.seed) + ")");
}

ViewLayout make_view_layout(int views) {
    ViewLayout layout;
    if (views == 36) {
        layout.elevation_levels = {-geometry::kPi / 6.0, 0.0, geometry::kPi / 6.0};
    } else if (views == 12) {
        layout.elevation_levels = {0.0};
    } else {
        throw std::invalid_argument("make_view_layout: views must be 36 or 12");
    }
    for (double elevation : layout.elevation_levels) {
        for (int h = 0; h < layout.heading_bins; ++h) {
            layout.headings.push_back(h * geometry::kTwoPi / layout.heading_bins);
            layout.elevations.push_back(elevation);
        }
    }
    return layout;
}

std::vector<double> Observation::headings() const {
    std::vector<double> h;
    h.reserve(views.size());
    for (const auto& v : views) {
        h.push_back(v.heading);
    }
    return h;
}

Observation render_observation(const NavGraph& g, NodeId node, const std::vector<std::vector<double>>& latents,
                               const std::vector<double>& background, double sigma, const ViewLayout& layout,
                               std::uint64_t noise_seed) {
    if (!g.contains(node)) {
        throw std::invalid_argument("render_observation: unknown node " + std::to_string(node));
    }
    const std::size_t dim = background.size();
    const std::size_t latent = dim - vocab::kRoomCount;
    std::vector<double> bin_headings(layout.headings.begin(), layout.headings.begin() + layout.heading_bins);

    // View slot each neighbour occupies; the closest neighbour (then lowest id) wins a contested slot.
    const std::size_t k = layout.headings.size();
    std::vector<const DirectedEdge*> owner(k, nullptr);
    std::vector<double> owner_distance(k, 0.0);
    for (const DirectedEdge& e : g.out_edges(node)) {
        const auto bin = geometry::nearest_view(e.pose.heading, bin_headings);
        std::size_t level = 0;
        for (std::size_t l = 1; l < layout.elevation_levels.size(); ++l) {
            if (std::abs(e.pose.elevation - layout.elevation_levels[l]) <
                std::abs(e.pose.elevation - layout.elevation_levels[level])) {
                level = l;
            }
        }
        const std::size_t slot = level * static_cast<std::size_t>(layout.heading_bins) + bin.index;
        if (owner[slot] == nullptr || bin.distance < owner_distance[slot]) {
            owner[slot] = &e;
            owner_distance[slot] = bin.distance;
        }
    }

    Rng rng = make_rng(noise_seed, "obs.noise", static_cast<std::uint64_t>(node));
    std::normal_distribution<double> normal(0.0, 1.0);
    Observation obs;
    obs.node = node;
    obs.views.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        View& view = obs.views[i];
        view.heading = layout.headings[i];
        view.elevation = layout.elevations[i];
        if (owner[i] != nullptr) {
            const NavNode& neighbour = g.node(owner[i]->to);
            const auto& lat = latents[g.index_of(neighbour.id)];
            view.visual.assign(lat.begin(), lat.end());
            view.visual.resize(dim, 0.0);
            view.visual[latent + static_cast<std::size_t>(neighbour.room)] += 1.0;
        } else {
            view.visual = background;
        }
        if (sigma > 0.0) {
            for (auto& x : view.visual) {
                x += sigma * normal(rng);
            }
        }
    }
    return obs;
}

Observation render_observation(const Environment& env, NodeId node) {
    return render_observation(env.graph, node, env.latents, env.background, env.params.noise_sigma,
                              make_view_layout(env.params.views), env.params.seed);
}

std::vector<Observation> render_all(const Environment& env) {
    std::vector<Observation> all;
    all.reserve(env.graph.size());
    const ViewLayout layout = make_view_layout(env.params.views);
    for (const NavNode& n : env.graph.nodes()) {
        all.push_back(render_observation(env.graph, n.id, env.latents, env.background, env.params.noise_sigma, layout,
                                         env.params.seed));
    }
    return all;
}

Instruction generate_instruction(const NavGraph& g, const std::vector<NodeId>& gt_path, std::uint64_t seed) {
    if (gt_path.empty()) {
        throw std::invalid_argument("generate_instruction: empty gt path");
    }
    for (std::size_t i = 0; i < gt_path.size(); ++i) {
        if (!g.contains(gt_path[i])) {
            throw std::invalid_argument("generate_instruction: unknown node " + std::to_string(gt_path[i]));
        }
        if (i > 0 && g.find_edge(gt_path[i - 1], gt_path[i]) == nullptr) {
            throw std::invalid_argument("generate_instruction: gt path is not connected");
        }
    }
    const NavNode& goal = g.node(gt_path.back());
    if (goal.objects.empty()) {
        throw GenerationError("generate_instruction: goal node " + std::to_string(goal.id) + " has no objects");
    }
    Rng rng = make_rng(seed, "instruction");
    auto pick = [&rng](std::initializer_list<const char*> options) {
        const auto i = std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng);
        return std::string(*(options.begin() + i));
    };

    Instruction ins;
    ins.gt_path = gt_path;
    auto push_word = [&](const std::string& w) {
        const auto id = vocab::find(w);
        if (!id) {
            throw std::logic_error("generate_instruction: template word '" + w + "' missing from vocabulary");
        }
        ins.tokens.push_back(*id);
        ins.location_mask.push_back(false);
        ins.object_mask.push_back(false);
    };
    auto push_words = [&](const std::string& phrase) {
        std::size_t begin = 0;
        while (begin < phrase.size()) {
            std::size_t end = phrase.find(' ', begin);
            if (end == std::string::npos) end = phrase.size();
            push_word(phrase.substr(begin, end - begin));
            begin = end + 1;
        }
    };

    ins.tokens.push_back(vocab::kBos);
    ins.location_mask.push_back(false);
    ins.object_mask.push_back(false);

    if (gt_path.size() > 1) {
        std::vector<int> rooms;
        for (NodeId v : gt_path) {
            const int room = g.node(v).room;
            if (rooms.empty() || rooms.back() != room) {
                rooms.push_back(room);
            }
        }
        push_words(pick({"walk", "go", "head", "proceed", "pass"}) + " through the");
        for (std::size_t i = 0; i < rooms.size(); ++i) {
            if (i > 0) {
                push_words(pick({"then", "then into", "and into", "then past"}) + " the");
            }
            ins.tokens.push_back(vocab::room_token(rooms[i]));
            ins.location_mask.push_back(true);
            ins.object_mask.push_back(false);
        }
        push_word("and");
    }
    const auto obj_index = std::uniform_int_distribution<std::size_t>(0, goal.objects.size() - 1)(rng);
    push_words(pick({"stop near", "wait by", "halt next to", "stop at"}) + " the");
    ins.tokens.push_back(vocab::object_token(goal.objects[obj_index]));
    ins.location_mask.push_back(false);
    ins.object_mask.push_back(true);
    ins.tokens.push_back(vocab::kEos);
    ins.location_mask.push_back(false);
    ins.object_mask.push_back(false);

    for (int t : ins.tokens) {
        if (t == vocab::kBos || t == vocab::kEos) continue;
        if (!ins.text.empty()) ins.text += ' ';
        ins.text += vocab::word(t);
    }
    return ins;
}

Episode make_episode(const NavGraph& g, std::uint64_t seed, PathMode mode) {
    if (g.size() < 2) {
        throw GenerationError("make_episode: graph too small");
    }
    Rng rng = make_rng(seed, "episode");
    std::uniform_int_distribution<std::size_t> any_node(0, g.size() - 1);
    for (int attempt = 0; attempt < kEpisodeRetries; ++attempt) {
        const NodeId start = g.id_at(any_node(rng));
        const NodeId goal = g.id_at(any_node(rng));
        if (start == goal) continue;
        const ShortestPath sp = shortest_path(g, start, goal);
        const auto hops = static_cast<int>(sp.path.size()) - 1;
        if (sp.path.empty() || hops < kMinHops || hops > kMaxHops) continue;

        std::vector<NodeId> gt = sp.path;
        if (mode == PathMode::Detour) {
            bool found = false;
            for (int w = 0; w < kWaypointRetries && !found; ++w) {
                const NodeId waypoint = g.id_at(any_node(rng));
                if (std::find(sp.path.begin(), sp.path.end(), waypoint) != sp.path.end()) continue;
                const ShortestPath first = shortest_path(g, start, waypoint);
                const ShortestPath second = shortest_path(g, waypoint, goal);
                std::vector<NodeId> joined = first.path;
                joined.insert(joined.end(), second.path.begin() + 1, second.path.end());
                std::vector<NodeId> sorted = joined;
                std::sort(sorted.begin(), sorted.end());
                if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;
                gt = std::move(joined);
                found = true;
            }
            if (!found) continue;
        }
        if (g.node(goal).objects.empty()) continue;
        Episode ep;
        ep.start = start;
        ep.instruction = generate_instruction(g, gt, derive_seed(seed, "episode.instruction"));
        return ep;
    }
    throw GenerationError("make_episode: no start/goal pair " + std::to_string(kMinHops) + ".." +
                          std::to_string(kMaxHops) + " hops apart after bounded retries");
}

std::string to_string(PathMode mode) { return mode == PathMode::Shortest ? "shortest" : "detour"; }

PathMode parse_path_mode(const std::string& s) {
    if (s == "shortest") return PathMode::Shortest;
    if (s == "detour") return PathMode::Detour;
    throw std::invalid_argument("unknown path mode '" + s + "' (expected shortest or detour)");
}

}  // namespace oikg
