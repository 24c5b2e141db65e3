#include "oikg/env_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "oikg/errors.hpp"
#include "oikg/vocabulary.hpp"

namespace oikg::io {

namespace {

// Forward iterator that counts newlines as the parser consumes input, so the
// parser callback can attribute array elements to source lines.
class LineCountingIterator {
public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    LineCountingIterator() = default;
    LineCountingIterator(const char* p, std::size_t* line) : p_(p), line_(line) {}

    reference operator*() const { return *p_; }
    LineCountingIterator& operator++() {
        if (*p_ == '\n') {
            ++*line_;
        }
        ++p_;
        return *this;
    }
    LineCountingIterator operator++(int) {
        auto copy = *this;
        ++*this;
        return copy;
    }
    friend bool operator==(const LineCountingIterator& a, const LineCountingIterator& b) { return a.p_ == b.p_; }

private:
    const char* p_ = nullptr;
    std::size_t* line_ = nullptr;
};

struct LocatedJson {
    json value;
    // Source line of each element of the top-level array named by key
    // (or of the top-level array itself under key "").
    std::map<std::string, std::vector<std::size_t>> element_lines;
};

LocatedJson parse_located(std::string_view text, const std::string& source, bool top_level_array) {
    LocatedJson out;
    std::size_t line = 1;
    std::string section;
    const int element_depth = top_level_array ? 1 : 2;
    json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
        if (!top_level_array && depth == 1 && event == json::parse_event_t::key) {
            section = parsed.get<std::string>();
        }
        if (depth == element_depth &&
            (event == json::parse_event_t::object_start || event == json::parse_event_t::array_start ||
             event == json::parse_event_t::value)) {
            out.element_lines[section].push_back(line);
        }
        return true;
    };
    try {
        LineCountingIterator first(text.data(), &line);
        LineCountingIterator last(text.data() + text.size(), &line);
        out.value = json::parse(first, last, cb);
    } catch (const json::parse_error& e) {
        throw SchemaError(source + ": " + e.what());
    }
    return out;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& msg) {
    throw SchemaError(source + ":" + std::to_string(line) + ": " + msg);
}

std::size_t line_of(const LocatedJson& doc, const std::string& section, std::size_t i) {
    auto it = doc.element_lines.find(section);
    if (it == doc.element_lines.end() || i >= it->second.size()) {
        return 0;
    }
    return it->second[i];
}

double require_number(const json& j, const std::string& what, const std::string& source, std::size_t line) {
    if (!j.is_number()) fail(source, line, what + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(source, line, what + " must be finite");
    return v;
}

long long require_int(const json& j, const std::string& what, const std::string& source, std::size_t line) {
    if (!j.is_number_integer()) fail(source, line, what + " must be an integer");
    return j.get<long long>();
}

EnvParams params_from_json(const json& j) {
    EnvParams p;
    p.node_count = j.value("node_count", p.node_count);
    p.connection_radius = j.value("connection_radius", p.connection_radius);
    p.extent = j.value("extent", p.extent);
    p.height_extent = j.value("height_extent", p.height_extent);
    p.visual_dim = j.value("visual_dim", p.visual_dim);
    p.views = j.value("views", p.views);
    p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
    p.seed = j.value("seed", p.seed);
    return p;
}

json params_to_json(const EnvParams& p) {
    return json{{"node_count", p.node_count}, {"connection_radius", p.connection_radius}, {"extent", p.extent},
                {"height_extent", p.height_extent}, {"visual_dim", p.visual_dim}, {"views", p.views},
                {"noise_sigma", p.noise_sigma}, {"seed", p.seed}};
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw IoError("write to '" + path.string() + "' failed");
    }
}

json number_or_inf(double v) {
    if (std::isinf(v) && v > 0) return "inf";
    return v;
}

double parse_number_or_inf(const json& j) {
    if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json environment_to_json(const Environment& env) {
    json nodes = json::array();
    for (const NavNode& n : env.graph.nodes()) {
        nodes.push_back(json{{"id", n.id},
                             {"pos", {n.position.x, n.position.y, n.position.z}},
                             {"room", n.room},
                             {"objects", n.objects}});
    }
    json edges = json::array();
    for (const auto& [a, b] : env.graph.connections()) {
        edges.push_back({a, b});
    }
    return json{{"nodes", nodes}, {"edges", edges}, {"params", params_to_json(env.params)}};
}

Environment parse_environment(std::string_view text, const std::string& source) {
    const LocatedJson doc = parse_located(text, source, false);
    const json& root = doc.value;
    if (!root.is_object()) fail(source, 1, "environment must be a JSON object");
    if (!root.contains("nodes") || !root["nodes"].is_array()) fail(source, 1, "missing \"nodes\" array");
    if (!root.contains("edges") || !root["edges"].is_array()) fail(source, 1, "missing \"edges\" array");

    EnvParams params;
    if (root.contains("params")) {
        try {
            params = params_from_json(root["params"]);
        } catch (const json::exception& e) {
            fail(source, 1, std::string("bad \"params\": ") + e.what());
        }
    }

    std::vector<NavNode> nodes;
    std::set<NodeId> ids;
    const json& jn = root["nodes"];
    for (std::size_t i = 0; i < jn.size(); ++i) {
        const std::size_t line = line_of(doc, "nodes", i);
        const json& e = jn[i];
        if (!e.is_object()) fail(source, line, "node entry must be an object");
        for (const char* key : {"id", "pos", "room", "objects"}) {
            if (!e.contains(key)) fail(source, line, std::string("node entry missing \"") + key + "\"");
        }
        NavNode n;
        const long long id = require_int(e["id"], "node id", source, line);
        if (id < 0 || id > std::numeric_limits<NodeId>::max()) fail(source, line, "node id out of range");
        n.id = static_cast<NodeId>(id);
        if (!ids.insert(n.id).second) fail(source, line, "duplicate node id " + std::to_string(n.id));
        const json& pos = e["pos"];
        if (!pos.is_array() || pos.size() != 3) fail(source, line, "\"pos\" must be [x, y, z]");
        n.position = {require_number(pos[0], "pos.x", source, line), require_number(pos[1], "pos.y", source, line),
                      require_number(pos[2], "pos.z", source, line)};
        const long long room = require_int(e["room"], "room", source, line);
        if (room < 0 || room >= vocab::kRoomCount) fail(source, line, "room index out of range");
        n.room = static_cast<int>(room);
        if (!e["objects"].is_array()) fail(source, line, "\"objects\" must be an array");
        for (const json& o : e["objects"]) {
            const long long obj = require_int(o, "object", source, line);
            if (obj < 0 || obj >= vocab::kObjectCount) fail(source, line, "object index out of range");
            n.objects.push_back(static_cast<int>(obj));
        }
        nodes.push_back(std::move(n));
    }
    if (nodes.empty()) fail(source, 1, "environment has no nodes");

    std::map<NodeId, geometry::Vec3> positions;
    for (const auto& n : nodes) positions[n.id] = n.position;
    std::vector<std::pair<NodeId, NodeId>> edges;
    const json& je = root["edges"];
    for (std::size_t i = 0; i < je.size(); ++i) {
        const std::size_t line = line_of(doc, "edges", i);
        const json& e = je[i];
        if (!e.is_array() || e.size() != 2) fail(source, line, "edge must be [from, to]");
        const long long a = require_int(e[0], "edge endpoint", source, line);
        const long long b = require_int(e[1], "edge endpoint", source, line);
        for (long long v : {a, b}) {
            if (v < 0 || v > std::numeric_limits<NodeId>::max() || !ids.count(static_cast<NodeId>(v))) {
                fail(source, line, "edge endpoint " + std::to_string(v) + " does not name a node");
            }
        }
        if (a == b) fail(source, line, "edge is a self loop");
        if (positions[static_cast<NodeId>(a)] == positions[static_cast<NodeId>(b)]) {
            fail(source, line, "edge joins coincident nodes");
        }
        edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
    }
    params.node_count = static_cast<int>(nodes.size());
    try {
        return attach_latents(NavGraph::build(std::move(nodes), edges), params);
    } catch (const std::invalid_argument& e) {
        fail(source, 1, std::string("bad \"params\": ") + e.what());
    }
}

void save_environment(const Environment& env, const std::filesystem::path& path) {
    write_file(path, dump(environment_to_json(env)));
}

Environment load_environment(const std::filesystem::path& path) {
    return parse_environment(read_file(path), path.string());
}

json episode_to_json(const Episode& ep) {
    const Instruction& ins = ep.instruction;
    return json{{"env", ep.env},
                {"start", ep.start},
                {"gt_path", ins.gt_path},
                {"tokens", ins.tokens},
                {"loc_mask", ins.location_mask},
                {"obj_mask", ins.object_mask},
                {"text", ins.text}};
}

json episodes_to_json(const std::vector<Episode>& episodes) {
    json arr = json::array();
    for (const auto& ep : episodes) arr.push_back(episode_to_json(ep));
    return arr;
}

std::vector<Episode> parse_episodes(std::string_view text, const std::vector<Environment>& envs,
                                    const std::string& source) {
    const LocatedJson doc = parse_located(text, source, true);
    if (!doc.value.is_array()) fail(source, 1, "episode file must be a JSON array");
    std::vector<Episode> out;
    for (std::size_t i = 0; i < doc.value.size(); ++i) {
        const std::size_t line = line_of(doc, "", i);
        const json& e = doc.value[i];
        if (!e.is_object()) fail(source, line, "episode must be an object");
        for (const char* key : {"start", "gt_path", "tokens", "loc_mask", "obj_mask", "text"}) {
            if (!e.contains(key)) fail(source, line, std::string("episode missing \"") + key + "\"");
        }
        Episode ep;
        ep.env = e.contains("env") ? static_cast<int>(require_int(e["env"], "env", source, line)) : 0;
        if (ep.env < 0 || static_cast<std::size_t>(ep.env) >= envs.size()) {
            fail(source, line, "env index " + std::to_string(ep.env) + " out of range");
        }
        const NavGraph& g = envs[static_cast<std::size_t>(ep.env)].graph;
        ep.start = static_cast<NodeId>(require_int(e["start"], "start", source, line));
        Instruction& ins = ep.instruction;
        try {
            ins.gt_path = e["gt_path"].get<std::vector<NodeId>>();
            ins.tokens = e["tokens"].get<std::vector<int>>();
            ins.location_mask = e["loc_mask"].get<std::vector<bool>>();
            ins.object_mask = e["obj_mask"].get<std::vector<bool>>();
            ins.text = e["text"].get<std::string>();
        } catch (const json::exception& ex) {
            fail(source, line, std::string("bad field type: ") + ex.what());
        }
        if (ins.gt_path.empty()) fail(source, line, "gt_path is empty");
        if (ins.gt_path.front() != ep.start) fail(source, line, "gt_path does not begin at start");
        for (std::size_t k = 0; k < ins.gt_path.size(); ++k) {
            if (!g.contains(ins.gt_path[k])) {
                fail(source, line, "gt_path node " + std::to_string(ins.gt_path[k]) + " not in environment");
            }
            if (k > 0 && g.find_edge(ins.gt_path[k - 1], ins.gt_path[k]) == nullptr) {
                fail(source, line, "gt_path is not connected");
            }
        }
        if (ins.location_mask.size() != ins.tokens.size() || ins.object_mask.size() != ins.tokens.size()) {
            fail(source, line, "mask lengths must equal token count");
        }
        for (std::size_t k = 0; k < ins.tokens.size(); ++k) {
            if (ins.tokens[k] < 0 || static_cast<std::size_t>(ins.tokens[k]) >= vocab::size()) {
                fail(source, line, "token id " + std::to_string(ins.tokens[k]) + " out of vocabulary");
            }
            if (ins.location_mask[k] && ins.object_mask[k]) {
                fail(source, line, "token marked as both location and object");
            }
        }
        out.push_back(std::move(ep));
    }
    return out;
}

std::vector<Episode> load_episodes(const std::filesystem::path& path, const std::vector<Environment>& envs) {
    return parse_episodes(read_file(path), envs, path.string());
}

json vocabulary_json() {
    json arr = json::array();
    for (int id = 0; id < static_cast<int>(vocab::size()); ++id) {
        const auto cls = vocab::token_class(id);
        arr.push_back(json{{"id", id},
                           {"word", std::string(vocab::word(id))},
                           {"class", cls == vocab::TokenClass::Room     ? "room"
                                     : cls == vocab::TokenClass::Object ? "object"
                                                                        : "other"}});
    }
    return arr;
}

}  // namespace oikg::io
