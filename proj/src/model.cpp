#include "oikg/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "oikg/errors.hpp"
#include "oikg/geometry.hpp"
#include "oikg/vocabulary.hpp"

namespace oikg {

using nn::Tensor;

namespace {

constexpr const char* kFlagNames[4] = {"MED", "GE", "LD", "OD"};

std::string layer_prefix(const std::string& prefix, int i) { return prefix + ".L" + std::to_string(i); }

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

Tensor zeros_vec(int n) { return Tensor::zeros({sz(n)}); }

}  // namespace

std::string ModelFlags::label() const {
    std::string s = "----";
    if (med) s[0] = 'M';
    if (ge) s[1] = 'G';
    if (ld) s[2] = 'L';
    if (od) s[3] = 'O';
    return s;
}

std::string ModelFlags::to_list() const {
    const bool on[4] = {med, ge, ld, od};
    std::string out;
    for (int i = 0; i < 4; ++i) {
        if (!on[i]) continue;
        if (!out.empty()) out += ',';
        out += kFlagNames[i];
    }
    return out.empty() ? "none" : out;
}

ModelFlags ModelFlags::parse(std::string_view text) {
    ModelFlags f = none();
    if (text.empty() || text == "none") return f;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view tok = text.substr(pos, end - pos);
        if (tok == "MED") f.med = true;
        else if (tok == "GE") f.ge = true;
        else if (tok == "LD") f.ld = true;
        else if (tok == "OD") f.od = true;
        else throw std::invalid_argument("unknown flag '" + std::string(tok) + "' (expected MED, GE, LD, OD)");
        pos = end + 1;
    }
    return f;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.embed_dim = c.text_dim = c.key_dim = c.attn_dim = c.mlp_hidden = 8;
    c.heads = 2;
    c.decoder_layers = 1;
    c.encoder_layers = 1;
    return c;
}

ModelConfig ModelConfig::standard() { return ModelConfig{}; }

ModelConfig ModelConfig::deep() {
    ModelConfig c;
    c.embed_dim = c.text_dim = c.key_dim = c.attn_dim = 64;
    c.mlp_hidden = 128;
    c.heads = 4;
    c.decoder_layers = 3;
    c.encoder_layers = 2;
    c.layer_norm = true;
    return c;
}

ModelConfig ModelConfig::profile(std::string_view name) {
    if (name == "tiny") return tiny();
    if (name == "default" || name == "standard") return standard();
    if (name == "deep") return deep();
    throw std::invalid_argument("unknown model profile '" + std::string(name) + "'");
}

std::size_t ModelConfig::vocabulary() const { return vocab_size > 0 ? sz(vocab_size) : vocab::size(); }

void ModelConfig::validate() const {
    auto positive = [](int v, const char* what) {
        if (v <= 0) throw std::invalid_argument(std::string("model config: ") + what + " must be positive");
    };
    positive(views, "views");
    positive(visual_dim, "visual_dim");
    positive(embed_dim, "embed_dim");
    positive(text_dim, "text_dim");
    positive(key_dim, "key_dim");
    positive(attn_dim, "attn_dim");
    positive(heads, "heads");
    positive(mlp_hidden, "mlp_hidden");
    if (decoder_layers < 0 || encoder_layers < 0) throw std::invalid_argument("model config: negative layer count");
    if (attn_dim % heads != 0) throw ShapeError("model config: attn_dim must be divisible by heads");
    if (vocab_size < 0) throw std::invalid_argument("model config: negative vocab_size");
}

std::vector<nn::ParamSpec> OikgModel::param_specs(const ModelConfig& c) {
    c.validate();
    using nn::AttentionParams;
    using nn::Linear;
    using nn::Mlp;
    const std::size_t de = sz(c.embed_dim), dt = sz(c.text_dim), dk = sz(c.key_dim), d = sz(c.attn_dim),
                      h = sz(c.mlp_hidden), dv = sz(c.visual_dim);
    std::vector<nn::ParamSpec> s;
    auto add = [&s](std::vector<nn::ParamSpec> more) { s.insert(s.end(), more.begin(), more.end()); };

    if (c.flags.med) {
        add(Linear::specs("obs.phi_a", 4, de));
        add(Linear::specs("obs.phi_v", dv, de));
    } else {
        add(Linear::specs("obs.coupled", 4 + dv, 2 * de));
    }
    add(Mlp::specs("obs.fuse", {2 * de, h, de}));

    add(Linear::specs("graph.angle", 4, de));
    if (c.flags.ge) add(Linear::specs("graph.pe", 3, de));
    s.push_back({"graph.stop", {de}, nn::ParamInit::Xavier});

    for (int i = 0; i < c.decoder_layers; ++i) {
        add(AttentionParams::specs(layer_prefix("ogi", i) + ".attn", de, de, d));
        add(Mlp::specs(layer_prefix("ogi", i) + ".ffn", {de, h, de}));
    }

    s.push_back({"text.embed", {c.vocabulary(), dt}, nn::ParamInit::Xavier});
    for (int i = 0; i < c.encoder_layers; ++i) {
        add(AttentionParams::specs(layer_prefix("text", i) + ".attn", dt, dt, d));
        add(Mlp::specs(layer_prefix("text", i) + ".ffn", {dt, h, dt}));
    }

    if (c.flags.ld || c.flags.od) {
        add(Linear::specs("kd.loc", dt, dk));
        add(Linear::specs("kd.obj", dt, dk));
        add(Linear::specs("kd.fuse", 2 * dk, dk));
        s.push_back({"align.Wq", {de, d}});
        s.push_back({"align.Wk", {dk, d}});
        s.push_back({"align.Wv", {dk, de}});
    }

    for (int i = 0; i < c.decoder_layers; ++i) {
        add(AttentionParams::specs(layer_prefix("fusion", i) + ".attn", de, dt, d));
        add(Mlp::specs(layer_prefix("fusion", i) + ".ffn", {de, h, de}));
    }

    add(AttentionParams::specs("select.self", de, de, d));
    add(Mlp::specs("select.score", {de, h, 1}));
    return s;
}

OikgModel::OikgModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(nn::ParamStore::init(param_specs(cfg_), seed)) {}

bool StepFeatures::ran(std::string_view s) const { return std::find(stages.begin(), stages.end(), s) != stages.end(); }

Tensor OikgModel::decouple_observation(const Observation& obs, std::vector<std::string>* stages) const {
    const std::size_t k = obs.views.size();
    const std::size_t dv = sz(cfg_.visual_dim);
    if (k != sz(cfg_.views)) {
        throw ShapeError("observation has " + std::to_string(k) + " views, model expects " + std::to_string(cfg_.views));
    }
    std::vector<double> angles;
    std::vector<double> visual;
    angles.reserve(k * 4);
    visual.reserve(k * dv);
    for (const View& v : obs.views) {
        if (v.visual.size() != dv) {
            throw ShapeError("view visual block has " + std::to_string(v.visual.size()) + " dims, model expects " +
                             std::to_string(dv));
        }
        auto t = geometry::trig_embed(v.heading, v.elevation);
        angles.insert(angles.end(), t.begin(), t.end());
        visual.insert(visual.end(), v.visual.begin(), v.visual.end());
    }
    Tensor a = Tensor::matrix(k, 4, std::move(angles));
    Tensor vis = Tensor::matrix(k, dv, std::move(visual));

    Tensor joint;
    if (cfg_.flags.med) {
        Tensor ea = nn::relu(nn::Linear::from(params_, "obs.phi_a")(a));
        Tensor ev = nn::relu(nn::Linear::from(params_, "obs.phi_v")(vis));
        joint = nn::concat_cols({ea, ev});
        if (stages) stages->emplace_back(stage::kDecoupled);
    } else {
        joint = nn::relu(nn::Linear::from(params_, "obs.coupled")(nn::concat_cols({a, vis})));
        if (stages) stages->emplace_back(stage::kCoupled);
    }
    return nn::Mlp::from(params_, "obs.fuse", 2)(joint);
}

Tensor OikgModel::geometric_pe(double candidate_heading, std::span<const double> view_headings) const {
    if (!cfg_.flags.ge) return zeros_vec(cfg_.embed_dim);
    auto nv = geometry::nearest_view(candidate_heading, view_headings);
    const double diff = candidate_heading - view_headings[nv.index];
    Tensor in = Tensor::vector({nv.distance, std::sin(diff), std::cos(diff)});
    return nn::Linear::from(params_, "graph.pe")(in);
}

Tensor OikgModel::candidate_features(const geometry::RelativePose& pose, const Tensor& pe) const {
    auto t = geometry::trig_embed(pose.heading, pose.elevation);
    Tensor raw = nn::Linear::from(params_, "graph.angle")(Tensor::vector({t.begin(), t.end()}));
    return nn::add(raw, pe);
}

Tensor OikgModel::stop_features() const { return params_.get("graph.stop"); }

Tensor OikgModel::decoder_stack(Tensor x, const Tensor& memory, const std::string& prefix, int layers) const {
    for (int i = 0; i < layers; ++i) {
        const std::string p = layer_prefix(prefix, i);
        auto att = nn::attention(x, memory, memory, nn::AttentionParams::from(params_, p + ".attn"), sz(cfg_.heads));
        x = nn::add(x, att.output);
        if (cfg_.layer_norm) x = nn::layer_norm_rows(x);
        x = nn::add(x, nn::Mlp::from(params_, p + ".ffn", 2)(x));
        if (cfg_.layer_norm) x = nn::layer_norm_rows(x);
    }
    return x;
}

Tensor OikgModel::observation_graph_interaction(const Tensor& graph, const Tensor& observation) const {
    return decoder_stack(graph, observation, "ogi", cfg_.decoder_layers);
}

Tensor OikgModel::encode_instruction(const Instruction& ins) const {
    if (ins.tokens.empty()) throw std::invalid_argument("instruction has no tokens");
    const std::size_t vsize = cfg_.vocabulary();
    std::vector<std::size_t> ids;
    ids.reserve(ins.tokens.size());
    for (int t : ins.tokens) {
        if (t < 0 || sz(t) >= vsize) {
            throw std::invalid_argument("token id " + std::to_string(t) + " outside vocabulary of " +
                                        std::to_string(vsize));
        }
        ids.push_back(sz(t));
    }
    Tensor x = nn::select_rows(params_.get("text.embed"), ids);
    x = nn::add(x, nn::sinusoidal_positions(ids.size(), sz(cfg_.text_dim)));
    return decoder_stack(x, x, "text", cfg_.encoder_layers);
}

KeyDetail OikgModel::extract_key_detail(const Tensor& tokens, const std::vector<bool>& location_mask,
                                        const std::vector<bool>& object_mask) const {
    const std::size_t m = tokens.rows();
    if (location_mask.size() != m || object_mask.size() != m) {
        throw ShapeError("key-detail masks must have one entry per token");
    }
    auto pool = [&](const std::vector<bool>& mask, bool enabled) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < m; ++i) {
            if (mask[i]) rows.push_back(i);
        }
        if (!enabled || rows.empty()) return zeros_vec(cfg_.text_dim);
        return nn::mean_rows(tokens, rows);
    };
    KeyDetail kd;
    kd.location = pool(location_mask, cfg_.flags.ld);
    kd.object = pool(object_mask, cfg_.flags.od);
    kd.location_proj = nn::Linear::from(params_, "kd.loc")(kd.location);
    kd.object_proj = nn::Linear::from(params_, "kd.obj")(kd.object);
    const std::size_t dk = sz(cfg_.key_dim);
    Tensor cat = nn::concat_cols({nn::reshape(kd.location_proj, {1, dk}), nn::reshape(kd.object_proj, {1, dk})});
    kd.fused = nn::reshape(nn::Linear::from(params_, "kd.fuse")(cat), {dk});
    return kd;
}

Tensor OikgModel::cross_modal_fusion(const Tensor& enhanced_graph, const Tensor& tokens) const {
    return decoder_stack(enhanced_graph, tokens, "fusion", cfg_.decoder_layers);
}

Enhancement OikgModel::enhance_and_score(const Tensor& cross_modal, const Tensor& key_detail) const {
    Enhancement e;
    if (key_detail.defined()) {
        Tensor kv = nn::reshape(key_detail, {1, key_detail.numel()});
        Tensor q = nn::matmul(cross_modal, params_.get("align.Wq"));
        Tensor k = nn::matmul(kv, params_.get("align.Wk"));
        Tensor logits = nn::scale(nn::matmul(q, nn::transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.cols())));
        Tensor w = nn::softmax(logits);  // [n x 1]
        Tensor v = nn::matmul(kv, params_.get("align.Wv"));
        e.align = nn::matmul(w, v);
        e.enhanced = nn::add(cross_modal, e.align);
    } else {
        e.enhanced = cross_modal;
    }
    auto sa = nn::attention(e.enhanced, e.enhanced, e.enhanced, nn::AttentionParams::from(params_, "select.self"),
                            sz(cfg_.heads));
    e.refined = nn::add(e.enhanced, sa.output);
    if (cfg_.layer_norm) e.refined = nn::layer_norm_rows(e.refined);
    Tensor s = nn::Mlp::from(params_, "select.score", 2)(e.refined);
    e.scores = nn::reshape(s, {s.rows()});
    return e;
}

InstructionFeatures OikgModel::prepare_instruction(const Instruction& ins) const {
    InstructionFeatures f;
    f.tokens = encode_instruction(ins);
    if (cfg_.flags.ld || cfg_.flags.od) {
        KeyDetail kd = extract_key_detail(f.tokens, ins.location_mask, ins.object_mask);
        f.location = kd.location;
        f.object = kd.object;
        f.location_proj = kd.location_proj;
        f.object_proj = kd.object_proj;
        f.key_detail = kd.fused;
        f.stages.emplace_back(stage::kKeyDetail);
    }
    return f;
}

geometry::RelativePose candidate_pose(const NavGraph& g, NodeId current, NodeId candidate) {
    if (const DirectedEdge* e = g.find_edge(current, candidate)) return e->pose;
    return geometry::relative_pose(g.node(current).position, g.node(candidate).position);
}

std::vector<NodeId> candidate_order(const PathGraph& pg) {
    std::vector<NodeId> out(pg.frontier().begin(), pg.frontier().end());
    out.push_back(kStop);
    return out;
}

StepFeatures OikgModel::forward_step(const PathGraph& pg, const Observation& obs, const InstructionFeatures& ins) const {
    return score_candidates(pg, obs, ins, candidate_order(pg));
}

StepFeatures OikgModel::score_candidates(const PathGraph& pg, const Observation& obs, const InstructionFeatures& ins,
                                         const std::vector<NodeId>& candidates) const {
    if (candidates.empty() || candidates.back() != kStop) {
        throw std::invalid_argument("candidate list must end with the STOP slot");
    }
    if (obs.node != pg.current()) throw std::invalid_argument("observation is not taken at the current node");
    StepFeatures f;
    f.candidates = candidates;
    f.observation = decouple_observation(obs, &f.stages);

    const NavGraph& g = pg.base();
    const std::vector<double> headings = obs.headings();
    std::vector<Tensor> pe_rows;
    std::vector<Tensor> rows;
    for (NodeId c : candidates) {
        if (c == kStop) {
            pe_rows.push_back(zeros_vec(cfg_.embed_dim));
            rows.push_back(stop_features());
            continue;
        }
        if (pg.frontier().count(c) == 0) {
            throw IllegalActionError("candidate " + std::to_string(c) + " is not in the frontier");
        }
        auto pose = candidate_pose(g, pg.current(), c);
        Tensor pe = geometric_pe(pose.heading, headings);
        pe_rows.push_back(pe);
        rows.push_back(candidate_features(pose, pe));
    }
    if (cfg_.flags.ge) f.stages.emplace_back(stage::kGeometric);
    f.positional = nn::concat_rows(pe_rows);
    f.graph = nn::concat_rows(rows);

    f.enhanced_graph = observation_graph_interaction(f.graph, f.observation);
    f.stages.emplace_back(stage::kInteraction);

    f.instruction = ins.tokens;
    f.key_detail = ins.key_detail;
    f.stages.insert(f.stages.end(), ins.stages.begin(), ins.stages.end());

    f.cross_modal = cross_modal_fusion(f.enhanced_graph, ins.tokens);
    f.stages.emplace_back(stage::kFusion);

    Enhancement e = enhance_and_score(f.cross_modal, ins.key_detail);
    if (e.align.defined()) f.stages.emplace_back(stage::kAlign);
    f.align = e.align;
    f.enhanced = e.enhanced;
    f.scores = e.scores;
    f.stages.emplace_back(stage::kSelection);
    return f;
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw InvalidStateError("argmax of an empty score vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

NodeId select_action(std::span<const double> scores, std::span<const NodeId> candidates) {
    if (scores.empty()) throw InvalidStateError("select_action: empty scores");
    if (scores.size() != candidates.size()) throw ShapeError("select_action: scores and candidates differ in length");
    double best = -std::numeric_limits<double>::infinity();
    for (double s : scores) best = std::max(best, s);
    NodeId choice = kStop;
    bool have_node = false;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] != best || candidates[i] == kStop) continue;
        if (!have_node || candidates[i] < choice) {
            choice = candidates[i];
            have_node = true;
        }
    }
    return choice;
}

}  // namespace oikg
