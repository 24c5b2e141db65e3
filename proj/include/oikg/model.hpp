#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oikg/navgraph.hpp"
#include "oikg/nn/layers.hpp"
#include "oikg/nn/params.hpp"
#include "oikg/synthenv.hpp"

namespace oikg {

/// Action value of the STOP slot.
inline constexpr NodeId kStop = -1;

/// Component switches: MED (angular/visual decoupling), GE (geometric
/// positional embedding), LD/OD (location/object key details).
struct ModelFlags {
    bool med = true;
    bool ge = true;
    bool ld = true;
    bool od = true;

    /// Four-character label such as "MG--".
    std::string label() const;
    /// Comma-separated subset of MED,GE,LD,OD; "" or "none" disables all.
    static ModelFlags parse(std::string_view text);
    std::string to_list() const;
    static ModelFlags none() { return {false, false, false, false}; }
    friend bool operator==(const ModelFlags&, const ModelFlags&) = default;
};

struct ModelConfig {
    int views = 36;        // K
    int visual_dim = 32;   // D_v
    int embed_dim = 32;    // D_e; cross-modal features keep this width (D_c = D_e)
    int text_dim = 32;     // D_t
    int key_dim = 32;      // D_k
    int attn_dim = 32;     // attention width d
    int heads = 2;
    int decoder_layers = 2;
    int encoder_layers = 1;
    int mlp_hidden = 32;
    int vocab_size = 0;    // 0 means the built-in vocabulary
    bool layer_norm = false;
    ModelFlags flags;

    static ModelConfig tiny();
    static ModelConfig standard();
    static ModelConfig deep();
    static ModelConfig profile(std::string_view name);

    std::size_t vocabulary() const;
    void validate() const;
};

struct InstructionFeatures {
    nn::Tensor tokens;          // F_i [M x D_t]
    nn::Tensor location;        // F_L [D_t], zero when LD is off or no token is masked
    nn::Tensor object;          // F_O [D_t]
    nn::Tensor location_proj;   // E_L(F_L) [D_k]
    nn::Tensor object_proj;     // E_O(F_O) [D_k]
    nn::Tensor key_detail;      // F_k [D_k]; undefined when LD and OD are both off
    std::vector<std::string> stages;
};

struct KeyDetail {
    nn::Tensor location;
    nn::Tensor object;
    nn::Tensor location_proj;
    nn::Tensor object_proj;
    nn::Tensor fused;  // F_k [D_k]
};

struct Enhancement {
    nn::Tensor align;     // Align(F_c, F_k) [N_c x D_c]; undefined when bypassed
    nn::Tensor enhanced;  // F_e
    nn::Tensor refined;   // self-attention over candidates
    nn::Tensor scores;    // [N_c]
};

struct StepFeatures {
    std::vector<NodeId> candidates;  // frontier order, kStop last
    nn::Tensor observation;          // F'_o [K x D_e]
    nn::Tensor positional;           // pe per candidate [N_c x D_e]; STOP row zero
    nn::Tensor graph;                // F'_g [N_c x D_e]
    nn::Tensor enhanced_graph;       // G'_t [N_c x D_e]
    nn::Tensor instruction;          // F_i
    nn::Tensor key_detail;           // F_k
    nn::Tensor cross_modal;          // F_c [N_c x D_c]
    nn::Tensor align;
    nn::Tensor enhanced;             // F_e
    nn::Tensor scores;               // [N_c]
    std::vector<std::string> stages; // pipeline stages that actually ran

    bool ran(std::string_view stage) const;
};

namespace stage {
inline constexpr std::string_view kDecoupled = "observation.decoupled";
inline constexpr std::string_view kCoupled = "observation.coupled";
inline constexpr std::string_view kGeometric = "graph.geometric_embedding";
inline constexpr std::string_view kKeyDetail = "instruction.key_detail";
inline constexpr std::string_view kAlign = "enhance.align";
inline constexpr std::string_view kInteraction = "observation_graph_interaction";
inline constexpr std::string_view kFusion = "cross_modal_fusion";
inline constexpr std::string_view kSelection = "candidate_selection";
}  // namespace stage

/// Heading/elevation of a candidate seen from `current`: the edge pose when
/// adjacent, otherwise the straight-line relative pose.
geometry::RelativePose candidate_pose(const NavGraph& g, NodeId current, NodeId candidate);

class OikgModel {
public:
    explicit OikgModel(ModelConfig cfg, std::uint64_t seed = 0);

    static std::vector<nn::ParamSpec> param_specs(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    nn::Tensor decouple_observation(const Observation& obs, std::vector<std::string>* stages = nullptr) const;
    /// pe = P([d', sin(a - a'), cos(a - a')]) for the nearest view a'; zero when GE is off.
    nn::Tensor geometric_pe(double candidate_heading, std::span<const double> view_headings) const;
    nn::Tensor candidate_features(const geometry::RelativePose& pose, const nn::Tensor& pe) const;
    nn::Tensor stop_features() const;
    nn::Tensor observation_graph_interaction(const nn::Tensor& graph, const nn::Tensor& observation) const;
    nn::Tensor encode_instruction(const Instruction& ins) const;
    KeyDetail extract_key_detail(const nn::Tensor& tokens, const std::vector<bool>& location_mask,
                                 const std::vector<bool>& object_mask) const;
    nn::Tensor cross_modal_fusion(const nn::Tensor& enhanced_graph, const nn::Tensor& tokens) const;
    Enhancement enhance_and_score(const nn::Tensor& cross_modal, const nn::Tensor& key_detail) const;

    /// Instruction encoding and key details, shared by every step of an episode.
    InstructionFeatures prepare_instruction(const Instruction& ins) const;

    StepFeatures forward_step(const PathGraph& pg, const Observation& obs, const InstructionFeatures& ins) const;
    /// Scores an explicit candidate order (kStop must be last).
    StepFeatures score_candidates(const PathGraph& pg, const Observation& obs, const InstructionFeatures& ins,
                                  const std::vector<NodeId>& candidates) const;

private:
    nn::Tensor decoder_stack(nn::Tensor x, const nn::Tensor& memory, const std::string& prefix, int layers) const;

    ModelConfig cfg_;
    nn::ParamStore params_;
};

/// Candidate slots for a path graph: frontier ascending, STOP last.
std::vector<NodeId> candidate_order(const PathGraph& pg);

/// Highest score; ties prefer a node over STOP, then the lowest node id.
NodeId select_action(std::span<const double> scores, std::span<const NodeId> candidates);

/// Index of the first maximum.
std::size_t argmax(std::span<const double> values);

}  // namespace oikg
