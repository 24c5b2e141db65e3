#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "oikg/metrics.hpp"
#include "oikg/model.hpp"
#include "oikg/navgraph.hpp"
#include "oikg/nn/params.hpp"
#include "oikg/rng.hpp"
#include "oikg/synthenv.hpp"

namespace oikg {

/// Per-environment caches shared by every episode in that environment.
struct EnvContext {
    const Environment* env = nullptr;
    std::vector<Observation> observations;  // by NavGraph index
    DistanceTable distances;

    static EnvContext build(const Environment& env);
    const NavGraph& graph() const { return env->graph; }
    const Observation& observation(NodeId id) const { return observations.at(env->graph.index_of(id)); }
};

std::vector<EnvContext> build_contexts(const std::vector<Environment>& envs);

struct TrainConfig {
    double lambda = 0.2;       // weight of the teacher-forcing term
    bool swap_lambda = false;  // weight the student term by lambda instead
    int max_steps = 15;        // T_max
    double lr = 1e-3;
    int iterations = 20000;
    int batch_size = 1;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;
    int eval_every = 0;  // 0 disables periodic evaluation
    FrontierMode frontier = FrontierMode::Global;
    std::filesystem::path dump_path;  // checkpoint written on a non-finite loss

    void validate() const;
    double teacher_weight() const { return swap_lambda ? 1.0 - lambda : lambda; }
    /// T_max default for a path mode: 15, or 30 for detours.
    static int default_max_steps(PathMode mode) { return mode == PathMode::Detour ? 30 : 15; }
};

struct StepRecord {
    NodeId node = 0;                  // position when the decision was made
    std::vector<NodeId> candidates;   // frontier ascending, kStop last
    std::vector<double> logits;
    NodeId predicted = kStop;         // argmax action
    NodeId taken = kStop;             // action actually executed
    NodeId supervision = kStop;       // gt or pseudo label
    std::size_t target = 0;           // slot of `supervision`
    double loss = 0.0;
};

struct RolloutRecord {
    std::vector<StepRecord> steps;
    std::vector<nn::Tensor> losses;  // tracked per-step terms
    std::vector<NodeId> visited;     // decision nodes in order
    std::vector<nn::Tensor> taps;    // F'_o and F'_g of every step
    bool stopped = false;

    /// (1/T) sum of the step terms; throws std::invalid_argument if empty.
    nn::Tensor mean_loss() const;
    double accuracy() const;
};

/// Slot of `action` within `candidates`; throws InvalidStateError when absent.
std::size_t slot_of(std::span<const NodeId> candidates, NodeId action);

/// Recovery supervision: steer toward the nearest unvisited gt node (else the goal).
/// When the shortest route's first hop is not a frontier node, the frontier node
/// closest to the target wins, or STOP if none is closer than the current node.
NodeId pseudo_label(const PathGraph& pg, std::span<const NodeId> gt_path, const DistanceTable& distances);

RolloutRecord rollout_teacher(const OikgModel& model, const EnvContext& ctx, const Episode& ep,
                              const InstructionFeatures& ins, FrontierMode mode = FrontierMode::Global);
RolloutRecord rollout_student(const OikgModel& model, const EnvContext& ctx, const Episode& ep,
                              const InstructionFeatures& ins, int max_steps, Rng& rng,
                              FrontierMode mode = FrontierMode::Global);

/// lambda * mean(teacher) + (1 - lambda) * mean(student)
nn::Tensor episode_loss(const RolloutRecord& teacher, const RolloutRecord& student, double lambda);
double episode_loss_value(double teacher_mean, double student_mean, double lambda);

/// Index drawn from softmax(logits) with an explicit 53-bit uniform.
std::size_t sample_categorical(std::span<const double> logits, Rng& rng);

/// Physical route for a decision sequence: jumps to non-adjacent frontier
/// nodes are expanded along the shortest route through visited nodes.
std::vector<NodeId> executed_path(const NavGraph& g, std::span<const NodeId> decisions);

struct NavigationStep {
    int t = 0;
    NodeId node = 0;
    std::vector<NodeId> frontier;
    std::vector<double> scores;
    NodeId action = kStop;
    std::optional<NodeId> pseudo_label;
};

struct NavigationResult {
    std::vector<NodeId> decisions;  // visited nodes in decision order
    std::vector<NodeId> executed;   // physical route
    std::vector<NavigationStep> steps;
    bool stopped = false;
};

NavigationResult navigate_model(const OikgModel& model, const EnvContext& ctx, const Episode& ep, int max_steps,
                                FrontierMode mode = FrontierMode::Global, bool with_labels = false);
NavigationResult navigate_oracle(const EnvContext& ctx, const Episode& ep);
/// Uniform choice over frontier + STOP at every step.
NavigationResult navigate_random(const EnvContext& ctx, const Episode& ep, int max_steps, Rng& rng,
                                 FrontierMode mode = FrontierMode::Global);

metrics::EpisodeResult to_result(const EnvContext& ctx, const Episode& ep, const NavigationResult& nav);

struct EvalSummary {
    std::vector<metrics::MetricRow> rows;
    metrics::Summary summary;
};

EvalSummary evaluate_model(const OikgModel& model, const std::vector<EnvContext>& ctxs,
                           const std::vector<Episode>& episodes, int max_steps,
                           FrontierMode mode = FrontierMode::Global);

/// Fraction of teacher-forced steps whose argmax equals the gt action.
double teacher_accuracy(const OikgModel& model, const std::vector<EnvContext>& ctxs,
                        const std::vector<Episode>& episodes, FrontierMode mode = FrontierMode::Global);

struct TrainLogRow {
    int iteration = 0;
    double tf_loss = 0.0;
    double sf_loss = 0.0;
    double total_loss = 0.0;
    double grad_norm = 0.0;
    std::optional<double> eval_sr;
    std::optional<double> eval_spl;
    std::optional<double> eval_ndtw;
    double tf_acc = 0.0;
};

struct TrainData {
    const std::vector<EnvContext>* contexts = nullptr;
    const std::vector<Episode>* episodes = nullptr;
    const std::vector<Episode>* eval_episodes = nullptr;  // optional
};

using TrainCallback = std::function<void(const TrainLogRow&)>;

std::vector<TrainLogRow> train(OikgModel& model, const TrainData& data, const TrainConfig& cfg,
                               const TrainCallback& on_row = {});

std::string train_log_header();
std::string train_log_line(const TrainLogRow& row);

}  // namespace oikg
