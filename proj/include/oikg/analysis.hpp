#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "oikg/model.hpp"
#include "oikg/training.hpp"

namespace oikg::analysis {

struct GradStats {
    double mean_sq_norm = 0.0;
    std::vector<double> samples;  // finite per-seed squared norms
    std::size_t seed_count = 0;
    std::size_t failures = 0;     // non-finite samples, excluded from the mean
};

/// Returns one squared gradient norm for a seed.
using GradSampler = std::function<double(std::uint64_t seed)>;

/// Mean of sampler(seed) over at least two seeds.
GradStats grad_second_moment(const GradSampler& sampler, std::span<const std::uint64_t> seeds);

/// Squared norm of the loss gradient with respect to F'_o and F'_g for one
/// initialisation seed.
double grad_sq_norm(const ModelConfig& cfg, const std::vector<EnvContext>& ctxs, const std::vector<Episode>& batch,
                    std::uint64_t seed, const TrainConfig& tcfg);

/// Squared norm of the loss gradient with respect to the observation and
/// candidate feature tensors (F'_o, F'_g), one fresh initialisation per seed.
GradStats grad_second_moment(const ModelConfig& cfg, const std::vector<EnvContext>& ctxs,
                             const std::vector<Episode>& batch, std::span<const std::uint64_t> seeds,
                             const TrainConfig& tcfg);

/// Plug-in mutual information of two discrete series, in nats.
double mi_plugin(std::span<const int> x, std::span<const int> y);

/// Mean per-step log-probability of the gt action under teacher forcing.
/// A surrogate for the semantic matching score, which has no operational definition.
double alignment_score(const OikgModel& model, const std::vector<EnvContext>& ctxs,
                       const std::vector<Episode>& episodes);

/// Two-sided exact sign test; zero differences are dropped.
double sign_test_p(std::span<const double> diffs);

struct MiProbe {
    double location = 0.0;  // MI(quantised E_L(F_L); gt action class)
    double object = 0.0;    // MI(quantised E_O(F_O); gt action class)
    std::size_t samples = 0;
};

/// Cue signals are the first two dims of each key-detail projection,
/// quantised into 8 bins; the target is the gt action's heading bin or STOP.
MiProbe mi_probe(const OikgModel& model, const std::vector<EnvContext>& ctxs, const std::vector<Episode>& episodes);

/// Equal-width bins over [lo, hi]; values outside are clamped.
int quantize(double v, double lo, double hi, int bins);

struct ProbeReport {
    std::string kind;
    std::string variant_a;
    std::string variant_b;
    std::vector<double> samples_a;
    std::vector<double> samples_b;
    std::vector<double> samples;  // a - b per seed
    double mean_diff = 0.0;
    double sign_test_p = 1.0;
};

ProbeReport compare(std::string kind, std::string variant_a, std::string variant_b, std::vector<double> a,
                    std::vector<double> b);

struct AblationRow {
    ModelFlags flags;
    double tl = 0.0;
    double ne = 0.0;
    double sr = 0.0;
    double spl = 0.0;
    double time_ms = 0.0;
    bool failed = false;
    std::string error;
};

struct AblationCell {
    ModelFlags flags;
    std::uint64_t seed = 0;
    metrics::Summary summary;
    double time_ms = 0.0;
    bool failed = false;
    std::string error;
};

struct AblationConfig {
    ModelConfig model;
    TrainConfig train;
    std::vector<std::uint64_t> seeds{0};
    std::vector<ModelFlags> grid;  // empty means component_grid()
    int timing_steps = 1000;
    int jobs = 1;
};

/// Cumulative component rows: ----, M---, MG--, MGL-, MGLO.
std::vector<ModelFlags> component_grid();

struct AblationResult {
    std::vector<AblationRow> rows;
    std::vector<AblationCell> cells;  // grid-major, then seed
};

AblationResult run_ablation(const AblationConfig& cfg, const std::vector<EnvContext>& ctxs,
                            const std::vector<Episode>& train_episodes, const std::vector<Episode>& eval_episodes);

/// Mean wall time (ms) of forward_step over at least `steps` greedy steps.
double time_forward_steps(const OikgModel& model, const std::vector<EnvContext>& ctxs,
                          const std::vector<Episode>& episodes, int steps, int max_steps);

}  // namespace oikg::analysis
