#include "oikg/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>

#include "oikg/errors.hpp"

namespace oikg::analysis {

using nn::Tensor;

GradStats grad_second_moment(const GradSampler& sampler, std::span<const std::uint64_t> seeds) {
    if (seeds.size() < 2) throw std::invalid_argument("grad_second_moment needs at least two seeds");
    GradStats st;
    st.seed_count = seeds.size();
    double sum = 0.0;
    for (std::uint64_t s : seeds) {
        const double v = sampler(s);
        if (!std::isfinite(v)) {
            ++st.failures;
            continue;
        }
        st.samples.push_back(v);
        sum += v;
    }
    st.mean_sq_norm = st.samples.empty() ? 0.0 : sum / static_cast<double>(st.samples.size());
    return st;
}

double grad_sq_norm(const ModelConfig& cfg, const std::vector<EnvContext>& ctxs, const std::vector<Episode>& batch,
                    std::uint64_t seed, const TrainConfig& tcfg) {
    if (batch.empty()) throw std::invalid_argument("grad_sq_norm: empty episode batch");
    OikgModel model(cfg, seed);
    Tensor total;
    std::vector<Tensor> taps;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Episode& ep = batch[i];
        const EnvContext& ctx = ctxs.at(static_cast<std::size_t>(ep.env));
        InstructionFeatures ins = model.prepare_instruction(ep.instruction);
        RolloutRecord tf = rollout_teacher(model, ctx, ep, ins, tcfg.frontier);
        Rng rng = make_rng(seed, "probe.student", i);
        RolloutRecord sf = rollout_student(model, ctx, ep, ins, tcfg.max_steps, rng, tcfg.frontier);
        Tensor loss = episode_loss(tf, sf, tcfg.teacher_weight());
        total = total.defined() ? nn::add(total, loss) : loss;
        taps.insert(taps.end(), tf.taps.begin(), tf.taps.end());
        taps.insert(taps.end(), sf.taps.begin(), sf.taps.end());
    }
    total = nn::scale(total, 1.0 / static_cast<double>(batch.size()));
    nn::backward(total);
    double sq = 0.0;
    for (const Tensor& t : taps) {
        for (double g : t.grad()) sq += g * g;
    }
    return sq;
}

GradStats grad_second_moment(const ModelConfig& cfg, const std::vector<EnvContext>& ctxs,
                             const std::vector<Episode>& batch, std::span<const std::uint64_t> seeds,
                             const TrainConfig& tcfg) {
    return grad_second_moment([&](std::uint64_t seed) { return grad_sq_norm(cfg, ctxs, batch, seed, tcfg); }, seeds);
}

double mi_plugin(std::span<const int> x, std::span<const int> y) {
    if (x.size() != y.size()) throw std::invalid_argument("mi_plugin: series differ in length");
    if (x.empty()) throw std::invalid_argument("mi_plugin: empty series");
    std::map<std::pair<int, int>, std::size_t> joint;
    std::map<int, std::size_t> px, py;
    for (std::size_t i = 0; i < x.size(); ++i) {
        ++joint[{x[i], y[i]}];
        ++px[x[i]];
        ++py[y[i]];
    }
    const double n = static_cast<double>(x.size());
    double mi = 0.0;
    for (const auto& [cell, c] : joint) {
        const double pxy = static_cast<double>(c) / n;
        const double pa = static_cast<double>(px[cell.first]) / n;
        const double pb = static_cast<double>(py[cell.second]) / n;
        mi += pxy * std::log(pxy / (pa * pb));
    }
    return std::max(0.0, mi);
}

double alignment_score(const OikgModel& model, const std::vector<EnvContext>& ctxs,
                       const std::vector<Episode>& episodes) {
    double sum = 0.0;
    std::size_t steps = 0;
    for (const Episode& ep : episodes) {
        const EnvContext& ctx = ctxs.at(static_cast<std::size_t>(ep.env));
        RolloutRecord r = rollout_teacher(model, ctx, ep, model.prepare_instruction(ep.instruction));
        for (const StepRecord& s : r.steps) {
            sum -= s.loss;
            ++steps;
        }
    }
    if (steps == 0) throw std::invalid_argument("alignment_score: no episodes");
    return sum / static_cast<double>(steps);
}

double sign_test_p(std::span<const double> diffs) {
    std::size_t pos = 0, neg = 0;
    for (double d : diffs) {
        if (d > 0) ++pos;
        else if (d < 0) ++neg;
    }
    const std::size_t n = pos + neg;
    if (n == 0) return 1.0;
    const std::size_t k = std::min(pos, neg);
    // P(X <= k) for X ~ Binomial(n, 1/2), summed in log space.
    double tail = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
        const double logc = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
                            std::lgamma(static_cast<double>(n - i) + 1);
        tail += std::exp(logc - static_cast<double>(n) * std::log(2.0));
    }
    return std::min(1.0, 2.0 * tail);
}

int quantize(double v, double lo, double hi, int bins) {
    if (bins < 1) throw std::invalid_argument("quantize: bins must be positive");
    if (!(hi > lo)) return 0;
    const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1);
}

MiProbe mi_probe(const OikgModel& model, const std::vector<EnvContext>& ctxs, const std::vector<Episode>& episodes) {
    constexpr int kBins = 8;
    struct Sample {
        double l0, l1, o0, o1;
        int action;
    };
    std::vector<Sample> samples;
    for (const Episode& ep : episodes) {
        InstructionFeatures ins = model.prepare_instruction(ep.instruction);
        if (!ins.key_detail.defined()) throw std::invalid_argument("mi_probe needs a model with key details enabled");
        const NavGraph& g = ctxs.at(static_cast<std::size_t>(ep.env)).graph();
        const auto& gt = ep.instruction.gt_path;
        const auto lp = ins.location_proj.values();
        const auto op = ins.object_proj.values();
        for (std::size_t i = 0; i < gt.size(); ++i) {
            int action = 12;  // STOP
            if (i + 1 < gt.size()) {
                const double h = candidate_pose(g, gt[i], gt[i + 1]).heading;
                action = static_cast<int>(std::lround(h / (geometry::kTwoPi / 12))) % 12;
            }
            samples.push_back({lp[0], lp.size() > 1 ? lp[1] : 0.0, op[0], op.size() > 1 ? op[1] : 0.0, action});
        }
    }
    MiProbe out;
    out.samples = samples.size();
    if (samples.empty()) return out;
    auto code = [&](double Sample::*a, double Sample::*b) {
        double alo = samples[0].*a, ahi = alo, blo = samples[0].*b, bhi = blo;
        for (const Sample& s : samples) {
            alo = std::min(alo, s.*a);
            ahi = std::max(ahi, s.*a);
            blo = std::min(blo, s.*b);
            bhi = std::max(bhi, s.*b);
        }
        std::vector<int> c;
        for (const Sample& s : samples) c.push_back(quantize(s.*a, alo, ahi, kBins) * kBins + quantize(s.*b, blo, bhi, kBins));
        return c;
    };
    std::vector<int> actions;
    for (const Sample& s : samples) actions.push_back(s.action);
    out.location = mi_plugin(code(&Sample::l0, &Sample::l1), actions);
    out.object = mi_plugin(code(&Sample::o0, &Sample::o1), actions);
    return out;
}

ProbeReport compare(std::string kind, std::string variant_a, std::string variant_b, std::vector<double> a,
                    std::vector<double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("compare: sample counts differ");
    ProbeReport r;
    r.kind = std::move(kind);
    r.variant_a = std::move(variant_a);
    r.variant_b = std::move(variant_b);
    for (std::size_t i = 0; i < a.size(); ++i) r.samples.push_back(a[i] - b[i]);
    double sum = 0.0;
    for (double d : r.samples) sum += d;
    r.mean_diff = r.samples.empty() ? 0.0 : sum / static_cast<double>(r.samples.size());
    r.sign_test_p = sign_test_p(r.samples);
    r.samples_a = std::move(a);
    r.samples_b = std::move(b);
    return r;
}

std::vector<ModelFlags> component_grid() {
    return {
        {false, false, false, false},
        {true, false, false, false},
        {true, true, false, false},
        {true, true, true, false},
        {true, true, true, true},
    };
}

double time_forward_steps(const OikgModel& model, const std::vector<EnvContext>& ctxs,
                          const std::vector<Episode>& episodes, int steps, int max_steps) {
    if (episodes.empty()) throw std::invalid_argument("time_forward_steps: no episodes");
    using Clock = std::chrono::steady_clock;
    Clock::duration elapsed{};
    int done = 0;
    for (std::size_t e = 0; done < steps; e = (e + 1) % episodes.size()) {
        const Episode& ep = episodes[e];
        const EnvContext& ctx = ctxs.at(static_cast<std::size_t>(ep.env));
        InstructionFeatures ins = model.prepare_instruction(ep.instruction);
        PathGraph pg(ctx.graph(), ep.start);
        for (int t = 0; t < max_steps && !pg.terminal(); ++t) {
            const Observation& obs = ctx.observation(pg.current());
            const auto t0 = Clock::now();
            StepFeatures f = model.forward_step(pg, obs, ins);
            elapsed += Clock::now() - t0;
            ++done;
            const NodeId a = select_action(f.scores.values(), f.candidates);
            pg.advance(a == kStop ? pg.current() : a);
        }
    }
    return std::chrono::duration<double, std::milli>(elapsed).count() / done;
}

AblationResult run_ablation(const AblationConfig& cfg, const std::vector<EnvContext>& ctxs,
                            const std::vector<Episode>& train_episodes, const std::vector<Episode>& eval_episodes) {
    if (cfg.seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
    const std::vector<ModelFlags> grid = cfg.grid.empty() ? component_grid() : cfg.grid;
    AblationResult res;
    for (const ModelFlags& f : grid) {
        for (std::uint64_t s : cfg.seeds) res.cells.push_back({f, s, {}, 0.0, false, {}});
    }

    auto run_cell = [&](AblationCell& cell) {
        try {
            ModelConfig mc = cfg.model;
            mc.flags = cell.flags;
            OikgModel model(mc, cell.seed);
            TrainConfig tc = cfg.train;
            tc.seed = cell.seed;
            tc.eval_every = 0;
            train(model, {&ctxs, &train_episodes, nullptr}, tc);
            cell.summary = evaluate_model(model, ctxs, eval_episodes, tc.max_steps, tc.frontier).summary;
            cell.time_ms = time_forward_steps(model, ctxs, eval_episodes, cfg.timing_steps, tc.max_steps);
        } catch (const NumericError& e) {
            cell.failed = true;
            cell.error = e.what();
        }
    };

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (AblationCell& c : res.cells) run_cell(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < res.cells.size(); i = next++) run_cell(res.cells[i]);
            });
        }
        for (auto& t : pool) t.join();
    }

    for (const ModelFlags& f : grid) {
        AblationRow row;
        row.flags = f;
        std::size_t ok = 0;
        for (const AblationCell& c : res.cells) {
            if (!(c.flags == f)) continue;
            if (c.failed) {
                row.failed = true;
                if (row.error.empty()) row.error = c.error;
                continue;
            }
            row.tl += c.summary.mean.tl;
            row.ne += c.summary.mean.ne;
            row.sr += c.summary.mean.sr;
            row.spl += c.summary.mean.spl;
            row.time_ms += c.time_ms;
            ++ok;
        }
        if (ok > 0) {
            const double n = static_cast<double>(ok);
            row.tl /= n;
            row.ne /= n;
            row.sr /= n;
            row.spl /= n;
            row.time_ms /= n;
        }
        res.rows.push_back(row);
    }
    return res;
}

}  // namespace oikg::analysis
