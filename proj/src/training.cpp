#include "oikg/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "oikg/errors.hpp"
#include "oikg/nn/checkpoint.hpp"

namespace oikg {

using nn::Tensor;

EnvContext EnvContext::build(const Environment& env) {
    EnvContext ctx;
    ctx.env = &env;
    ctx.observations = render_all(env);
    ctx.distances = DistanceTable(env.graph);
    return ctx;
}

std::vector<EnvContext> build_contexts(const std::vector<Environment>& envs) {
    std::vector<EnvContext> out;
    out.reserve(envs.size());
    for (const Environment& e : envs) out.push_back(EnvContext::build(e));
    return out;
}

void TrainConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
    if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
    if (eval_every < 0) throw std::invalid_argument("eval_every must be non-negative");
}

Tensor RolloutRecord::mean_loss() const {
    if (losses.empty()) throw std::invalid_argument("rollout has no steps");
    Tensor total = losses.front();
    for (std::size_t i = 1; i < losses.size(); ++i) total = nn::add(total, losses[i]);
    return nn::scale(total, 1.0 / static_cast<double>(losses.size()));
}

double RolloutRecord::accuracy() const {
    if (steps.empty()) return 0.0;
    std::size_t hits = 0;
    for (const StepRecord& s : steps) hits += s.predicted == s.supervision ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(steps.size());
}

std::size_t slot_of(std::span<const NodeId> candidates, NodeId action) {
    auto it = std::find(candidates.begin(), candidates.end(), action);
    if (it == candidates.end()) {
        throw InvalidStateError("action " + std::to_string(action) + " is not among the candidates");
    }
    return static_cast<std::size_t>(it - candidates.begin());
}

NodeId pseudo_label(const PathGraph& pg, std::span<const NodeId> gt_path, const DistanceTable& distances) {
    if (gt_path.empty()) throw std::invalid_argument("pseudo_label: empty gt path");
    const NodeId current = pg.current();
    const NodeId goal = gt_path.back();
    const NodeId target = nearest_unvisited_gt(pg, gt_path, distances).value_or(goal);
    if (target == current) return kStop;
    if (distances.at(current, target) == kUnreachable) {
        throw InvalidStateError("pseudo_label: node " + std::to_string(target) + " unreachable from " +
                                std::to_string(current));
    }
    const auto& frontier = pg.frontier();
    if (auto hop = distances.first_hop(current, target); hop && frontier.count(*hop)) return *hop;
    // Staying put competes with the frontier: moving away from a target that
    // can no longer be re-entered is never a useful correction.
    NodeId best = kStop;
    double best_d = distances.at(current, target);
    for (NodeId f : frontier) {  // ascending, so strict < keeps the lowest id on ties
        const double d = distances.at(f, target);
        if (d < best_d) {
            best_d = d;
            best = f;
        }
    }
    return best;
}

namespace {

StepRecord record_step(const StepFeatures& f, NodeId node, NodeId supervision) {
    StepRecord s;
    s.node = node;
    s.candidates = f.candidates;
    s.logits.assign(f.scores.values().begin(), f.scores.values().end());
    s.predicted = select_action(s.logits, s.candidates);
    s.supervision = supervision;
    s.target = slot_of(s.candidates, supervision);
    return s;
}

}  // namespace

RolloutRecord rollout_teacher(const OikgModel& model, const EnvContext& ctx, const Episode& ep,
                              const InstructionFeatures& ins, FrontierMode mode) {
    const auto& gt = ep.instruction.gt_path;
    if (gt.empty() || gt.front() != ep.start) throw std::invalid_argument("episode gt path must begin at the start");
    RolloutRecord rec;
    PathGraph pg(ctx.graph(), ep.start, mode);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const NodeId target = i + 1 < gt.size() ? gt[i + 1] : kStop;
        if (target != kStop && pg.frontier().count(target) == 0) {
            throw InvalidStateError("gt action " + std::to_string(target) + " is not in the frontier");
        }
        StepFeatures f = model.forward_step(pg, ctx.observation(pg.current()), ins);
        StepRecord s = record_step(f, pg.current(), target);
        s.taken = target;
        Tensor loss = nn::cross_entropy(f.scores, s.target);
        s.loss = loss.item();
        rec.steps.push_back(std::move(s));
        rec.losses.push_back(loss);
        rec.taps.push_back(f.observation);
        rec.taps.push_back(f.graph);
        rec.visited.push_back(pg.current());
        pg.advance(target == kStop ? pg.current() : target);
    }
    rec.stopped = true;
    return rec;
}

RolloutRecord rollout_student(const OikgModel& model, const EnvContext& ctx, const Episode& ep,
                              const InstructionFeatures& ins, int max_steps, Rng& rng, FrontierMode mode) {
    RolloutRecord rec;
    PathGraph pg(ctx.graph(), ep.start, mode);
    for (int t = 0; t < max_steps && !pg.terminal(); ++t) {
        StepFeatures f = model.forward_step(pg, ctx.observation(pg.current()), ins);
        const NodeId label = pseudo_label(pg, ep.instruction.gt_path, ctx.distances);
        StepRecord s = record_step(f, pg.current(), label);
        s.taken = s.candidates[sample_categorical(s.logits, rng)];
        Tensor loss = nn::cross_entropy(f.scores, s.target);
        s.loss = loss.item();
        rec.visited.push_back(pg.current());
        const NodeId taken = s.taken;
        rec.steps.push_back(std::move(s));
        rec.losses.push_back(loss);
        rec.taps.push_back(f.observation);
        rec.taps.push_back(f.graph);
        pg.advance(taken == kStop ? pg.current() : taken);
    }
    rec.stopped = pg.terminal();
    return rec;
}

Tensor episode_loss(const RolloutRecord& teacher, const RolloutRecord& student, double lambda) {
    return nn::add(nn::scale(teacher.mean_loss(), lambda), nn::scale(student.mean_loss(), 1.0 - lambda));
}

double episode_loss_value(double teacher_mean, double student_mean, double lambda) {
    return lambda * teacher_mean + (1.0 - lambda) * student_mean;
}

std::size_t sample_categorical(std::span<const double> logits, Rng& rng) {
    if (logits.empty()) throw std::invalid_argument("sample_categorical: no logits");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += w[i] = std::exp(logits[i] - mx);
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * z;
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    return w.size() - 1;
}

std::vector<NodeId> executed_path(const NavGraph& g, std::span<const NodeId> decisions) {
    std::vector<NodeId> out;
    if (decisions.empty()) return out;
    out.push_back(decisions.front());
    std::set<NodeId> seen{decisions.front()};
    for (std::size_t i = 1; i < decisions.size(); ++i) {
        const NodeId a = decisions[i - 1], b = decisions[i];
        if (g.find_edge(a, b)) {
            out.push_back(b);
        } else {
            ShortestPath sp = shortest_path_within(g, a, b, [&](NodeId n) { return seen.count(n) != 0; });
            if (sp.path.empty()) sp = shortest_path(g, a, b);
            if (sp.path.empty()) throw InvalidStateError("no route between consecutive decisions");
            out.insert(out.end(), sp.path.begin() + 1, sp.path.end());
        }
        seen.insert(b);
    }
    return out;
}

NavigationResult navigate_model(const OikgModel& model, const EnvContext& ctx, const Episode& ep, int max_steps,
                                FrontierMode mode, bool with_labels) {
    NavigationResult res;
    InstructionFeatures ins = model.prepare_instruction(ep.instruction);
    PathGraph pg(ctx.graph(), ep.start, mode);
    for (int t = 0; t < max_steps && !pg.terminal(); ++t) {
        StepFeatures f = model.forward_step(pg, ctx.observation(pg.current()), ins);
        NavigationStep s;
        s.t = t;
        s.node = pg.current();
        s.frontier.assign(pg.frontier().begin(), pg.frontier().end());
        s.scores.assign(f.scores.values().begin(), f.scores.values().end());
        s.action = select_action(s.scores, f.candidates);
        if (with_labels) s.pseudo_label = pseudo_label(pg, ep.instruction.gt_path, ctx.distances);
        pg.advance(s.action == kStop ? pg.current() : s.action);
        res.steps.push_back(std::move(s));
    }
    res.decisions = pg.visited();
    res.stopped = pg.terminal();
    res.executed = executed_path(ctx.graph(), res.decisions);
    return res;
}

NavigationResult navigate_oracle(const EnvContext& ctx, const Episode& ep) {
    NavigationResult res;
    const auto& gt = ep.instruction.gt_path;
    PathGraph pg(ctx.graph(), ep.start);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        NavigationStep s;
        s.t = static_cast<int>(i);
        s.node = pg.current();
        s.frontier.assign(pg.frontier().begin(), pg.frontier().end());
        s.action = i + 1 < gt.size() ? gt[i + 1] : kStop;
        pg.advance(s.action == kStop ? pg.current() : s.action);
        res.steps.push_back(std::move(s));
    }
    res.decisions = pg.visited();
    res.stopped = true;
    res.executed = executed_path(ctx.graph(), res.decisions);
    return res;
}

NavigationResult navigate_random(const EnvContext& ctx, const Episode& ep, int max_steps, Rng& rng,
                                 FrontierMode mode) {
    NavigationResult res;
    PathGraph pg(ctx.graph(), ep.start, mode);
    for (int t = 0; t < max_steps && !pg.terminal(); ++t) {
        NavigationStep s;
        s.t = t;
        s.node = pg.current();
        s.frontier.assign(pg.frontier().begin(), pg.frontier().end());
        const std::size_t n = s.frontier.size() + 1;
        const std::size_t pick = static_cast<std::size_t>(rng() % n);
        s.action = pick < s.frontier.size() ? s.frontier[pick] : kStop;
        pg.advance(s.action == kStop ? pg.current() : s.action);
        res.steps.push_back(std::move(s));
    }
    res.decisions = pg.visited();
    res.stopped = pg.terminal();
    res.executed = executed_path(ctx.graph(), res.decisions);
    return res;
}

metrics::EpisodeResult to_result(const EnvContext& ctx, const Episode& ep, const NavigationResult& nav) {
    return {nav.executed, ep.instruction.gt_path, &ctx.graph(), &ctx.distances};
}

EvalSummary evaluate_model(const OikgModel& model, const std::vector<EnvContext>& ctxs,
                           const std::vector<Episode>& episodes, int max_steps, FrontierMode mode) {
    EvalSummary out;
    for (const Episode& ep : episodes) {
        const EnvContext& ctx = ctxs.at(static_cast<std::size_t>(ep.env));
        out.rows.push_back(metrics::evaluate(to_result(ctx, ep, navigate_model(model, ctx, ep, max_steps, mode))));
    }
    out.summary = metrics::aggregate(out.rows);
    return out;
}

double teacher_accuracy(const OikgModel& model, const std::vector<EnvContext>& ctxs,
                        const std::vector<Episode>& episodes, FrontierMode mode) {
    std::size_t hits = 0, total = 0;
    for (const Episode& ep : episodes) {
        const EnvContext& ctx = ctxs.at(static_cast<std::size_t>(ep.env));
        RolloutRecord r = rollout_teacher(model, ctx, ep, model.prepare_instruction(ep.instruction), mode);
        for (const StepRecord& s : r.steps) hits += s.predicted == s.supervision ? 1 : 0;
        total += r.steps.size();
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

namespace {

// Fisher-Yates with an explicit modulo draw so orderings do not depend on the
// standard library's distribution implementation.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng = make_rng(seed, "train.epoch", epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    return order;
}

}  // namespace

std::vector<TrainLogRow> train(OikgModel& model, const TrainData& data, const TrainConfig& cfg,
                               const TrainCallback& on_row) {
    cfg.validate();
    if (!data.contexts || !data.episodes) throw std::invalid_argument("train: missing environments or episodes");
    const auto& episodes = *data.episodes;
    if (cfg.iterations > 0 && episodes.empty()) throw std::invalid_argument("train: no training episodes");
    nn::ParamStore& ps = model.params();
    const nn::AdamConfig adam{cfg.lr};
    const double lambda = cfg.teacher_weight();
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    std::vector<TrainLogRow> log;
    std::uint64_t cached_epoch = ~0ULL;
    std::vector<std::size_t> order;
    for (int it = 1; it <= cfg.iterations; ++it) {
        TrainLogRow row;
        row.iteration = it;
        Tensor total;
        std::size_t tf_hits = 0, tf_steps = 0;
        for (std::size_t b = 0; b < batch; ++b) {
            const std::uint64_t pos = static_cast<std::uint64_t>(it - 1) * batch + b;
            const std::uint64_t epoch = pos / episodes.size();
            if (epoch != cached_epoch) {
                order = epoch_order(episodes.size(), cfg.seed, epoch);
                cached_epoch = epoch;
            }
            const Episode& ep = episodes[order[pos % episodes.size()]];
            const EnvContext& ctx = data.contexts->at(static_cast<std::size_t>(ep.env));
            InstructionFeatures ins = model.prepare_instruction(ep.instruction);
            RolloutRecord tf = rollout_teacher(model, ctx, ep, ins, cfg.frontier);
            Rng rng = make_rng(cfg.seed, "train.student", pos);
            RolloutRecord sf = rollout_student(model, ctx, ep, ins, cfg.max_steps, rng, cfg.frontier);
            Tensor tf_mean = tf.mean_loss();
            Tensor sf_mean = sf.mean_loss();
            row.tf_loss += tf_mean.item();
            row.sf_loss += sf_mean.item();
            for (const StepRecord& s : tf.steps) tf_hits += s.predicted == s.supervision ? 1 : 0;
            tf_steps += tf.steps.size();
            Tensor loss = nn::add(nn::scale(tf_mean, lambda), nn::scale(sf_mean, 1.0 - lambda));
            total = total.defined() ? nn::add(total, loss) : loss;
        }
        const double inv = 1.0 / static_cast<double>(batch);
        total = nn::scale(total, inv);
        row.tf_loss *= inv;
        row.sf_loss *= inv;
        row.total_loss = total.item();
        row.tf_acc = static_cast<double>(tf_hits) / static_cast<double>(tf_steps);
        if (!std::isfinite(row.total_loss)) {
            if (!cfg.dump_path.empty()) nn::save_checkpoint(ps, cfg.dump_path);
            throw NumericError("non-finite loss at iteration " + std::to_string(it) +
                               (cfg.dump_path.empty() ? "" : "; parameters dumped to " + cfg.dump_path.string()));
        }
        nn::backward(total);
        row.grad_norm = ps.clip_grad_norm(cfg.clip_norm);
        if (!std::isfinite(row.grad_norm)) {
            if (!cfg.dump_path.empty()) nn::save_checkpoint(ps, cfg.dump_path);
            throw NumericError("non-finite gradient at iteration " + std::to_string(it));
        }
        ps.adam_step(adam);
        if (cfg.eval_every > 0 && it % cfg.eval_every == 0 && data.eval_episodes && !data.eval_episodes->empty()) {
            EvalSummary ev = evaluate_model(model, *data.contexts, *data.eval_episodes, cfg.max_steps, cfg.frontier);
            row.eval_sr = ev.summary.mean.sr;
            row.eval_spl = ev.summary.mean.spl;
            row.eval_ndtw = ev.summary.mean.ndtw;
        }
        if (on_row) on_row(row);
        log.push_back(row);
    }
    return log;
}

std::string train_log_header() {
    return "iteration,tf_loss,sf_loss,total_loss,grad_norm,eval_SR,eval_SPL,eval_nDTW,tf_acc";
}

std::string train_log_line(const TrainLogRow& r) {
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
    return std::to_string(r.iteration) + "," + num(r.tf_loss) + "," + num(r.sf_loss) + "," + num(r.total_loss) + "," +
           num(r.grad_norm) + "," + opt(r.eval_sr) + "," + opt(r.eval_spl) + "," + opt(r.eval_ndtw) + "," +
           num(r.tf_acc);
}

}  // namespace oikg
