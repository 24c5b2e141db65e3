#include "oikg/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "oikg/analysis.hpp"
#include "oikg/env_io.hpp"
#include "oikg/errors.hpp"
#include "oikg/metrics.hpp"
#include "oikg/nn/checkpoint.hpp"
#include "oikg/rng.hpp"
#include "oikg/training.hpp"
#include "oikg/vocabulary.hpp"

namespace oikg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve_output(const fs::path& p) {
    const char* root = std::getenv("OIKG_OUT");
    if (p.is_relative() && root != nullptr && *root != '\0') return fs::path(root) / p;
    return p;
}

fs::path resolve_input(const fs::path& p) {
    const char* root = std::getenv("OIKG_OUT");
    if (p.is_relative() && !fs::exists(p) && root != nullptr && *root != '\0') return fs::path(root) / p;
    return p;
}

std::string config_hash(const json& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(io::dump(config))));
    return buf;
}

json model_config_to_json(const ModelConfig& c) {
    return {
        {"views", c.views},
        {"visual_dim", c.visual_dim},
        {"embed_dim", c.embed_dim},
        {"text_dim", c.text_dim},
        {"key_dim", c.key_dim},
        {"attn_dim", c.attn_dim},
        {"heads", c.heads},
        {"decoder_layers", c.decoder_layers},
        {"encoder_layers", c.encoder_layers},
        {"mlp_hidden", c.mlp_hidden},
        {"vocab_size", static_cast<int>(c.vocabulary())},
        {"layer_norm", c.layer_norm},
        {"flags", c.flags.to_list()},
    };
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    try {
        c.views = j.at("views").get<int>();
        c.visual_dim = j.at("visual_dim").get<int>();
        c.embed_dim = j.at("embed_dim").get<int>();
        c.text_dim = j.at("text_dim").get<int>();
        c.key_dim = j.at("key_dim").get<int>();
        c.attn_dim = j.at("attn_dim").get<int>();
        c.heads = j.at("heads").get<int>();
        c.decoder_layers = j.at("decoder_layers").get<int>();
        c.encoder_layers = j.at("encoder_layers").get<int>();
        c.mlp_hidden = j.at("mlp_hidden").get<int>();
        c.vocab_size = j.at("vocab_size").get<int>();
        c.layer_norm = j.at("layer_norm").get<bool>();
        c.flags = ModelFlags::parse(j.at("flags").get<std::string>());
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model config: ") + e.what());
    }
    return c;
}

Dataset Dataset::load(const fs::path& root_in) {
    Dataset d;
    d.root = resolve_input(root_in);
    const fs::path mpath = d.root / "manifest.json";
    try {
        d.manifest = json::parse(io::read_file(mpath));
        for (const auto& rel : d.manifest.at("envs")) d.envs.push_back(io::load_environment(d.root / rel.get<std::string>()));
        d.mode = parse_path_mode(d.manifest.at("mode").get<std::string>());
    } catch (const json::exception& e) {
        throw SchemaError(mpath.string() + ": " + e.what());
    }
    if (d.envs.empty()) throw SchemaError(mpath.string() + ": no environments listed");
    return d;
}

std::vector<Episode> Dataset::split(const std::string& name) const {
    const json& splits = manifest.at("splits");
    if (!splits.contains(name)) throw SchemaError("dataset " + root.string() + " has no split '" + name + "'");
    return io::load_episodes(root / splits.at(name).get<std::string>(), envs);
}

namespace {

/// Registers options and remembers how to archive their values.
class Binder {
public:
    explicit Binder(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* option(const std::string& name, T& var, const std::string& help) {
        fields_.push_back({name, [&var] { return json(var); }});
        return app_->add_option("--" + name, var, help)->capture_default_str();
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
        fields_.push_back({name, [&var] { return json(var); }});
        return app_->add_flag("--" + name, var, help);
    }

    json archive() const {
        json j = json::object();
        for (const auto& f : fields_) j[f.name] = f.get();
        return j;
    }

private:
    struct Field {
        std::string name;
        std::function<json()> get;
    };

    CLI::App* app_;
    std::vector<Field> fields_;
};

struct Common {
    std::string out;
    std::string config;
    int jobs = 1;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
    auto* o = sub->add_option("--out", c.out, "output directory");
    if (needs_out) o->required();
    sub->add_option("--config", c.config, "JSON file of option values; command-line flags take precedence");
    sub->add_option("--jobs", c.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

/// Splices `--key=value` pairs from a --config file in front of the user's flags.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty() || args.empty()) return args;
    json cfg;
    try {
        cfg = json::parse(io::read_file(resolve_input(path)));
    } catch (const json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    if (!cfg.is_object()) throw SchemaError(path + ": config must be a JSON object");
    std::vector<std::string> out{args.front()};
    for (const auto& [key, value] : cfg.items()) {
        if (key == "config_hash" || key == "command") continue;
        std::string v;
        if (value.is_string()) v = value.get<std::string>();
        else if (value.is_boolean()) v = value.get<bool>() ? "true" : "false";
        else if (value.is_number()) v = value.dump();
        else throw SchemaError(path + ": option '" + key + "' must be a string, number or boolean");
        out.push_back("--" + key + "=" + v);
    }
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string indexed(const std::string& stem, std::size_t i, int width, const std::string& ext) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%0*zu", width, i);
    return stem + buf + ext;
}

std::string csv_num(double v, int decimals) { return metrics::fixed(v, decimals); }

json action_json(NodeId a) { return a == kStop ? json("STOP") : json(a); }

void archive_config(const fs::path& out, json& config) {
    config["config_hash"] = config_hash(config);
    io::write_file(out / "config.json", io::dump(config));
}

std::vector<Episode> take(std::vector<Episode> eps, int limit) {
    if (limit > 0 && static_cast<std::size_t>(limit) < eps.size()) eps.resize(static_cast<std::size_t>(limit));
    return eps;
}

FrontierMode parse_frontier(const std::string& s) {
    if (s == "global") return FrontierMode::Global;
    if (s == "local") return FrontierMode::Local;
    throw std::invalid_argument("unknown frontier mode '" + s + "' (expected global or local)");
}

ModelConfig model_for(const std::string& profile, const std::string& flags, const Dataset& data) {
    ModelConfig mc = ModelConfig::profile(profile);
    mc.flags = ModelFlags::parse(flags);
    mc.views = data.envs.front().params.views;
    mc.visual_dim = data.envs.front().params.visual_dim;
    for (const Environment& e : data.envs) {
        if (e.params.views != mc.views || e.params.visual_dim != mc.visual_dim) {
            throw SchemaError("environments in " + data.root.string() + " disagree on views or visual_dim");
        }
    }
    mc.validate();
    return mc;
}

// ---- gen ---------------------------------------------------------------

struct GenOptions {
    Common common;
    int nodes = 30;
    double radius = 5.0;
    double extent = 20.0;
    double height = 0.3;
    int visual_dim = 32;
    int views = 36;
    double noise = 0.1;
    int envs = 4;
    int unseen_envs = 2;
    int episodes = 100;
    int val_episodes = 20;
    std::string mode = "shortest";
    std::uint64_t seed = 0;
};

int cmd_gen(const GenOptions& o, json config) {
    const PathMode mode = parse_path_mode(o.mode);
    if (o.envs < 1) throw std::invalid_argument("--envs must be at least 1");
    if (o.unseen_envs < 0 || o.episodes < 0 || o.val_episodes < 0) {
        throw std::invalid_argument("environment and episode counts must be non-negative");
    }
    EnvParams base;
    base.node_count = o.nodes;
    base.connection_radius = o.radius;
    base.extent = o.extent;
    base.height_extent = o.height;
    base.visual_dim = o.visual_dim;
    base.views = o.views;
    base.noise_sigma = o.noise;
    validate(base);

    const fs::path out = resolve_output(o.common.out);
    const std::size_t total = static_cast<std::size_t>(o.envs + o.unseen_envs);
    std::vector<Environment> envs(total);
    parallel_for(total, o.common.jobs, [&](std::size_t i) {
        EnvParams p = base;
        p.seed = derive_seed(o.seed, "gen.env", i);
        envs[i] = generate_environment(p);
    });

    struct SplitSpec {
        std::string name;
        int count;
        int first_env;
        int env_count;
    };
    const std::vector<SplitSpec> specs{
        {"train", o.episodes, 0, o.envs},
        {"val_seen", o.val_episodes, 0, o.envs},
        {"val_unseen", o.unseen_envs > 0 ? o.val_episodes : 0, o.envs, o.unseen_envs},
    };

    archive_config(out, config);
    json manifest{{"config_hash", config.at("config_hash")}, {"mode", to_string(mode)}};
    json env_files = json::array();
    for (std::size_t i = 0; i < total; ++i) {
        const std::string rel = "envs/" + indexed("env", i, 3, ".json");
        io::save_environment(envs[i], out / rel);
        env_files.push_back(rel);
    }
    manifest["envs"] = env_files;
    json seen = json::array(), unseen = json::array();
    for (int i = 0; i < o.envs; ++i) seen.push_back(i);
    for (int i = 0; i < o.unseen_envs; ++i) unseen.push_back(o.envs + i);
    manifest["seen"] = seen;
    manifest["unseen"] = unseen;

    std::size_t episode_total = 0;
    json splits = json::object();
    for (const SplitSpec& s : specs) {
        std::vector<Episode> eps(static_cast<std::size_t>(s.count));
        parallel_for(eps.size(), o.common.jobs, [&](std::size_t j) {
            const int env = s.first_env + static_cast<int>(j % static_cast<std::size_t>(s.env_count));
            eps[j] = make_episode(envs[static_cast<std::size_t>(env)].graph, derive_seed(o.seed, "gen." + s.name, j), mode);
            eps[j].env = env;
        });
        const std::string rel = "episodes/" + s.name + ".json";
        io::write_file(out / rel, io::dump(io::episodes_to_json(eps)));
        splits[s.name] = rel;
        episode_total += eps.size();
    }
    manifest["splits"] = splits;
    io::write_file(out / "vocabulary.json", io::dump(io::vocabulary_json()));
    io::write_file(out / "manifest.json", io::dump(manifest));
    std::cout << "wrote " << total << " environments and " << episode_total << " episodes to " << out.string() << "\n";
    return kOk;
}

// ---- train -------------------------------------------------------------

struct TrainOptions {
    Common common;
    std::string data;
    std::string split = "train";
    std::string eval_split = "val_seen";
    int limit = 0;
    int eval_limit = 50;
    std::string profile = "default";
    std::string flags = "MED,GE,LD,OD";
    double lambda = 0.2;
    bool swap_lambda = false;
    int iters = 20000;
    double lr = 1e-3;
    int batch = 1;
    int max_steps = 0;
    int eval_every = 0;
    std::string frontier = "global";
    std::uint64_t seed = 0;
};

int cmd_train(const TrainOptions& o, json config) {
    ModelConfig::profile(o.profile);
    ModelFlags::parse(o.flags);
    parse_frontier(o.frontier);
    const Dataset data = Dataset::load(o.data);
    const std::vector<Episode> episodes = take(data.split(o.split), o.limit);
    std::vector<Episode> eval_eps;
    if (o.eval_every > 0) eval_eps = take(data.split(o.eval_split), o.eval_limit);
    const ModelConfig mc = model_for(o.profile, o.flags, data);

    TrainConfig tc;
    tc.lambda = o.lambda;
    tc.swap_lambda = o.swap_lambda;
    tc.max_steps = o.max_steps > 0 ? o.max_steps : TrainConfig::default_max_steps(data.mode);
    tc.lr = o.lr;
    tc.iterations = o.iters;
    tc.batch_size = o.batch;
    tc.seed = o.seed;
    tc.eval_every = o.eval_every;
    tc.frontier = parse_frontier(o.frontier);
    tc.validate();

    const fs::path out = resolve_output(o.common.out);
    tc.dump_path = out / "checkpoint_nonfinite.bin";
    archive_config(out, config);
    const std::string hash = config.at("config_hash");

    OikgModel model(mc, o.seed);
    const std::vector<EnvContext> ctxs = build_contexts(data.envs);
    const int report = std::max(1, o.iters / 20);
    auto log = train(model, {&ctxs, &episodes, &eval_eps}, tc, [&](const TrainLogRow& r) {
        if (r.iteration % report == 0) {
            std::cerr << "iter " << r.iteration << " loss " << metrics::fixed(r.total_loss, 4) << " tf_acc "
                      << metrics::fixed(r.tf_acc, 3) << "\n";
        }
    });

    std::string csv = "# config_hash=" + hash + "\n" + train_log_header() + "\n";
    for (const TrainLogRow& r : log) csv += train_log_line(r) + "\n";
    io::write_file(out / "train_log.csv", csv);
    nn::save_checkpoint(model.params(), out / "checkpoint.bin");
    json mj{{"config_hash", hash}, {"model", model_config_to_json(mc)}, {"max_steps", tc.max_steps}};
    io::write_file(out / "model.json", io::dump(mj));
    const double acc = teacher_accuracy(model, ctxs, episodes, tc.frontier);
    std::cout << "trained " << o.iters << " iterations on " << episodes.size()
              << " episodes; teacher-forced step accuracy " << metrics::fixed(acc, 4) << "\n";
    return kOk;
}

// ---- eval --------------------------------------------------------------

struct EvalOptions {
    Common common;
    std::string data;
    std::string split = "val_seen";
    std::string agent = "model";
    std::string model;
    std::string profile;
    std::string flags;
    int max_steps = 0;
    int limit = 0;
    std::uint64_t seed = 0;
    bool euclidean_success = false;
    bool no_traces = false;
    std::string frontier = "global";
};

OikgModel load_model(const fs::path& dir, const std::string& profile, const std::string& flags, const Dataset& data,
                     int* max_steps) {
    const fs::path mpath = dir / "model.json";
    json mj;
    try {
        mj = json::parse(io::read_file(mpath));
    } catch (const json::exception& e) {
        throw SchemaError(mpath.string() + ": " + e.what());
    }
    ModelConfig mc = model_config_from_json(mj.at("model"));
    if (!profile.empty()) {
        ModelConfig p = ModelConfig::profile(profile);
        p.views = mc.views;
        p.visual_dim = mc.visual_dim;
        p.flags = mc.flags;
        mc = p;
    }
    if (!flags.empty()) mc.flags = ModelFlags::parse(flags);
    if (mc.views != data.envs.front().params.views || mc.visual_dim != data.envs.front().params.visual_dim) {
        throw SchemaError("model in " + dir.string() + " expects " + std::to_string(mc.views) + " views of " +
                          std::to_string(mc.visual_dim) + " dims; dataset differs");
    }
    if (max_steps && *max_steps <= 0 && mj.contains("max_steps")) *max_steps = mj.at("max_steps").get<int>();
    OikgModel model(mc, 0);
    try {
        nn::load_checkpoint(model.params(), dir / "checkpoint.bin");
    } catch (const ShapeError& e) {
        throw SchemaError("checkpoint in " + dir.string() + " is incompatible with the model config: " + e.what());
    }
    return model;
}

int cmd_eval(const EvalOptions& o, json config) {
    const Dataset data = Dataset::load(o.data);
    const std::vector<Episode> episodes = take(data.split(o.split), o.limit);
    const FrontierMode frontier = parse_frontier(o.frontier);
    int max_steps = o.max_steps;
    std::optional<OikgModel> model;
    if (o.agent == "model") {
        if (o.model.empty()) throw std::invalid_argument("--model is required for the model agent");
        model.emplace(load_model(resolve_input(o.model), o.profile, o.flags, data, &max_steps));
    } else if (o.agent != "oracle" && o.agent != "random") {
        throw std::invalid_argument("unknown agent '" + o.agent + "' (expected model, oracle or random)");
    }
    if (max_steps <= 0) max_steps = TrainConfig::default_max_steps(data.mode);

    const fs::path out = resolve_output(o.common.out);
    archive_config(out, config);
    const std::string hash = config.at("config_hash");
    const std::vector<EnvContext> ctxs = build_contexts(data.envs);
    metrics::MetricOptions mopts;
    mopts.euclidean_success = o.euclidean_success;

    std::vector<metrics::MetricRow> rows(episodes.size());
    std::vector<NavigationResult> navs(episodes.size());
    parallel_for(episodes.size(), o.common.jobs, [&](std::size_t i) {
        const Episode& ep = episodes[i];
        const EnvContext& ctx = ctxs.at(static_cast<std::size_t>(ep.env));
        if (model) {
            navs[i] = navigate_model(*model, ctx, ep, max_steps, frontier, true);
        } else if (o.agent == "oracle") {
            navs[i] = navigate_oracle(ctx, ep);
        } else {
            Rng rng = make_rng(o.seed, "eval.random", i);
            navs[i] = navigate_random(ctx, ep, max_steps, rng, frontier);
        }
        rows[i] = metrics::evaluate(to_result(ctx, ep, navs[i]), mopts);
    });

    std::string csv = "# config_hash=" + hash + "\nepisode_id,TL,NE,SR,SPL,nDTW,sDTW\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv += std::to_string(i) + "," + csv_num(r.tl, 6) + "," + csv_num(r.ne, 6) + "," + csv_num(r.sr, 0) + "," +
               csv_num(r.spl, 6) + "," + csv_num(r.ndtw, 6) + "," + csv_num(r.sdtw, 6) + "\n";
    }
    io::write_file(out / "results.csv", csv);

    if (!o.no_traces) {
        for (std::size_t i = 0; i < navs.size(); ++i) {
            std::string lines;
            for (const NavigationStep& s : navs[i].steps) {
                json j{{"t", s.t}, {"node", s.node}, {"frontier", s.frontier}, {"scores", s.scores},
                       {"action", action_json(s.action)}};
                if (s.pseudo_label) j["pseudo_label"] = action_json(*s.pseudo_label);
                lines += j.dump() + "\n";
            }
            io::write_file(out / "traces" / indexed("episode", i, 4, ".jsonl"), lines);
        }
    }

    const metrics::Summary s = metrics::aggregate(rows);
    json summary{
        {"config_hash", hash},
        {"agent", o.agent},
        {"split", o.split},
        {"episodes", s.count},
        {"mean", {{"TL", s.mean.tl}, {"NE", s.mean.ne}, {"SR", s.mean.sr}, {"SPL", s.mean.spl}, {"nDTW", s.mean.ndtw},
                  {"sDTW", s.mean.sdtw}}},
        {"table", {{"TL", metrics::fixed(s.mean.tl, 2)}, {"NE", metrics::fixed(s.mean.ne, 2)},
                   {"SR", metrics::percent(s.mean.sr)}, {"SPL", metrics::percent(s.mean.spl)},
                   {"nDTW", metrics::percent(s.mean.ndtw)}, {"sDTW", metrics::percent(s.mean.sdtw)}}},
    };
    io::write_file(out / "summary.json", io::dump(summary));
    std::cout << o.agent << " on " << o.split << " (" << s.count << " episodes): SR " << metrics::percent(s.mean.sr)
              << " SPL " << metrics::percent(s.mean.spl) << " nDTW " << metrics::percent(s.mean.ndtw) << "\n";
    return kOk;
}

// ---- ablate ------------------------------------------------------------

struct AblateOptions {
    Common common;
    std::string data;
    std::string train_split = "train";
    std::string eval_split = "val_unseen";
    int train_limit = 200;
    int eval_limit = 50;
    std::string profile = "tiny";
    int iters = 200;
    double lr = 1e-3;
    int batch = 1;
    double lambda = 0.2;
    int max_steps = 0;
    int seeds = 5;
    std::uint64_t seed = 0;
    int timing_steps = 1000;
};

std::vector<std::uint64_t> seed_list(std::uint64_t first, int count) {
    std::vector<std::uint64_t> s;
    for (int i = 0; i < count; ++i) s.push_back(first + static_cast<std::uint64_t>(i));
    return s;
}

json report_json(const analysis::ProbeReport& r, const std::string& hash) {
    return {{"config_hash", hash},     {"kind", r.kind},           {"variant_a", r.variant_a},
            {"variant_b", r.variant_b}, {"samples", r.samples},     {"samples_a", r.samples_a},
            {"samples_b", r.samples_b}, {"mean_diff", r.mean_diff}, {"sign_test_p", r.sign_test_p}};
}

int cmd_ablate(const AblateOptions& o, json config) {
    if (o.seeds < 1) throw std::invalid_argument("--seeds must be at least 1");
    const Dataset data = Dataset::load(o.data);
    const std::vector<Episode> train_eps = take(data.split(o.train_split), o.train_limit);
    const std::vector<Episode> eval_eps = take(data.split(o.eval_split), o.eval_limit);
    if (train_eps.empty() || eval_eps.empty()) throw SchemaError("ablation needs training and evaluation episodes");

    analysis::AblationConfig ac;
    ac.model = model_for(o.profile, "none", data);
    ac.train.iterations = o.iters;
    ac.train.lr = o.lr;
    ac.train.batch_size = o.batch;
    ac.train.lambda = o.lambda;
    ac.train.max_steps = o.max_steps > 0 ? o.max_steps : TrainConfig::default_max_steps(data.mode);
    ac.train.validate();
    ac.seeds = seed_list(o.seed, o.seeds);
    ac.timing_steps = o.timing_steps;
    ac.jobs = o.common.jobs;

    const fs::path out = resolve_output(o.common.out);
    archive_config(out, config);
    const std::string hash = config.at("config_hash");
    const std::vector<EnvContext> ctxs = build_contexts(data.envs);
    const analysis::AblationResult res = analysis::run_ablation(ac, ctxs, train_eps, eval_eps);

    std::string csv = "# config_hash=" + hash + "\nMED,GE,LD,OD,TL,NE,SR,SPL,time_ms,status\n";
    for (const auto& r : res.rows) {
        csv += std::string(r.flags.med ? "1" : "0") + "," + (r.flags.ge ? "1" : "0") + "," + (r.flags.ld ? "1" : "0") +
               "," + (r.flags.od ? "1" : "0") + "," + metrics::fixed(r.tl, 2) + "," + metrics::fixed(r.ne, 2) + "," +
               metrics::percent(r.sr) + "," + metrics::percent(r.spl) + "," + metrics::fixed(r.time_ms, 3) + "," +
               (r.failed ? "failed" : "ok") + "\n";
    }
    io::write_file(out / "ablation.csv", csv);

    json cells = json::array();
    for (const auto& c : res.cells) {
        cells.push_back({{"flags", c.flags.label()},
                         {"seed", c.seed},
                         {"TL", c.summary.mean.tl},
                         {"NE", c.summary.mean.ne},
                         {"SR", c.summary.mean.sr},
                         {"SPL", c.summary.mean.spl},
                         {"nDTW", c.summary.mean.ndtw},
                         {"sDTW", c.summary.mean.sdtw},
                         {"time_ms", c.time_ms},
                         {"failed", c.failed},
                         {"error", c.error}});
    }
    io::write_file(out / "ablation_seeds.json", io::dump(json{{"config_hash", hash}, {"cells", cells}}));

    std::vector<double> full, base;
    for (const auto& c : res.cells) {
        if (c.flags == ModelFlags{}) full.push_back(c.summary.mean.sr);
        if (c.flags == ModelFlags::none()) base.push_back(c.summary.mean.sr);
    }
    const auto margin = analysis::compare("sr_margin", ModelFlags{}.label(), ModelFlags::none().label(), full, base);
    io::write_file(out / "ablation_margin.json", io::dump(report_json(margin, hash)));

    for (const auto& r : res.rows) {
        std::cout << r.flags.label() << "  SR " << metrics::percent(r.sr) << "  SPL " << metrics::percent(r.spl)
                  << "  time " << metrics::fixed(r.time_ms, 3) << " ms" << (r.failed ? "  (failed)" : "") << "\n";
    }
    std::cout << "SR margin MGLO - ---- : " << metrics::fixed(margin.mean_diff * 100.0, 2)
              << " (sign test p = " << metrics::fixed(margin.sign_test_p, 4) << ")\n";
    return kOk;
}

// ---- probe -------------------------------------------------------------

struct ProbeOptions {
    Common common;
    std::string data;
    std::string split = "train";
    std::string kind = "grad";
    int limit = 8;
    std::string profile = "tiny";
    std::string variant_a;
    std::string variant_b;
    int seeds = 20;
    std::uint64_t seed = 0;
    int iters = 0;
    double lr = 1e-3;
    double lambda = 0.2;
    int max_steps = 0;
};

int cmd_probe(const ProbeOptions& o, json config) {
    if (o.seeds < 2) throw std::invalid_argument("--seeds must be at least 2");
    if (o.kind != "grad" && o.kind != "align" && o.kind != "mi") {
        throw std::invalid_argument("unknown probe kind '" + o.kind + "' (expected grad, align or mi)");
    }
    const Dataset data = Dataset::load(o.data);
    const std::vector<Episode> eps = take(data.split(o.split), o.limit);
    if (eps.empty()) throw SchemaError("probe needs at least one episode");
    const std::string va = !o.variant_a.empty() ? o.variant_a : "MED,GE,LD,OD";
    const std::string vb = !o.variant_b.empty() ? o.variant_b : (o.kind == "grad" ? "LD,OD" : "MED,GE");
    const ModelConfig ma = model_for(o.profile, va, data);
    const ModelConfig mb = model_for(o.profile, vb, data);

    TrainConfig tc;
    tc.iterations = o.iters;
    tc.lr = o.lr;
    tc.lambda = o.lambda;
    tc.max_steps = o.max_steps > 0 ? o.max_steps : TrainConfig::default_max_steps(data.mode);
    tc.validate();

    const fs::path out = resolve_output(o.common.out);
    archive_config(out, config);
    const std::string hash = config.at("config_hash");
    const std::vector<EnvContext> ctxs = build_contexts(data.envs);
    const std::vector<std::uint64_t> seeds = seed_list(o.seed, o.seeds);

    auto trained = [&](const ModelConfig& mc, std::uint64_t seed) {
        OikgModel m(mc, seed);
        TrainConfig t = tc;
        t.seed = seed;
        train(m, {&ctxs, &eps, nullptr}, t);
        return m;
    };

    std::vector<double> a(seeds.size()), b(seeds.size());
    std::string label_a = ma.flags.label(), label_b = mb.flags.label();
    bool surrogate = false;
    if (o.kind == "grad") {
        parallel_for(seeds.size(), o.common.jobs, [&](std::size_t i) {
            a[i] = analysis::grad_sq_norm(ma, ctxs, eps, seeds[i], tc);
            b[i] = analysis::grad_sq_norm(mb, ctxs, eps, seeds[i], tc);
        });
    } else if (o.kind == "align") {
        surrogate = true;
        parallel_for(seeds.size(), o.common.jobs, [&](std::size_t i) {
            a[i] = analysis::alignment_score(trained(ma, seeds[i]), ctxs, eps);
            b[i] = analysis::alignment_score(trained(mb, seeds[i]), ctxs, eps);
        });
    } else {
        surrogate = true;
        label_a += ":location";
        label_b = ma.flags.label() + ":object";
        parallel_for(seeds.size(), o.common.jobs, [&](std::size_t i) {
            const auto mi = analysis::mi_probe(trained(ma, seeds[i]), ctxs, eps);
            a[i] = mi.location;
            b[i] = mi.object;
        });
    }
    // Pairs with a non-finite side are reported as failures and excluded.
    std::vector<double> fa, fb;
    int failures = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (std::isfinite(a[i]) && std::isfinite(b[i])) {
            fa.push_back(a[i]);
            fb.push_back(b[i]);
        } else {
            ++failures;
            std::cerr << "warning: seed " << seeds[i] << " produced a non-finite sample; excluded\n";
        }
    }
    const auto report = analysis::compare(o.kind, label_a, label_b, fa, fb);
    json j = report_json(report, hash);
    j["surrogate"] = surrogate;
    j["failures"] = failures;
    j["seeds"] = seeds;
    io::write_file(out / "probe.json", io::dump(j));
    std::cout << o.kind << ": " << label_a << " - " << label_b << " mean diff " << report.mean_diff
              << " (sign test p = " << metrics::fixed(report.sign_test_p, 4) << ")\n";
    return kOk;
}

int guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const SchemaError& e) {
        std::cerr << "oikg: data error: " << e.what() << "\n";
        return kDataError;
    } catch (const IoError& e) {
        std::cerr << "oikg: data error: " << e.what() << "\n";
        return kDataError;
    } catch (const GenerationError& e) {
        std::cerr << "oikg: data error: " << e.what() << "\n";
        return kDataError;
    } catch (const NumericError& e) {
        std::cerr << "oikg: numeric failure: " << e.what() << "\n";
        return kNumericError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "oikg: usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "oikg: error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace

int run(const std::vector<std::string>& raw) {
    return guarded([&] {
        const std::vector<std::string> args = expand_config(raw);

        CLI::App app{"Object-and-geometry aware navigation agent on synthetic graphs", "oikg"};
        app.require_subcommand(1);
        app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

        GenOptions gen;
        CLI::App* g = app.add_subcommand("gen", "generate environments and episode splits");
        g->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        add_common(g, gen.common);
        Binder gb(g);
        gb.option("nodes", gen.nodes, "nodes per environment");
        gb.option("radius", gen.radius, "connection radius (m)");
        gb.option("extent", gen.extent, "floor side length (m)");
        gb.option("height", gen.height, "node height range (m)");
        gb.option("visual-dim", gen.visual_dim, "visual feature width");
        gb.option("views", gen.views, "views per panorama (36 or 12)");
        gb.option("noise", gen.noise, "observation noise sigma");
        gb.option("envs", gen.envs, "seen environments");
        gb.option("unseen-envs", gen.unseen_envs, "held-out environments for val_unseen");
        gb.option("episodes", gen.episodes, "training episodes");
        gb.option("val-episodes", gen.val_episodes, "episodes per validation split");
        gb.option("mode", gen.mode, "gt path mode: shortest or detour");
        gb.option("seed", gen.seed, "root seed");

        TrainOptions tr;
        CLI::App* t = app.add_subcommand("train", "train a model variant");
        t->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        add_common(t, tr.common);
        Binder tb(t);
        tb.option("data", tr.data, "dataset directory written by gen")->required();
        tb.option("split", tr.split, "training split");
        tb.option("eval-split", tr.eval_split, "split for periodic evaluation");
        tb.option("limit", tr.limit, "use only the first N training episodes (0 = all)");
        tb.option("eval-limit", tr.eval_limit, "evaluation episodes (0 = all)");
        tb.option("profile", tr.profile, "model size: tiny, default or deep");
        tb.option("flags", tr.flags, "enabled components, subset of MED,GE,LD,OD or none");
        tb.option("lambda", tr.lambda, "teacher-forcing weight");
        tb.flag("swap-lambda", tr.swap_lambda, "apply lambda to the student term instead");
        tb.option("iters", tr.iters, "training iterations");
        tb.option("lr", tr.lr, "learning rate");
        tb.option("batch", tr.batch, "episodes per iteration");
        tb.option("max-steps", tr.max_steps, "decision limit per episode (0 = 15, or 30 for detour data)");
        tb.option("eval-every", tr.eval_every, "evaluate every N iterations (0 = never)");
        tb.option("frontier", tr.frontier, "candidate set: global or local");
        tb.option("seed", tr.seed, "root seed");

        EvalOptions ev;
        CLI::App* e = app.add_subcommand("eval", "evaluate an agent and write metrics and traces");
        e->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        add_common(e, ev.common);
        Binder eb(e);
        eb.option("data", ev.data, "dataset directory written by gen")->required();
        eb.option("split", ev.split, "episode split");
        eb.option("agent", ev.agent, "model, oracle or random");
        eb.option("model", ev.model, "training output directory (model agent)");
        eb.option("profile", ev.profile, "override the stored model size");
        eb.option("flags", ev.flags, "override the stored component flags");
        eb.option("max-steps", ev.max_steps, "decision limit (0 = training value)");
        eb.option("limit", ev.limit, "use only the first N episodes (0 = all)");
        eb.option("seed", ev.seed, "seed for the random agent");
        eb.flag("euclidean-success", ev.euclidean_success, "judge success by straight-line distance");
        eb.flag("no-traces", ev.no_traces, "skip per-episode JSONL traces");
        eb.option("frontier", ev.frontier, "candidate set: global or local");

        AblateOptions ab;
        CLI::App* a = app.add_subcommand("ablate", "train and compare the cumulative component grid");
        a->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        add_common(a, ab.common);
        Binder abb(a);
        abb.option("data", ab.data, "dataset directory written by gen")->required();
        abb.option("train-split", ab.train_split, "training split");
        abb.option("eval-split", ab.eval_split, "held-out split");
        abb.option("train-limit", ab.train_limit, "training episodes (0 = all)");
        abb.option("eval-limit", ab.eval_limit, "evaluation episodes (0 = all)");
        abb.option("profile", ab.profile, "model size");
        abb.option("iters", ab.iters, "training iterations per cell");
        abb.option("lr", ab.lr, "learning rate");
        abb.option("batch", ab.batch, "episodes per iteration");
        abb.option("lambda", ab.lambda, "teacher-forcing weight");
        abb.option("max-steps", ab.max_steps, "decision limit (0 = mode default)");
        abb.option("seeds", ab.seeds, "number of seeds per row");
        abb.option("seed", ab.seed, "first seed");
        abb.option("timing-steps", ab.timing_steps, "forward steps timed per cell");

        ProbeOptions pr;
        CLI::App* p = app.add_subcommand("probe", "compare two variants with a diagnostic probe");
        p->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        add_common(p, pr.common);
        Binder pb(p);
        pb.option("data", pr.data, "dataset directory written by gen")->required();
        pb.option("split", pr.split, "episode split");
        pb.option("kind", pr.kind, "grad, align or mi");
        pb.option("limit", pr.limit, "episodes in the probe batch");
        pb.option("profile", pr.profile, "model size");
        pb.option("variant-a", pr.variant_a, "flags of the first variant");
        pb.option("variant-b", pr.variant_b, "flags of the second variant");
        pb.option("seeds", pr.seeds, "number of seeds");
        pb.option("seed", pr.seed, "first seed");
        pb.option("iters", pr.iters, "training iterations before align/mi probes");
        pb.option("lr", pr.lr, "learning rate");
        pb.option("lambda", pr.lambda, "teacher-forcing weight");
        pb.option("max-steps", pr.max_steps, "decision limit (0 = mode default)");

        std::vector<std::string> rev(args.rbegin(), args.rend());
        try {
            app.parse(rev);
        } catch (const CLI::ParseError& err) {
            const int code = app.exit(err);
            return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kUsage);
        }

        if (g->parsed()) {
            json c = gb.archive();
            c["command"] = "gen";
            return cmd_gen(gen, c);
        }
        if (t->parsed()) {
            json c = tb.archive();
            c["command"] = "train";
            return cmd_train(tr, c);
        }
        if (e->parsed()) {
            json c = eb.archive();
            c["command"] = "eval";
            return cmd_eval(ev, c);
        }
        if (a->parsed()) {
            json c = abb.archive();
            c["command"] = "ablate";
            return cmd_ablate(ab, c);
        }
        json c = pb.archive();
        c["command"] = "probe";
        return cmd_probe(pr, c);
    });
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace oikg::cli
