#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oikg/cli.hpp"
#include "oikg/nn/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using oikg::cli::run;

namespace {

fs::path scratch_root() { return fs::temp_directory_path() / ("oikg_cli_" + std::to_string(::getpid())); }

struct Cleanup {
    ~Cleanup() { fs::remove_all(scratch_root()); }
} cleanup;

fs::path scratch(const std::string& name) {
    fs::path p = scratch_root() / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

int shell(const std::string& cmd) {
    const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const std::vector<std::string> kSmallGen{"--nodes", "12", "--radius", "5", "--extent", "10", "--visual-dim", "8",
                                         "--views", "12", "--envs", "1", "--unseen-envs", "1", "--episodes", "6",
                                         "--val-episodes", "3", "--seed", "2"};

fs::path small_data(const std::string& name, std::vector<std::string> extra = {}) {
    fs::path out = scratch(name);
    std::vector<std::string> args{"gen", "--out", out.string()};
    args.insert(args.end(), kSmallGen.begin(), kSmallGen.end());
    args.insert(args.end(), extra.begin(), extra.end());
    REQUIRE(run(args) == 0);
    return out;
}

}  // namespace

TEST_CASE("gen writes the data tree") {
    fs::path d = small_data("gen");
    for (const char* f : {"config.json", "manifest.json", "vocabulary.json", "envs/env_000.json", "envs/env_001.json",
                          "episodes/train.json", "episodes/val_seen.json", "episodes/val_unseen.json"}) {
        CHECK(fs::exists(d / f));
    }
    json m = read_json(d / "manifest.json");
    CHECK(m["config_hash"].get<std::string>().size() == 16);
    CHECK(m["config_hash"] == read_json(d / "config.json")["config_hash"]);
    auto ds = oikg::cli::Dataset::load(d);
    CHECK(ds.envs.size() == 2);
    CHECK(ds.split("train").size() == 6);
    for (const auto& ep : ds.split("val_unseen")) CHECK(ep.env == 1);
    CHECK_THROWS(ds.split("nope"));
}

TEST_CASE("train and eval round trip") {
    fs::path d = small_data("rt");
    fs::path t = scratch("rt_train"), e = scratch("rt_eval");
    REQUIRE(run({"train", "--out", t.string(), "--data", d.string(), "--profile", "tiny", "--iters", "3", "--seed", "1"}) == 0);
    std::string log = slurp(t / "train_log.csv");
    CHECK(log.rfind("# config_hash=", 0) == 0);
    CHECK(log.find("iteration,tf_loss,sf_loss") != std::string::npos);
    CHECK(fs::exists(t / "checkpoint.bin"));
    REQUIRE(run({"eval", "--out", e.string(), "--data", d.string(), "--model", t.string()}) == 0);
    std::string csv = slurp(e / "results.csv");
    CHECK(csv.rfind("# config_hash=", 0) == 0);
    CHECK(csv.find("\nepisode_id,TL,NE,SR,SPL,nDTW,sDTW\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    json s = read_json(e / "summary.json");
    CHECK(s.contains("mean"));
    std::ifstream trace(e / "traces" / "episode_0000.jsonl");
    std::string line;
    REQUIRE(std::getline(trace, line));
    json step = json::parse(line);
    for (const char* k : {"t", "node", "frontier", "scores", "action"}) CHECK(step.contains(k));
    CHECK(step["scores"].size() == step["frontier"].size() + 1);

    // a checkpoint from a different profile is rejected as a data error
    fs::path bad = scratch("rt_bad");
    REQUIRE(run({"eval", "--out", bad.string(), "--data", d.string(), "--model", t.string(), "--profile", "default"}) == 3);
}

TEST_CASE("oracle agent scores perfectly") {
    fs::path d = small_data("oracle");
    fs::path e = scratch("oracle_eval");
    REQUIRE(run({"eval", "--out", e.string(), "--data", d.string(), "--agent", "oracle", "--split", "train"}) == 0);
    json s = read_json(e / "summary.json");
    CHECK(s["mean"]["SR"].get<double>() == 1.0);
    CHECK(s["mean"]["SPL"].get<double>() == doctest::Approx(1.0));
    CHECK(s["mean"]["nDTW"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("detour data trains with a longer budget") {
    fs::path d = small_data("detour", {"--mode", "detour"});
    CHECK(read_json(d / "manifest.json")["mode"] == "detour");
    fs::path t = scratch("detour_train");
    REQUIRE(run({"train", "--out", t.string(), "--data", d.string(), "--profile", "tiny", "--iters", "1"}) == 0);
    CHECK(read_json(t / "model.json")["max_steps"] == 30);
}

TEST_CASE("zero iterations store the initialisation") {
    fs::path d = small_data("init");
    fs::path t = scratch("init_train");
    REQUIRE(run({"train", "--out", t.string(), "--data", d.string(), "--profile", "tiny", "--iters", "0", "--seed", "7"}) == 0);
    oikg::ModelConfig c = oikg::cli::model_config_from_json(read_json(t / "model.json")["model"]);
    oikg::OikgModel fresh(c, 7);
    oikg::OikgModel loaded(c, 0);
    oikg::nn::load_checkpoint(loaded.params(), t / "checkpoint.bin");
    for (const auto& n : fresh.params().names()) {
        auto a = fresh.params().get(n).values(), b = loaded.params().get(n).values();
        CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
}

TEST_CASE("config file values yield to flags") {
    fs::path d = scratch("cfg");
    fs::path cfg = scratch("cfg.json");
    std::ofstream(cfg) << R"({"nodes": 10, "radius": 5, "extent": 9, "visual-dim": 8, "views": 12, "envs": 1,
                             "unseen-envs": 1, "episodes": 4, "val-episodes": 2, "seed": 3})";
    REQUIRE(run({"gen", "--out", d.string(), "--config", cfg.string(), "--episodes", "5"}) == 0);
    json c = read_json(d / "config.json");
    CHECK(c["nodes"] == 10);
    CHECK(c["episodes"] == 5);
    CHECK(oikg::cli::Dataset::load(d).split("train").size() == 5);
}

TEST_CASE("OIKG_OUT redirects relative outputs") {
    fs::path root = scratch("outroot");
    fs::create_directories(root);
    ::setenv("OIKG_OUT", root.c_str(), 1);
    std::vector<std::string> args{"gen", "--out", "rel_data"};
    args.insert(args.end(), kSmallGen.begin(), kSmallGen.end());
    const int rc = run(args);
    // inputs resolve against the same root
    const fs::path resolved = oikg::cli::resolve_input("rel_data");
    ::unsetenv("OIKG_OUT");
    CHECK(rc == 0);
    CHECK(fs::exists(root / "rel_data" / "manifest.json"));
    CHECK(resolved == root / "rel_data");
    CHECK(oikg::cli::resolve_output("x") == fs::path("x"));
}

TEST_CASE("exit codes from the binary") {
    const std::string bin = OIKG_BINARY;
    CHECK(shell(bin) == 2);
    CHECK(shell(bin + " frobnicate") == 2);
    CHECK(shell(bin + " gen") == 2);
    CHECK(shell(bin + " gen --out " + scratch("x").string() + " --nodes notanumber") == 2);
    CHECK(shell(bin + " train --out " + scratch("y").string() + " --data " + scratch("missing").string()) == 3);
    CHECK(shell(bin + " train --out " + scratch("z").string() + " --data " + scratch("missing").string() + " --flags MED,XX") == 2);
    fs::path d = small_data("codes");
    std::ofstream(d / "episodes" / "train.json") << "[{\"broken\": ";
    CHECK(shell(bin + " train --out " + scratch("w").string() + " --data " + d.string() + " --profile tiny --iters 1") == 3);
    CHECK(shell(bin + " gen --out " + scratch("v").string() + " --nodes 12 --radius 0.01 --extent 50") == 3);
}

TEST_CASE("config hash and model config json") {
    json a = {{"x", 1}}, b = {{"x", 2}};
    CHECK(oikg::cli::config_hash(a) == oikg::cli::config_hash(a));
    CHECK(oikg::cli::config_hash(a) != oikg::cli::config_hash(b));
    oikg::ModelConfig c = oikg::ModelConfig::deep();
    c.flags = oikg::ModelFlags::parse("GE,OD");
    oikg::ModelConfig r = oikg::cli::model_config_from_json(oikg::cli::model_config_to_json(c));
    CHECK(r.embed_dim == c.embed_dim);
    CHECK(r.layer_norm);
    CHECK(r.flags == c.flags);
    json broken = oikg::cli::model_config_to_json(c);
    broken.erase("heads");
    CHECK_THROWS(oikg::cli::model_config_from_json(broken));
}
