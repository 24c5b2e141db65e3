#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "oikg/model.hpp"
#include "oikg/synthenv.hpp"

namespace oikg::cli {

enum ExitCode {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kDataError = 3,
    kNumericError = 4,
};

/// Runs one subcommand (gen, train, eval, ablate, probe) and returns its exit code.
int run(int argc, const char* const* argv);
/// `args` starts at the subcommand (no program name).
int run(const std::vector<std::string>& args);

/// Relative output paths live under $OIKG_OUT when it is set.
std::filesystem::path resolve_output(const std::filesystem::path& p);
/// Relative input paths fall back to $OIKG_OUT when they do not exist as given.
std::filesystem::path resolve_input(const std::filesystem::path& p);

/// 16 hex digits of the FNV-1a hash of the archived config text.
std::string config_hash(const nlohmann::json& config);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// A generated data tree: manifest, environments and episode splits.
struct Dataset {
    std::filesystem::path root;
    nlohmann::json manifest;
    std::vector<Environment> envs;
    PathMode mode = PathMode::Shortest;

    static Dataset load(const std::filesystem::path& root);
    std::vector<Episode> split(const std::string& name) const;
};

}  // namespace oikg::cli
