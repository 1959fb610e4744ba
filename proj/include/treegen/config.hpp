#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "treegen/orchestrator.hpp"
#include "treegen/sandbox.hpp"

namespace treegen {

// Every tunable of the engine, resolved from (highest precedence first)
// command-line flags, TREEGEN_* environment variables, a flat key=value
// config file, and built-in defaults. The API key itself is never part of
// the config; only the name of the variable holding it is.
struct Config {
    std::string endpoint_url;
    std::string model_name = "default";
    std::string api_key_env = "TREEGEN_API_KEY";
    std::string transport_mode = "live";  // live | record | replay
    std::string transcript_path;
    std::string output_dir = "runs";
    std::string interpreter_cmd = "python3";
    std::string workspace_root;
    bool keep_artifacts = false;
    int depth_cap = 3;
    int branch_cap = 7;
    int decompose_retries = 3;
    int attempts_per_node = 4;
    int critic_rounds_per_attempt = 1;
    int total_llm_calls_cap = 200;
    int wall_timeout_seconds = 10;
    long max_output_bytes = 64 * 1024;
    int max_tokens = 2048;
    double temperature_generalist = 0.7;
    double temperature_code = 0.2;
    double temperature_critic = 0.2;
    double temperature_tester = 0.2;
    int jobs = 1;
    int samples_per_task = 1;

    OrchestratorOptions orchestrator_options() const;
    SandboxOptions sandbox_options() const;

    // The resolved configuration in config-file syntax, keys sorted, fit
    // for writing next to run artifacts.
    std::string echo() const;
};

// `env` holds raw environment variables (only TREEGEN_-prefixed ones are
// considered); `flags` holds config keys set on the command line. Unknown
// keys in any layer fail loudly with UnknownKey. The variable named by
// api_key_env and TREEGEN_LIVE_SMOKE are exempt from the environment scan.
Config load_config(const std::optional<std::filesystem::path>& file_path,
                   const std::map<std::string, std::string>& env,
                   const std::map<std::string, std::string>& flags);

// TREEGEN_* variables of the calling process, raw.
std::map<std::string, std::string> environment_overrides();

// Mode-dependent requirements: replay needs transcript_path, live and
// record need endpoint_url. Throws MissingRequired.
void validate_for_mode(const Config& config);

}  // namespace treegen
