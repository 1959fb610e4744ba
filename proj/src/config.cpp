#include "treegen/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "treegen/errors.hpp"

extern char** environ;

namespace treegen {

namespace {

enum class FieldKind { text, integer, floating, boolean };

struct FieldSpec {
    const char* name;
    FieldKind kind;
};

const FieldSpec kFields[] = {
    {"endpoint_url", FieldKind::text},
    {"model_name", FieldKind::text},
    {"api_key_env", FieldKind::text},
    {"transport_mode", FieldKind::text},
    {"transcript_path", FieldKind::text},
    {"output_dir", FieldKind::text},
    {"interpreter_cmd", FieldKind::text},
    {"workspace_root", FieldKind::text},
    {"keep_artifacts", FieldKind::boolean},
    {"depth_cap", FieldKind::integer},
    {"branch_cap", FieldKind::integer},
    {"decompose_retries", FieldKind::integer},
    {"attempts_per_node", FieldKind::integer},
    {"critic_rounds_per_attempt", FieldKind::integer},
    {"total_llm_calls_cap", FieldKind::integer},
    {"wall_timeout_seconds", FieldKind::integer},
    {"max_output_bytes", FieldKind::integer},
    {"max_tokens", FieldKind::integer},
    {"temperature_generalist", FieldKind::floating},
    {"temperature_code", FieldKind::floating},
    {"temperature_critic", FieldKind::floating},
    {"temperature_tester", FieldKind::floating},
    {"jobs", FieldKind::integer},
    {"samples_per_task", FieldKind::integer},
};

const FieldSpec* find_field(const std::string& name) {
    for (const auto& field : kFields)
        if (name == field.name) return &field;
    return nullptr;
}

std::string trim(const std::string& text) {
    std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    std::size_t last = text.find_last_not_of(" \t\r\n");
    return text.substr(first, last - first + 1);
}

long parse_int(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long parsed = 0;
    try {
        parsed = std::stol(value, &used);
    } catch (const std::exception&) {
        throw Error("config key '" + key + "' needs an integer, got '" + value + "'");
    }
    if (used != value.size())
        throw Error("config key '" + key + "' needs an integer, got '" + value + "'");
    return parsed;
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double parsed = 0;
    try {
        parsed = std::stod(value, &used);
    } catch (const std::exception&) {
        throw Error("config key '" + key + "' needs a number, got '" + value + "'");
    }
    if (used != value.size())
        throw Error("config key '" + key + "' needs a number, got '" + value + "'");
    return parsed;
}

bool parse_bool(const std::string& key, const std::string& value) {
    std::string lowered = value;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (lowered == "true" || lowered == "1" || lowered == "yes" || lowered == "on") return true;
    if (lowered == "false" || lowered == "0" || lowered == "no" || lowered == "off") return false;
    throw Error("config key '" + key + "' needs a boolean, got '" + value + "'");
}

void apply(Config& config, const std::string& key, const std::string& value) {
    const FieldSpec* field = find_field(key);
    if (!field) throw UnknownKey(key);
    switch (field->kind) {
        case FieldKind::integer: {
            long parsed = parse_int(key, value);
            if (key == "depth_cap") config.depth_cap = static_cast<int>(parsed);
            else if (key == "branch_cap") config.branch_cap = static_cast<int>(parsed);
            else if (key == "decompose_retries") config.decompose_retries = static_cast<int>(parsed);
            else if (key == "attempts_per_node") config.attempts_per_node = static_cast<int>(parsed);
            else if (key == "critic_rounds_per_attempt")
                config.critic_rounds_per_attempt = static_cast<int>(parsed);
            else if (key == "total_llm_calls_cap")
                config.total_llm_calls_cap = static_cast<int>(parsed);
            else if (key == "wall_timeout_seconds")
                config.wall_timeout_seconds = static_cast<int>(parsed);
            else if (key == "max_output_bytes") config.max_output_bytes = parsed;
            else if (key == "max_tokens") config.max_tokens = static_cast<int>(parsed);
            else if (key == "jobs") config.jobs = static_cast<int>(parsed);
            else if (key == "samples_per_task") config.samples_per_task = static_cast<int>(parsed);
            break;
        }
        case FieldKind::floating: {
            double parsed = parse_double(key, value);
            if (key == "temperature_generalist") config.temperature_generalist = parsed;
            else if (key == "temperature_code") config.temperature_code = parsed;
            else if (key == "temperature_critic") config.temperature_critic = parsed;
            else if (key == "temperature_tester") config.temperature_tester = parsed;
            break;
        }
        case FieldKind::boolean: {
            config.keep_artifacts = parse_bool(key, value);
            break;
        }
        case FieldKind::text: {
            if (key == "endpoint_url") config.endpoint_url = value;
            else if (key == "model_name") config.model_name = value;
            else if (key == "api_key_env") config.api_key_env = value;
            else if (key == "transport_mode") {
                if (value != "live" && value != "record" && value != "replay")
                    throw Error("transport_mode must be live, record or replay, got '" + value +
                                "'");
                config.transport_mode = value;
            } else if (key == "transcript_path") config.transcript_path = value;
            else if (key == "output_dir") config.output_dir = value;
            else if (key == "interpreter_cmd") config.interpreter_cmd = value;
            else if (key == "workspace_root") config.workspace_root = value;
            break;
        }
    }
}

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path.string());
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw Error("config file line " + std::to_string(line_no) +
                        " is not key=value: " + stripped);
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw Error("config file line " + std::to_string(line_no) + " has an empty key");
        values[key] = value;
    }
    return values;
}

std::string lower_key_of(const std::string& env_name) {
    std::string key = env_name.substr(std::string("TREEGEN_").size());
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return key;
}

}  // namespace

Config load_config(const std::optional<std::filesystem::path>& file_path,
                   const std::map<std::string, std::string>& env,
                   const std::map<std::string, std::string>& flags) {
    Config config;

    std::map<std::string, std::string> file_values;
    if (file_path) file_values = parse_config_file(*file_path);

    // The api key variable name must resolve before the environment scan so
    // that a custom TREEGEN_-prefixed key variable is not flagged unknown.
    std::string api_key_env = config.api_key_env;
    if (auto it = file_values.find("api_key_env"); it != file_values.end())
        api_key_env = it->second;
    if (auto it = env.find("TREEGEN_API_KEY_ENV"); it != env.end()) api_key_env = it->second;
    if (auto it = flags.find("api_key_env"); it != flags.end()) api_key_env = it->second;

    for (const auto& [key, value] : file_values) apply(config, key, value);

    for (const auto& [name, value] : env) {
        if (name.rfind("TREEGEN_", 0) != 0) continue;
        if (name == api_key_env || name == "TREEGEN_API_KEY" || name == "TREEGEN_LIVE_SMOKE")
            continue;
        apply(config, lower_key_of(name), value);
    }

    for (const auto& [key, value] : flags) apply(config, key, value);

    if (config.transport_mode == "record" && config.transcript_path.empty())
        config.transcript_path =
            (std::filesystem::path(config.output_dir) / "transcript.ndjson").string();

    return config;
}

std::map<std::string, std::string> environment_overrides() {
    std::map<std::string, std::string> values;
    for (char** entry = environ; entry && *entry; ++entry) {
        const std::string pair = *entry;
        if (pair.rfind("TREEGEN_", 0) != 0) continue;
        const std::size_t eq = pair.find('=');
        if (eq == std::string::npos) continue;
        values[pair.substr(0, eq)] = pair.substr(eq + 1);
    }
    return values;
}

void validate_for_mode(const Config& config) {
    if (config.transport_mode == "replay" && config.transcript_path.empty())
        throw MissingRequired("transcript_path", "replay");
    if ((config.transport_mode == "live" || config.transport_mode == "record") &&
        config.endpoint_url.empty())
        throw MissingRequired("endpoint_url", config.transport_mode);
}

OrchestratorOptions Config::orchestrator_options() const {
    OrchestratorOptions options;
    options.budget = {decompose_retries, attempts_per_node, critic_rounds_per_attempt,
                      total_llm_calls_cap};
    options.depth_cap = depth_cap;
    options.branch_cap = branch_cap;
    options.model_name = model_name;
    options.temperatures = {temperature_generalist, temperature_code, temperature_critic,
                            temperature_tester};
    options.max_tokens = max_tokens;
    options.limits =
        ExecLimits{wall_timeout_seconds, static_cast<std::size_t>(max_output_bytes)};
    return options;
}

SandboxOptions Config::sandbox_options() const {
    SandboxOptions options;
    options.interpreter_cmd = interpreter_cmd;
    if (!workspace_root.empty()) options.workspace_root = workspace_root;
    options.keep_artifacts = keep_artifacts;
    return options;
}

namespace {

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", value);
    return buf;
}

}  // namespace

std::string Config::echo() const {
    std::map<std::string, std::string> values;
    values["endpoint_url"] = endpoint_url;
    values["model_name"] = model_name;
    values["api_key_env"] = api_key_env;
    values["transport_mode"] = transport_mode;
    values["transcript_path"] = transcript_path;
    values["output_dir"] = output_dir;
    values["interpreter_cmd"] = interpreter_cmd;
    values["workspace_root"] = workspace_root;
    values["keep_artifacts"] = keep_artifacts ? "true" : "false";
    values["depth_cap"] = std::to_string(depth_cap);
    values["branch_cap"] = std::to_string(branch_cap);
    values["decompose_retries"] = std::to_string(decompose_retries);
    values["attempts_per_node"] = std::to_string(attempts_per_node);
    values["critic_rounds_per_attempt"] = std::to_string(critic_rounds_per_attempt);
    values["total_llm_calls_cap"] = std::to_string(total_llm_calls_cap);
    values["wall_timeout_seconds"] = std::to_string(wall_timeout_seconds);
    values["max_output_bytes"] = std::to_string(max_output_bytes);
    values["max_tokens"] = std::to_string(max_tokens);
    values["temperature_generalist"] = format_double(temperature_generalist);
    values["temperature_code"] = format_double(temperature_code);
    values["temperature_critic"] = format_double(temperature_critic);
    values["temperature_tester"] = format_double(temperature_tester);
    values["jobs"] = std::to_string(jobs);
    values["samples_per_task"] = std::to_string(samples_per_task);

    std::string out;
    for (const auto& [key, value] : values) out += key + " = " + value + "\n";
    return out;
}

}  // namespace treegen
