#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <unistd.h>

#include "treegen/config.hpp"
#include "treegen/errors.hpp"

using namespace treegen;

namespace {

class TempFile {
public:
    explicit TempFile(const std::string& content) {
        path_ = std::filesystem::temp_directory_path() /
                ("treegen-config-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter_++) + ".conf");
        std::ofstream out(path_);
        out << content;
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    static inline int counter_ = 0;
    std::filesystem::path path_;
};

}  // namespace

TEST_CASE("defaults stand when no layer sets anything") {
    const Config config = load_config(std::nullopt, {}, {});
    CHECK(config.endpoint_url == "");
    CHECK(config.model_name == "default");
    CHECK(config.api_key_env == "TREEGEN_API_KEY");
    CHECK(config.transport_mode == "live");
    CHECK(config.transcript_path == "");
    CHECK(config.output_dir == "runs");
    CHECK(config.interpreter_cmd == "python3");
    CHECK(config.keep_artifacts == false);
    CHECK(config.depth_cap == 3);
    CHECK(config.branch_cap == 7);
    CHECK(config.decompose_retries == 3);
    CHECK(config.attempts_per_node == 4);
    CHECK(config.critic_rounds_per_attempt == 1);
    CHECK(config.total_llm_calls_cap == 200);
    CHECK(config.wall_timeout_seconds == 10);
    CHECK(config.max_output_bytes == 64 * 1024);
    CHECK(config.max_tokens == 2048);
    CHECK(config.temperature_generalist == doctest::Approx(0.7));
    CHECK(config.temperature_code == doctest::Approx(0.2));
    CHECK(config.jobs == 1);
    CHECK(config.samples_per_task == 1);
}

TEST_CASE("config file values override defaults") {
    const TempFile file(
        "# engine knobs\n"
        "\n"
        "model_name = from-file\n"
        "  depth_cap=5  \n"
        "keep_artifacts = yes\n"
        "temperature_code = 0.35\n"
        "max_output_bytes = 1024\n");
    const Config config = load_config(file.path(), {}, {});
    CHECK(config.model_name == "from-file");
    CHECK(config.depth_cap == 5);
    CHECK(config.keep_artifacts == true);
    CHECK(config.temperature_code == doctest::Approx(0.35));
    CHECK(config.max_output_bytes == 1024);
    CHECK(config.branch_cap == 7);
}

TEST_CASE("environment overrides file, flags override environment") {
    const TempFile file("model_name = from-file\njobs = 2\nbranch_cap = 4\n");
    const std::map<std::string, std::string> env = {
        {"TREEGEN_MODEL_NAME", "from-env"},
        {"TREEGEN_JOBS", "3"},
    };
    const std::map<std::string, std::string> flags = {{"model_name", "from-flag"}};
    const Config config = load_config(file.path(), env, flags);
    CHECK(config.model_name == "from-flag");
    CHECK(config.jobs == 3);
    CHECK(config.branch_cap == 4);
}

TEST_CASE("unknown keys fail loudly in every layer") {
    SUBCASE("config file") {
        const TempFile file("depht_cap = 3\n");
        CHECK_THROWS_WITH_AS(load_config(file.path(), {}, {}),
                             "unknown configuration key: depht_cap", UnknownKey);
    }
    SUBCASE("environment") {
        try {
            load_config(std::nullopt, {{"TREEGEN_BOGUS", "1"}}, {});
            FAIL("expected UnknownKey");
        } catch (const UnknownKey& e) {
            CHECK(e.name() == "bogus");
        }
    }
    SUBCASE("flags") {
        CHECK_THROWS_AS(load_config(std::nullopt, {}, {{"verbose", "1"}}), UnknownKey);
    }
}

TEST_CASE("only TREEGEN_ environment entries are considered") {
    const std::map<std::string, std::string> env = {
        {"PATH", "/usr/bin"},
        {"HOME", "/home/u"},
        {"TREEGEN_DEPTH_CAP", "6"},
    };
    const Config config = load_config(std::nullopt, env, {});
    CHECK(config.depth_cap == 6);
}

TEST_CASE("api key variable is exempt from the environment scan") {
    SUBCASE("default name") {
        const std::map<std::string, std::string> env = {{"TREEGEN_API_KEY", "shh"}};
        CHECK_NOTHROW(load_config(std::nullopt, env, {}));
    }
    SUBCASE("custom name from the config file") {
        const TempFile file("api_key_env = TREEGEN_MY_TOKEN\n");
        const std::map<std::string, std::string> env = {{"TREEGEN_MY_TOKEN", "shh"}};
        const Config config = load_config(file.path(), env, {});
        CHECK(config.api_key_env == "TREEGEN_MY_TOKEN");
    }
    SUBCASE("custom name from the environment") {
        const std::map<std::string, std::string> env = {
            {"TREEGEN_API_KEY_ENV", "TREEGEN_ALT_TOKEN"},
            {"TREEGEN_ALT_TOKEN", "shh"},
        };
        const Config config = load_config(std::nullopt, env, {});
        CHECK(config.api_key_env == "TREEGEN_ALT_TOKEN");
    }
    SUBCASE("flag name wins over the environment name") {
        const std::map<std::string, std::string> env = {
            {"TREEGEN_API_KEY_ENV", "TREEGEN_ENV_TOKEN"},
            {"TREEGEN_FLAG_TOKEN", "shh"},
        };
        const std::map<std::string, std::string> flags = {{"api_key_env", "TREEGEN_FLAG_TOKEN"}};
        const Config config = load_config(std::nullopt, env, flags);
        CHECK(config.api_key_env == "TREEGEN_FLAG_TOKEN");
    }
    SUBCASE("a non-exempt unknown variable still fails") {
        const std::map<std::string, std::string> env = {
            {"TREEGEN_API_KEY_ENV", "TREEGEN_ALT_TOKEN"},
            {"TREEGEN_OTHER_TOKEN", "shh"},
        };
        CHECK_THROWS_AS(load_config(std::nullopt, env, {}), UnknownKey);
    }
}

TEST_CASE("live smoke switch is exempt from the environment scan") {
    const std::map<std::string, std::string> env = {{"TREEGEN_LIVE_SMOKE", "1"}};
    CHECK_NOTHROW(load_config(std::nullopt, env, {}));
}

TEST_CASE("values must parse completely") {
    SUBCASE("integer") {
        CHECK_THROWS_WITH_AS(load_config(std::nullopt, {}, {{"depth_cap", "abc"}}),
                             "config key 'depth_cap' needs an integer, got 'abc'", Error);
        CHECK_THROWS_AS(load_config(std::nullopt, {}, {{"depth_cap", "3x"}}), Error);
        CHECK_THROWS_AS(load_config(std::nullopt, {}, {{"jobs", ""}}), Error);
    }
    SUBCASE("floating") {
        CHECK_THROWS_WITH_AS(load_config(std::nullopt, {}, {{"temperature_code", "0.2.3"}}),
                             "config key 'temperature_code' needs a number, got '0.2.3'", Error);
    }
    SUBCASE("boolean") {
        CHECK_THROWS_WITH_AS(load_config(std::nullopt, {}, {{"keep_artifacts", "maybe"}}),
                             "config key 'keep_artifacts' needs a boolean, got 'maybe'", Error);
        CHECK(load_config(std::nullopt, {}, {{"keep_artifacts", "Yes"}}).keep_artifacts);
        CHECK(load_config(std::nullopt, {}, {{"keep_artifacts", "1"}}).keep_artifacts);
        CHECK_FALSE(load_config(std::nullopt, {}, {{"keep_artifacts", "off"}}).keep_artifacts);
        CHECK_FALSE(load_config(std::nullopt, {}, {{"keep_artifacts", "FALSE"}}).keep_artifacts);
    }
}

TEST_CASE("transport_mode accepts only the three modes") {
    CHECK(load_config(std::nullopt, {}, {{"transport_mode", "record"}}).transport_mode ==
          "record");
    CHECK(load_config(std::nullopt, {}, {{"transport_mode", "replay"}}).transport_mode ==
          "replay");
    CHECK_THROWS_WITH_AS(load_config(std::nullopt, {}, {{"transport_mode", "offline"}}),
                         "transport_mode must be live, record or replay, got 'offline'", Error);
}

TEST_CASE("config file syntax errors") {
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_config(std::filesystem::path("/nonexistent/treegen.conf"), {}, {}),
                        Error);
    }
    SUBCASE("line without equals sign") {
        const TempFile file("model_name from-file\n");
        try {
            load_config(file.path(), {}, {});
            FAIL("expected Error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("line 1 is not key=value") != std::string::npos);
        }
    }
    SUBCASE("empty key") {
        const TempFile file("# header\n= value\n");
        try {
            load_config(file.path(), {}, {});
            FAIL("expected Error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("line 2 has an empty key") != std::string::npos);
        }
    }
}

TEST_CASE("record mode defaults the transcript path into the output dir") {
    const std::map<std::string, std::string> flags = {
        {"transport_mode", "record"},
        {"output_dir", "artifacts"},
    };
    const Config config = load_config(std::nullopt, {}, flags);
    CHECK(config.transcript_path ==
          (std::filesystem::path("artifacts") / "transcript.ndjson").string());

    std::map<std::string, std::string> explicit_flags = flags;
    explicit_flags["transcript_path"] = "elsewhere.ndjson";
    CHECK(load_config(std::nullopt, {}, explicit_flags).transcript_path == "elsewhere.ndjson");

    CHECK(load_config(std::nullopt, {}, {{"transport_mode", "replay"}}).transcript_path == "");
}

TEST_CASE("mode validation names the missing key") {
    Config config;

    config.transport_mode = "replay";
    config.transcript_path = "";
    try {
        validate_for_mode(config);
        FAIL("expected MissingRequired");
    } catch (const MissingRequired& e) {
        CHECK(e.name() == "transcript_path");
    }
    config.transcript_path = "t.ndjson";
    CHECK_NOTHROW(validate_for_mode(config));

    config.transport_mode = "live";
    config.endpoint_url = "";
    try {
        validate_for_mode(config);
        FAIL("expected MissingRequired");
    } catch (const MissingRequired& e) {
        CHECK(e.name() == "endpoint_url");
    }
    config.transport_mode = "record";
    CHECK_THROWS_AS(validate_for_mode(config), MissingRequired);
    config.endpoint_url = "https://example.test/v1";
    CHECK_NOTHROW(validate_for_mode(config));
}

TEST_CASE("echo emits sorted key = value lines that reload identically") {
    Config config = load_config(std::nullopt, {},
                                {{"model_name", "echo-model"},
                                 {"temperature_generalist", "0.7"},
                                 {"depth_cap", "4"},
                                 {"keep_artifacts", "true"},
                                 {"endpoint_url", "https://example.test/v1"}});
    const std::string echoed = config.echo();
    CHECK(echoed.find("model_name = echo-model\n") != std::string::npos);
    CHECK(echoed.find("temperature_generalist = 0.7\n") != std::string::npos);
    CHECK(echoed.find("keep_artifacts = true\n") != std::string::npos);
    CHECK(echoed.find("api_key_env = TREEGEN_API_KEY\n") != std::string::npos);

    CHECK(echoed.find("api_key_env") < echoed.find("depth_cap"));
    CHECK(echoed.find("depth_cap") < echoed.find("model_name"));
    CHECK(echoed.find("model_name") < echoed.find("temperature_code"));

    const TempFile round_trip(echoed);
    const Config reloaded = load_config(round_trip.path(), {}, {});
    CHECK(reloaded.echo() == echoed);
}

TEST_CASE("orchestrator options mirror the config") {
    Config config;
    config.decompose_retries = 2;
    config.attempts_per_node = 5;
    config.critic_rounds_per_attempt = 1;
    config.total_llm_calls_cap = 99;
    config.depth_cap = 4;
    config.branch_cap = 6;
    config.model_name = "mapped";
    config.temperature_generalist = 0.9;
    config.temperature_code = 0.1;
    config.temperature_critic = 0.3;
    config.temperature_tester = 0.4;
    config.max_tokens = 512;
    config.wall_timeout_seconds = 7;
    config.max_output_bytes = 2048;

    const OrchestratorOptions options = config.orchestrator_options();
    CHECK(options.budget.decompose_retries == 2);
    CHECK(options.budget.attempts_per_node == 5);
    CHECK(options.budget.critic_rounds_per_attempt == 1);
    CHECK(options.budget.total_llm_calls_cap == 99);
    CHECK(options.depth_cap == 4);
    CHECK(options.branch_cap == 6);
    CHECK(options.model_name == "mapped");
    CHECK(options.temperatures.generalist == doctest::Approx(0.9));
    CHECK(options.temperatures.code == doctest::Approx(0.1));
    CHECK(options.temperatures.critic == doctest::Approx(0.3));
    CHECK(options.temperatures.tester == doctest::Approx(0.4));
    CHECK(options.max_tokens == 512);
    CHECK(options.limits.wall_timeout_seconds == 7);
    CHECK(options.limits.max_output_bytes == 2048);
}

TEST_CASE("sandbox options mirror the config") {
    Config config;
    config.interpreter_cmd = "python3 -I";
    config.keep_artifacts = true;

    SandboxOptions options = config.sandbox_options();
    CHECK(options.interpreter_cmd == "python3 -I");
    CHECK(options.workspace_root.empty());
    CHECK(options.keep_artifacts);

    config.workspace_root = "/tmp/work";
    options = config.sandbox_options();
    CHECK(options.workspace_root == std::filesystem::path("/tmp/work"));
}
