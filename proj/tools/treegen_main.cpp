#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "treegen/bench.hpp"
#include "treegen/config.hpp"
#include "treegen/errors.hpp"
#include "treegen/orchestrator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitTaskFailure = 2;
constexpr int kExitInfrastructure = 3;

treegen::TaskSpec read_task_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw treegen::Error("cannot open task file: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw treegen::Error("task file is not valid JSON: " + path.string());
    return treegen::task_from_json(j);
}

std::unique_ptr<treegen::Transport> make_transport(const treegen::Config& config) {
    if (config.transport_mode == "replay")
        return treegen::replay_session(config.transcript_path);

    treegen::HttpTransportOptions options;
    options.endpoint_url = config.endpoint_url;
    if (const char* key = std::getenv(config.api_key_env.c_str())) options.api_key = key;
    auto live = std::make_unique<treegen::HttpTransport>(options);
    if (config.transport_mode == "record")
        return treegen::record_session(std::move(live), config.transcript_path);
    return live;
}

std::string iso_utc(std::chrono::system_clock::time_point when) {
    const std::time_t t = std::chrono::system_clock::to_time_t(when);
    std::tm parts{};
    gmtime_r(&t, &parts);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw treegen::Error("cannot write " + path.string());
    out << content;
}

// Timestamps live in this one file and nowhere else, so every other
// artifact stays byte-stable across replays.
void write_run_meta(const std::filesystem::path& out_dir,
                    std::chrono::system_clock::time_point started,
                    std::chrono::steady_clock::time_point started_steady) {
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                         started_steady)
                               .count();
    nlohmann::json meta;
    meta["started_at"] = iso_utc(started);
    meta["finished_at"] = iso_utc(std::chrono::system_clock::now());
    meta["duration_seconds"] = seconds;
    write_text(out_dir / "run_meta.json", meta.dump(2) + "\n");
}

struct CommonSetup {
    treegen::Config config;
    std::unique_ptr<treegen::Transport> transport;
    std::unique_ptr<treegen::Sandbox> sandbox;
    std::unique_ptr<treegen::Orchestrator> orchestrator;
};

CommonSetup make_setup(treegen::Config config) {
    treegen::validate_for_mode(config);
    CommonSetup setup;
    setup.transport = make_transport(config);
    setup.sandbox = std::make_unique<treegen::Sandbox>(config.sandbox_options());
    setup.orchestrator = std::make_unique<treegen::Orchestrator>(
        *setup.transport, *setup.sandbox, config.orchestrator_options());
    setup.config = std::move(config);
    return setup;
}

int run_solve(const treegen::Config& config, const std::filesystem::path& task_path) {
    const auto started = std::chrono::system_clock::now();
    const auto started_steady = std::chrono::steady_clock::now();

    CommonSetup setup = make_setup(config);
    const treegen::TaskSpec task = read_task_file(task_path);
    const treegen::SolveOutcome outcome = setup.orchestrator->solve_task(task);

    const std::filesystem::path out_dir = setup.config.output_dir;
    treegen::write_run_artifacts(outcome, out_dir);
    write_text(out_dir / "config_resolved.txt", setup.config.echo());
    write_run_meta(out_dir, started, started_steady);

    std::cout << "task " << task.task_id << ": " << treegen::solve_status_name(outcome.status)
              << " (" << outcome.call_log.size() << " LLM calls)\n";
    if (outcome.status != treegen::SolveStatus::solved)
        for (const auto& note : outcome.notes) std::cout << "  " << note << "\n";
    std::cout << "artifacts: " << out_dir.string() << "\n";
    return outcome.status == treegen::SolveStatus::solved ? kExitOk : kExitTaskFailure;
}

int run_decompose(const treegen::Config& config, const std::filesystem::path& task_path) {
    CommonSetup setup = make_setup(config);
    const treegen::TaskSpec task = read_task_file(task_path);

    treegen::Orchestrator::RunState state;
    treegen::ProblemTree tree;
    try {
        tree = setup.orchestrator->decompose(task, state);
    } catch (const treegen::DecompositionFailed& e) {
        std::cerr << e.what() << "\n";
        return kExitTaskFailure;
    }

    const nlohmann::json doc = treegen::tree_to_json(tree);
    std::filesystem::create_directories(setup.config.output_dir);
    write_text(std::filesystem::path(setup.config.output_dir) / "tree.json",
               doc.dump(2) + "\n");
    std::cout << doc.dump(2) << "\n";
    return kExitOk;
}

int run_bench(const treegen::Config& config, const std::filesystem::path& dataset,
              const std::string& mode) {
    CommonSetup setup = make_setup(config);
    const std::vector<treegen::BenchTask> tasks = treegen::load_tasks(dataset);

    treegen::BenchRunOptions run_options;
    run_options.samples_per_task = setup.config.samples_per_task;
    run_options.jobs = setup.config.jobs;

    std::optional<treegen::BenchReport> one_shot_report;
    std::optional<treegen::BenchReport> guided_report;

    if (mode == "one_shot" || mode == "both") {
        run_options.mode = treegen::BenchMode::one_shot;
        one_shot_report =
            treegen::run_benchmark(tasks, *setup.orchestrator, *setup.sandbox, run_options);
    }
    if (mode == "guided" || mode == "both") {
        run_options.mode = treegen::BenchMode::guided;
        guided_report =
            treegen::run_benchmark(tasks, *setup.orchestrator, *setup.sandbox, run_options);
    }

    nlohmann::json doc;
    doc["dataset"] = dataset.string();
    doc["tasks"] = tasks.size();
    if (one_shot_report) doc["one_shot"] = treegen::report_to_json(*one_shot_report);
    if (guided_report) doc["guided"] = treegen::report_to_json(*guided_report);
    if (one_shot_report && guided_report && one_shot_report->pass_at_1 > 0) {
        const treegen::Comparison cmp = treegen::compare_pass_rates(one_shot_report->pass_at_1,
                                                                    guided_report->pass_at_1);
        doc["comparison"] = {{"baseline_pass", cmp.baseline_pass},
                             {"framework_pass", cmp.framework_pass},
                             {"relative_improvement_percent", cmp.relative_improvement_percent},
                             {"absolute_improvement_points", cmp.absolute_improvement_points}};
    }

    std::filesystem::create_directories(setup.config.output_dir);
    write_text(std::filesystem::path(setup.config.output_dir) / "bench_report.json",
               doc.dump(2) + "\n");
    write_text(std::filesystem::path(setup.config.output_dir) / "config_resolved.txt",
               setup.config.echo());

    if (one_shot_report && guided_report) {
        std::cout << treegen::report_summary_table(*one_shot_report, *guided_report);
    } else {
        const treegen::BenchReport& only =
            one_shot_report ? *one_shot_report : *guided_report;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f", only.pass_at_1);
        std::cout << treegen::bench_mode_name(only.mode) << " pass@1: " << buf << " over "
                  << only.per_task.size() << " tasks\n";
    }
    std::cout << "report: "
              << (std::filesystem::path(setup.config.output_dir) / "bench_report.json").string()
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"treegen: guided code generation through problem decomposition"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config_file;
    std::vector<std::string> set_pairs;
    app.add_option("--config", config_file, "config file (flat key = value lines)");
    app.add_option("--set", set_pairs, "override a config key, KEY=VALUE")->take_all();

    std::string flag_endpoint, flag_model, flag_transport, flag_transcript, flag_output;
    int flag_jobs = 0;
    app.add_option("--endpoint", flag_endpoint, "chat completions endpoint URL");
    app.add_option("--model", flag_model, "model name sent with each request");
    app.add_option("--transport", flag_transport, "live, record or replay");
    app.add_option("--transcript", flag_transcript, "transcript path for record/replay");
    app.add_option("--output-dir", flag_output, "directory for run artifacts");
    app.add_option("--jobs", flag_jobs, "concurrent benchmark tasks");

    std::string solve_task_file;
    CLI::App* solve = app.add_subcommand("solve", "run one task through the whole pipeline");
    solve->add_option("task-file", solve_task_file, "task JSON file")->required();

    std::string decompose_task_file;
    CLI::App* decompose =
        app.add_subcommand("decompose", "run phase 1 only and print the problem tree");
    decompose->add_option("task-file", decompose_task_file, "task JSON file")->required();

    std::string bench_dataset;
    std::string bench_mode = "both";
    CLI::App* bench = app.add_subcommand("bench", "evaluate on a benchmark dataset");
    bench->add_option("dataset", bench_dataset, "benchmark file (NDJSON, optionally gzip)")
        ->required();
    bench->add_option("--mode", bench_mode, "one_shot, guided or both")
        ->check(CLI::IsMember({"one_shot", "guided", "both"}));

    std::string replay_transcript, replay_task_file;
    CLI::App* replay =
        app.add_subcommand("replay", "re-run a recorded session deterministically");
    replay->add_option("transcript", replay_transcript, "transcript to replay")->required();
    replay->add_option("task-file", replay_task_file, "task JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInfrastructure;
    }

    try {
        std::map<std::string, std::string> flags;
        for (const std::string& pair : set_pairs) {
            const std::size_t eq = pair.find('=');
            if (eq == std::string::npos)
                throw treegen::Error("--set needs KEY=VALUE, got '" + pair + "'");
            flags[pair.substr(0, eq)] = pair.substr(eq + 1);
        }
        if (!flag_endpoint.empty()) flags["endpoint_url"] = flag_endpoint;
        if (!flag_model.empty()) flags["model_name"] = flag_model;
        if (!flag_transport.empty()) flags["transport_mode"] = flag_transport;
        if (!flag_transcript.empty()) flags["transcript_path"] = flag_transcript;
        if (!flag_output.empty()) flags["output_dir"] = flag_output;
        if (flag_jobs > 0) flags["jobs"] = std::to_string(flag_jobs);
        if (replay->parsed()) {
            flags["transport_mode"] = "replay";
            flags["transcript_path"] = replay_transcript;
        }

        std::optional<std::filesystem::path> config_path;
        if (!config_file.empty()) config_path = config_file;
        const treegen::Config config =
            treegen::load_config(config_path, treegen::environment_overrides(), flags);

        if (solve->parsed()) return run_solve(config, solve_task_file);
        if (decompose->parsed()) return run_decompose(config, decompose_task_file);
        if (bench->parsed()) return run_bench(config, bench_dataset, bench_mode);
        if (replay->parsed()) return run_solve(config, replay_task_file);
        std::cerr << "no command given\n";
        return kExitInfrastructure;
    } catch (const treegen::TransportError& e) {
        std::cerr << "transport failure: " << e.what() << "\n";
        return kExitInfrastructure;
    } catch (const treegen::ReplayMiss& e) {
        std::cerr << "replay failure: " << e.what() << "\n";
        return kExitInfrastructure;
    } catch (const treegen::CorruptTranscript& e) {
        std::cerr << "transcript failure: " << e.what() << "\n";
        return kExitInfrastructure;
    } catch (const treegen::SandboxUnavailable& e) {
        std::cerr << "sandbox failure: " << e.what() << "\n";
        return kExitInfrastructure;
    } catch (const treegen::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfrastructure;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return kExitInfrastructure;
    }
}
