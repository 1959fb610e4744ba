#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "treegen/orchestrator.hpp"
#include "treegen/sandbox.hpp"

namespace treegen {

// One record of the benchmark file. canonical_solution is carried for
// completeness but is never allowed anywhere near a prompt.
struct BenchTask {
    std::string task_id;
    std::string prompt;       // signature + docstring, fed to the model
    std::string entry_point;
    std::string test_source;  // defines check(candidate)
    std::string canonical_solution;
};

// Newline-delimited JSON records, optionally gzip-compressed (detected by
// magic bytes, not extension). Order preserved. Throws MalformedRecord,
// MissingField.
std::vector<BenchTask> load_tasks(const std::filesystem::path& path);

struct EvalCounts {
    int n = 1;  // samples generated
    int c = 0;  // samples passing
    int k = 1;  // cutoff
};

// Unbiased estimator 1 - C(n-c,k)/C(n,k) in product form; k=1 reduces to
// exactly c/n. Throws DomainError when 0 <= c <= n or 1 <= k <= n fails.
double pass_at_k(const EvalCounts& counts);

struct Comparison {
    double baseline_pass = 0;
    double framework_pass = 0;
    double relative_improvement_percent = 0;  // 100 * (f - b) / b
    double absolute_improvement_points = 0;   // 100 * (f - b)
};

// Throws DomainError when baseline is zero or either rate leaves [0, 1].
Comparison compare_pass_rates(double baseline_pass, double framework_pass);

enum class BenchMode { one_shot, guided };

const char* bench_mode_name(BenchMode mode);

struct BenchReport {
    struct PerTask {
        std::string task_id;
        std::string status;   // run status of the last sample's evaluation
        TestReport report;    // evaluation run of the last sample
        int llm_calls = 0;    // across all samples of the task
        int n = 0;
        int c = 0;
    };

    BenchMode mode = BenchMode::one_shot;
    std::vector<PerTask> per_task;
    double pass_at_1 = 0;
    std::optional<Comparison> comparison;  // filled when both modes ran
};

struct BenchRunOptions {
    BenchMode mode = BenchMode::guided;
    int samples_per_task = 1;
    int jobs = 1;
};

// Evaluates every task independently: generate (one call in one_shot mode,
// the whole pipeline in guided mode), then judge the resulting program
// against the task's own test suite in the sandbox. Candidate failures
// score as failures; infrastructure faults (TransportError, ReplayMiss,
// SandboxUnavailable) abort the run by throwing.
BenchReport run_benchmark(const std::vector<BenchTask>& tasks, Orchestrator& orchestrator,
                          const Sandbox& sandbox, const BenchRunOptions& options);

nlohmann::json report_to_json(const BenchReport& report);

// Console table comparing the two modes: one row per mode, Pass@1 percent,
// improvement line when a comparison is present.
std::string report_summary_table(const BenchReport& one_shot, const BenchReport& guided);

}  // namespace treegen
