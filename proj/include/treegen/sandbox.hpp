#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace treegen {

struct ExecLimits {
    int wall_timeout_seconds = 10;
    std::size_t max_output_bytes = 64 * 1024;  // per stream
};

enum class RunStatus { pass, fail, error, timeout };

const char* run_status_name(RunStatus status);

struct TestReport {
    RunStatus status = RunStatus::error;
    double duration_seconds = 0.0;
    std::string stdout_excerpt;  // head-truncated to max_output_bytes
    std::string stderr_excerpt;  // tail-truncated (tracebacks sit at the end)
    std::optional<std::string> failing_assertion;  // set when status = fail
    // Set when status = error and the interpreter reported a line: true if
    // the deepest frame lies in the test region of the assembled file,
    // false if it lies in the candidate program region.
    std::optional<bool> error_in_tests;
};

struct SandboxOptions {
    std::string interpreter_cmd = "python3";     // may carry arguments
    std::filesystem::path workspace_root;        // empty = system temp dir
    bool keep_artifacts = false;
};

// Runs candidate program + test suite in a one-shot child process: fresh
// temp workspace, scrubbed environment, wall-clock timeout enforced from
// outside, output capped per stream. The program file is always named
// main.py and run with a relative path, so diagnostics never leak the
// workspace location (any path that sneaks into output is rewritten to
// "<sandbox>"). Stateless; safe to share across threads.
class Sandbox {
public:
    explicit Sandbox(SandboxOptions options = {});

    // Assembles main.py as: program, blank line, tests, then
    // `check(<entry_point>)` when an entry point is given (the benchmark
    // suite shape, where tests define check(candidate)). Throws
    // SandboxUnavailable when the interpreter cannot be executed; any
    // outcome of the candidate itself is a TestReport, never an exception.
    TestReport execute_candidate(const std::string& program, const std::string& tests,
                                 const std::optional<std::string>& entry_point,
                                 const ExecLimits& limits) const;

private:
    SandboxOptions options_;
};

}  // namespace treegen
