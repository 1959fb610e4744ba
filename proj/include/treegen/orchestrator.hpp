#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "treegen/agents.hpp"
#include "treegen/core.hpp"
#include "treegen/llm.hpp"
#include "treegen/sandbox.hpp"

namespace treegen {

struct Budget {
    int decompose_retries = 3;       // total decomposition tries
    int attempts_per_node = 4;       // generate/critique/test cycles per node
    int critic_rounds_per_attempt = 1;
    int total_llm_calls_cap = 200;   // across the whole run
};

void validate_budget(const Budget& budget);

struct CallRecord {
    std::string agent_kind;   // prompt kind name
    std::string fingerprint;
    std::string node_id;      // empty for decomposition and one-shot calls

    bool operator==(const CallRecord& other) const = default;
};

enum class SolveStatus { solved, node_failed, decomposition_failed, budget_exhausted };

const char* solve_status_name(SolveStatus status);

struct SolveOutcome {
    SolveStatus status = SolveStatus::decomposition_failed;
    std::optional<ProblemTree> tree;
    SolutionMap solutions;
    std::optional<std::string> final_program;
    std::vector<CallRecord> call_log;
    std::vector<std::string> failed_nodes;  // the failed node and all its ancestors
    std::vector<std::string> notes;
};

struct AgentTemperatures {
    double generalist = 0.7;
    double code = 0.2;
    double critic = 0.2;
    double tester = 0.2;
};

struct OrchestratorOptions {
    Budget budget;
    int depth_cap = 3;
    int branch_cap = 7;
    std::string model_name;
    AgentTemperatures temperatures;
    int max_tokens = 2048;
    ExecLimits limits;
};

// Post-order: definitions of node sources, dependencies before dependents,
// root last. Throws DuplicateDefinition when two nodes define the same
// top-level name; nothing is silently shadowed.
std::string assemble_program(const ProblemTree& tree, const SolutionMap& solutions);

// Drives the three phases for one task: decompose, solve every node bottom
// up, assemble. Holds no per-run state; every public entry point tracks its
// own budget, so one instance can serve many tasks in turn.
class Orchestrator {
public:
    Orchestrator(Transport& transport, const Sandbox& sandbox, OrchestratorOptions options);

    // Per-run mutable state threaded through the phases.
    struct RunState {
        std::vector<CallRecord> call_log;
        std::vector<std::string> notes;
    };

    // Phase 1 only. Throws DecompositionFailed after decompose_retries
    // rejected replies, BudgetExhausted at the call cap.
    ProblemTree decompose(const TaskSpec& task, RunState& state);

    // Generate-critique-test loop for one node until a candidate verifies.
    // Composition nodes see only child interfaces while generating but run
    // against the real assembled subtree. Throws NodeFailed when attempts
    // run out, SandboxUnavailable / BudgetExhausted as they occur.
    CandidateSolution solve_node(const ProblemTree& tree, const std::string& node_id,
                                 const SolutionMap& solutions, RunState& state);

    // Whole pipeline. Domain failures (failed decomposition, failed node,
    // spent budget) come back inside the outcome; infrastructure faults
    // (transport, sandbox availability, replay misses) still throw.
    SolveOutcome solve_task(const TaskSpec& task);

    // One baseline call: raw prompt in, last fenced block out. No tree, no
    // critic, no tester. The candidate is not executed here.
    CodeFragment one_shot(const std::string& prompt,
                          const std::optional<std::string>& expected_name, RunState& state);

    const OrchestratorOptions& options() const { return options_; }

private:
    ChatResponse call_agent(PromptKind kind, const PromptContext& context,
                            const std::string& node_id, RunState& state);

    Transport& transport_;
    const Sandbox& sandbox_;
    OrchestratorOptions options_;
};

// Serializes an outcome into out_dir: tree.json, nodes/<id>.py,
// call_log.json, final_program.py, outcome.json, summary.txt. The files
// carry no timestamps or durations, so replayed runs write byte-identical
// artifacts.
void write_run_artifacts(const SolveOutcome& outcome, const std::filesystem::path& out_dir);

}  // namespace treegen
