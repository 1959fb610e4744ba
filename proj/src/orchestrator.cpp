#include "treegen/orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "treegen/errors.hpp"
#include "treegen/pyscan.hpp"

namespace treegen {

void validate_budget(const Budget& budget) {
    if (budget.decompose_retries < 1 || budget.attempts_per_node < 1 ||
        budget.critic_rounds_per_attempt < 1 || budget.total_llm_calls_cap < 1)
        throw Error("budget fields must all be positive");
}

const char* solve_status_name(SolveStatus status) {
    switch (status) {
        case SolveStatus::solved: return "solved";
        case SolveStatus::node_failed: return "node_failed";
        case SolveStatus::decomposition_failed: return "decomposition_failed";
        case SolveStatus::budget_exhausted: return "budget_exhausted";
    }
    return "?";
}

namespace {

std::string last_nonempty_line(const std::string& text) {
    std::size_t end = text.size();
    while (end > 0) {
        std::size_t start = text.rfind('\n', end - 1);
        std::size_t line_start = start == std::string::npos ? 0 : start + 1;
        std::string line = text.substr(line_start, end - line_start);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) return line;
        if (line_start == 0) break;
        end = line_start - 1;
    }
    return "";
}

// Deterministic one-line description of a failed run, fit for feeding back
// into the next generation prompt. Never contains paths or timings.
std::string diagnostic_excerpt(const TestReport& report, const ExecLimits& limits) {
    switch (report.status) {
        case RunStatus::fail:
            return "a test failed: " +
                   report.failing_assertion.value_or(std::string("AssertionError"));
        case RunStatus::timeout:
            return "the program exceeded the " + std::to_string(limits.wall_timeout_seconds) +
                   " second time limit";
        case RunStatus::error: {
            const std::string line = last_nonempty_line(report.stderr_excerpt);
            return "the program raised an error: " + (line.empty() ? "unknown error" : line);
        }
        case RunStatus::pass: return "";
    }
    return "";
}

std::map<std::string, std::string> parent_map(const ProblemTree& tree) {
    std::map<std::string, std::string> parents;
    for (const auto& [id, node] : tree.nodes)
        for (const std::string& child : node.children) parents[child] = id;
    return parents;
}

std::vector<std::string> with_ancestors(const ProblemTree& tree, const std::string& node_id) {
    auto parents = parent_map(tree);
    std::vector<std::string> out{node_id};
    std::string current = node_id;
    while (true) {
        auto it = parents.find(current);
        if (it == parents.end()) break;
        current = it->second;
        out.push_back(current);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::string assemble_program(const ProblemTree& tree, const SolutionMap& solutions) {
    std::map<std::string, std::vector<std::string>> owners;  // name -> node ids
    const std::vector<std::string> order = leaves_postorder(tree);
    for (const std::string& id : order) {
        auto it = solutions.find(id);
        if (it == solutions.end()) throw MissingChildSolution(tree.root_id, id);
        for (const auto& fn : scan_top_level_functions(it->second.source))
            owners[fn.name].push_back(id);
    }
    for (const auto& [name, ids] : owners)
        if (ids.size() > 1) throw DuplicateDefinition(name, ids);

    std::string text;
    for (const std::string& id : order) {
        std::string source = solutions.at(id).source;
        while (!source.empty() && source.back() == '\n') source.pop_back();
        if (!text.empty()) text += "\n\n";
        text += source;
    }
    text += "\n";
    return text;
}

Orchestrator::Orchestrator(Transport& transport, const Sandbox& sandbox,
                           OrchestratorOptions options)
    : transport_(transport), sandbox_(sandbox), options_(std::move(options)) {
    validate_budget(options_.budget);
    if (options_.depth_cap < 1 || options_.branch_cap < 1)
        throw Error("depth_cap and branch_cap must be positive");
}

ChatResponse Orchestrator::call_agent(PromptKind kind, const PromptContext& context,
                                      const std::string& node_id, RunState& state) {
    if (static_cast<int>(state.call_log.size()) >= options_.budget.total_llm_calls_cap)
        throw BudgetExhausted("total LLM call cap of " +
                              std::to_string(options_.budget.total_llm_calls_cap) + " reached");

    PromptBundle bundle = render_prompt(kind, context);
    ChatRequest request;
    request.messages = {{Role::system, bundle.system}, {Role::user, bundle.user}};
    switch (kind) {
        case PromptKind::generalist_decompose:
            request.temperature = options_.temperatures.generalist;
            break;
        case PromptKind::critic: request.temperature = options_.temperatures.critic; break;
        case PromptKind::tester: request.temperature = options_.temperatures.tester; break;
        default: request.temperature = options_.temperatures.code; break;
    }
    request.max_tokens = options_.max_tokens;
    request.model_name = options_.model_name;
    request.request_tag = prompt_kind_name(kind);

    ChatResponse response = transport_.complete(request);
    state.call_log.push_back({prompt_kind_name(kind), request_fingerprint(request), node_id});
    return response;
}

ProblemTree Orchestrator::decompose(const TaskSpec& task, RunState& state) {
    validate_task(task);
    PromptContext context;
    context.task = &task;
    context.depth_cap = options_.depth_cap;
    context.branch_cap = options_.branch_cap;

    std::string last_error = "no attempts made";
    for (int attempt = 1; attempt <= options_.budget.decompose_retries; ++attempt) {
        std::string reply;
        try {
            reply = call_agent(PromptKind::generalist_decompose, context, "", state).content;
        } catch (const ModelRefusal& e) {
            last_error = e.what();
            context.feedback.push_back("the planner returned no usable reply");
            continue;
        }
        try {
            return parse_tree_response(reply, task, options_.depth_cap, options_.branch_cap);
        } catch (const UnparseableTree&) {
            last_error = "reply contained no well-formed decomposition block";
        } catch (const InvalidTree& e) {
            last_error = e.what();
        }
        context.feedback.push_back(last_error);
    }
    throw DecompositionFailed("no valid decomposition after " +
                              std::to_string(options_.budget.decompose_retries) +
                              " tries; last error: " + last_error);
}

CandidateSolution Orchestrator::solve_node(const ProblemTree& tree, const std::string& node_id,
                                           const SolutionMap& solutions, RunState& state) {
    auto node_it = tree.nodes.find(node_id);
    if (node_it == tree.nodes.end()) throw UnknownNode(node_id);
    const ProblemNode& node = node_it->second;
    const bool is_compose = !node.children.empty();
    const bool is_root = node_id == tree.root_id;

    std::optional<std::string> expected_name;
    if (is_root && tree.task.entry_point) expected_name = tree.task.entry_point;

    // Top-level names already owned by other solved nodes; a new candidate
    // must not collide with them or assembly would be ambiguous.
    std::set<std::string> taken_names;
    for (const auto& [id, solution] : solutions)
        if (id != node_id)
            for (const auto& fn : scan_top_level_functions(solution.source))
                taken_names.insert(fn.name);

    PromptContext gen_context;
    gen_context.task = &tree.task;
    gen_context.node = &node;
    if (is_compose) gen_context.interfaces = composition_context(tree, node_id, solutions);

    std::string last_report_text = "no attempts made";

    for (int attempt = 1; attempt <= options_.budget.attempts_per_node; ++attempt) {
        const PromptKind gen_kind = is_compose ? PromptKind::code_compose : PromptKind::code_leaf;
        std::string reply;
        try {
            reply = call_agent(gen_kind, gen_context, node_id, state).content;
        } catch (const ModelRefusal&) {
            gen_context.feedback.push_back("the coding agent returned no usable reply");
            last_report_text = "model refusal";
            continue;
        }

        CodeFragment fragment;
        try {
            fragment = parse_code_response(reply, expected_name);
        } catch (const Error& e) {
            gen_context.feedback.push_back(std::string("reply rejected: ") + e.what());
            last_report_text = e.what();
            continue;
        }

        std::string collision;
        for (const auto& fn : scan_top_level_functions(fragment.source))
            if (taken_names.count(fn.name)) collision = fn.name;
        if (!collision.empty()) {
            gen_context.feedback.push_back("the name '" + collision +
                                           "' is already used elsewhere in the program; define "
                                           "the function under a different name");
            last_report_text = "name collision on '" + collision + "'";
            continue;
        }

        CandidateSolution candidate;
        candidate.node_id = node_id;
        candidate.source = fragment.source;
        candidate.interface = fragment.interface;
        candidate.attempt_index = attempt;
        candidate.feedback_history = gen_context.feedback;

        // Critic gate; any revise verdict ends the attempt.
        bool revised = false;
        PromptContext critic_context;
        critic_context.task = &tree.task;
        critic_context.node = &node;
        critic_context.candidate_source = fragment.source;
        for (int round = 1; round <= options_.budget.critic_rounds_per_attempt && !revised;
             ++round) {
            CritiqueVerdict verdict;
            try {
                verdict = parse_critic_response(
                    call_agent(PromptKind::critic, critic_context, node_id, state).content);
            } catch (const ModelRefusal&) {
                verdict = {Verdict::revise, "the reviewing agent returned no usable reply"};
            }
            if (verdict.verdict == Verdict::revise) {
                gen_context.feedback.push_back("reviewer: " + verdict.feedback);
                last_report_text = "revise verdict";
                revised = true;
            }
        }
        if (revised) continue;

        // Build the executable form: descendant sources in dependency
        // order (a slice of the tree's post-order), the candidate last.
        std::string program;
        {
            std::set<std::string> subtree;
            std::vector<std::string> stack{node_id};
            while (!stack.empty()) {
                std::string current = stack.back();
                stack.pop_back();
                subtree.insert(current);
                for (const std::string& child : tree.nodes.at(current).children)
                    stack.push_back(child);
            }
            std::string text;
            for (const std::string& id : leaves_postorder(tree)) {
                if (!subtree.count(id)) continue;
                std::string source;
                if (id == node_id) {
                    source = candidate.source;
                } else {
                    auto sol = solutions.find(id);
                    if (sol == solutions.end()) throw MissingChildSolution(node_id, id);
                    source = sol->second.source;
                }
                while (!source.empty() && source.back() == '\n') source.pop_back();
                if (!text.empty()) text += "\n\n";
                text += source;
            }
            program = text + "\n";
        }

        // Tester agent writes a suite from the interface alone. A suite
        // whose own code errors is regenerated once; a second bad suite
        // means this attempt is judged on the remaining checks only.
        PromptContext tester_context;
        tester_context.task = &tree.task;
        tester_context.node = &node;
        tester_context.interface = candidate.interface;

        std::optional<TestReport> generated_result;
        for (int suite_try = 1; suite_try <= 2; ++suite_try) {
            std::string tester_reply;
            try {
                tester_reply =
                    call_agent(PromptKind::tester, tester_context, node_id, state).content;
            } catch (const ModelRefusal&) {
                state.notes.push_back("node " + node_id + ": tester reply unusable (try " +
                                      std::to_string(suite_try) + ")");
                tester_context.feedback.push_back(
                    "the previous reply was unusable; reply with one fenced block of assert "
                    "statements");
                continue;
            }
            GeneratedTests suite;
            try {
                suite = parse_tests_response(tester_reply);
            } catch (const Error& e) {
                state.notes.push_back("node " + node_id + ": tester reply unusable (try " +
                                      std::to_string(suite_try) + "): " + e.what());
                tester_context.feedback.push_back(
                    "the previous reply was unusable; reply with one fenced block of assert "
                    "statements");
                continue;
            }
            TestReport run = sandbox_.execute_candidate(program, suite.test_source, std::nullopt,
                                                        options_.limits);
            if (run.status == RunStatus::error && run.error_in_tests.value_or(false)) {
                state.notes.push_back("node " + node_id +
                                      ": generated tests raised an error themselves (try " +
                                      std::to_string(suite_try) + "); suite discarded");
                tester_context.feedback.push_back(
                    "the previous test suite raised an error itself; keep the asserts simple and "
                    "call only the function under test");
                continue;
            }
            generated_result = run;
            break;
        }

        TestReport verdict_report;
        if (generated_result) {
            verdict_report = *generated_result;
        } else {
            // No usable generated suite: at least require the candidate to
            // load cleanly, plus whatever provided tests apply below.
            state.notes.push_back("node " + node_id +
                                  ": proceeding without generated tests");
            verdict_report =
                sandbox_.execute_candidate(program, "", std::nullopt, options_.limits);
        }

        if (verdict_report.status == RunStatus::pass && is_root && tree.task.provided_tests) {
            TestReport provided = sandbox_.execute_candidate(
                program, *tree.task.provided_tests, tree.task.entry_point, options_.limits);
            if (provided.status != RunStatus::pass) verdict_report = provided;
        }

        if (verdict_report.status == RunStatus::pass) {
            candidate.status = SolutionStatus::verified;
            candidate.feedback_history = gen_context.feedback;
            return candidate;
        }

        const std::string excerpt = diagnostic_excerpt(verdict_report, options_.limits);
        gen_context.feedback.push_back(excerpt);
        last_report_text = run_status_name(verdict_report.status) + std::string(": ") + excerpt;
    }

    throw NodeFailed(node_id, last_report_text);
}

SolveOutcome Orchestrator::solve_task(const TaskSpec& task) {
    validate_task(task);
    RunState state;
    SolveOutcome outcome;

    ProblemTree tree;
    try {
        tree = decompose(task, state);
    } catch (const DecompositionFailed& e) {
        outcome.status = SolveStatus::decomposition_failed;
        outcome.notes.push_back(e.what());
        outcome.call_log = state.call_log;
        return outcome;
    } catch (const BudgetExhausted& e) {
        outcome.status = SolveStatus::budget_exhausted;
        outcome.notes.push_back(e.what());
        outcome.call_log = state.call_log;
        return outcome;
    }
    outcome.tree = tree;

    try {
        for (const std::string& node_id : leaves_postorder(tree)) {
            CandidateSolution solution = solve_node(tree, node_id, outcome.solutions, state);
            outcome.solutions[node_id] = std::move(solution);
        }
        outcome.final_program = assemble_program(tree, outcome.solutions);
        outcome.status = SolveStatus::solved;
    } catch (const NodeFailed& e) {
        outcome.status = SolveStatus::node_failed;
        outcome.failed_nodes = with_ancestors(tree, e.node_id());
        outcome.notes.push_back(e.what());
    } catch (const BudgetExhausted& e) {
        outcome.status = SolveStatus::budget_exhausted;
        outcome.notes.push_back(e.what());
    } catch (const DuplicateDefinition& e) {
        outcome.status = SolveStatus::node_failed;
        outcome.failed_nodes = with_ancestors(tree, tree.root_id);
        outcome.notes.push_back(e.what());
    }

    outcome.call_log = state.call_log;
    outcome.notes.insert(outcome.notes.end(), state.notes.begin(), state.notes.end());
    return outcome;
}

CodeFragment Orchestrator::one_shot(const std::string& prompt,
                                    const std::optional<std::string>& expected_name,
                                    RunState& state) {
    PromptContext context;
    context.raw_prompt = prompt;
    const std::string reply = call_agent(PromptKind::one_shot, context, "", state).content;
    return parse_code_response(reply, expected_name);
}

// ---- artifacts ---------------------------------------------------------

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

}  // namespace

void write_run_artifacts(const SolveOutcome& outcome, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    if (outcome.tree) write_file(out_dir / "tree.json", tree_to_json(*outcome.tree).dump(2) + "\n");

    if (!outcome.solutions.empty()) {
        std::filesystem::create_directories(out_dir / "nodes");
        for (const auto& [id, solution] : outcome.solutions)
            write_file(out_dir / "nodes" / (id + ".py"), solution.source);
    }

    nlohmann::json call_log = nlohmann::json::array();
    for (const auto& record : outcome.call_log)
        call_log.push_back({{"agent_kind", record.agent_kind},
                            {"fingerprint", record.fingerprint},
                            {"node_id", record.node_id}});
    write_file(out_dir / "call_log.json", call_log.dump(2) + "\n");

    if (outcome.final_program) write_file(out_dir / "final_program.py", *outcome.final_program);

    nlohmann::json doc;
    doc["status"] = solve_status_name(outcome.status);
    doc["failed_nodes"] = outcome.failed_nodes;
    doc["notes"] = outcome.notes;
    doc["llm_calls"] = outcome.call_log.size();
    nlohmann::json solutions = nlohmann::json::object();
    for (const auto& [id, solution] : outcome.solutions) {
        solutions[id] = {{"status", solution_status_name(solution.status)},
                         {"attempts", solution.attempt_index},
                         {"interface",
                          {{"name", solution.interface.name},
                           {"signature", solution.interface.signature},
                           {"doc", solution.interface.doc}}},
                         {"feedback_history", solution.feedback_history}};
    }
    doc["solutions"] = solutions;
    write_file(out_dir / "outcome.json", doc.dump(2) + "\n");

    std::string summary = "status: " + std::string(solve_status_name(outcome.status)) + "\n";
    summary += "llm calls: " + std::to_string(outcome.call_log.size()) + "\n";
    if (outcome.tree) summary += "nodes: " + std::to_string(outcome.tree->nodes.size()) + "\n";
    for (const auto& [id, solution] : outcome.solutions)
        summary += "  " + id + ": " + solution_status_name(solution.status) + " after " +
                   std::to_string(solution.attempt_index) + " attempt(s)\n";
    if (!outcome.failed_nodes.empty()) {
        summary += "failed nodes:";
        for (const auto& id : outcome.failed_nodes) summary += " " + id;
        summary += "\n";
    }
    write_file(out_dir / "summary.txt", summary);
}

}  // namespace treegen
