#pragma once

#include <optional>
#include <string>
#include <vector>

#include "treegen/core.hpp"

namespace treegen {

// The six prompt shapes the engine sends. The first five are the agent
// roles of the guided pipeline; one_shot is the baseline's single call.
enum class PromptKind {
    generalist_decompose,
    code_leaf,
    code_compose,
    critic,
    tester,
    one_shot,
};

const char* prompt_kind_name(PromptKind kind);

struct PromptBundle {
    std::string system;
    std::string user;
    PromptKind agent_kind = PromptKind::code_leaf;
};

// Everything render_prompt may draw on. Pointers are borrowed from the
// caller and only read during the call. Each kind requires a subset:
//   generalist_decompose: task (+ caps, feedback)
//   code_leaf:            node (+ feedback)
//   code_compose:         node + interfaces (+ feedback)
//   critic:               node + candidate_source
//   tester:               node + interface
//   one_shot:             raw_prompt
struct PromptContext {
    const TaskSpec* task = nullptr;
    const ProblemNode* node = nullptr;
    std::vector<FunctionInterface> interfaces;
    std::vector<std::string> feedback;  // oldest first
    std::optional<std::string> candidate_source;
    std::optional<FunctionInterface> interface;
    std::optional<std::string> raw_prompt;
    int depth_cap = 3;
    int branch_cap = 7;
};

// Pure: same inputs, same bundle. Templates are compiled in and carry a
// version line inside the system text, so rendered prompts (and with them
// request fingerprints) change whenever a template changes. Throws
// MissingContext when a field the kind needs is absent.
PromptBundle render_prompt(PromptKind kind, const PromptContext& context);

// Decodes the decomposition reply: takes the last fenced block that parses
// as a {title, description, interface_hint?, children[]} object, assigns
// node ids (n0, n0.0, ...), forces nodes at depth_cap to leaves (dropping
// anything deeper), pins the root description to the task text and the
// root interface hint to the entry point, then validates. Throws
// UnparseableTree when no block decodes, InvalidTree when validation fails
// (over-wide nodes included; width is never silently truncated).
ProblemTree parse_tree_response(const std::string& response_text, const TaskSpec& task,
                                int depth_cap, int branch_cap);

struct CodeFragment {
    std::string source;  // the whole fenced block, helpers included
    FunctionInterface interface;
};

// Takes the last fenced block and scans its top-level definitions. With an
// expected_name, the matching definition becomes the interface and any
// other outcome is NameMismatch; without one, the last definition wins.
// Throws NoCodeBlock, NoFunctionDefinition.
CodeFragment parse_code_response(const std::string& response_text,
                                 const std::optional<std::string>& expected_name = std::nullopt);

enum class Verdict { approve, revise };

struct CritiqueVerdict {
    Verdict verdict = Verdict::revise;
    std::string feedback;  // non-empty when revise
};

// Fail-closed: approve only on an explicit final "VERDICT: APPROVE"
// marker. A missing or mangled marker is a revise verdict with the whole
// reply as feedback. Never throws.
CritiqueVerdict parse_critic_response(const std::string& response_text);

struct GeneratedTests {
    std::string test_source;
    int case_count = 0;
};

// Last fenced block as the suite; counts assert statements. Throws
// NoCodeBlock, EmptySuite (block without a single assert).
GeneratedTests parse_tests_response(const std::string& response_text);

// A decomposition-reply-shaped rendering of an existing tree (nested JSON
// in a fenced block). parse_tree_response(tree_reply_json(t), ...) gives a
// tree isomorphic to t.
std::string tree_reply_json(const ProblemTree& tree);

}  // namespace treegen
