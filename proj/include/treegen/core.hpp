#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace treegen {

// One coding task as handed to the engine. `target_language_tag` names the
// language of the code to be generated; the engine itself stays agnostic.
struct TaskSpec {
    std::string task_id;
    std::string description;
    std::optional<std::string> entry_point;
    std::optional<std::string> provided_tests;
    std::string target_language_tag = "python";
};

// Throws Error when a TaskSpec invariant is broken (empty description,
// provided tests without an entry point).
void validate_task(const TaskSpec& task);

TaskSpec task_from_json(const nlohmann::json& j);
nlohmann::json task_to_json(const TaskSpec& task);

enum class NodeKind { root, internal, leaf };

const char* node_kind_name(NodeKind kind);

struct ProblemNode {
    std::string node_id;
    std::string title;
    std::string description;
    std::optional<std::string> interface_hint;
    std::vector<std::string> children;  // ordered; order is meaningful
    NodeKind kind = NodeKind::leaf;
};

struct ProblemTree {
    TaskSpec task;
    std::map<std::string, ProblemNode> nodes;
    std::string root_id;
    int depth_cap = 3;
    int branch_cap = 7;
};

// A broken tree invariant. `rule` is a stable identifier ("cycle",
// "depth-exceeded", ...), `node_id` the offending node, `detail` free text.
struct TreeViolation {
    std::string node_id;
    std::string rule;
    std::string detail;

    bool operator==(const TreeViolation& other) const = default;
    std::string to_string() const { return node_id + ": " + rule + " (" + detail + ")"; }
};

// Checks every structural invariant and returns the violations, sorted by
// node_id then rule name. An empty result means the tree is valid.
std::vector<TreeViolation> validate_tree(const ProblemTree& tree);

// All node ids in post-order: children before parents, siblings in declared
// order, root last. Throws InvalidTree when validate_tree is non-empty.
std::vector<std::string> leaves_postorder(const ProblemTree& tree);

// Depth of a node below the root (root = 0). Only defined for valid trees.
int node_depth(const ProblemTree& tree, const std::string& node_id);

// The only information that crosses a node boundary upward.
struct FunctionInterface {
    std::string name;
    std::string signature;  // parameter list + return, e.g. "(a, b) -> int"
    std::string doc;

    bool operator==(const FunctionInterface& other) const = default;
};

enum class SolutionStatus { unverified, verified, failed };

const char* solution_status_name(SolutionStatus status);

struct CandidateSolution {
    std::string node_id;
    std::string source;
    FunctionInterface interface;
    int attempt_index = 1;
    SolutionStatus status = SolutionStatus::unverified;
    std::vector<std::string> feedback_history;
};

using SolutionMap = std::map<std::string, CandidateSolution>;

// Interfaces of the direct children of `node_id`, in child order. Nothing
// else crosses the boundary: no source text, no grandchild interfaces, no
// descendant problem descriptions. Throws UnknownNode or
// MissingChildSolution (child without a verified solution).
std::vector<FunctionInterface> composition_context(const ProblemTree& tree,
                                                   const std::string& node_id,
                                                   const SolutionMap& solutions);

// On-disk tree document: {task_id, root, nodes[{id,title,description,
// interface_hint,children[]}]}.
nlohmann::json tree_to_json(const ProblemTree& tree);
ProblemTree tree_from_json(const nlohmann::json& j, TaskSpec task, int depth_cap, int branch_cap);

}  // namespace treegen
