#include "treegen/core.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "treegen/errors.hpp"

namespace treegen {

void validate_task(const TaskSpec& task) {
    if (task.description.empty())
        throw Error("task " + task.task_id + ": description must be non-empty");
    if (task.provided_tests && !task.entry_point)
        throw Error("task " + task.task_id + ": provided_tests requires entry_point");
}

TaskSpec task_from_json(const nlohmann::json& j) {
    TaskSpec task;
    task.task_id = j.at("task_id").get<std::string>();
    task.description = j.at("description").get<std::string>();
    if (j.contains("entry_point") && !j["entry_point"].is_null())
        task.entry_point = j["entry_point"].get<std::string>();
    if (j.contains("provided_tests") && !j["provided_tests"].is_null())
        task.provided_tests = j["provided_tests"].get<std::string>();
    if (j.contains("target_language_tag") && !j["target_language_tag"].is_null())
        task.target_language_tag = j["target_language_tag"].get<std::string>();
    validate_task(task);
    return task;
}

nlohmann::json task_to_json(const TaskSpec& task) {
    nlohmann::json j;
    j["task_id"] = task.task_id;
    j["description"] = task.description;
    j["entry_point"] = task.entry_point ? nlohmann::json(*task.entry_point) : nlohmann::json();
    j["provided_tests"] =
        task.provided_tests ? nlohmann::json(*task.provided_tests) : nlohmann::json();
    j["target_language_tag"] = task.target_language_tag;
    return j;
}

const char* node_kind_name(NodeKind kind) {
    switch (kind) {
        case NodeKind::root: return "root";
        case NodeKind::internal: return "internal";
        case NodeKind::leaf: return "leaf";
    }
    return "?";
}

const char* solution_status_name(SolutionStatus status) {
    switch (status) {
        case SolutionStatus::unverified: return "unverified";
        case SolutionStatus::verified: return "verified";
        case SolutionStatus::failed: return "failed";
    }
    return "?";
}

namespace {

// Declared child list with duplicates removed, preserving first occurrence.
// Traversal-related checks work on this; the duplicates themselves are
// reported separately.
std::vector<std::string> dedup_children(const ProblemNode& node) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& c : node.children)
        if (seen.insert(c).second) out.push_back(c);
    return out;
}

}  // namespace

std::vector<TreeViolation> validate_tree(const ProblemTree& tree) {
    std::vector<TreeViolation> out;
    auto add = [&out](std::string node_id, std::string rule, std::string detail) {
        out.push_back({std::move(node_id), std::move(rule), std::move(detail)});
    };

    if (tree.depth_cap < 1 || tree.branch_cap < 1)
        add(tree.root_id, "caps-invalid",
            "depth_cap and branch_cap must be positive, got depth_cap=" +
                std::to_string(tree.depth_cap) + " branch_cap=" + std::to_string(tree.branch_cap));

    if (!tree.nodes.count(tree.root_id)) {
        add(tree.root_id, "missing-root", "root_id not present in node map");
        std::sort(out.begin(), out.end(), [](const TreeViolation& a, const TreeViolation& b) {
            return std::tie(a.node_id, a.rule) < std::tie(b.node_id, b.rule);
        });
        return out;  // nothing else is meaningful without a root
    }

    for (const auto& [id, node] : tree.nodes) {
        if (node.node_id != id)
            add(id, "id-mismatch", "map key differs from node_id '" + node.node_id + "'");

        // duplicate entries within one child list
        std::unordered_set<std::string> seen;
        for (const auto& c : node.children)
            if (!seen.insert(c).second)
                add(id, "duplicate-child", "child '" + c + "' listed more than once");

        for (const auto& c : dedup_children(node)) {
            if (!tree.nodes.count(c))
                add(id, "missing-child", "child '" + c + "' not present in node map");
            if (c == tree.root_id)
                add(id, "root-as-child", "root node listed as a child");
        }

        if (static_cast<int>(node.children.size()) > tree.branch_cap)
            add(id, "branch-exceeded",
                std::to_string(node.children.size()) + " children > branch_cap " +
                    std::to_string(tree.branch_cap));

        if (id == tree.root_id) {
            if (node.kind != NodeKind::root)
                add(id, "root-kind", std::string("root node has kind ") + node_kind_name(node.kind));
        } else if (node.kind == NodeKind::root) {
            add(id, "root-kind", "non-root node has kind root");
        } else {
            // leaf <=> empty children; the root is exempt (a single-node
            // tree has a childless root)
            const bool is_leaf = node.kind == NodeKind::leaf;
            if (is_leaf && !node.children.empty())
                add(id, "kind-mismatch", "leaf node has children");
            if (!is_leaf && node.children.empty())
                add(id, "kind-mismatch", "internal node has no children");
        }
    }

    // Reachability walk from the root: depth, cycles, multiple parents.
    std::unordered_map<std::string, int> depth;
    std::unordered_map<std::string, std::vector<std::string>> parents;
    std::unordered_set<std::string> on_stack;

    // Iterative DFS in declared child order so reports are deterministic.
    struct Frame {
        std::string id;
        std::vector<std::string> children;
        std::size_t next = 0;
    };
    std::vector<Frame> stack;
    depth[tree.root_id] = 0;
    on_stack.insert(tree.root_id);
    stack.push_back({tree.root_id, dedup_children(tree.nodes.at(tree.root_id)), 0});

    while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.next >= top.children.size()) {
            on_stack.erase(top.id);
            stack.pop_back();
            continue;
        }
        const std::string child = top.children[top.next++];
        if (!tree.nodes.count(child)) continue;  // reported as missing-child above
        parents[child].push_back(top.id);
        if (on_stack.count(child)) {
            add(top.id, "cycle", "child '" + child + "' is an ancestor of this node");
            continue;
        }
        if (depth.count(child)) continue;  // already visited via another parent
        depth[child] = depth[top.id] + 1;
        on_stack.insert(child);
        stack.push_back({child, dedup_children(tree.nodes.at(child)), 0});
    }

    for (const auto& [id, ps] : parents) {
        if (ps.size() > 1) {
            std::vector<std::string> sorted = ps;
            std::sort(sorted.begin(), sorted.end());
            std::string detail = "reached from parents:";
            for (const auto& p : sorted) detail += " " + p;
            add(id, "multi-parent", detail);
        }
    }

    for (const auto& [id, node] : tree.nodes) {
        auto it = depth.find(id);
        if (it == depth.end()) {
            add(id, "unreachable", "not reachable from root");
            continue;
        }
        if (it->second > tree.depth_cap)
            add(id, "depth-exceeded",
                "depth " + std::to_string(it->second) + " > depth_cap " +
                    std::to_string(tree.depth_cap));
    }

    std::sort(out.begin(), out.end(), [](const TreeViolation& a, const TreeViolation& b) {
        return std::tie(a.node_id, a.rule, a.detail) < std::tie(b.node_id, b.rule, b.detail);
    });
    return out;
}

std::vector<std::string> leaves_postorder(const ProblemTree& tree) {
    auto violations = validate_tree(tree);
    if (!violations.empty()) {
        std::vector<std::string> messages;
        messages.reserve(violations.size());
        for (const auto& v : violations) messages.push_back(v.to_string());
        throw InvalidTree(std::move(messages));
    }

    std::vector<std::string> order;
    order.reserve(tree.nodes.size());

    struct Frame {
        std::string id;
        std::size_t next = 0;
    };
    std::vector<Frame> stack{{tree.root_id, 0}};
    while (!stack.empty()) {
        Frame& top = stack.back();
        const ProblemNode& node = tree.nodes.at(top.id);
        if (top.next < node.children.size()) {
            stack.push_back({node.children[top.next++], 0});
        } else {
            order.push_back(top.id);
            stack.pop_back();
        }
    }
    return order;
}

int node_depth(const ProblemTree& tree, const std::string& node_id) {
    if (!tree.nodes.count(node_id)) throw UnknownNode(node_id);
    std::deque<std::pair<std::string, int>> queue{{tree.root_id, 0}};
    std::unordered_set<std::string> seen{tree.root_id};
    while (!queue.empty()) {
        auto [id, d] = queue.front();
        queue.pop_front();
        if (id == node_id) return d;
        for (const auto& c : tree.nodes.at(id).children)
            if (tree.nodes.count(c) && seen.insert(c).second) queue.emplace_back(c, d + 1);
    }
    throw UnknownNode(node_id);
}

std::vector<FunctionInterface> composition_context(const ProblemTree& tree,
                                                   const std::string& node_id,
                                                   const SolutionMap& solutions) {
    auto it = tree.nodes.find(node_id);
    if (it == tree.nodes.end()) throw UnknownNode(node_id);

    std::vector<FunctionInterface> out;
    out.reserve(it->second.children.size());
    for (const auto& child : it->second.children) {
        auto sol = solutions.find(child);
        if (sol == solutions.end() || sol->second.status != SolutionStatus::verified)
            throw MissingChildSolution(node_id, child);
        out.push_back(sol->second.interface);
    }
    return out;
}

nlohmann::json tree_to_json(const ProblemTree& tree) {
    nlohmann::json j;
    j["task_id"] = tree.task.task_id;
    j["root"] = tree.root_id;
    nlohmann::json nodes = nlohmann::json::array();
    // Emit in post-order so the file reads dependencies-first; the `root`
    // field, not position, identifies the root.
    for (const auto& id : leaves_postorder(tree)) {
        const ProblemNode& node = tree.nodes.at(id);
        nlohmann::json n;
        n["id"] = node.node_id;
        n["title"] = node.title;
        n["description"] = node.description;
        n["interface_hint"] =
            node.interface_hint ? nlohmann::json(*node.interface_hint) : nlohmann::json();
        n["children"] = node.children;
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    return j;
}

ProblemTree tree_from_json(const nlohmann::json& j, TaskSpec task, int depth_cap, int branch_cap) {
    ProblemTree tree;
    tree.task = std::move(task);
    tree.depth_cap = depth_cap;
    tree.branch_cap = branch_cap;
    tree.root_id = j.at("root").get<std::string>();
    for (const auto& n : j.at("nodes")) {
        ProblemNode node;
        node.node_id = n.at("id").get<std::string>();
        node.title = n.at("title").get<std::string>();
        node.description = n.at("description").get<std::string>();
        if (n.contains("interface_hint") && !n["interface_hint"].is_null())
            node.interface_hint = n["interface_hint"].get<std::string>();
        node.children = n.at("children").get<std::vector<std::string>>();
        node.kind = node.node_id == tree.root_id ? NodeKind::root
                    : node.children.empty()      ? NodeKind::leaf
                                                 : NodeKind::internal;
        tree.nodes[node.node_id] = std::move(node);
    }
    return tree;
}

}  // namespace treegen
