#pragma once

#include <algorithm>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "treegen/core.hpp"
#include "treegen/errors.hpp"
#include "treegen/llm.hpp"
#include "treegen/orchestrator.hpp"

namespace treegen::test {

// Serves canned reply texts in call order; fails loudly when the script
// runs dry. A reply of "<REFUSE>" throws ModelRefusal instead. Requests are
// kept for inspection.
class ScriptedTransport : public Transport {
public:
    explicit ScriptedTransport(std::vector<std::string> replies)
        : replies_(std::move(replies)) {}

    ChatResponse complete(const ChatRequest& request) override {
        std::lock_guard<std::mutex> lock(mutex_);
        requests_.push_back(request);
        if (next_ >= replies_.size())
            throw TransportError("script exhausted after " + std::to_string(replies_.size()) +
                                 " replies (call " + std::to_string(next_ + 1) +
                                 ", tag " + request.request_tag + ")");
        const std::string reply = replies_[next_++];
        if (reply == "<REFUSE>") throw ModelRefusal("scripted refusal");
        ChatResponse response;
        response.content = reply;
        response.finish_reason = FinishReason::stop;
        return response;
    }

    const std::vector<ChatRequest>& requests() const { return requests_; }

private:
    std::vector<std::string> replies_;
    std::vector<ChatRequest> requests_;
    std::size_t next_ = 0;
    std::mutex mutex_;
};

// Pass-through wrapper that remembers every request, for properties of the
// form "string X never appears in any request".
class CapturingTransport : public Transport {
public:
    explicit CapturingTransport(Transport& inner) : inner_(inner) {}

    ChatResponse complete(const ChatRequest& request) override {
        requests_.push_back(request);
        return inner_.complete(request);
    }

    const std::vector<ChatRequest>& requests() const { return requests_; }

    bool any_request_contains(const std::string& needle) const {
        for (const auto& request : requests_)
            for (const auto& message : request.messages)
                if (message.content.find(needle) != std::string::npos) return true;
        return false;
    }

private:
    Transport& inner_;
    std::vector<ChatRequest> requests_;
};

// ---- random trees with known violations ---------------------------------

using ViolationSet = std::set<std::pair<std::string, std::string>>;  // (rule, node_id)

inline ViolationSet violation_set(const std::vector<TreeViolation>& violations) {
    ViolationSet out;
    for (const auto& v : violations) out.insert({v.rule, v.node_id});
    return out;
}

inline ProblemTree random_valid_tree(std::mt19937& rng) {
    ProblemTree tree;
    tree.task.task_id = "gen/task";
    tree.task.description = "generated task";
    tree.depth_cap = std::uniform_int_distribution<int>(2, 4)(rng);
    tree.branch_cap = std::uniform_int_distribution<int>(2, 4)(rng);
    tree.root_id = "n0";

    // Recursive expansion; children get ids <parent>.<index>.
    std::vector<std::pair<std::string, int>> pending{{"n0", 0}};
    while (!pending.empty()) {
        auto [id, depth] = pending.back();
        pending.pop_back();
        ProblemNode node;
        node.node_id = id;
        node.title = "problem " + id;
        node.description = "solve part " + id;
        int width = 0;
        if (depth < tree.depth_cap) {
            // Bias toward small nodes but keep real branching common.
            const int roll = std::uniform_int_distribution<int>(0, 9)(rng);
            if (depth == 0 && roll < 8) width = std::uniform_int_distribution<int>(1, tree.branch_cap)(rng);
            else if (roll < 5) width = std::uniform_int_distribution<int>(1, tree.branch_cap)(rng);
        }
        for (int i = 0; i < width; ++i) {
            const std::string child_id = id + "." + std::to_string(i);
            node.children.push_back(child_id);
            pending.push_back({child_id, depth + 1});
        }
        node.kind = id == tree.root_id ? NodeKind::root
                    : width > 0        ? NodeKind::internal
                                       : NodeKind::leaf;
        tree.nodes[id] = std::move(node);
    }
    return tree;
}

struct MutatedTree {
    ProblemTree tree;
    ViolationSet expected;
    std::string mutation;
};

namespace detail {

inline std::vector<std::string> node_ids(const ProblemTree& tree) {
    std::vector<std::string> ids;
    for (const auto& [id, node] : tree.nodes) ids.push_back(id);
    return ids;
}

inline std::string pick(const std::vector<std::string>& ids, std::mt19937& rng) {
    return ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
}

inline int subtree_height(const ProblemTree& tree, const std::string& id) {
    int best = 0;
    for (const auto& child : tree.nodes.at(id).children)
        best = std::max(best, 1 + subtree_height(tree, child));
    return best;
}

inline std::set<std::string> subtree_ids(const ProblemTree& tree, const std::string& id) {
    std::set<std::string> out{id};
    for (const auto& child : tree.nodes.at(id).children) {
        auto sub = subtree_ids(tree, child);
        out.insert(sub.begin(), sub.end());
    }
    return out;
}

}  // namespace detail

// Applies one randomly chosen structural mutation to a valid tree and
// returns the exact violation set validate_tree must report for it.
inline MutatedTree mutate_tree(ProblemTree tree, std::mt19937& rng) {
    using detail::node_ids;
    using detail::pick;

    const std::vector<std::string> ids = node_ids(tree);
    std::vector<std::string> non_root;
    std::vector<std::string> leaves;
    std::vector<std::string> inner;  // internal or root, reachable parents
    for (const auto& id : ids) {
        if (id != tree.root_id) non_root.push_back(id);
        if (tree.nodes.at(id).children.empty() && id != tree.root_id) leaves.push_back(id);
        if (!tree.nodes.at(id).children.empty()) inner.push_back(id);
    }

    int max_depth = 0;
    for (const auto& id : ids) max_depth = std::max(max_depth, node_depth(tree, id));

    std::vector<int> applicable;
    for (int m = 0; m < 12; ++m) {
        const bool needs_non_root = m == 1 || m == 2;
        const bool needs_leaf = m == 3 || m == 4 || m == 6;
        const bool needs_inner = m == 5 || m == 7;
        if (needs_non_root && non_root.empty()) continue;
        if (needs_leaf && leaves.empty()) continue;
        if (needs_inner && inner.empty()) continue;
        if (m == 8 && max_depth < 2) continue;  // trim must leave a positive cap
        applicable.push_back(m);
    }
    const int mutation =
        applicable[std::uniform_int_distribution<std::size_t>(0, applicable.size() - 1)(rng)];

    MutatedTree out;
    out.expected = {};

    switch (mutation) {
        case 0: {  // root kind flipped
            tree.nodes.at(tree.root_id).kind = NodeKind::internal;
            out.expected.insert({"root-kind", tree.root_id});
            out.mutation = "root-kind";
            break;
        }
        case 1: {  // a non-root node claims kind root
            const std::string id = pick(non_root, rng);
            tree.nodes.at(id).kind = NodeKind::root;
            out.expected.insert({"root-kind", id});
            out.mutation = "nonroot-kind-root";
            break;
        }
        case 2: {  // node_id field out of sync with the map key
            const std::string id = pick(non_root, rng);
            tree.nodes.at(id).node_id = id + "-renamed";
            out.expected.insert({"id-mismatch", id});
            out.mutation = "id-mismatch";
            break;
        }
        case 3: {  // childless leaf marked internal
            const std::string id = pick(leaves, rng);
            tree.nodes.at(id).kind = NodeKind::internal;
            out.expected.insert({"kind-mismatch", id});
            out.mutation = "kind-mismatch-internal";
            break;
        }
        case 4: {  // a leaf vanishes from the map but not from its parent
            const std::string id = pick(leaves, rng);
            std::string parent;
            for (const auto& [pid, node] : tree.nodes)
                if (std::count(node.children.begin(), node.children.end(), id)) parent = pid;
            tree.nodes.erase(id);
            out.expected.insert({"missing-child", parent});
            out.mutation = "missing-child";
            break;
        }
        case 5: {  // duplicated child entry (parent with spare width)
            std::vector<std::string> candidates;
            for (const auto& id : inner)
                if (static_cast<int>(tree.nodes.at(id).children.size()) + 1 <= tree.branch_cap)
                    candidates.push_back(id);
            if (candidates.empty()) {
                tree.branch_cap += 1;  // make room; cap stays positive
                candidates = inner;
            }
            const std::string id = pick(candidates, rng);
            ProblemNode& node = tree.nodes.at(id);
            node.children.push_back(node.children.front());
            out.expected.insert({"duplicate-child", id});
            out.mutation = "duplicate-child";
            break;
        }
        case 6: {  // a leaf adopts the root: back edge plus explicit rule
            const std::string id = pick(leaves, rng);
            ProblemNode& node = tree.nodes.at(id);
            node.children.push_back(tree.root_id);
            node.kind = NodeKind::internal;
            out.expected.insert({"root-as-child", id});
            out.expected.insert({"cycle", id});
            out.mutation = "root-as-child";
            break;
        }
        case 7: {  // width pushed past the cap with fresh filler leaves
            std::vector<std::string> candidates;
            for (const auto& id : inner)
                if (node_depth(tree, id) < tree.depth_cap) candidates.push_back(id);
            if (candidates.empty()) candidates.push_back(tree.root_id);
            const std::string id = pick(candidates, rng);
            ProblemNode& node = tree.nodes.at(id);
            const int needed = tree.branch_cap + 1 - static_cast<int>(node.children.size());
            for (int i = 0; i < needed; ++i) {
                const std::string filler_id = id + ".x" + std::to_string(i);
                ProblemNode filler;
                filler.node_id = filler_id;
                filler.title = "filler";
                filler.description = "filler";
                filler.kind = NodeKind::leaf;
                node.children.push_back(filler_id);
                tree.nodes[filler_id] = std::move(filler);
            }
            out.expected.insert({"branch-exceeded", id});
            out.mutation = "branch-exceeded";
            break;
        }
        case 8: {  // depth cap lowered below the deepest path (max_depth >= 2 here)
            tree.depth_cap = max_depth - 1;
            for (const auto& id : node_ids(tree))
                if (node_depth(tree, id) > tree.depth_cap)
                    out.expected.insert({"depth-exceeded", id});
            out.mutation = "depth-trim";
            break;
        }
        case 9: {  // orphan node nobody references
            ProblemNode orphan;
            orphan.node_id = "orphan";
            orphan.title = "orphan";
            orphan.description = "orphan";
            orphan.kind = NodeKind::leaf;
            tree.nodes["orphan"] = std::move(orphan);
            out.expected.insert({"unreachable", "orphan"});
            out.mutation = "unreachable";
            break;
        }
        case 10: {  // root_id points nowhere
            tree.root_id = "absent";
            out.expected.insert({"missing-root", "absent"});
            out.mutation = "missing-root";
            break;
        }
        case 11: {  // caps made nonsensical
            tree.depth_cap = 0;
            out.expected.insert({"caps-invalid", tree.root_id});
            for (const auto& id : node_ids(tree))
                if (id != tree.root_id) out.expected.insert({"depth-exceeded", id});
            out.mutation = "caps-invalid";
            break;
        }
    }

    out.tree = std::move(tree);
    return out;
}

// Cycle and multi-parent need specific shapes, so they get dedicated
// builders instead of a random slot.
inline MutatedTree cycle_mutation(ProblemTree tree) {
    // root -> a -> b; b adopts a.
    MutatedTree out;
    tree.nodes.clear();
    tree.root_id = "n0";
    tree.depth_cap = 3;
    tree.branch_cap = 3;
    ProblemNode root{"n0", "root", "root", std::nullopt, {"n0.0"}, NodeKind::root};
    ProblemNode a{"n0.0", "a", "a", std::nullopt, {"n0.0.0"}, NodeKind::internal};
    ProblemNode b{"n0.0.0", "b", "b", std::nullopt, {"n0.0"}, NodeKind::internal};
    tree.nodes["n0"] = root;
    tree.nodes["n0.0"] = a;
    tree.nodes["n0.0.0"] = b;
    out.expected = {{"cycle", "n0.0.0"}, {"multi-parent", "n0.0"}};
    out.mutation = "cycle";
    out.tree = std::move(tree);
    return out;
}

inline MutatedTree multi_parent_mutation(ProblemTree tree) {
    // root -> {a, b}; both a and b list c.
    MutatedTree out;
    tree.nodes.clear();
    tree.root_id = "n0";
    tree.depth_cap = 3;
    tree.branch_cap = 3;
    ProblemNode root{"n0", "root", "root", std::nullopt, {"n0.0", "n0.1"}, NodeKind::root};
    ProblemNode a{"n0.0", "a", "a", std::nullopt, {"n0.0.0"}, NodeKind::internal};
    ProblemNode b{"n0.1", "b", "b", std::nullopt, {"n0.0.0"}, NodeKind::internal};
    ProblemNode c{"n0.0.0", "c", "c", std::nullopt, {}, NodeKind::leaf};
    tree.nodes["n0"] = root;
    tree.nodes["n0.0"] = a;
    tree.nodes["n0.1"] = b;
    tree.nodes["n0.0.0"] = c;
    out.expected = {{"multi-parent", "n0.0.0"}};
    out.mutation = "multi-parent";
    out.tree = std::move(tree);
    return out;
}

// ---- fixture configuration shared by the generator and the tests --------

inline OrchestratorOptions toy_options() {
    OrchestratorOptions options;
    options.model_name = "fixture-model";
    options.depth_cap = 3;
    options.branch_cap = 7;
    options.budget = Budget{3, 4, 1, 200};
    options.limits.wall_timeout_seconds = 10;
    return options;
}

inline OrchestratorOptions mini_guided_options() {
    OrchestratorOptions options = toy_options();
    options.budget.attempts_per_node = 2;
    return options;
}

inline OrchestratorOptions mini_one_shot_options() { return toy_options(); }

}  // namespace treegen::test
