#include "treegen/agents.hpp"

#include <cctype>
#include <map>

#include "treegen/errors.hpp"
#include "treegen/pyscan.hpp"
#include "treegen/templates.hpp"

namespace treegen {

const char* prompt_kind_name(PromptKind kind) {
    switch (kind) {
        case PromptKind::generalist_decompose: return "generalist_decompose";
        case PromptKind::code_leaf: return "code_leaf";
        case PromptKind::code_compose: return "code_compose";
        case PromptKind::critic: return "critic";
        case PromptKind::tester: return "tester";
        case PromptKind::one_shot: return "one_shot";
    }
    return "?";
}

namespace {

std::string apply_template(const std::string& text,
                           const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        std::size_t close = text.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        const std::string key = text.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end()) throw Error("template placeholder has no value: " + key);
        out += it->second;
        pos = close + 2;
    }
    return out;
}

std::string feedback_section(const std::vector<std::string>& feedback) {
    if (feedback.empty()) return "";
    std::string out = "\nEarlier attempts were rejected. Do not repeat their mistakes:\n";
    for (std::size_t i = 0; i < feedback.size(); ++i)
        out += "attempt " + std::to_string(i + 1) + ": " + feedback[i] + "\n";
    return out;
}

std::string interface_stub(const FunctionInterface& iface) {
    std::string stub = "def " + iface.name + iface.signature + ":";
    if (!iface.doc.empty()) stub += "\n    \"\"\"" + iface.doc + "\"\"\"";
    return stub;
}

const TaskSpec& need_task(PromptKind kind, const PromptContext& context) {
    if (!context.task) throw MissingContext(prompt_kind_name(kind), "task");
    return *context.task;
}

const ProblemNode& need_node(PromptKind kind, const PromptContext& context) {
    if (!context.node) throw MissingContext(prompt_kind_name(kind), "node");
    return *context.node;
}

}  // namespace

PromptBundle render_prompt(PromptKind kind, const PromptContext& context) {
    PromptBundle bundle;
    bundle.agent_kind = kind;
    std::map<std::string, std::string> values;

    switch (kind) {
        case PromptKind::generalist_decompose: {
            const TaskSpec& task = need_task(kind, context);
            values["depth_cap"] = std::to_string(context.depth_cap);
            values["branch_cap"] = std::to_string(context.branch_cap);
            values["task_description"] = task.description;
            values["entry_point_section"] =
                task.entry_point ? "\nThe final program must define a function named `" +
                                       *task.entry_point + "`.\n"
                                 : "";
            values["feedback_section"] = feedback_section(context.feedback);
            break;
        }
        case PromptKind::code_leaf: {
            const ProblemNode& node = need_node(kind, context);
            values["node_title"] = node.title;
            values["node_description"] = node.description;
            values["interface_section"] =
                node.interface_hint ? "\nSuggested interface: " + *node.interface_hint + "\n" : "";
            values["feedback_section"] = feedback_section(context.feedback);
            break;
        }
        case PromptKind::code_compose: {
            const ProblemNode& node = need_node(kind, context);
            if (context.interfaces.empty())
                throw MissingContext(prompt_kind_name(kind), "interfaces");
            values["node_title"] = node.title;
            values["node_description"] = node.description;
            values["interface_section"] =
                node.interface_hint ? "\nSuggested interface: " + *node.interface_hint + "\n" : "";
            std::string section;
            for (const auto& iface : context.interfaces) section += interface_stub(iface) + "\n\n";
            values["interfaces_section"] = section;
            values["feedback_section"] = feedback_section(context.feedback);
            break;
        }
        case PromptKind::critic: {
            const ProblemNode& node = need_node(kind, context);
            if (!context.candidate_source)
                throw MissingContext(prompt_kind_name(kind), "candidate_source");
            values["node_title"] = node.title;
            values["node_description"] = node.description;
            values["candidate_source"] = *context.candidate_source;
            break;
        }
        case PromptKind::tester: {
            const ProblemNode& node = need_node(kind, context);
            if (!context.interface) throw MissingContext(prompt_kind_name(kind), "interface");
            values["node_title"] = node.title;
            values["node_description"] = node.description;
            values["interface_stub"] = interface_stub(*context.interface);
            values["feedback_section"] = feedback_section(context.feedback);
            break;
        }
        case PromptKind::one_shot: {
            if (!context.raw_prompt) throw MissingContext(prompt_kind_name(kind), "raw_prompt");
            values["prompt"] = *context.raw_prompt;
            break;
        }
    }

    const std::string stem = kind == PromptKind::generalist_decompose
                                 ? "decompose"
                                 : std::string(prompt_kind_name(kind));
    bundle.system = apply_template(template_text(stem + "_system"), values);
    bundle.user = apply_template(template_text(stem + "_user"), values);
    return bundle;
}

// ---- tree reply decoding -----------------------------------------------

namespace {

bool tree_shape_ok(const nlohmann::json& j) {
    if (!j.is_object()) return false;
    if (!j.contains("title") || !j["title"].is_string() ||
        j["title"].get<std::string>().empty())
        return false;
    if (!j.contains("description") || !j["description"].is_string()) return false;
    if (j.contains("interface_hint") && !j["interface_hint"].is_string() &&
        !j["interface_hint"].is_null())
        return false;
    if (j.contains("children")) {
        if (!j["children"].is_array()) return false;
        for (const auto& child : j["children"])
            if (!tree_shape_ok(child)) return false;
    }
    return true;
}

void build_nodes(const nlohmann::json& j, const std::string& node_id, int depth, int depth_cap,
                 ProblemTree& tree) {
    ProblemNode node;
    node.node_id = node_id;
    node.title = j["title"].get<std::string>();
    node.description = j["description"].get<std::string>();
    if (j.contains("interface_hint") && j["interface_hint"].is_string())
        node.interface_hint = j["interface_hint"].get<std::string>();

    const bool at_cap = depth >= depth_cap;
    const bool has_children = j.contains("children") && !j["children"].empty();
    if (has_children && !at_cap) {
        node.kind = depth == 0 ? NodeKind::root : NodeKind::internal;
        int i = 0;
        for (const auto& child : j["children"]) {
            const std::string child_id = node_id + "." + std::to_string(i++);
            node.children.push_back(child_id);
            build_nodes(child, child_id, depth + 1, depth_cap, tree);
        }
    } else {
        node.kind = depth == 0 ? NodeKind::root : NodeKind::leaf;
    }
    tree.nodes.emplace(node_id, std::move(node));
}

}  // namespace

ProblemTree parse_tree_response(const std::string& response_text, const TaskSpec& task,
                                int depth_cap, int branch_cap) {
    const nlohmann::json* chosen = nullptr;
    std::vector<nlohmann::json> decoded;
    for (const std::string& block : extract_fenced_blocks(response_text)) {
        nlohmann::json j = nlohmann::json::parse(block, nullptr, false);
        if (j.is_discarded() || !tree_shape_ok(j)) continue;
        decoded.push_back(std::move(j));
    }
    if (decoded.empty()) throw UnparseableTree("no fenced block decodes as a problem tree");
    chosen = &decoded.back();

    ProblemTree tree;
    tree.task = task;
    tree.root_id = "n0";
    tree.depth_cap = depth_cap;
    tree.branch_cap = branch_cap;
    build_nodes(*chosen, tree.root_id, 0, depth_cap, tree);

    ProblemNode& root = tree.nodes.at(tree.root_id);
    root.description = task.description;
    if (task.entry_point) root.interface_hint = task.entry_point;

    std::vector<TreeViolation> violations = validate_tree(tree);
    if (!violations.empty()) {
        std::vector<std::string> lines;
        for (const auto& v : violations) lines.push_back(v.to_string());
        throw InvalidTree(lines);
    }
    return tree;
}

namespace {

nlohmann::json node_reply_json(const ProblemTree& tree, const std::string& node_id) {
    const ProblemNode& node = tree.nodes.at(node_id);
    nlohmann::json j;
    j["title"] = node.title;
    j["description"] = node.description;
    if (node.interface_hint) j["interface_hint"] = *node.interface_hint;
    j["children"] = nlohmann::json::array();
    for (const std::string& child : node.children)
        j["children"].push_back(node_reply_json(tree, child));
    return j;
}

}  // namespace

std::string tree_reply_json(const ProblemTree& tree) {
    return "```json\n" + node_reply_json(tree, tree.root_id).dump(2) + "\n```\n";
}

// ---- code / critic / test reply decoding --------------------------------

CodeFragment parse_code_response(const std::string& response_text,
                                 const std::optional<std::string>& expected_name) {
    std::vector<std::string> blocks = extract_fenced_blocks(response_text);
    if (blocks.empty()) throw NoCodeBlock();
    const std::string& source = blocks.back();

    std::vector<ScannedFunction> functions = scan_top_level_functions(source);
    if (functions.empty()) throw NoFunctionDefinition();

    const ScannedFunction* picked = &functions.back();
    if (expected_name) {
        picked = nullptr;
        for (const auto& fn : functions)
            if (fn.name == *expected_name) picked = &fn;
        if (!picked) throw NameMismatch(*expected_name, functions.back().name);
    }

    CodeFragment fragment;
    fragment.source = source;
    fragment.interface = {picked->name, picked->signature, picked->docstring};
    return fragment;
}

CritiqueVerdict parse_critic_response(const std::string& response_text) {
    static const std::string marker = "VERDICT:";
    const std::size_t at = response_text.rfind(marker);
    if (at == std::string::npos) return {Verdict::revise, response_text};

    std::size_t pos = at + marker.size();
    while (pos < response_text.size() && (response_text[pos] == ' ' || response_text[pos] == '\t'))
        ++pos;
    std::size_t end = pos;
    while (end < response_text.size() && std::isalpha(static_cast<unsigned char>(response_text[end])))
        ++end;
    const std::string word = response_text.substr(pos, end - pos);

    if (word == "APPROVE") return {Verdict::approve, ""};

    std::string remarks = response_text.substr(0, at);
    while (!remarks.empty() && std::isspace(static_cast<unsigned char>(remarks.back())))
        remarks.pop_back();
    if (word != "REVISE") remarks = response_text;  // mangled marker: keep everything
    if (remarks.empty()) remarks = "revision requested without remarks";
    return {Verdict::revise, remarks};
}

GeneratedTests parse_tests_response(const std::string& response_text) {
    std::vector<std::string> blocks = extract_fenced_blocks(response_text);
    if (blocks.empty()) throw NoCodeBlock();
    GeneratedTests tests;
    tests.test_source = blocks.back();
    tests.case_count = count_assertions(tests.test_source);
    if (tests.case_count == 0) throw EmptySuite();
    return tests;
}

}  // namespace treegen
