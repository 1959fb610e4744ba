#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace treegen {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- transport --------------------------------------------------------

class TransportError : public Error {
public:
    using Error::Error;
};

class ReplayMiss : public Error {
public:
    explicit ReplayMiss(std::string fingerprint, const std::string& tag)
        : Error("replay miss: no transcript entry for fingerprint " + fingerprint +
                " (request_tag=" + tag + "); prompt drift or wrong transcript"),
          fingerprint_(std::move(fingerprint)) {}
    const std::string& fingerprint() const { return fingerprint_; }

private:
    std::string fingerprint_;
};

class CorruptTranscript : public Error {
public:
    CorruptTranscript(std::size_t line_no, std::size_t byte_offset, const std::string& reason)
        : Error("corrupt transcript at line " + std::to_string(line_no) +
                " (byte offset " + std::to_string(byte_offset) + "): " + reason),
          line_no_(line_no),
          byte_offset_(byte_offset) {}
    std::size_t line_no() const { return line_no_; }
    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t line_no_;
    std::size_t byte_offset_;
};

class ModelRefusal : public Error {
public:
    using Error::Error;
};

// ---- core -------------------------------------------------------------

class UnknownNode : public Error {
public:
    explicit UnknownNode(const std::string& node_id)
        : Error("unknown node id: " + node_id) {}
};

class MissingChildSolution : public Error {
public:
    MissingChildSolution(std::string node_id, std::string child_id)
        : Error("node " + node_id + " has no verified solution for child " + child_id),
          node_id_(std::move(node_id)),
          child_id_(std::move(child_id)) {}
    const std::string& node_id() const { return node_id_; }
    const std::string& child_id() const { return child_id_; }

private:
    std::string node_id_;
    std::string child_id_;
};

// ---- agents -----------------------------------------------------------

class MissingContext : public Error {
public:
    MissingContext(const std::string& kind, std::string field)
        : Error("prompt kind " + kind + " requires context field '" + field + "'"),
          field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class UnparseableTree : public Error {
public:
    using Error::Error;
};

class InvalidTree : public Error {
public:
    explicit InvalidTree(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}
    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string>& vs) {
        std::string out = "invalid tree:";
        for (const auto& v : vs) out += "\n  " + v;
        return out;
    }
    std::vector<std::string> violations_;
};

class NoCodeBlock : public Error {
public:
    NoCodeBlock() : Error("reply contains no fenced code block") {}
};

class NoFunctionDefinition : public Error {
public:
    NoFunctionDefinition() : Error("code block defines no function") {}
};

class NameMismatch : public Error {
public:
    NameMismatch(std::string expected, std::string found)
        : Error("expected function '" + expected + "', reply defines '" + found + "'"),
          expected_(std::move(expected)),
          found_(std::move(found)) {}
    const std::string& expected() const { return expected_; }
    const std::string& found() const { return found_; }

private:
    std::string expected_;
    std::string found_;
};

class EmptySuite : public Error {
public:
    EmptySuite() : Error("generated test block contains no assertions") {}
};

// ---- orchestrator -----------------------------------------------------

class DecompositionFailed : public Error {
public:
    using Error::Error;
};

class NodeFailed : public Error {
public:
    NodeFailed(std::string node_id, std::string last_report)
        : Error("node " + node_id + " failed after exhausting attempts; last report: " + last_report),
          node_id_(std::move(node_id)) {}
    const std::string& node_id() const { return node_id_; }

private:
    std::string node_id_;
};

class DuplicateDefinition : public Error {
public:
    DuplicateDefinition(const std::string& name, const std::vector<std::string>& node_ids)
        : Error(make_message(name, node_ids)) {}

private:
    static std::string make_message(const std::string& name, const std::vector<std::string>& ids) {
        std::string out = "duplicate top-level definition of '" + name + "' in nodes:";
        for (const auto& id : ids) out += " " + id;
        return out;
    }
};

class BudgetExhausted : public Error {
public:
    using Error::Error;
};

// ---- sandbox ----------------------------------------------------------

class SandboxUnavailable : public Error {
public:
    using Error::Error;
};

// ---- bench ------------------------------------------------------------

class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line_no, const std::string& reason)
        : Error("malformed record at line " + std::to_string(line_no) + ": " + reason),
          line_no_(line_no) {}
    std::size_t line_no() const { return line_no_; }

private:
    std::size_t line_no_;
};

class MissingField : public Error {
public:
    MissingField(std::size_t line_no, std::string field)
        : Error("record at line " + std::to_string(line_no) + " is missing field '" + field + "'"),
          field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class DomainError : public Error {
public:
    using Error::Error;
};

// ---- config -----------------------------------------------------------

class UnknownKey : public Error {
public:
    explicit UnknownKey(std::string name)
        : Error("unknown configuration key: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class MissingRequired : public Error {
public:
    MissingRequired(std::string name, const std::string& mode)
        : Error("configuration key '" + name + "' is required in " + mode + " mode"),
          name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

}  // namespace treegen
