#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace treegen {

enum class Role { system, user, assistant };

const char* role_name(Role role);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

// One chat-completion call. `request_tag` labels the agent kind making the
// call (generalist/code/critic/tester) and is part of the fingerprint.
struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.2;
    int max_tokens = 2048;
    std::string model_name;
    std::string request_tag;
};

// Throws Error when request invariants are broken (no messages, first
// message not system, negative temperature).
void validate_request(const ChatRequest& request);

enum class FinishReason { stop, length, error };

const char* finish_reason_name(FinishReason reason);
FinishReason finish_reason_from_name(const std::string& name);

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ChatResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::stop;
    Usage usage;
};

// Canonical byte encoding of a request: JSON with sorted keys and no
// whitespace. Two requests that differ only in wire key order encode
// identically.
std::string canonical_encoding(const ChatRequest& request);

// Stable 64-bit FNV-1a hash of the canonical encoding, as 16 hex digits.
// Invariant across platforms and re-encodings; changes when any message,
// the temperature, max_tokens, model or tag changes.
std::string request_fingerprint(const ChatRequest& request);

// Recorded (fingerprint, response) pairs; newline-delimited JSON on disk,
// one entry per line. Fingerprints are unique within a transcript.
class Transcript {
public:
    struct Entry {
        std::string fingerprint;
        std::string request_tag;
        ChatResponse response;
    };

    static Transcript load(const std::filesystem::path& source);

    // False when the fingerprint is already present (entry not added).
    bool add(Entry entry);

    const ChatResponse* find(const std::string& fingerprint) const;
    const std::vector<Entry>& entries() const { return entries_; }

    static std::string entry_to_line(const Entry& entry);

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

struct HttpTransportOptions {
    std::string endpoint_url;  // base URL or full .../chat/completions URL
    std::string api_key;       // empty = no Authorization header
    int max_retries = 3;       // on transport faults and HTTP >= 500
    int connect_timeout_seconds = 10;
    int read_timeout_seconds = 300;
    int retry_base_delay_ms = 500;  // doubles per retry
};

// Live OpenAI-compatible chat-completions client. Safe for concurrent
// calls (one connection per call).
class HttpTransport : public Transport {
public:
    explicit HttpTransport(HttpTransportOptions options);
    ChatResponse complete(const ChatRequest& request) override;

private:
    HttpTransportOptions options_;
};

// Serves recorded responses by request fingerprint; read-only and freely
// concurrent. Throws ReplayMiss for unknown fingerprints.
class ReplayTransport : public Transport {
public:
    explicit ReplayTransport(Transcript transcript);
    ChatResponse complete(const ChatRequest& request) override;

private:
    Transcript transcript_;
};

// Wraps a live transport and appends each (fingerprint, response) pair to
// a sink file. A request whose fingerprint was already recorded is not
// re-appended. Appends are serialized internally.
class RecordingTransport : public Transport {
public:
    RecordingTransport(std::unique_ptr<Transport> inner, const std::filesystem::path& sink);
    ChatResponse complete(const ChatRequest& request) override;

private:
    std::unique_ptr<Transport> inner_;
    std::ofstream sink_;
    Transcript seen_;
    std::mutex mutex_;
};

std::unique_ptr<Transport> replay_session(const std::filesystem::path& source);
std::unique_ptr<Transport> record_session(std::unique_ptr<Transport> inner,
                                          const std::filesystem::path& sink);

}  // namespace treegen
