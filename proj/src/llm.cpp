#include "treegen/llm.hpp"

#include <chrono>
#include <cstdint>
#include <thread>

#include "treegen/errors.hpp"

#include "httplib.h"

namespace treegen {

const char* role_name(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "?";
}

void validate_request(const ChatRequest& request) {
    if (request.messages.empty()) throw Error("chat request has no messages");
    if (request.messages.front().role != Role::system)
        throw Error("first chat message must have role system");
    if (request.temperature < 0) throw Error("temperature must be >= 0");
    if (request.max_tokens < 1) throw Error("max_tokens must be positive");
}

const char* finish_reason_name(FinishReason reason) {
    switch (reason) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "?";
}

FinishReason finish_reason_from_name(const std::string& name) {
    if (name == "stop") return FinishReason::stop;
    if (name == "length") return FinishReason::length;
    return FinishReason::error;
}

std::string canonical_encoding(const ChatRequest& request) {
    // nlohmann::json stores object keys sorted, so dump() gives one fixed
    // byte encoding regardless of insertion or wire order.
    nlohmann::json j;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : request.messages)
        msgs.push_back({{"content", m.content}, {"role", role_name(m.role)}});
    j["messages"] = std::move(msgs);
    j["temperature"] = request.temperature;
    j["max_tokens"] = request.max_tokens;
    j["model_name"] = request.model_name;
    j["request_tag"] = request.request_tag;
    return j.dump();
}

std::string request_fingerprint(const ChatRequest& request) {
    const std::string bytes = canonical_encoding(request);
    std::uint64_t hash = 14695981039346656037ULL;  // FNV-1a 64-bit
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string hex(16, '0');
    for (int i = 15; i >= 0; --i) {
        hex[i] = digits[hash & 0xf];
        hash >>= 4;
    }
    return hex;
}

// ---- transcript --------------------------------------------------------

namespace {

nlohmann::json response_to_json(const ChatResponse& response) {
    return {{"content", response.content},
            {"finish_reason", finish_reason_name(response.finish_reason)},
            {"usage",
             {{"prompt_tokens", response.usage.prompt_tokens},
              {"completion_tokens", response.usage.completion_tokens}}}};
}

ChatResponse response_from_json(const nlohmann::json& j) {
    ChatResponse response;
    response.content = j.at("content").get<std::string>();
    response.finish_reason = finish_reason_from_name(j.at("finish_reason").get<std::string>());
    if (j.contains("usage")) {
        response.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        response.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
    }
    return response;
}

}  // namespace

std::string Transcript::entry_to_line(const Entry& entry) {
    nlohmann::json j;
    j["fingerprint"] = entry.fingerprint;
    j["request_tag"] = entry.request_tag;
    j["response"] = response_to_json(entry.response);
    return j.dump();
}

Transcript Transcript::load(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw Error("cannot open transcript: " + source.string());

    Transcript t;
    std::string line;
    std::size_t line_no = 0;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw CorruptTranscript(line_no, line_start, "not valid JSON");
        Entry entry;
        try {
            entry.fingerprint = j.at("fingerprint").get<std::string>();
            entry.request_tag = j.value("request_tag", "");
            entry.response = response_from_json(j.at("response"));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptTranscript(line_no, line_start, e.what());
        }
        if (!t.add(std::move(entry)))
            throw CorruptTranscript(line_no, line_start, "duplicate fingerprint");
    }
    return t;
}

bool Transcript::add(Entry entry) {
    auto [it, inserted] = index_.emplace(entry.fingerprint, entries_.size());
    if (!inserted) return false;
    entries_.push_back(std::move(entry));
    return true;
}

const ChatResponse* Transcript::find(const std::string& fingerprint) const {
    auto it = index_.find(fingerprint);
    if (it == index_.end()) return nullptr;
    return &entries_[it->second].response;
}

// ---- live transport ----------------------------------------------------

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_endpoint(const std::string& url) {
    std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw TransportError("endpoint URL lacks a scheme: " + url);
    std::size_t slash = url.find('/', scheme + 3);
    SplitUrl out;
    if (slash == std::string::npos) {
        out.base = url;
        out.path = "";
    } else {
        out.base = url.substr(0, slash);
        out.path = url.substr(slash);
    }
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    // Accept either a base URL (".../v1") or the full completions URL.
    const std::string suffix = "/chat/completions";
    if (out.path.size() < suffix.size() ||
        out.path.compare(out.path.size() - suffix.size(), suffix.size(), suffix) != 0)
        out.path += suffix;
    return out;
}

}  // namespace

HttpTransport::HttpTransport(HttpTransportOptions options) : options_(std::move(options)) {
    if (options_.endpoint_url.empty()) throw TransportError("endpoint URL not configured");
}

ChatResponse HttpTransport::complete(const ChatRequest& request) {
    validate_request(request);
    const SplitUrl url = split_endpoint(options_.endpoint_url);

    nlohmann::json body;
    body["model"] = request.model_name;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    body["n"] = 1;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : request.messages)
        msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    body["messages"] = std::move(msgs);
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!options_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + options_.api_key);

    std::string last_fault;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(options_.retry_base_delay_ms << (attempt - 1)));
        }
        httplib::Client client(url.base);
        client.set_connection_timeout(options_.connect_timeout_seconds, 0);
        client.set_read_timeout(options_.read_timeout_seconds, 0);
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_fault = "connection fault: " + httplib::to_string(res.error());
            continue;  // transient
        }
        if (res->status >= 500) {
            last_fault = "HTTP " + std::to_string(res->status);
            continue;  // transient
        }
        if (res->status != 200)
            throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                 res->body.substr(0, 500));

        nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
            throw TransportError("endpoint returned an unparseable completion body");
        const nlohmann::json& choice = j["choices"][0];

        ChatResponse response;
        response.finish_reason =
            finish_reason_from_name(choice.value("finish_reason", "stop"));
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string())
            response.content = choice["message"]["content"].get<std::string>();
        if (j.contains("usage")) {
            response.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
            response.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
        }
        if (response.finish_reason == FinishReason::error || response.content.empty())
            throw ModelRefusal("model returned no usable content (finish_reason=" +
                               std::string(finish_reason_name(response.finish_reason)) + ")");
        return response;
    }
    throw TransportError("endpoint unreachable after " + std::to_string(options_.max_retries + 1) +
                         " attempts; last fault: " + last_fault);
}

// ---- replay / record ---------------------------------------------------

ReplayTransport::ReplayTransport(Transcript transcript) : transcript_(std::move(transcript)) {}

ChatResponse ReplayTransport::complete(const ChatRequest& request) {
    validate_request(request);
    const std::string fp = request_fingerprint(request);
    const ChatResponse* found = transcript_.find(fp);
    if (!found) throw ReplayMiss(fp, request.request_tag);
    if (found->finish_reason == FinishReason::error)
        throw ModelRefusal("recorded response has finish_reason=error");
    return *found;
}

RecordingTransport::RecordingTransport(std::unique_ptr<Transport> inner,
                                       const std::filesystem::path& sink)
    : inner_(std::move(inner)), sink_(sink, std::ios::binary | std::ios::trunc) {
    if (!sink_) throw Error("cannot open transcript sink: " + sink.string());
}

ChatResponse RecordingTransport::complete(const ChatRequest& request) {
    // Any retries happen inside the wrapped transport, so a retried call
    // reaches this point once, on success.
    ChatResponse response = inner_->complete(request);
    const std::string fp = request_fingerprint(request);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        Transcript::Entry entry{fp, request.request_tag, response};
        if (seen_.add(entry)) {
            sink_ << Transcript::entry_to_line(entry) << '\n';
            sink_.flush();
        }
    }
    return response;
}

std::unique_ptr<Transport> replay_session(const std::filesystem::path& source) {
    return std::make_unique<ReplayTransport>(Transcript::load(source));
}

std::unique_ptr<Transport> record_session(std::unique_ptr<Transport> inner,
                                          const std::filesystem::path& sink) {
    return std::make_unique<RecordingTransport>(std::move(inner), sink);
}

}  // namespace treegen
