#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>

#include "support.hpp"
#include "treegen/errors.hpp"
#include "treegen/llm.hpp"

using namespace treegen;

namespace {

ChatRequest sample_request() {
    ChatRequest request;
    request.messages = {{Role::system, "You plan things."}, {Role::user, "Plan this."}};
    request.temperature = 0.7;
    request.max_tokens = 128;
    request.model_name = "m1";
    request.request_tag = "generalist";
    return request;
}

std::filesystem::path temp_file(const std::string& stem) {
    return std::filesystem::temp_directory_path() / (stem + "-" + std::to_string(::getpid()) + ".ndjson");
}

}  // namespace

TEST_CASE("fingerprints are 16 lowercase hex digits and deterministic") {
    const std::string fp = request_fingerprint(sample_request());
    CHECK(fp.size() == 16);
    for (char c : fp) CHECK((std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f')));
    CHECK(request_fingerprint(sample_request()) == fp);
}

TEST_CASE("every request field participates in the fingerprint") {
    const std::string base = request_fingerprint(sample_request());

    ChatRequest r = sample_request();
    r.messages[1].content += "!";
    CHECK(request_fingerprint(r) != base);

    r = sample_request();
    r.messages.push_back({Role::assistant, "ok"});
    CHECK(request_fingerprint(r) != base);

    r = sample_request();
    r.temperature = 0.2;
    CHECK(request_fingerprint(r) != base);

    r = sample_request();
    r.max_tokens = 129;
    CHECK(request_fingerprint(r) != base);

    r = sample_request();
    r.model_name = "m2";
    CHECK(request_fingerprint(r) != base);

    r = sample_request();
    r.request_tag = "critic";
    CHECK(request_fingerprint(r) != base);
}

TEST_CASE("canonical encoding is sorted-key JSON with no whitespace") {
    const std::string encoded = canonical_encoding(sample_request());
    const std::string want =
        R"({"max_tokens":128,"messages":[{"content":"You plan things.","role":"system"},)"
        R"({"content":"Plan this.","role":"user"}],"model_name":"m1",)"
        R"("request_tag":"generalist","temperature":0.7})";
    CHECK(encoded == want);
}

TEST_CASE("validate_request rejects malformed requests") {
    CHECK_NOTHROW(validate_request(sample_request()));

    ChatRequest r = sample_request();
    r.messages.clear();
    CHECK_THROWS_AS(validate_request(r), Error);

    r = sample_request();
    r.messages[0].role = Role::user;
    CHECK_THROWS_AS(validate_request(r), Error);

    r = sample_request();
    r.temperature = -0.1;
    CHECK_THROWS_AS(validate_request(r), Error);

    r = sample_request();
    r.max_tokens = 0;
    CHECK_THROWS_AS(validate_request(r), Error);
}

TEST_CASE("transcript add/find dedups by fingerprint") {
    Transcript t;
    Transcript::Entry e{"aaaa000011112222", "code", {"hello", FinishReason::stop, {3, 4}}};
    CHECK(t.add(e));
    CHECK_FALSE(t.add(e));
    REQUIRE(t.find("aaaa000011112222") != nullptr);
    CHECK(t.find("aaaa000011112222")->content == "hello");
    CHECK(t.find("ffff000011112222") == nullptr);
    CHECK(t.entries().size() == 1);
}

TEST_CASE("transcript survives a disk round-trip") {
    const auto path = temp_file("transcript-roundtrip");
    {
        std::ofstream out(path, std::ios::binary);
        Transcript::Entry a{"0123456789abcdef", "generalist", {"plan text", FinishReason::stop, {10, 20}}};
        Transcript::Entry b{"fedcba9876543210", "critic", {"VERDICT: APPROVE", FinishReason::length, {1, 2}}};
        out << Transcript::entry_to_line(a) << '\n' << Transcript::entry_to_line(b) << '\n';
    }
    const Transcript t = Transcript::load(path);
    REQUIRE(t.entries().size() == 2);
    CHECK(t.entries()[0].request_tag == "generalist");
    REQUIRE(t.find("fedcba9876543210") != nullptr);
    CHECK(t.find("fedcba9876543210")->finish_reason == FinishReason::length);
    CHECK(t.find("fedcba9876543210")->usage.prompt_tokens == 1);
    CHECK(t.find("0123456789abcdef")->content == "plan text");
    std::filesystem::remove(path);
}

TEST_CASE("corrupt transcripts report line and byte offset") {
    const auto path = temp_file("transcript-corrupt");
    {
        std::ofstream out(path, std::ios::binary);
        Transcript::Entry a{"0123456789abcdef", "code", {"x", FinishReason::stop, {}}};
        out << Transcript::entry_to_line(a) << '\n' << "{not json}\n";
    }
    try {
        Transcript::load(path);
        FAIL("expected CorruptTranscript");
    } catch (const CorruptTranscript& e) {
        CHECK(e.line_no() == 2);
        CHECK(e.byte_offset() > 0);
    }
    std::filesystem::remove(path);

    SUBCASE("duplicate fingerprints are corruption") {
        const auto dup_path = temp_file("transcript-dup");
        {
            std::ofstream out(dup_path, std::ios::binary);
            Transcript::Entry a{"0123456789abcdef", "code", {"x", FinishReason::stop, {}}};
            out << Transcript::entry_to_line(a) << '\n' << Transcript::entry_to_line(a) << '\n';
        }
        CHECK_THROWS_AS(Transcript::load(dup_path), CorruptTranscript);
        std::filesystem::remove(dup_path);
    }

    SUBCASE("missing fields are corruption") {
        const auto bad_path = temp_file("transcript-missing-field");
        {
            std::ofstream out(bad_path, std::ios::binary);
            out << R"({"fingerprint":"0123456789abcdef","request_tag":"code"})" << '\n';
        }
        CHECK_THROWS_AS(Transcript::load(bad_path), CorruptTranscript);
        std::filesystem::remove(bad_path);
    }
}

TEST_CASE("replay serves recorded responses and misses loudly") {
    Transcript t;
    const ChatRequest request = sample_request();
    const std::string fp = request_fingerprint(request);
    t.add({fp, request.request_tag, {"recorded reply", FinishReason::stop, {5, 6}}});
    ReplayTransport replay(std::move(t));

    const ChatResponse response = replay.complete(request);
    CHECK(response.content == "recorded reply");
    CHECK(response.usage.completion_tokens == 6);

    ChatRequest other = sample_request();
    other.messages[1].content = "Different.";
    try {
        replay.complete(other);
        FAIL("expected ReplayMiss");
    } catch (const ReplayMiss& e) {
        CHECK(e.fingerprint() == request_fingerprint(other));
        CHECK(std::string(e.what()).find("request_tag=generalist") != std::string::npos);
    }
}

TEST_CASE("replay surfaces recorded refusals as ModelRefusal") {
    Transcript t;
    const ChatRequest request = sample_request();
    t.add({request_fingerprint(request), request.request_tag, {"", FinishReason::error, {}}});
    ReplayTransport replay(std::move(t));
    CHECK_THROWS_AS(replay.complete(request), ModelRefusal);
}

TEST_CASE("recording writes each distinct request once and is replayable") {
    const auto path = temp_file("transcript-record");
    auto scripted = std::make_unique<test::ScriptedTransport>(
        std::vector<std::string>{"first reply", "first reply", "second reply"});
    {
        RecordingTransport recorder(std::move(scripted), path);
        ChatRequest a = sample_request();
        ChatRequest b = sample_request();
        b.messages[1].content = "Another prompt.";
        CHECK(recorder.complete(a).content == "first reply");
        CHECK(recorder.complete(a).content == "first reply");  // duplicate fingerprint
        CHECK(recorder.complete(b).content == "second reply");
    }
    const Transcript t = Transcript::load(path);
    CHECK(t.entries().size() == 2);

    auto replay = replay_session(path);
    CHECK(replay->complete(sample_request()).content == "first reply");
    std::filesystem::remove(path);
}
