#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mdt/errors.hpp"

namespace mdt {

// Routing metadata for scripted/mock backends and request logs. Never sent
// over the wire by the live client.
struct RequestTag {
    std::string case_id;
    std::string role;
    int round = 0;
};

struct ChatRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::string model_name;
    RequestTag tag;
};

void validate_chat_request(const ChatRequest& req);

struct EmbeddingVector {
    std::vector<double> values;
    std::string model_name;

    size_t dimension() const { return values.size(); }
};

// ── Backend interface ──────────────────────────────────────────

class Backend {
public:
    virtual ~Backend() = default;

    // Full reply text. Throws BackendError on failure.
    virtual std::string chat(const ChatRequest& request) = 0;

    // Fixed-dimension embedding of the text. Throws BackendError on failure.
    virtual EmbeddingVector embed(const std::string& text) = 0;
};

// ── Scripted mock ──────────────────────────────────────────────

// One scripted reply. When `if_prompt_contains` is set, the reply is `then`
// when the user prompt contains the needle and `otherwise` when it does not.
struct MockReply {
    std::string then;
    std::string if_prompt_contains; // empty = unconditional
    std::string otherwise;

    static MockReply fixed(std::string text) { return MockReply{std::move(text), {}, {}}; }
    static MockReply conditional(std::string needle, std::string then, std::string otherwise) {
        return MockReply{std::move(then), std::move(needle), std::move(otherwise)};
    }
};

// Keyed replies plus a fallback. Lookup precedence for a request tagged
// (case_id, role, round):
//   1. "case_id/role/round"
//   2. "role/round"
//   3. "role"
//   4. fallback
// A pure function of (tag, user prompt); identical requests always get
// identical replies.
class MockScript {
public:
    void add(const std::string& key, MockReply reply) { entries_[key] = std::move(reply); }
    void add_text(const std::string& key, std::string reply) { add(key, MockReply::fixed(std::move(reply))); }
    void set_fallback(std::string reply) { fallback_ = std::move(reply); }
    const std::string& fallback() const { return fallback_; }

    std::string lookup(const RequestTag& tag, const std::string& user_prompt) const;

    // File format: {"fallback": "...", "script": {"<key>": "..." |
    // {"if_prompt_contains": "...", "then": "...", "else": "..."}}}
    static MockScript from_file(const std::string& path);
    static MockScript from_json_text(const std::string& text);
    std::string to_json_text() const;

private:
    std::map<std::string, MockReply> entries_;
    std::string fallback_;
};

struct RecordedRequest {
    RequestTag tag;
    std::string system_prompt;
    std::string user_prompt;
};

// Deterministic offline backend. Chat replies come from the script;
// embeddings are unit vectors drawn from a PRNG seeded by a byte hash of
// the input text (FNV-1a 64 into splitmix64, uniform components, then
// L2-normalized), so equal texts embed equally on every run.
class MockBackend : public Backend {
public:
    explicit MockBackend(MockScript script = {}, size_t embed_dim = 64);

    std::string chat(const ChatRequest& request) override;
    EmbeddingVector embed(const std::string& text) override;

    MockScript& script() { return script_; }

    std::vector<RecordedRequest> recorded_requests() const;
    void clear_recorded_requests();

private:
    MockScript script_;
    size_t embed_dim_;
    mutable std::mutex mu_;
    std::vector<RecordedRequest> requests_;
};

// ── Live OpenAI-compatible client ──────────────────────────────

struct LiveBackendConfig {
    std::string base_url = "https://api.openai.com"; // MDT_BASE_URL overrides
    std::string api_key;                             // MDT_API_KEY overrides
    std::string chat_model = "gpt-4-turbo";
    std::string embed_model = "text-embedding-3-small";
    int max_attempts = 3;
    int backoff_base_ms = 500; // doubled per attempt, with jitter
    int max_inflight = 8;      // global concurrency cap
    int timeout_s = 120;

    // Applies MDT_API_KEY / MDT_BASE_URL when set in the environment.
    void apply_env();
};

// POSTs {base_url}/v1/chat/completions and /v1/embeddings with standard
// OpenAI-compatible JSON bodies. Transient failures (connect errors, 429,
// 5xx) are retried with bounded exponential backoff.
class OpenAiClient : public Backend {
public:
    explicit OpenAiClient(LiveBackendConfig config);

    std::string chat(const ChatRequest& request) override;
    EmbeddingVector embed(const std::string& text) override;

    const LiveBackendConfig& config() const { return config_; }

private:
    std::string post_json(const std::string& path, const std::string& body);

    LiveBackendConfig config_;
    std::string host_origin_;
    std::string path_prefix_;

    // Counting semaphore for the in-flight cap.
    std::mutex gate_mu_;
    std::condition_variable gate_cv_;
    int inflight_ = 0;
};

// Wire bodies, exposed for golden-file tests: the request JSON is part of
// the external interface and must stay schema-stable.
std::string chat_request_body(const ChatRequest& request);
std::string embedding_request_body(const std::string& model, const std::string& text);

// Deterministic 64-bit byte hash used to seed mock embeddings.
uint64_t fnv1a64(const std::string& bytes);

} // namespace mdt
