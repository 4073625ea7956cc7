#include "mdt/llm.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mdt/http_vendor.hpp"

namespace mdt {

using json = nlohmann::json;

void validate_chat_request(const ChatRequest& req) {
    if (req.system_prompt.empty()) throw std::invalid_argument("chat request system prompt empty");
    if (req.user_prompt.empty()) throw std::invalid_argument("chat request user prompt empty");
    if (req.temperature < 0.0 || req.temperature > 2.0)
        throw std::invalid_argument("chat request temperature out of [0,2]");
    if (req.max_tokens <= 0) throw std::invalid_argument("chat request max_tokens must be positive");
}

// ── Scripted mock ──────────────────────────────────────────────

std::string MockScript::lookup(const RequestTag& tag, const std::string& user_prompt) const {
    const std::string round = std::to_string(tag.round);
    const std::string keys[] = {
        tag.case_id + "/" + tag.role + "/" + round,
        tag.role + "/" + round,
        tag.role,
    };
    for (const std::string& key : keys) {
        auto it = entries_.find(key);
        if (it == entries_.end()) continue;
        const MockReply& r = it->second;
        if (r.if_prompt_contains.empty()) return r.then;
        return user_prompt.find(r.if_prompt_contains) != std::string::npos ? r.then : r.otherwise;
    }
    return fallback_;
}

MockScript MockScript::from_json_text(const std::string& text) {
    json j = json::parse(text);
    MockScript script;
    if (j.contains("fallback")) script.set_fallback(j["fallback"].get<std::string>());
    if (j.contains("script")) {
        for (const auto& [key, value] : j["script"].items()) {
            if (value.is_string()) {
                script.add_text(key, value.get<std::string>());
            } else {
                script.add(key, MockReply::conditional(value.at("if_prompt_contains").get<std::string>(),
                                                       value.at("then").get<std::string>(),
                                                       value.value("else", std::string{})));
            }
        }
    }
    return script;
}

MockScript MockScript::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mock script: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string MockScript::to_json_text() const {
    json out;
    out["fallback"] = fallback_;
    json entries = json::object();
    for (const auto& [key, reply] : entries_) {
        if (reply.if_prompt_contains.empty()) {
            entries[key] = reply.then;
        } else {
            entries[key] = {{"if_prompt_contains", reply.if_prompt_contains},
                            {"then", reply.then},
                            {"else", reply.otherwise}};
        }
    }
    out["script"] = entries;
    return out.dump(2);
}

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

MockBackend::MockBackend(MockScript script, size_t embed_dim)
    : script_(std::move(script)), embed_dim_(embed_dim) {
    if (embed_dim_ == 0) throw std::invalid_argument("mock embedding dimension must be positive");
}

std::string MockBackend::chat(const ChatRequest& request) {
    validate_chat_request(request);
    {
        std::lock_guard<std::mutex> lock(mu_);
        requests_.push_back({request.tag, request.system_prompt, request.user_prompt});
    }
    return script_.lookup(request.tag, request.user_prompt);
}

EmbeddingVector MockBackend::embed(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("cannot embed empty text");
    uint64_t state = fnv1a64(text);
    std::vector<double> v(embed_dim_);
    double norm_sq = 0.0;
    for (double& x : v) {
        // uniform in [-1, 1)
        x = static_cast<double>(splitmix64(state)) / 9223372036854775808.0 - 1.0;
        norm_sq += x * x;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    else
        v[0] = 1.0;
    return EmbeddingVector{std::move(v), "mock-embed"};
}

std::vector<RecordedRequest> MockBackend::recorded_requests() const {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
}

void MockBackend::clear_recorded_requests() {
    std::lock_guard<std::mutex> lock(mu_);
    requests_.clear();
}

// ── Live OpenAI-compatible client ──────────────────────────────

void LiveBackendConfig::apply_env() {
    if (const char* key = std::getenv("MDT_API_KEY")) api_key = key;
    if (const char* url = std::getenv("MDT_BASE_URL")) base_url = url;
}

std::string chat_request_body(const ChatRequest& request) {
    nlohmann::ordered_json body;
    body["model"] = request.model_name;
    body["messages"] = nlohmann::ordered_json::array(
        {{{"role", "system"}, {"content", request.system_prompt}},
         {{"role", "user"}, {"content", request.user_prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    return body.dump();
}

std::string embedding_request_body(const std::string& model, const std::string& text) {
    nlohmann::ordered_json body;
    body["model"] = model;
    body["input"] = text;
    return body.dump();
}

namespace {

// "http://host:port/prefix" -> ("http://host:port", "/prefix")
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const size_t scheme_end = base_url.find("://");
    const size_t path_start =
        base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

} // namespace

OpenAiClient::OpenAiClient(LiveBackendConfig config) : config_(std::move(config)) {
    std::tie(host_origin_, path_prefix_) = split_base_url(config_.base_url);
}

std::string OpenAiClient::post_json(const std::string& path, const std::string& body) {
    struct GateGuard {
        OpenAiClient& c;
        explicit GateGuard(OpenAiClient& client) : c(client) {
            std::unique_lock<std::mutex> lock(c.gate_mu_);
            c.gate_cv_.wait(lock, [&] { return c.inflight_ < c.config_.max_inflight; });
            ++c.inflight_;
        }
        ~GateGuard() {
            {
                std::lock_guard<std::mutex> lock(c.gate_mu_);
                --c.inflight_;
            }
            c.gate_cv_.notify_one();
        }
    } gate(*this);

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    std::mt19937_64 jitter(std::random_device{}());
    std::string last_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) {
            const int64_t base = static_cast<int64_t>(config_.backoff_base_ms) << (attempt - 1);
            const int64_t delay = base + static_cast<int64_t>(jitter() % (static_cast<uint64_t>(base) + 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }

        httplib::Client client(host_origin_);
        client.set_connection_timeout(config_.timeout_s);
        client.set_read_timeout(config_.timeout_s);
        auto res = client.Post(path_prefix_ + path, headers, body, "application/json");

        if (!res) {
            last_error = "connection failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw BackendError(BackendError::Kind::Auth,
                               "authentication rejected (HTTP " + std::to_string(res->status) + ")");
        if (res->status == 429) {
            last_error = "rate limited (HTTP 429)";
            if (attempt + 1 == config_.max_attempts)
                throw BackendError(BackendError::Kind::RateLimited,
                                   last_error + " after " + std::to_string(config_.max_attempts) +
                                       " attempts");
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error (HTTP " + std::to_string(res->status) + ")";
            continue;
        }
        if (res->status != 200)
            throw BackendError(BackendError::Kind::BadResponse,
                               "unexpected HTTP " + std::to_string(res->status) + ": " + res->body);
        return res->body;
    }
    throw BackendError(BackendError::Kind::Transport,
                       last_error + " after " + std::to_string(config_.max_attempts) + " attempts");
}

std::string OpenAiClient::chat(const ChatRequest& request) {
    validate_chat_request(request);
    ChatRequest req = request;
    if (req.model_name.empty()) req.model_name = config_.chat_model;
    const std::string body = post_json("/v1/chat/completions", chat_request_body(req));
    try {
        json j = json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::BadResponse,
                           std::string("malformed chat completion body: ") + e.what());
    }
}

EmbeddingVector OpenAiClient::embed(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("cannot embed empty text");
    const std::string body = post_json("/v1/embeddings", embedding_request_body(config_.embed_model, text));
    try {
        json j = json::parse(body);
        EmbeddingVector v;
        v.model_name = config_.embed_model;
        for (const auto& x : j.at("data").at(0).at("embedding")) {
            const double value = x.get<double>();
            if (!std::isfinite(value))
                throw BackendError(BackendError::Kind::BadResponse, "non-finite embedding value");
            v.values.push_back(value);
        }
        if (v.values.empty())
            throw BackendError(BackendError::Kind::BadResponse, "embedding body holds no values");
        return v;
    } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::BadResponse,
                           std::string("malformed embedding body: ") + e.what());
    }
}

} // namespace mdt
