#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tasr/error.hpp"

namespace tasr {

struct LlmRequest {
    RoleTag role = RoleTag::Answer;
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;  // the gateway forces 0 on every outbound request
};

struct LlmResponse {
    std::string raw;
    nlohmann::json parsed;
};

// Transport to a model. Returns the raw assistant message content.
// Transport failures throw LlmError(LlmUnavailable).
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const LlmRequest& request) = 0;
};

// OpenAI-style POST {base}/v1/chat/completions. Retries transport failures
// up to `transport_retries` times with a fixed backoff.
class HttpChatBackend final : public LlmBackend {
public:
    HttpChatBackend(std::string base_url, std::string model, std::string api_key,
                    int transport_retries = 2, std::chrono::milliseconds backoff = std::chrono::seconds(1));

    std::string complete(const LlmRequest& request) override;

    static nlohmann::json request_body(const LlmRequest& request, const std::string& model);

private:
    std::string base_url_;
    std::string model_;
    std::string api_key_;
    int transport_retries_;
    std::chrono::milliseconds backoff_;
};

// Deterministic backend driven by a list of (role, substring(s)) -> canned
// response rules. The first declared matching rule wins; no match throws
// Error(MockMiss) quoting the prompt.
class ScriptedMock final : public LlmBackend {
public:
    struct Rule {
        RoleTag role;
        std::vector<std::string> contains;  // all must occur in the user prompt
        std::string response;               // raw text returned verbatim
    };

    ScriptedMock() = default;
    explicit ScriptedMock(std::vector<Rule> rules) : rules_(std::move(rules)) {}

    // Script JSON: {"rules": [{"role": "answer", "contains": str | [str],
    //                          "response": <json value or raw string>}, ...]}.
    // A string response is returned as-is; anything else is serialized.
    static ScriptedMock from_json(const nlohmann::json& script);
    static ScriptedMock from_file(const std::filesystem::path& path);

    void add(RoleTag role, std::vector<std::string> contains, std::string response);
    void add(RoleTag role, std::string contains, const nlohmann::json& response);

    std::string complete(const LlmRequest& request) override;

    std::size_t size() const noexcept { return rules_.size(); }

private:
    std::vector<Rule> rules_;
};

// Decorator that records every request passing through it.
class RecordingBackend final : public LlmBackend {
public:
    explicit RecordingBackend(std::shared_ptr<LlmBackend> inner) : inner_(std::move(inner)) {}

    std::string complete(const LlmRequest& request) override;

    std::vector<LlmRequest> requests() const;
    std::size_t count() const;
    std::size_t count(RoleTag role) const;
    void clear();

private:
    std::shared_ptr<LlmBackend> inner_;
    mutable std::mutex mutex_;
    std::vector<LlmRequest> requests_;
};

// Builds a backend from an endpoint spec: "mock:<script.json>" or an HTTP
// base URL (model and key from arguments).
std::shared_ptr<LlmBackend> make_llm_backend(const std::string& endpoint, const std::string& model,
                                             const std::string& api_key);

// Removes a surrounding ``` / ```json fence if present.
std::string strip_code_fences(const std::string& raw);

inline constexpr std::string_view kJsonOnlyReminder =
    "\n\nRespond with JSON only: a single JSON object, no prose, no code fences.";

// Single choke point for LLM calls.
class LlmGateway {
public:
    // Returns an empty string when the parsed JSON is acceptable, otherwise a
    // short description of what is wrong with it.
    using Validator = std::function<std::string(const nlohmann::json&)>;

    explicit LlmGateway(std::shared_ptr<LlmBackend> backend);

    // Sends the request at temperature 0 and parses the reply as JSON after
    // stripping code fences. A reply that does not parse (or that `validate`
    // rejects) triggers one retry with a JSON-only reminder appended; a second
    // failure throws LlmError(LlmProtocolError).
    LlmResponse chat_complete(LlmRequest request, const Validator& validate = {});

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::shared_ptr<LlmBackend> backend_;
    std::atomic<std::size_t> calls_{0};
};

}  // namespace tasr
