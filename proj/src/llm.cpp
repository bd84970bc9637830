#include "tasr/llm.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "http_util.hpp"
#include "tasr/types.hpp"

namespace tasr {

HttpChatBackend::HttpChatBackend(std::string base_url, std::string model, std::string api_key,
                                 int transport_retries, std::chrono::milliseconds backoff)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      api_key_(std::move(api_key)),
      transport_retries_(transport_retries),
      backoff_(backoff) {}

nlohmann::json HttpChatBackend::request_body(const LlmRequest& request, const std::string& model) {
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system_prompt.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    }
    messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
    return {{"model", model}, {"messages", messages}, {"temperature", request.temperature}};
}

std::string HttpChatBackend::complete(const LlmRequest& request) {
    auto [origin, prefix] = split_url(base_url_);
    std::string path = prefix;
    if (path.find("/chat/completions") == std::string::npos) path += "/v1/chat/completions";

    const std::string body = request_body(request, model_).dump();
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 0; attempt <= transport_retries_; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(backoff_);
        httplib::Client client(origin);
        client.set_read_timeout(300, 0);
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw LlmError(ErrorKind::LlmUnavailable, request.role,
                           "HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw LlmError(ErrorKind::LlmUnavailable, request.role,
                           std::string("malformed chat completion envelope: ") + e.what());
        }
    }
    throw LlmError(ErrorKind::LlmUnavailable, request.role,
                   "POST " + origin + path + " failed: " + last_error);
}

ScriptedMock ScriptedMock::from_json(const nlohmann::json& script) {
    ScriptedMock mock;
    try {
        for (const auto& rule : script.at("rules")) {
            std::vector<std::string> contains;
            const auto& c = rule.at("contains");
            if (c.is_string()) contains.push_back(c.get<std::string>());
            else contains = c.get<std::vector<std::string>>();
            const auto& r = rule.at("response");
            mock.add(role_from_string(rule.at("role").get<std::string>()), std::move(contains),
                     r.is_string() ? r.get<std::string>() : r.dump());
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("mock script: ") + e.what());
    }
    return mock;
}

ScriptedMock ScriptedMock::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open mock script " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError, "mock script " + path.string() + ": " + e.what());
    }
}

void ScriptedMock::add(RoleTag role, std::vector<std::string> contains, std::string response) {
    rules_.push_back({role, std::move(contains), std::move(response)});
}

void ScriptedMock::add(RoleTag role, std::string contains, const nlohmann::json& response) {
    add(role, std::vector<std::string>{std::move(contains)},
        response.is_string() ? response.get<std::string>() : response.dump());
}

std::string ScriptedMock::complete(const LlmRequest& request) {
    for (const auto& rule : rules_) {
        if (rule.role != request.role) continue;
        bool all = true;
        for (const auto& needle : rule.contains) {
            if (request.user_prompt.find(needle) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (all) return rule.response;
    }
    throw LlmError(ErrorKind::MockMiss, request.role,
                   "no scripted response for prompt:\n" + request.user_prompt);
}

std::string RecordingBackend::complete(const LlmRequest& request) {
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
    }
    return inner_->complete(request);
}

std::vector<LlmRequest> RecordingBackend::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::size_t RecordingBackend::count() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
}

std::size_t RecordingBackend::count(RoleTag role) const {
    std::lock_guard lock(mutex_);
    std::size_t n = 0;
    for (const auto& r : requests_) n += (r.role == role);
    return n;
}

void RecordingBackend::clear() {
    std::lock_guard lock(mutex_);
    requests_.clear();
}

std::shared_ptr<LlmBackend> make_llm_backend(const std::string& endpoint, const std::string& model,
                                             const std::string& api_key) {
    if (endpoint.rfind("mock:", 0) == 0) {
        return std::make_shared<ScriptedMock>(ScriptedMock::from_file(endpoint.substr(5)));
    }
    return std::make_shared<HttpChatBackend>(endpoint, model, api_key);
}

std::string strip_code_fences(const std::string& raw) {
    std::string s = trim(raw);
    if (s.rfind("```", 0) != 0) return s;
    auto first_nl = s.find('\n');
    if (first_nl == std::string::npos) return s;
    auto close = s.rfind("```");
    if (close == std::string::npos || close <= first_nl) return trim(s.substr(first_nl + 1));
    return trim(s.substr(first_nl + 1, close - first_nl - 1));
}

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend) : backend_(std::move(backend)) {
    if (!backend_) throw Error(ErrorKind::LlmUnavailable, "no LLM backend configured");
}

LlmResponse LlmGateway::chat_complete(LlmRequest request, const Validator& validate) {
    request.temperature = 0.0;
    std::string problem;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt == 1) request.user_prompt += kJsonOnlyReminder;
        ++calls_;
        std::string raw = backend_->complete(request);
        nlohmann::json parsed = nlohmann::json::parse(strip_code_fences(raw), nullptr, false);
        if (parsed.is_discarded()) {
            problem = "reply is not valid JSON";
            continue;
        }
        if (validate) {
            problem = validate(parsed);
            if (!problem.empty()) continue;
        }
        return {std::move(raw), std::move(parsed)};
    }
    throw LlmError(ErrorKind::LlmProtocolError, request.role, problem + " (after one retry)");
}

}  // namespace tasr
