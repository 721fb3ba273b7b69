#include "nmem/llm.hpp"

#include "nmem/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <thread>

namespace nmem {

using nlohmann::json;

namespace {

// "https://host:port/v1" -> ("https://host:port", "/v1")
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport : public HttpTransport {
public:
    HttpResponse post_json(const std::string& url, const std::string& body,
                           const std::map<std::string, std::string>& headers, double timeout_s) override {
        const auto [origin, path] = split_url(url);
        HttpResponse out;
        try {
            httplib::Client client(origin);
            const auto secs = static_cast<time_t>(timeout_s);
            const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
            client.set_connection_timeout(secs, usecs);
            client.set_read_timeout(secs, usecs);
            client.set_write_timeout(secs, usecs);
            httplib::Headers h;
            for (const auto& [k, v] : headers) h.emplace(k, v);
            auto res = client.Post(path.empty() ? "/" : path, h, body, "application/json");
            if (!res) {
                out.transport_error = true;
                out.timed_out = res.error() == httplib::Error::ConnectionTimeout ||
                                res.error() == httplib::Error::Read;
                out.error = httplib::to_string(res.error());
                return out;
            }
            out.status = res->status;
            out.body = res->body;
        } catch (const std::exception& e) {
            out.transport_error = true;
            out.error = e.what();
        }
        return out;
    }
};

bool transient(const HttpResponse& r) {
    return r.transport_error || r.status == 429 || r.status >= 500;
}

} // namespace

std::unique_ptr<HttpTransport> make_http_transport() {
    return std::make_unique<HttplibTransport>();
}

RemoteBackend::RemoteBackend(BackendConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    config_.validate();
}

std::string RemoteBackend::post_with_retries(const std::string& path, const std::string& body) {
    std::string base = config_.endpoint_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    const std::string url = base + path;

    std::map<std::string, std::string> headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
        headers["Authorization"] = std::string("Bearer ") + key;
    }

    HttpResponse last;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay = config_.retry_base_delay_s * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        last = transport_->post_json(url, body, headers, config_.timeout_s);
        if (!last.transport_error && last.status >= 200 && last.status < 300) return last.body;
        if (!transient(last)) {
            fail(ErrorCode::BackendUnavailable,
                 url + " returned HTTP " + std::to_string(last.status) + ": " + last.body.substr(0, 200));
        }
    }
    const std::string attempts = std::to_string(config_.max_retries + 1) + " attempts";
    if (last.timed_out) fail(ErrorCode::Timeout, url + " timed out after " + attempts);
    const std::string detail = last.transport_error ? last.error : "HTTP " + std::to_string(last.status);
    fail(ErrorCode::BackendUnavailable, url + " unavailable after " + attempts + " (" + detail + ")");
}

ChatResponse RemoteBackend::chat(const ChatRequest& request, const std::string& rendered_prompt) {
    const json body = {{"model", config_.chat_model},
                       {"messages", json::array({{{"role", "user"}, {"content", rendered_prompt}}})},
                       {"temperature", request.temperature},
                       {"max_tokens", request.max_tokens}};
    const auto raw = post_with_retries("/chat/completions", body.dump());
    try {
        const auto j = json::parse(raw);
        ChatResponse resp;
        resp.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            resp.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            resp.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        return resp;
    } catch (const json::exception& e) {
        fail(ErrorCode::BackendUnavailable, std::string("malformed chat response: ") + e.what());
    }
}

std::vector<EmbeddingVector> RemoteBackend::embed(std::span<const std::string> texts) {
    const json body = {{"model", config_.embed_model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto raw = post_with_retries("/embeddings", body.dump());
    try {
        const auto j = json::parse(raw);
        std::vector<EmbeddingVector> out(texts.size());
        for (const auto& item : j.at("data")) {
            const auto index = item.value("index", std::size_t{0});
            if (index >= out.size()) continue;
            out[index] = item.at("embedding").get<EmbeddingVector>();
        }
        return out;
    } catch (const json::exception& e) {
        fail(ErrorCode::BackendUnavailable, std::string("malformed embeddings response: ") + e.what());
    }
}

} // namespace nmem
