#pragma once

#include "nmem/templates.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

namespace nmem {

using EmbeddingVector = std::vector<double>;

struct ChatRequest {
    TemplateId template_id = TemplateId::Segment;
    Variables variables;
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct ChatResponse {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

enum class BackendKind { Remote, Mock };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string endpoint_url = "https://api.openai.com/v1";
    std::string chat_model = "gpt-4o-mini";
    std::string embed_model = "text-embedding-3-small";
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_s = 60.0;
    int max_retries = 3;
    int max_in_flight = 8;
    double retry_base_delay_s = 0.5;  // backoff before retry r is base * 2^r

    void validate() const;  // throws Usage
};

// A chat/embedding provider. Implementations must be safe to call from
// several threads at once.
class Backend {
public:
    virtual ~Backend() = default;

    virtual ChatResponse chat(const ChatRequest& request, const std::string& rendered_prompt) = 0;
    // Raw vectors, one per text; the gateway normalizes them.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

// Uniform entry point for every LLM call in the pipeline: binds templates,
// enforces the max_in_flight admission limit, and guarantees unit-norm
// embeddings.
class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, TemplateLibrary templates, int max_in_flight,
            std::size_t embedding_dimension);

    ChatResponse chat(const ChatRequest& request);
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts);
    EmbeddingVector embed_one(const std::string& text);

    std::size_t embedding_dimension() const noexcept { return dimension_; }
    const TemplateLibrary& templates() const noexcept { return templates_; }
    int max_in_flight() const noexcept { return max_in_flight_; }

private:
    std::shared_ptr<Backend> backend_;
    TemplateLibrary templates_;
    int max_in_flight_;
    std::size_t dimension_;
    std::counting_semaphore<1 << 16> admission_;
};

// Convenience for the common "template + a few variables" call.
std::string ask(Gateway& gateway, TemplateId id, Variables vars, int max_tokens = 1024);

void normalize_l2(EmbeddingVector& v);
double dot(std::span<const double> a, std::span<const double> b);

// ---- mock backend -------------------------------------------------------

inline constexpr std::size_t kMockDimension = 64;
inline constexpr std::string_view kTopicChangeMarker = "⟦TC⟧";

// Deterministic offline backend. Chat replies are computed from the request
// variables alone (the rendered prompt is only used for token counts), and
// embeddings are hashed bags of tokens.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::size_t dimension = kMockDimension) : dimension_(dimension) {}

    ChatResponse chat(const ChatRequest& request, const std::string& rendered_prompt) override;
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

    std::string reply(const ChatRequest& request) const;

private:
    std::size_t dimension_;
};

// Raw hashed bag-of-tokens vector (not normalized): each lowercased token adds
// 1 to bucket fnv1a64(token) % dimension. A text without tokens maps to bucket 0.
EmbeddingVector mock_embedding(std::string_view text, std::size_t dimension = kMockDimension);

// ---- remote backend -----------------------------------------------------

struct HttpResponse {
    int status = 0;
    std::string body;
    bool transport_error = false;
    bool timed_out = false;
    std::string error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                   const std::map<std::string, std::string>& headers, double timeout_s) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport();

// OpenAI-compatible chat-completions and embeddings client. Transient
// failures (transport errors, timeouts, 429, 5xx) are retried up to
// max_retries times with exponential backoff.
class RemoteBackend : public Backend {
public:
    RemoteBackend(BackendConfig config, std::unique_ptr<HttpTransport> transport);

    ChatResponse chat(const ChatRequest& request, const std::string& rendered_prompt) override;
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

private:
    std::string post_with_retries(const std::string& path, const std::string& body);

    BackendConfig config_;
    std::unique_ptr<HttpTransport> transport_;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& config, std::size_t embedding_dimension);

// Bounded fan-out over [0, n): at most `workers` calls of fn run at once, and
// results keep index order. The first exception thrown is rethrown after all
// workers stop.
template <class T>
std::vector<T> parallel_map(std::size_t n, int workers, const std::function<T(std::size_t)>& fn);

} // namespace nmem

#include "nmem/detail/parallel.hpp"
