#include "nmem/llm.hpp"

#include "nmem/errors.hpp"

#include <cmath>

namespace nmem {

void BackendConfig::validate() const {
    if (max_in_flight < 1) fail(ErrorCode::Usage, "max_in_flight must be >= 1");
    if (max_retries < 0) fail(ErrorCode::Usage, "max_retries must be >= 0");
    if (timeout_s <= 0) fail(ErrorCode::Usage, "timeout_s must be > 0");
    if (kind == BackendKind::Remote && endpoint_url.empty()) fail(ErrorCode::Usage, "endpoint_url is empty");
}

Gateway::Gateway(std::shared_ptr<Backend> backend, TemplateLibrary templates, int max_in_flight,
                 std::size_t embedding_dimension)
    : backend_(std::move(backend)),
      templates_(std::move(templates)),
      max_in_flight_(max_in_flight),
      dimension_(embedding_dimension),
      admission_(max_in_flight) {
    if (max_in_flight < 1) fail(ErrorCode::Usage, "max_in_flight must be >= 1");
    if (embedding_dimension == 0) fail(ErrorCode::Usage, "embedding dimension must be > 0");
}

namespace {

class Admission {
public:
    explicit Admission(std::counting_semaphore<1 << 16>& sem) : sem_(sem) { sem_.acquire(); }
    ~Admission() { sem_.release(); }
    Admission(const Admission&) = delete;
    Admission& operator=(const Admission&) = delete;

private:
    std::counting_semaphore<1 << 16>& sem_;
};

} // namespace

ChatResponse Gateway::chat(const ChatRequest& request) {
    const auto prompt = templates_.get(request.template_id).render(request.variables);
    Admission slot(admission_);
    return backend_->chat(request, prompt);
}

std::vector<EmbeddingVector> Gateway::embed(std::span<const std::string> texts) {
    if (texts.empty()) fail(ErrorCode::EmptyInput, "embed() needs at least one text");
    std::vector<EmbeddingVector> out;
    {
        Admission slot(admission_);
        out = backend_->embed(texts);
    }
    if (out.size() != texts.size()) {
        fail(ErrorCode::BackendUnavailable, "backend returned " + std::to_string(out.size()) +
                                                " embeddings for " + std::to_string(texts.size()) + " texts");
    }
    for (auto& v : out) {
        if (v.size() != dimension_) {
            fail(ErrorCode::DimensionMismatch, "backend returned dimension " + std::to_string(v.size()) +
                                                   ", engine expects " + std::to_string(dimension_));
        }
        normalize_l2(v);
    }
    return out;
}

EmbeddingVector Gateway::embed_one(const std::string& text) {
    return std::move(embed(std::span<const std::string>(&text, 1)).front());
}

std::string ask(Gateway& gateway, TemplateId id, Variables vars, int max_tokens) {
    ChatRequest req;
    req.template_id = id;
    req.variables = std::move(vars);
    req.max_tokens = max_tokens;
    return gateway.chat(req).text;
}

void normalize_l2(EmbeddingVector& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (!(sq > 0.0) || !std::isfinite(sq)) {
        // No direction to keep; pin to the first axis so the unit-norm invariant holds.
        std::fill(v.begin(), v.end(), 0.0);
        if (!v.empty()) v[0] = 1.0;
        return;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (double& x : v) x *= inv;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config, std::size_t embedding_dimension) {
    config.validate();
    if (config.kind == BackendKind::Mock) return std::make_shared<MockBackend>(embedding_dimension);
    return std::make_shared<RemoteBackend>(config, make_http_transport());
}

} // namespace nmem
