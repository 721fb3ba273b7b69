#include "nmem/config.hpp"

#include "nmem/errors.hpp"
#include "nmem/text.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdlib>

namespace nmem {

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto s = text::trim(value);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(ErrorCode::Usage, key + ": not a number: '" + value + "'");
    return out;
}

using Setter = std::function<void(EngineConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"backend.kind",
         [](EngineConfig& c, const std::string& v) {
             const auto k = text::to_lower(text::trim(v));
             if (k == "mock") {
                 c.backend.kind = BackendKind::Mock;
             } else if (k == "remote") {
                 c.backend.kind = BackendKind::Remote;
             } else {
                 fail(ErrorCode::Usage, "backend.kind must be mock or remote");
             }
         }},
        {"backend.endpoint_url", [](EngineConfig& c, const std::string& v) { c.backend.endpoint_url = text::trim(v); }},
        {"backend.chat_model", [](EngineConfig& c, const std::string& v) { c.backend.chat_model = text::trim(v); }},
        {"backend.embed_model", [](EngineConfig& c, const std::string& v) { c.backend.embed_model = text::trim(v); }},
        {"backend.api_key_env", [](EngineConfig& c, const std::string& v) { c.backend.api_key_env = text::trim(v); }},
        {"backend.timeout_s",
         [](EngineConfig& c, const std::string& v) { c.backend.timeout_s = parse_number<double>("backend.timeout_s", v); }},
        {"backend.max_retries",
         [](EngineConfig& c, const std::string& v) { c.backend.max_retries = parse_number<int>("backend.max_retries", v); }},
        {"backend.max_in_flight",
         [](EngineConfig& c, const std::string& v) {
             c.backend.max_in_flight = parse_number<int>("backend.max_in_flight", v);
         }},
        {"backend.retry_base_delay_s",
         [](EngineConfig& c, const std::string& v) {
             c.backend.retry_base_delay_s = parse_number<double>("backend.retry_base_delay_s", v);
         }},
        {"engine.embedding_dimension",
         [](EngineConfig& c, const std::string& v) {
             c.embedding_dimension = parse_number<std::size_t>("engine.embedding_dimension", v);
         }},
        {"engine.retrieval_k",
         [](EngineConfig& c, const std::string& v) { c.retrieval_k = parse_number<std::size_t>("engine.retrieval_k", v); }},
        {"engine.variance_target",
         [](EngineConfig& c, const std::string& v) {
             c.variance_target = parse_number<double>("engine.variance_target", v);
         }},
        {"engine.seed", [](EngineConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("engine.seed", v); }},
        {"engine.data_dir", [](EngineConfig& c, const std::string& v) { c.data_dir = text::trim(v); }},
        {"engine.templates_dir",
         [](EngineConfig& c, const std::string& v) {
             const auto t = text::trim(v);
             if (t.empty()) {
                 c.templates_dir.reset();
             } else {
                 c.templates_dir = t;
             }
         }},
        {"clustering.topic_n_neighbors",
         [](EngineConfig& c, const std::string& v) {
             c.topic.n_neighbors = parse_number<int>("clustering.topic_n_neighbors", v);
         }},
        {"clustering.topic_min_cluster_size",
         [](EngineConfig& c, const std::string& v) {
             c.topic.min_cluster_size = parse_number<int>("clustering.topic_min_cluster_size", v);
         }},
        {"clustering.thread_n_neighbors",
         [](EngineConfig& c, const std::string& v) {
             c.thread.n_neighbors = parse_number<int>("clustering.thread_n_neighbors", v);
         }},
        {"clustering.thread_min_cluster_size",
         [](EngineConfig& c, const std::string& v) {
             c.thread.min_cluster_size = parse_number<int>("clustering.thread_min_cluster_size", v);
         }},
    };
    return table;
}

std::string env_name(const std::string& key) {
    std::string out = "NMEM_";
    for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

} // namespace

void EngineConfig::validate() const {
    backend.validate();
    if (embedding_dimension == 0) fail(ErrorCode::Usage, "embedding_dimension must be positive");
    if (topic.n_neighbors < 2 || thread.n_neighbors < 2) fail(ErrorCode::Usage, "n_neighbors must be >= 2");
    if (topic.min_cluster_size < 2 || thread.min_cluster_size < 2) fail(ErrorCode::Usage, "min_cluster_size must be >= 2");
    if (retrieval_k < 1) fail(ErrorCode::Usage, "retrieval_k must be >= 1");
    if (!(variance_target > 0.0 && variance_target <= 1.0)) fail(ErrorCode::Usage, "variance_target must be in (0, 1]");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : setters()) keys.push_back(k);
    return keys;
}

void apply_setting(EngineConfig& config, const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    if (it == setters().end()) fail(ErrorCode::Usage, "unknown config key '" + key + "'");
    it->second(config, value);
}

void apply_config_file(EngineConfig& config, const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail(ErrorCode::MalformedInput, "config " + path.string() + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) fail(ErrorCode::MalformedInput, "config " + path.string() + ": key '" + section + "' outside a section");
        for (const auto& [key, value] : body) apply_setting(config, section + "." + key, value.data());
    }
}

void apply_environment(EngineConfig& config, const EnvLookup& lookup) {
    for (const auto& key : config_keys()) {
        if (auto v = lookup(env_name(key))) apply_setting(config, key, *v);
    }
}

EnvLookup process_environment() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

EngineConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& lookup) {
    EngineConfig config;
    if (file) apply_config_file(config, *file);
    apply_environment(config, lookup);
    return config;
}

} // namespace nmem
