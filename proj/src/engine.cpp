#include "nmem/engine.hpp"

#include "nmem/errors.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace nmem {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCode::IoFailure, "cannot write " + tmp.string());
        out << content;
        if (!out.flush()) fail(ErrorCode::IoFailure, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot replace " + path.string() + ": " + ec.message());
}

DataDirLock::DataDirLock(const fs::path& data_dir) {
    std::error_code ec;
    fs::create_directories(data_dir, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot create data dir " + data_dir.string() + ": " + ec.message());
    const auto lock_path = data_dir / ".lock";
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) fail(ErrorCode::IoFailure, "cannot open lock file " + lock_path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        fail(ErrorCode::IoFailure, "data dir " + data_dir.string() + " is in use by another process");
    }
}

DataDirLock::~DataDirLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

namespace {

constexpr std::size_t kEmbedBatch = 64;

void check_id(const std::string& id, const char* what) {
    const bool ok = !id.empty() && id != "." && id != ".." && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
    if (!ok) fail(ErrorCode::MalformedInput, std::string(what) + " '" + id + "' must use only letters, digits, '-', '_', '.'");
}

std::vector<EmbeddingVector> embed_all(Gateway& gateway, const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    const std::size_t batches = (texts.size() + kEmbedBatch - 1) / kEmbedBatch;
    auto parts = parallel_map<std::vector<EmbeddingVector>>(batches, gateway.max_in_flight(), [&](std::size_t b) {
        const auto from = b * kEmbedBatch;
        const auto to = std::min(texts.size(), from + kEmbedBatch);
        return gateway.embed(std::span<const std::string>(texts).subspan(from, to - from));
    });
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& p : parts) {
        for (auto& v : p) out.push_back(std::move(v));
    }
    return out;
}

Timestamp latest_timestamp(const Conversation& c) {
    Timestamp latest = Timestamp::from_epoch(0);
    for (const auto& s : c.sessions) {
        if (latest < s.datetime) latest = s.datetime;
        for (const auto& u : s.utterances) {
            if (latest < u.timestamp) latest = u.timestamp;
        }
    }
    return latest;
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

cluster::ClusteringParams params_for(const ClusterThresholds& t, const EngineConfig& config) {
    cluster::ClusteringParams p;
    p.n_neighbors = t.n_neighbors;
    p.min_cluster_size = t.min_cluster_size;
    p.variance_target = config.variance_target;
    p.seed = config.seed;
    return p;
}

} // namespace

Engine::Engine(EngineConfig config, std::shared_ptr<Backend> backend) : config_(std::move(config)) {
    config_.validate();
    lock_ = std::make_unique<DataDirLock>(config_.data_dir);
    if (!backend) backend = make_backend(config_.backend, config_.embedding_dimension);
    auto templates = config_.templates_dir ? TemplateLibrary::with_overrides(*config_.templates_dir)
                                           : TemplateLibrary::builtin();
    gateway_ = std::make_unique<Gateway>(std::move(backend), std::move(templates), config_.backend.max_in_flight,
                                         config_.embedding_dimension);
}

fs::path Engine::conversation_dir(const std::string& conversation_id) const {
    check_id(conversation_id, "conversation id");
    return config_.data_dir / conversation_id;
}

fs::path Engine::card_path(const std::string& conversation_id, const std::string& user_id) const {
    check_id(user_id, "user id");
    return conversation_dir(conversation_id) / "cards" / (user_id + ".json");
}

IngestResult Engine::ingest(const fs::path& conversation_file) {
    const auto conversation = load_conversation(conversation_file);
    const auto dir = conversation_dir(conversation.conversation_id);
    IngestResult r;
    r.conversation_id = conversation.conversation_id;
    r.sessions = conversation.sessions.size();
    r.utterances = conversation.utterance_count();
    r.replaced = fs::exists(dir / "conversation.json");
    if (r.replaced) {
        // Derived state is stale; cards stay so their versions keep counting up.
        for (const char* name : {"episodes.json", "synaptic.json", "clusters.json", "index.jsonl", "stats.json"}) {
            fs::remove(dir / name);
        }
    }
    write_json(dir / "conversation.json", to_json(conversation));
    return r;
}

Conversation Engine::load_ingested(const std::string& conversation_id) const {
    const auto path = conversation_dir(conversation_id) / "conversation.json";
    if (!fs::exists(path)) throw NotFoundError({conversation_id}, "conversation not ingested");
    return load_conversation(path);
}

ConsolidationReport Engine::consolidate(const std::string& conversation_id) {
    const auto conversation = load_ingested(conversation_id);
    const auto dir = conversation_dir(conversation_id);
    auto& gw = *gateway_;

    const auto stm = process_conversation(gw, conversation);
    const auto synaptic = nmem::consolidate(gw, conversation, stm);

    VectorIndex index(config_.embedding_dimension);
    {
        std::vector<std::string> texts;
        for (const auto& s : synaptic.summaries) texts.push_back(s.summary_text);
        auto vectors = embed_all(gw, texts);
        std::vector<VectorRecord> records;
        for (std::size_t i = 0; i < synaptic.summaries.size(); ++i) {
            const auto& s = synaptic.summaries[i];
            records.push_back({s.episode_id, Namespace::Episode, std::move(vectors[i]), s.summary_text,
                               {{"title", s.title}, {"start", s.start.iso}, {"end", s.end.iso}}});
        }
        index.upsert(std::move(records));
    }
    std::size_t n_facts = 0;
    {
        std::vector<const SemanticFact*> facts;
        for (const auto& e : stm.episodes) {
            for (const auto& f : stm.facts_by_episode.at(e.episode_id)) facts.push_back(&f);
        }
        std::vector<std::string> texts;
        for (const auto* f : facts) texts.push_back(f->text);
        auto vectors = embed_all(gw, texts);
        std::vector<VectorRecord> records;
        for (std::size_t i = 0; i < facts.size(); ++i) {
            records.push_back({facts[i]->fact_id, Namespace::Fact, std::move(vectors[i]), facts[i]->text,
                               {{"speaker", facts[i]->speaker_id}, {"episode", facts[i]->source_episode}}});
        }
        n_facts = records.size();
        if (!records.empty()) index.upsert(std::move(records));
    }

    std::map<std::string, UserClusters> clusters;
    long n_traces = 0;
    long n_threads = 0;
    for (const auto& user : conversation.participants) {
        const auto it = synaptic.traces_by_user.find(user);
        const std::vector<ExperienceTrace> none;
        const auto& traces = it == synaptic.traces_by_user.end() ? none : it->second;
        auto& uc = clusters[user];
        n_traces += static_cast<long>(traces.size());
        if (traces.empty()) continue;

        std::vector<std::string> texts;
        for (const auto& t : traces) texts.push_back(t.text);
        auto vectors = embed_all(gw, texts);

        cluster::EmbeddingMatrix matrix;
        matrix.rows.resize(static_cast<Eigen::Index>(traces.size()), static_cast<Eigen::Index>(config_.embedding_dimension));
        std::vector<VectorRecord> records;
        for (std::size_t i = 0; i < traces.size(); ++i) {
            for (std::size_t d = 0; d < config_.embedding_dimension; ++d) {
                matrix.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = vectors[i][d];
            }
            matrix.row_ids.push_back(traces[i].trace_id);
            records.push_back({traces[i].trace_id, Namespace::Trace, std::move(vectors[i]), traces[i].text,
                               {{"user", user}, {"episode", traces[i].source_episode}, {"timestamp", traces[i].timestamp.iso}}});
        }
        index.upsert(std::move(records));

        uc.topics = cluster::cluster_topics(traces, matrix, params_for(config_.topic, config_));
        for (const auto& topic : uc.topics) {
            auto threads = cluster::cluster_threads(topic, traces, matrix, conversation_id + ":" + user + ":",
                                                    params_for(config_.thread, config_));
            for (auto& th : threads) uc.threads.push_back(std::move(th));
        }
        n_threads += static_cast<long>(uc.threads.size());
    }

    write_cards(conversation_id, conversation, synaptic, clusters, index);

    ConsolidationReport report;
    report.stats = compute_stats(static_cast<long>(stm.episodes.size()), n_traces, n_threads);
    report.episodes = stm.episodes.size();
    report.facts = n_facts;
    for (const auto& [user, uc] : clusters) {
        const auto it = synaptic.traces_by_user.find(user);
        report.traces_per_user[user] = it == synaptic.traces_by_user.end() ? 0 : it->second.size();
        report.topics_per_user[user] = uc.topics.size();
        report.threads_per_user[user] = uc.threads.size();
    }
    report.zero_trace_episodes = synaptic.zero_trace_episodes;

    write_json(dir / "episodes.json", to_json(stm));
    write_json(dir / "synaptic.json", to_json(synaptic));
    write_json(dir / "clusters.json", to_json(clusters));
    index.persist(dir / "index.jsonl");
    write_json(dir / "stats.json", to_json(report.stats));
    return report;
}

std::vector<MemoryCard> Engine::write_cards(const std::string& conversation_id, const Conversation& conversation,
                                            const SynapticOutput& synaptic,
                                            const std::map<std::string, UserClusters>& clusters, VectorIndex& index) {
    std::vector<MemoryCard> out;
    const auto built_at = latest_timestamp(conversation);
    for (const auto& user : conversation.participants) {
        const auto path = card_path(conversation_id, user);
        CardBuildOptions options;
        options.built_at = built_at;
        if (fs::exists(path)) options.version = card_from_json(read_json_file(path)).version + 1;

        const auto cit = clusters.find(user);
        const UserClusters empty;
        const auto& uc = cit == clusters.end() ? empty : cit->second;
        const auto tit = synaptic.traces_by_user.find(user);
        const std::vector<ExperienceTrace> none;
        const auto& traces = tit == synaptic.traces_by_user.end() ? none : tit->second;

        auto card = build_card(*gateway_, index, user, uc.topics, uc.threads, traces, options);
        write_text_atomic(path, render_card(card, CardFormat::Json));
        out.push_back(std::move(card));
    }
    return out;
}

std::vector<MemoryCard> Engine::build_cards(const std::string& conversation_id) {
    const auto conversation = load_ingested(conversation_id);
    const auto dir = conversation_dir(conversation_id);
    if (!fs::exists(dir / "synaptic.json") || !fs::exists(dir / "clusters.json")) {
        fail(ErrorCode::EmptyStore, "conversation " + conversation_id + " has not been consolidated");
    }
    const auto synaptic = synaptic_output_from_json(read_json_file(dir / "synaptic.json"));
    const auto clusters = clusters_from_json(read_json_file(dir / "clusters.json"));
    auto index = load_index(conversation_id);
    auto cards = write_cards(conversation_id, conversation, synaptic, clusters, index);
    index.persist(dir / "index.jsonl");
    return cards;
}

VectorIndex Engine::load_index(const std::string& conversation_id) const {
    const auto path = conversation_dir(conversation_id) / "index.jsonl";
    if (!fs::exists(path)) fail(ErrorCode::EmptyStore, "no memory for '" + conversation_id + "'; run consolidate first");
    auto index = VectorIndex::load(path);
    if (index.dimension() != config_.embedding_dimension) {
        fail(ErrorCode::DimensionMismatch, "index dimension " + std::to_string(index.dimension()) +
                                               " differs from configured " + std::to_string(config_.embedding_dimension));
    }
    return index;
}

std::vector<MemoryCard> Engine::cards(const std::string& conversation_id) const {
    std::vector<MemoryCard> out;
    const auto dir = conversation_dir(conversation_id) / "cards";
    if (!fs::exists(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(card_from_json(read_json_file(f)));
    return out;
}

MemoryCard Engine::card(const std::string& conversation_id, const std::string& user_id) const {
    const auto path = card_path(conversation_id, user_id);
    if (!fs::exists(path)) throw NotFoundError({user_id}, "no memory card for user");
    return card_from_json(read_json_file(path));
}

ConsolidationStats Engine::stats(const std::string& conversation_id) const {
    const auto path = conversation_dir(conversation_id) / "stats.json";
    if (!fs::exists(path)) fail(ErrorCode::EmptyStore, "conversation " + conversation_id + " has not been consolidated");
    return stats_from_json(read_json_file(path));
}

std::map<std::string, UserClusters> Engine::clusters(const std::string& conversation_id) const {
    const auto path = conversation_dir(conversation_id) / "clusters.json";
    if (!fs::exists(path)) fail(ErrorCode::EmptyStore, "conversation " + conversation_id + " has not been consolidated");
    return clusters_from_json(read_json_file(path));
}

QueryResult Engine::query(const std::string& conversation_id, const Query& q, SearchMode mode) {
    const auto index = load_index(conversation_id);
    const auto all_cards = cards(conversation_id);
    return answer_query(*gateway_, index, all_cards, q, mode);
}

EvalReport Engine::eval(const std::string& conversation_id, const std::vector<QAItem>& qa, SearchMode mode,
                        ScoringMode scoring, std::size_t k) {
    const auto index = load_index(conversation_id);
    const auto all_cards = cards(conversation_id);
    EvalOptions options;
    options.mode = scoring;
    options.workers = config_.backend.max_in_flight;
    options.judge = gateway_.get();
    return run_eval(
        qa,
        [&](const QAItem& item) {
            Query q;
            q.text = item.question;
            q.k = k;
            return answer_query(*gateway_, index, all_cards, q, mode).answer.text;
        },
        options);
}

json to_json(const ConsolidationReport& r) {
    return {{"stats", to_json(r.stats)},
            {"episodes", r.episodes},
            {"facts", r.facts},
            {"traces_per_user", r.traces_per_user},
            {"topics_per_user", r.topics_per_user},
            {"threads_per_user", r.threads_per_user},
            {"zero_trace_episodes", r.zero_trace_episodes}};
}

json to_json(const std::map<std::string, UserClusters>& clusters) {
    json out = json::object();
    for (const auto& [user, uc] : clusters) {
        json topics = json::array();
        for (const auto& t : uc.topics) topics.push_back({{"topic_id", t.topic_id}, {"trace_ids", t.trace_ids}});
        json threads = json::array();
        for (const auto& th : uc.threads) {
            threads.push_back({{"thread_id", th.thread_id},
                               {"topic_id", th.topic_id},
                               {"trace_ids", th.trace_ids},
                               {"start", th.start.iso},
                               {"end", th.end.iso}});
        }
        out[user] = {{"topics", std::move(topics)}, {"threads", std::move(threads)}};
    }
    return out;
}

std::map<std::string, UserClusters> clusters_from_json(const json& j) {
    std::map<std::string, UserClusters> out;
    try {
        for (const auto& [user, uj] : j.items()) {
            auto& uc = out[user];
            for (const auto& tj : uj.at("topics")) {
                uc.topics.push_back({tj.at("topic_id").get<int>(), tj.at("trace_ids").get<std::vector<std::string>>()});
            }
            for (const auto& hj : uj.at("threads")) {
                cluster::Thread th;
                th.thread_id = hj.at("thread_id").get<std::string>();
                th.topic_id = hj.at("topic_id").get<int>();
                th.trace_ids = hj.at("trace_ids").get<std::vector<std::string>>();
                th.start = Timestamp::parse(hj.at("start").get<std::string>());
                th.end = Timestamp::parse(hj.at("end").get<std::string>());
                uc.threads.push_back(std::move(th));
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedInput, std::string("clusters file: ") + e.what());
    }
    return out;
}

} // namespace nmem
