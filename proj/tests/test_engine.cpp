#include "support/testkit.hpp"

#include "nmem/engine.hpp"
#include "nmem/errors.hpp"
#include "nmem/plot.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace nmem;
using testkit::error_code_of;
namespace fs = std::filesystem;

namespace {

EngineConfig config_in(const std::string& tag, std::uint64_t seed = 42) {
    EngineConfig c;
    c.data_dir = testkit::scratch_dir(tag);
    c.seed = seed;
    c.backend.max_in_flight = 4;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

EnvLookup env_of(std::map<std::string, std::string> vars) {
    return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
        const auto it = vars.find(name);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

} // namespace

TEST_CASE("config defaults carry the published thresholds") {
    const EngineConfig c;
    CHECK(c.topic.n_neighbors == 10);
    CHECK(c.topic.min_cluster_size == 5);
    CHECK(c.thread.n_neighbors == 2);
    CHECK(c.thread.min_cluster_size == 2);
    CHECK(c.retrieval_k == 10);
    CHECK(c.variance_target == 0.95);
    CHECK(c.backend.kind == BackendKind::Mock);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config precedence is file, then environment, then flags") {
    const auto dir = testkit::scratch_dir("config");
    std::ofstream(dir / "nmem.ini") << "[engine]\nseed = 1\nretrieval_k = 3\n\n[clustering]\ntopic_n_neighbors = 12\n";
    auto c = load_config(dir / "nmem.ini", env_of({{"NMEM_ENGINE_SEED", "2"}, {"UNRELATED", "x"}}));
    CHECK(c.seed == 2);
    CHECK(c.retrieval_k == 3);
    CHECK(c.topic.n_neighbors == 12);
    apply_setting(c, "engine.seed", "3");
    CHECK(c.seed == 3);

    const auto plain = load_config(std::nullopt, env_of({}));
    CHECK(plain.seed == EngineConfig{}.seed);

    std::ofstream(dir / "bad.ini") << "[engine]\nturbo = 1\n";
    CHECK(error_code_of([&] { load_config(dir / "bad.ini", env_of({})); }) == ErrorCode::Usage);
    CHECK(error_code_of([&] { apply_setting(c, "engine.retrieval_k", "ten"); }) == ErrorCode::Usage);
    CHECK(error_code_of([&] { apply_setting(c, "nope", "1"); }) == ErrorCode::Usage);
    for (const auto& key : config_keys()) CHECK(key.find('.') != std::string::npos);

    EngineConfig bad;
    bad.topic.n_neighbors = 1;
    CHECK(error_code_of([&] { bad.validate(); }) == ErrorCode::Usage);
    bad = EngineConfig{};
    bad.variance_target = 0.0;
    CHECK(error_code_of([&] { bad.validate(); }) == ErrorCode::Usage);
}

TEST_CASE("ingest registers and replaces") {
    Engine engine(config_in("engine-ingest"));
    const auto r = engine.ingest(testkit::fixture_path("shifts_conversation.json"));
    CHECK(r.conversation_id == "shifts");
    CHECK(r.sessions == 2);
    CHECK(r.utterances == 16);
    CHECK_FALSE(r.replaced);
    CHECK(fs::exists(engine.conversation_dir("shifts") / "conversation.json"));
    CHECK(engine.ingest(testkit::fixture_path("shifts_conversation.json")).replaced);

    const auto missing = engine.config().data_dir / "nope.json";
    try {
        engine.ingest(missing);
        FAIL("expected MalformedInput");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedInput);
        CHECK(std::string(e.what()).find(missing.string()) != std::string::npos);
    }
}

TEST_CASE("consolidate the planted topic shifts") {
    Engine engine(config_in("engine-shifts"));
    engine.ingest(testkit::fixture_path("shifts_conversation.json"));
    const auto report = engine.consolidate("shifts");
    CHECK(report.episodes == 4);
    CHECK(report.stats.n_episodes == 4);
    CHECK(engine.stats("shifts") == report.stats);
    CHECK(report.stats == compute_stats(report.stats.n_episodes, report.stats.n_experiences, report.stats.n_threads));

    for (const char* name : {"episodes.json", "synaptic.json", "clusters.json", "index.jsonl", "stats.json"})
        CHECK(fs::exists(engine.conversation_dir("shifts") / name));
    for (const auto& user : {"Melanie", "Caroline"}) {
        const auto card = engine.card("shifts", user);
        CHECK(card.version == 1);
        CHECK(card.user_id == user);
    }

    // Rerun: identical stats, card versions count up.
    const auto again = engine.consolidate("shifts");
    CHECK(again.stats == report.stats);
    CHECK(engine.card("shifts", "Melanie").version == 2);
    CHECK(engine.build_cards("shifts")[0].version == 3);

    CHECK(error_code_of([&] { engine.consolidate("unknown"); }) == ErrorCode::NotFound);
    CHECK(error_code_of([&] { engine.card("shifts", "Gina"); }).has_value());
    CHECK(error_code_of([&] { engine.consolidate("../escape"); }) == ErrorCode::MalformedInput);
}

TEST_CASE("queries before consolidation report an empty store") {
    Engine engine(config_in("engine-empty"));
    engine.ingest(testkit::fixture_path("shifts_conversation.json"));
    CHECK(error_code_of([&] { engine.query("shifts", Query{"Who is Luna?", std::nullopt}, SearchMode::Full); }) ==
          ErrorCode::EmptyStore);
    CHECK(error_code_of([&] { engine.stats("shifts"); }) == ErrorCode::EmptyStore);
}

TEST_CASE("consolidation is deterministic across data directories") {
    Engine a(config_in("engine-det-a", 7));
    Engine b(config_in("engine-det-b", 7));
    a.ingest(testkit::fixture_path("e2e_conversation.json"));
    b.ingest(testkit::fixture_path("e2e_conversation.json"));
    const auto ra = a.consolidate("e2e");
    const auto rb = b.consolidate("e2e");
    CHECK(to_json(ra) == to_json(rb));
    for (const auto& user : {"Melanie", "Caroline"}) {
        const auto ja = slurp(a.card_path("e2e", user));
        CHECK_FALSE(ja.empty());
        CHECK(ja == slurp(b.card_path("e2e", user)));
    }
    CHECK(slurp(a.conversation_dir("e2e") / "clusters.json") == slurp(b.conversation_dir("e2e") / "clusters.json"));
}

TEST_CASE("end-to-end fixture: modes and citations") {
    Engine engine(config_in("engine-e2e"));
    engine.ingest(testkit::fixture_path("e2e_conversation.json"));
    const auto report = engine.consolidate("e2e");
    CHECK(report.episodes == 7);

    const Query q{"What is the name of Melanie's puppy?", std::nullopt};
    const auto full = engine.query("e2e", q, SearchMode::Full);
    CHECK(full.answer.text.find("Luna") != std::string::npos);
    CHECK_FALSE(full.answer.cited_thread_ids.empty());
    const auto only = engine.query("e2e", q, SearchMode::EpisodicOnly);
    CHECK(only.answer.text.find("Luna") != std::string::npos);
    CHECK(only.answer.cited_thread_ids.empty());

    Query narrow = q;
    narrow.k = 3;
    const auto k3 = engine.query("e2e", narrow, SearchMode::Full);
    CHECK(k3.bundle.episodic_hits.size() <= 3);
    CHECK(k3.answer.cited_episode_ids.size() <= 3);

    const auto qa = load_qa(testkit::fixture_path("e2e_qa.json"));
    const auto eval = engine.eval("e2e", qa, SearchMode::Full, ScoringMode::OfflineMatch, 10);
    CHECK(eval.total() == 10);
    CHECK(eval.overall_accuracy == 1.0);

    // Every card entry resolves through the persisted index.
    const auto index = engine.load_index("e2e");
    for (const auto& card : engine.cards("e2e")) {
        CHECK(card.sections.size() >= 3);
        CHECK(index.fetch(Namespace::Thread, card.thread_ids()).missing.empty());
    }
}

TEST_CASE("one engine per data directory") {
    const auto cfg = config_in("engine-lock");
    {
        Engine first(cfg);
        CHECK(error_code_of([&] { Engine second(cfg); }) == ErrorCode::IoFailure);
    }
    CHECK_NOTHROW(Engine{cfg});
}

TEST_CASE("cluster plot") {
    Engine engine(config_in("engine-plot"));
    engine.ingest(testkit::fixture_path("e2e_conversation.json"));
    engine.consolidate("e2e");
    const auto clusters = engine.clusters("e2e");
    const auto index = engine.load_index("e2e");
    const auto& mel = clusters.at("Melanie");
    const auto plot = project_clusters("Melanie", mel, index);
    std::size_t traces = 0;
    for (const auto& t : mel.topics) traces += t.trace_ids.size();
    CHECK(plot.points.size() == traces);
    for (const auto& p : plot.points) {
        CHECK(std::isfinite(p.x));
        CHECK(std::isfinite(p.y));
        CHECK_FALSE(p.thread_id.empty());
    }
    const auto svg = render_density_svg(plot, 320);
    CHECK(svg.starts_with("<svg"));
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(to_json(plot).at("points").size() == traces);
    CHECK(clusters_from_json(to_json(clusters)).at("Melanie").threads == mel.threads);
}
