#include "support/testkit.hpp"

#include "nmem/cards.hpp"
#include "nmem/errors.hpp"
#include "nmem/text.hpp"

#include <doctest.h>

#include <set>

using namespace nmem;
using testkit::error_code_of;

namespace {

ExperienceTrace trace(const std::string& id, const std::string& text, int minute) {
    ExperienceTrace t;
    t.trace_id = id;
    t.user_id = "Melanie";
    t.text = text;
    t.timestamp = Timestamp::from_epoch(1683550800 + 60 * minute);
    t.source_episode = "c:s0:t" + std::to_string(minute);
    return t;
}

cluster::Thread thread(const std::string& id, int topic, std::vector<std::string> traces, int first, int last) {
    return {id, topic, std::move(traces), Timestamp::from_epoch(1683550800 + 60 * first),
            Timestamp::from_epoch(1683550800 + 60 * last)};
}

struct Fixture {
    std::vector<ExperienceTrace> traces;
    std::vector<cluster::TopicCluster> topics;
    std::vector<cluster::Thread> threads;
};

// Two topics (pottery, hiking), two threads each.
Fixture two_by_two() {
    Fixture f;
    f.traces = {trace("x0", "Melanie signed up for a pottery class", 0),
                trace("x1", "Melanie shaped a pottery bowl", 1),
                trace("x2", "Melanie glazed pottery mugs cobalt", 2),
                trace("x3", "Melanie hiked Eagle Rock trail", 3),
                trace("x4", "Melanie bought hiking poles", 4),
                trace("x5", "Melanie camped after hiking", 5)};
    f.topics = {{0, {"x0", "x1", "x2"}}, {1, {"x3", "x4", "x5"}}};
    f.threads = {thread("c:Melanie:T0.0", 0, {"x0", "x1"}, 0, 1), thread("c:Melanie:T0.1", 0, {"x2"}, 2, 2),
                 thread("c:Melanie:T1.0", 1, {"x3"}, 3, 3), thread("c:Melanie:T1.1", 1, {"x4", "x5"}, 4, 5)};
    return f;
}

} // namespace

TEST_CASE("summarize_thread") {
    auto gw = testkit::mock_gateway();
    VectorIndex index(kMockDimension);
    const std::vector<std::string> texts = {"Melanie signed up for a pottery class", "Melanie shaped a pottery bowl",
                                            "Melanie glazed the pottery"};
    const auto th = thread("c:Melanie:T0.0", 0, {"x0", "x1", "x2"}, 0, 2);
    const auto entry = summarize_thread(*gw, index, "Melanie", th, texts);
    CHECK(entry.thread_id == th.thread_id);
    CHECK_FALSE(entry.title.empty());
    CHECK_FALSE(entry.summary.empty());
    // All three lines appear, in order.
    std::size_t pos = 0;
    for (const auto& t : texts) {
        const auto at = entry.summary.find(t, pos);
        REQUIRE(at != std::string::npos);
        pos = at + t.size();
    }
    std::set<std::string> trace_tokens;
    for (const auto& t : texts)
        for (const auto& tok : text::tokenize(t)) trace_tokens.insert(tok);
    bool shared = false;
    for (const auto& tok : text::tokenize(entry.title)) shared = shared || trace_tokens.contains(tok);
    CHECK(shared);

    const auto got = index.fetch(Namespace::Thread, {th.thread_id});
    REQUIRE(got.records.size() == 1);
    CHECK(got.records[0].payload == thread_payload(entry.summary, texts));
    CHECK(got.records[0].metadata.at("user") == "Melanie");

    const std::vector<std::string> one = {"Melanie adopted a puppy"};
    const auto single = summarize_thread(*gw, index, "Melanie", thread("c:Melanie:T1.0", 1, {"x9"}, 9, 9), one);
    CHECK(single.summary == one[0]);
    CHECK(index.size(Namespace::Thread) == 2);

    CHECK(error_code_of([&] { summarize_thread(*gw, index, "Melanie", th, {}); }) == ErrorCode::InvariantViolation);
}

TEST_CASE("summaries without tags fall back to the raw reply") {
    auto backend = std::make_shared<testkit::ScriptedBackend>([](const ChatRequest& r) -> std::string {
        if (r.template_id == TemplateId::SummarizeThread) return "Melanie spent the spring on pottery.\nMore text.";
        return MockBackend{}.reply(r);
    });
    Gateway gw(backend, TemplateLibrary::builtin(), 1, kMockDimension);
    VectorIndex index(kMockDimension);
    const std::vector<std::string> texts = {"Melanie made pots"};
    const auto e = summarize_thread(gw, index, "Melanie", thread("t", 0, {"x0"}, 0, 0), texts);
    CHECK(e.summary == "Melanie spent the spring on pottery.\nMore text.");
    CHECK(e.title == "Melanie spent the spring on pottery.");
}

TEST_CASE("build_card structure") {
    auto gw = testkit::mock_gateway();
    VectorIndex index(kMockDimension);
    const auto f = two_by_two();
    const auto card = build_card(*gw, index, "Melanie", f.topics, f.threads, f.traces, {3, Timestamp::from_epoch(5)});
    CHECK(card.user_id == "Melanie");
    CHECK(card.version == 3);
    CHECK(card.built_at == Timestamp::from_epoch(5));
    REQUIRE(card.sections.size() == 2);
    CHECK(card.sections[0].topic_id == 0);
    CHECK(card.sections[1].topic_id == 1);
    for (const auto& s : card.sections) {
        CHECK(s.entries.size() == 2);
        CHECK_FALSE(s.title.empty());
    }
    CHECK(card.theme_title.starts_with("Melanie's"));

    // Completeness: the card carries exactly the clustered thread ids.
    auto ids = card.thread_ids();
    std::set<std::string> unique(ids.begin(), ids.end());
    CHECK(unique.size() == 4);
    std::set<std::string> want;
    for (const auto& t : f.threads) want.insert(t.thread_id);
    CHECK(unique == want);
    for (const auto& id : ids) CHECK(index.fetch(Namespace::Thread, {id}).missing.empty());
}

TEST_CASE("a new user gets an empty card with a placeholder theme") {
    auto gw = testkit::mock_gateway();
    VectorIndex index(kMockDimension);
    const auto card = build_card(*gw, index, "Caroline", {}, {}, {});
    CHECK(card.sections.empty());
    CHECK(card.theme_title == "Caroline's Memories");
    CHECK(index.size() == 0);
}

TEST_CASE("build_card rejects inconsistent inputs") {
    auto gw = testkit::mock_gateway();
    VectorIndex index(kMockDimension);
    auto f = two_by_two();
    auto dup = f.threads;
    dup[1].thread_id = dup[0].thread_id;
    CHECK(error_code_of([&] { build_card(*gw, index, "Melanie", f.topics, dup, f.traces); }) ==
          ErrorCode::InvariantViolation);

    auto unknown = f.threads;
    unknown[0].trace_ids.push_back("x99");
    CHECK(error_code_of([&] { build_card(*gw, index, "Melanie", f.topics, unknown, f.traces); }) ==
          ErrorCode::NotFound);

    auto orphan = f.threads;
    orphan[3].topic_id = 7;
    CHECK(error_code_of([&] { build_card(*gw, index, "Melanie", f.topics, orphan, f.traces); }) ==
          ErrorCode::InvariantViolation);
}

TEST_CASE("render_card") {
    auto gw = testkit::mock_gateway();
    VectorIndex index(kMockDimension);
    auto f = two_by_two();
    const auto card = build_card(*gw, index, "Melanie", f.topics, f.threads, f.traces);

    const auto md = render_card(card, CardFormat::Markdown);
    CHECK(md.starts_with("# " + card.theme_title + "\n"));
    std::size_t subheadings = 0;
    for (const auto& line : text::split_lines(md)) subheadings += line.starts_with("## ") ? 1 : 0;
    CHECK(subheadings == 2);
    for (const auto& id : card.thread_ids()) CHECK(md.find(id) != std::string::npos);

    MemoryCard one = card;
    one.sections.resize(1);
    std::size_t one_sub = 0;
    for (const auto& line : text::split_lines(render_card(one, CardFormat::Markdown)))
        one_sub += line.starts_with("## ") ? 1 : 0;
    CHECK(one_sub == 1);

    const auto js = render_card(card, CardFormat::Json);
    CHECK(card_from_json(nlohmann::json::parse(js)) == card);
    const auto j = to_json(card);
    for (const char* key : {"user_id", "theme_title", "version", "built_at", "sections"}) CHECK(j.contains(key));
    CHECK(j.at("sections")[0].at("entries")[0].contains("thread_id"));
    CHECK(error_code_of([] { card_from_json(nlohmann::json{{"user_id", "x"}}); }) == ErrorCode::MalformedInput);
}
