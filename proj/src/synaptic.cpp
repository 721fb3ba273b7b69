#include "nmem/synaptic.hpp"

#include "nmem/errors.hpp"
#include "nmem/text.hpp"

#include <algorithm>

namespace nmem {

using nlohmann::json;

ConsolidationStats compute_stats(long n_episodes, long n_experiences, long n_threads) {
    ConsolidationStats s;
    s.n_episodes = n_episodes;
    s.n_experiences = n_experiences;
    s.n_threads = n_threads;
    s.n_discard = static_cast<double>(n_episodes) - 0.5 * static_cast<double>(n_experiences);
    s.discard_rate = n_episodes > 0 ? s.n_discard / static_cast<double>(n_episodes) : 0.0;
    return s;
}

json to_json(const ConsolidationStats& s) {
    return {{"Episode", s.n_episodes},
            {"Exper.", s.n_experiences},
            {"Thread", s.n_threads},
            {"Discard", s.n_discard},
            {"Dis. Rate", s.discard_rate}};
}

ConsolidationStats stats_from_json(const json& j) {
    try {
        return compute_stats(j.at("Episode").get<long>(), j.at("Exper.").get<long>(), j.at("Thread").get<long>());
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedInput, std::string("stats: ") + e.what());
    }
}

namespace {

std::optional<std::string> tag_content(const std::string& s, const std::string& tag) {
    const auto open = s.find("<" + tag + ">");
    if (open == std::string::npos) return std::nullopt;
    const auto start = open + tag.size() + 2;
    const auto close = s.find("</" + tag + ">", start);
    if (close == std::string::npos) return std::nullopt;
    return text::trim(std::string_view(s).substr(start, close - start));
}

std::string derive_title(const std::string& summary) {
    std::string body = summary;
    if (body.rfind("SUMMARY:", 0) == 0) body = body.substr(8);
    auto first_line = text::trim(text::split_lines(body).front());
    auto title = text::utf8_prefix(first_line, 60);
    return title.empty() ? "Episode" : title;
}

} // namespace

EpisodeSummary summarize_episode(Gateway& gateway, const Episode& episode, std::span<const Utterance> utterances) {
    if (utterances.empty()) fail(ErrorCode::InvariantViolation, "episode " + episode.episode_id + " has no utterances");
    std::vector<std::string> lines;
    std::vector<std::string> speakers;
    for (const auto& u : utterances) {
        lines.push_back(format_utterance(u));
        if (std::find(speakers.begin(), speakers.end(), u.speaker_id) == speakers.end()) speakers.push_back(u.speaker_id);
    }
    const auto episode_text = text::join(lines, "\n");

    EpisodeSummary s;
    s.episode_id = episode.episode_id;
    s.start = utterances.front().timestamp;
    s.end = utterances.back().timestamp;
    s.participants = speakers;

    const auto reply = ask(gateway, TemplateId::SummarizeEpisode,
                           {{"participants", text::join(speakers, ", ")},
                            {"time_range", s.start.iso + " to " + s.end.iso},
                            {"episode_text", episode_text}},
                           512);
    if (auto body = tag_content(reply, "summary")) {
        s.summary_text = *body;
        s.title = tag_content(reply, "title").value_or("");
    } else {
        s.summary_text = text::trim(reply);
    }
    if (s.summary_text.empty()) s.summary_text = text::utf8_prefix(episode_text, 400);
    if (s.title.empty()) s.title = derive_title(s.summary_text);
    return s;
}

std::vector<ExperienceTrace> distill_experiences(Gateway& gateway, const EpisodeSummary& summary,
                                                 std::span<const SemanticFact> facts, const std::string& user) {
    std::vector<std::string> fact_lines;
    std::vector<std::string> user_fact_ids;
    for (const auto& f : facts) {
        fact_lines.push_back(f.text);
        if (f.speaker_id == user) user_fact_ids.push_back(f.fact_id);
    }
    const auto reply = ask(gateway, TemplateId::DistillExperience,
                           {{"user", user}, {"summary", summary.summary_text}, {"facts", text::join(fact_lines, "\n")}},
                           512);
    std::vector<ExperienceTrace> traces;
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        if (line.rfind("- ", 0) == 0) line = text::trim(line.substr(2));
        if (line.empty() || line == "NONE") continue;
        ExperienceTrace t;
        t.trace_id = summary.episode_id + ":" + user + ":x" + std::to_string(traces.size());
        t.user_id = user;
        t.text = std::move(line);
        t.timestamp = summary.start;
        t.source_episode = summary.episode_id;
        t.source_fact_ids = user_fact_ids;
        traces.push_back(std::move(t));
    }
    return traces;
}

namespace {

std::vector<Utterance> episode_utterances(const Conversation& c, const Episode& e) {
    const auto& session = c.session(e.session_index);
    std::vector<Utterance> out;
    for (const auto& ref : e.utterance_refs) out.push_back(session.utterances.at(static_cast<std::size_t>(ref.turn_index)));
    return out;
}

} // namespace

SynapticOutput consolidate(Gateway& gateway, const Conversation& conversation, const StmOutput& stm) {
    SynapticOutput out;
    const auto& episodes = stm.episodes;
    const int workers = gateway.max_in_flight();
    out.summaries = parallel_map<EpisodeSummary>(episodes.size(), workers, [&](std::size_t i) {
        const auto utts = episode_utterances(conversation, episodes[i]);
        return summarize_episode(gateway, episodes[i], utts);
    });

    const auto& users = conversation.participants;
    const std::size_t jobs = episodes.size() * users.size();
    static const std::vector<SemanticFact> no_facts;
    auto distilled = parallel_map<std::vector<ExperienceTrace>>(jobs, workers, [&](std::size_t job) {
        const auto& summary = out.summaries[job / users.size()];
        const auto it = stm.facts_by_episode.find(summary.episode_id);
        const auto& facts = it == stm.facts_by_episode.end() ? no_facts : it->second;
        return distill_experiences(gateway, summary, facts, users[job % users.size()]);
    });

    for (const auto& u : users) {
        out.traces_by_user[u];
        out.zero_trace_episodes[u] = 0;
    }
    for (std::size_t job = 0; job < jobs; ++job) {
        const auto& user = users[job % users.size()];
        auto& bucket = out.traces_by_user[user];
        if (distilled[job].empty()) ++out.zero_trace_episodes[user];
        for (auto& t : distilled[job]) bucket.push_back(std::move(t));
    }
    for (auto& [user, traces] : out.traces_by_user) {
        std::stable_sort(traces.begin(), traces.end(),
                         [](const ExperienceTrace& a, const ExperienceTrace& b) { return a.timestamp < b.timestamp; });
    }
    return out;
}

json to_json(const SynapticOutput& out) {
    json summaries = json::array();
    for (const auto& s : out.summaries) {
        summaries.push_back({{"episode_id", s.episode_id},
                             {"title", s.title},
                             {"summary", s.summary_text},
                             {"start", s.start.iso},
                             {"end", s.end.iso},
                             {"participants", s.participants}});
    }
    json traces = json::object();
    for (const auto& [user, list] : out.traces_by_user) {
        json arr = json::array();
        for (const auto& t : list) {
            arr.push_back({{"trace_id", t.trace_id},
                           {"user_id", t.user_id},
                           {"text", t.text},
                           {"timestamp", t.timestamp.iso},
                           {"source_episode", t.source_episode},
                           {"source_fact_ids", t.source_fact_ids}});
        }
        traces[user] = std::move(arr);
    }
    return {{"summaries", std::move(summaries)},
            {"traces_by_user", std::move(traces)},
            {"zero_trace_episodes", out.zero_trace_episodes}};
}

SynapticOutput synaptic_output_from_json(const json& j) {
    SynapticOutput out;
    try {
        for (const auto& sj : j.at("summaries")) {
            EpisodeSummary s;
            s.episode_id = sj.at("episode_id").get<std::string>();
            s.title = sj.at("title").get<std::string>();
            s.summary_text = sj.at("summary").get<std::string>();
            s.start = Timestamp::parse(sj.at("start").get<std::string>());
            s.end = Timestamp::parse(sj.at("end").get<std::string>());
            s.participants = sj.at("participants").get<std::vector<std::string>>();
            out.summaries.push_back(std::move(s));
        }
        for (const auto& [user, arr] : j.at("traces_by_user").items()) {
            auto& bucket = out.traces_by_user[user];
            for (const auto& tj : arr) {
                ExperienceTrace t;
                t.trace_id = tj.at("trace_id").get<std::string>();
                t.user_id = tj.at("user_id").get<std::string>();
                t.text = tj.at("text").get<std::string>();
                t.timestamp = Timestamp::parse(tj.at("timestamp").get<std::string>());
                t.source_episode = tj.at("source_episode").get<std::string>();
                t.source_fact_ids = tj.at("source_fact_ids").get<std::vector<std::string>>();
                bucket.push_back(std::move(t));
            }
        }
        out.zero_trace_episodes = j.at("zero_trace_episodes").get<std::map<std::string, long>>();
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedInput, std::string("synaptic file: ") + e.what());
    }
    return out;
}

} // namespace nmem
