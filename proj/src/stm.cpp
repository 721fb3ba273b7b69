#include "nmem/stm.hpp"

#include "nmem/errors.hpp"
#include "nmem/text.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

namespace nmem {

using nlohmann::json;

std::string make_episode_id(const std::string& conversation_id, int session_index, int first_turn) {
    return conversation_id + ":s" + std::to_string(session_index) + ":t" + std::to_string(first_turn);
}

std::string format_utterance(const Utterance& u) {
    std::string out = u.speaker_id + ": " + u.text;
    if (u.image_caption) out += " [image: " + *u.image_caption + "]";
    return out;
}

namespace {

std::string format_block(std::span<const Utterance> utts) {
    std::vector<std::string> lines;
    lines.reserve(utts.size());
    for (const auto& u : utts) lines.push_back(format_utterance(u));
    return text::join(lines, "\n");
}

std::optional<IntentLabel> parse_label(const std::string& reply) {
    const auto tc = reply.find("TC");
    const auto td = reply.find("TD");
    if (tc == std::string::npos && td == std::string::npos) return std::nullopt;
    return tc < td ? IntentLabel::TC : IntentLabel::TD;
}

// "N: TC" lines; accepted only if every turn 0..n-1 is labelled exactly once.
std::optional<std::vector<IntentLabel>> parse_batch(const std::string& reply, std::size_t n) {
    static const std::regex line_re(R"(^\s*\[?(\d+)\]?\s*[:.)|-]?\s*(TC|TD)\b)");
    std::vector<std::optional<IntentLabel>> labels(n);
    for (const auto& line : text::split_lines(reply)) {
        std::smatch m;
        if (!std::regex_search(line, m, line_re)) continue;
        const auto idx = std::stoul(m[1].str());
        if (idx >= n || labels[idx]) return std::nullopt;
        labels[idx] = m[2].str() == "TC" ? IntentLabel::TC : IntentLabel::TD;
    }
    std::vector<IntentLabel> out;
    out.reserve(n);
    for (const auto& l : labels) {
        if (!l) return std::nullopt;
        out.push_back(*l);
    }
    return out;
}

std::vector<Episode> episodes_from_labels(const std::string& conversation_id, const Session& session,
                                          const std::vector<IntentLabel>& labels) {
    std::vector<Episode> episodes;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int turn = session.utterances[i].turn_index;
        if (i == 0 || labels[i] == IntentLabel::TC) {
            Episode e;
            e.conversation_id = conversation_id;
            e.session_index = session.index;
            e.first_turn = turn;
            e.episode_id = make_episode_id(conversation_id, session.index, turn);
            episodes.push_back(std::move(e));
        }
        auto& cur = episodes.back();
        cur.last_turn = turn;
        cur.utterance_refs.push_back({session.index, turn});
    }
    return episodes;
}

} // namespace

IntentLabel classify_intent(Gateway& gateway, const Utterance& current, std::span<const Utterance> preceding,
                            const Utterance* subsequent) {
    if (current.turn_index == 0) return IntentLabel::TC;
    const auto reply = ask(gateway, TemplateId::Segment,
                           {{"preceding", format_block(preceding)},
                            {"current", format_utterance(current)},
                            {"subsequent", subsequent ? format_utterance(*subsequent) : "(end of session)"},
                            {"is_first", "false"}},
                           16);
    return parse_label(reply).value_or(IntentLabel::TD);
}

std::vector<Episode> segment_session(Gateway& gateway, const std::string& conversation_id, const Session& session,
                                     const StmOptions& options) {
    const auto& utts = session.utterances;
    if (utts.empty()) fail(ErrorCode::InvariantViolation, "cannot segment an empty session");

    if (options.batch_classification && utts.size() > 1) {
        std::ostringstream listing;
        for (std::size_t i = 0; i < utts.size(); ++i) listing << i << " | " << format_utterance(utts[i]) << "\n";
        const auto reply = ask(gateway, TemplateId::SegmentBatch, {{"utterances", listing.str()}},
                               static_cast<int>(16 + 8 * utts.size()));
        if (auto labels = parse_batch(reply, utts.size())) {
            (*labels)[0] = IntentLabel::TC;
            return episodes_from_labels(conversation_id, session, *labels);
        }
    }

    std::vector<IntentLabel> labels;
    labels.reserve(utts.size());
    std::size_t episode_start = 0;
    for (std::size_t i = 0; i < utts.size(); ++i) {
        const std::size_t window_start = std::max(episode_start, i - std::min(i, options.preceding_window));
        const auto preceding = std::span<const Utterance>(utts).subspan(window_start, i - window_start);
        const Utterance* next = i + 1 < utts.size() ? &utts[i + 1] : nullptr;
        const auto label = classify_intent(gateway, utts[i], preceding, next);
        if (label == IntentLabel::TC) episode_start = i;
        labels.push_back(label);
    }
    return episodes_from_labels(conversation_id, session, labels);
}

std::vector<SemanticFact> extract_semantics(Gateway& gateway, const Utterance& current,
                                            std::span<const Utterance> prev2,
                                            const std::optional<std::string>& caption) {
    const Utterance* p1 = prev2.size() >= 1 ? &prev2[prev2.size() - 1] : nullptr;
    const Utterance* p2 = prev2.size() >= 2 ? &prev2[prev2.size() - 2] : nullptr;
    const auto reply = ask(gateway, TemplateId::ExtractSemantics,
                           {{"speaker", current.speaker_id},
                            {"current", current.text},
                            {"prev1", p1 ? format_utterance(*p1) : ""},
                            {"prev2", p2 ? format_utterance(*p2) : ""},
                            {"caption", caption.value_or("")}},
                           512);
    std::vector<SemanticFact> facts;
    for (auto line : text::split_lines(reply)) {
        line = text::trim(line);
        if (line.rfind("- ", 0) == 0) line = text::trim(line.substr(2));
        if (line.empty() || line == "NONE") continue;
        SemanticFact f;
        f.fact_id = "s" + std::to_string(current.session_index) + ":t" + std::to_string(current.turn_index) + ":f" +
                    std::to_string(facts.size());
        f.text = std::move(line);
        f.source_turn = {current.session_index, current.turn_index};
        f.speaker_id = current.speaker_id;
        facts.push_back(std::move(f));
    }
    return facts;
}

StmOutput process_session(Gateway& gateway, const std::string& conversation_id, const Session& session,
                          const StmOptions& options) {
    StmOutput out;
    out.episodes = segment_session(gateway, conversation_id, session, options);
    for (const auto& e : out.episodes) out.facts_by_episode[e.episode_id];

    const auto& utts = session.utterances;
    std::size_t ep = 0;
    for (std::size_t i = 0; i < utts.size(); ++i) {
        while (utts[i].turn_index > out.episodes[ep].last_turn) ++ep;
        const auto& episode = out.episodes[ep];
        const std::size_t from = i >= 2 ? i - 2 : 0;
        auto facts = extract_semantics(gateway, utts[i], std::span<const Utterance>(utts).subspan(from, i - from),
                                       utts[i].image_caption);
        auto& bucket = out.facts_by_episode[episode.episode_id];
        for (auto& f : facts) {
            f.fact_id = conversation_id + ":" + f.fact_id;
            f.source_episode = episode.episode_id;
            bucket.push_back(std::move(f));
        }
    }
    return out;
}

StmOutput process_conversation(Gateway& gateway, const Conversation& conversation, const StmOptions& options) {
    const auto& sessions = conversation.sessions;
    auto parts = parallel_map<StmOutput>(sessions.size(), gateway.max_in_flight(), [&](std::size_t i) {
        return process_session(gateway, conversation.conversation_id, sessions[i], options);
    });
    StmOutput out;
    for (auto& p : parts) {
        for (auto& e : p.episodes) out.episodes.push_back(std::move(e));
        for (auto& [k, v] : p.facts_by_episode) out.facts_by_episode[k] = std::move(v);
    }
    return out;
}

json to_json(const StmOutput& out) {
    json episodes = json::array();
    for (const auto& e : out.episodes) {
        json facts = json::array();
        if (auto it = out.facts_by_episode.find(e.episode_id); it != out.facts_by_episode.end()) {
            for (const auto& f : it->second) {
                facts.push_back({{"fact_id", f.fact_id},
                                 {"text", f.text},
                                 {"session", f.source_turn.session_index},
                                 {"turn", f.source_turn.turn_index},
                                 {"speaker_id", f.speaker_id}});
            }
        }
        episodes.push_back({{"episode_id", e.episode_id},
                            {"conversation_id", e.conversation_id},
                            {"session", e.session_index},
                            {"span", {e.first_turn, e.last_turn}},
                            {"facts", std::move(facts)}});
    }
    return {{"episodes", std::move(episodes)}};
}

StmOutput stm_output_from_json(const json& j) {
    StmOutput out;
    try {
        for (const auto& ej : j.at("episodes")) {
            Episode e;
            e.episode_id = ej.at("episode_id").get<std::string>();
            e.conversation_id = ej.at("conversation_id").get<std::string>();
            e.session_index = ej.at("session").get<int>();
            e.first_turn = ej.at("span").at(0).get<int>();
            e.last_turn = ej.at("span").at(1).get<int>();
            for (int t = e.first_turn; t <= e.last_turn; ++t) e.utterance_refs.push_back({e.session_index, t});
            auto& bucket = out.facts_by_episode[e.episode_id];
            for (const auto& fj : ej.at("facts")) {
                SemanticFact f;
                f.fact_id = fj.at("fact_id").get<std::string>();
                f.text = fj.at("text").get<std::string>();
                f.source_turn = {fj.at("session").get<int>(), fj.at("turn").get<int>()};
                f.source_episode = e.episode_id;
                f.speaker_id = fj.at("speaker_id").get<std::string>();
                bucket.push_back(std::move(f));
            }
            out.episodes.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedInput, std::string("episode file: ") + e.what());
    }
    return out;
}

} // namespace nmem
