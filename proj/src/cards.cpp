#include "nmem/cards.hpp"

#include "nmem/errors.hpp"
#include "nmem/text.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace nmem {

using nlohmann::json;

std::vector<std::string> MemoryCard::thread_ids() const {
    std::vector<std::string> ids;
    for (const auto& s : sections) {
        for (const auto& e : s.entries) ids.push_back(e.thread_id);
    }
    return ids;
}

std::string thread_payload(const std::string& summary, std::span<const std::string> trace_texts) {
    std::string out = summary;
    for (const auto& t : trace_texts) out += "\n" + t;
    return out;
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

std::string first_line(const std::string& s) {
    const auto lines = text::split_lines(s);
    return lines.empty() ? std::string() : text::trim(lines.front());
}

} // namespace

ThreadEntry summarize_thread(Gateway& gateway, VectorIndex& index, const std::string& user_id,
                             const cluster::Thread& thread, std::span<const std::string> trace_texts) {
    if (trace_texts.empty()) fail(ErrorCode::InvariantViolation, "thread " + thread.thread_id + " has no traces");
    const std::vector<std::string> lines(trace_texts.begin(), trace_texts.end());
    const auto reply =
        ask(gateway, TemplateId::SummarizeThread, {{"user", user_id}, {"traces", text::join(lines, "\n")}}, 512);

    ThreadEntry entry;
    entry.thread_id = thread.thread_id;
    if (auto body = tag_content(reply, "summary")) {
        entry.summary = *body;
        entry.title = tag_content(reply, "title").value_or("");
    } else {
        entry.summary = text::trim(reply);
    }
    if (entry.summary.empty()) entry.summary = text::join(lines, "\n");
    if (entry.title.empty()) entry.title = text::utf8_prefix(first_line(entry.summary), 60);

    const auto payload = thread_payload(entry.summary, trace_texts);
    VectorRecord rec;
    rec.id = thread.thread_id;
    rec.ns = Namespace::Thread;
    rec.vector = gateway.embed_one(payload);
    rec.payload = payload;
    rec.metadata = {{"user", user_id},
                    {"topic", std::to_string(thread.topic_id)},
                    {"title", entry.title},
                    {"start", thread.start.iso},
                    {"end", thread.end.iso}};
    index.upsert({std::move(rec)});
    return entry;
}

MemoryCard build_card(Gateway& gateway, VectorIndex& index, const std::string& user_id,
                      std::span<const cluster::TopicCluster> topics, std::span<const cluster::Thread> threads,
                      std::span<const ExperienceTrace> traces, const CardBuildOptions& options) {
    std::map<std::string, const ExperienceTrace*> by_id;
    for (const auto& t : traces) by_id.emplace(t.trace_id, &t);

    auto entries = parallel_map<ThreadEntry>(threads.size(), gateway.max_in_flight(), [&](std::size_t i) {
        const auto& th = threads[i];
        std::vector<std::string> texts;
        std::vector<std::string> missing;
        for (const auto& id : th.trace_ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end()) {
                missing.push_back(id);
            } else {
                texts.push_back(it->second->text);
            }
        }
        if (!missing.empty()) throw NotFoundError(missing, "thread references unknown trace");
        return summarize_thread(gateway, index, user_id, th, texts);
    });

    MemoryCard card;
    card.user_id = user_id;
    card.version = options.version;
    card.built_at = options.built_at;

    std::vector<std::string> section_titles;
    for (const auto& topic : topics) {
        TopicSection section;
        section.topic_id = topic.topic_id;
        std::vector<std::string> titles;
        for (std::size_t i = 0; i < threads.size(); ++i) {
            if (threads[i].topic_id != topic.topic_id) continue;
            section.entries.push_back(entries[i]);
            titles.push_back(entries[i].title);
        }
        if (section.entries.empty()) continue;
        section.title = text::trim(first_line(
            ask(gateway, TemplateId::TitleTopic, {{"user", user_id}, {"thread_titles", text::join(titles, "\n")}}, 64)));
        if (section.title.empty()) section.title = "Topic " + std::to_string(topic.topic_id);
        section_titles.push_back(section.title);
        card.sections.push_back(std::move(section));
    }

    if (card.sections.empty()) {
        card.theme_title = user_id + "'s Memories";
    } else {
        card.theme_title = first_line(ask(gateway, TemplateId::TitleTheme,
                                          {{"user", user_id}, {"section_titles", text::join(section_titles, "\n")}},
                                          64));
        if (card.theme_title.empty()) card.theme_title = user_id + "'s Memories";
    }

    const auto ids = card.thread_ids();
    std::vector<std::string> sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        fail(ErrorCode::InvariantViolation, "duplicate thread id on card for " + user_id);
    }
    if (ids.size() != threads.size()) {
        fail(ErrorCode::InvariantViolation, "some threads belong to no topic on card for " + user_id);
    }
    return card;
}

json to_json(const MemoryCard& card) {
    json sections = json::array();
    for (const auto& s : card.sections) {
        json entries = json::array();
        for (const auto& e : s.entries) {
            entries.push_back({{"thread_id", e.thread_id}, {"title", e.title}, {"summary", e.summary}});
        }
        sections.push_back({{"topic_id", s.topic_id}, {"title", s.title}, {"entries", std::move(entries)}});
    }
    return {{"user_id", card.user_id},
            {"theme_title", card.theme_title},
            {"version", card.version},
            {"built_at", card.built_at.iso},
            {"sections", std::move(sections)}};
}

MemoryCard card_from_json(const json& j) {
    MemoryCard card;
    try {
        card.user_id = j.at("user_id").get<std::string>();
        card.theme_title = j.at("theme_title").get<std::string>();
        card.version = j.at("version").get<int>();
        card.built_at = Timestamp::parse(j.at("built_at").get<std::string>());
        for (const auto& sj : j.at("sections")) {
            TopicSection s;
            s.topic_id = sj.at("topic_id").get<int>();
            s.title = sj.at("title").get<std::string>();
            for (const auto& ej : sj.at("entries")) {
                s.entries.push_back({ej.at("thread_id").get<std::string>(), ej.at("title").get<std::string>(),
                                     ej.at("summary").get<std::string>()});
            }
            card.sections.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedInput, std::string("card: ") + e.what());
    }
    return card;
}

std::string render_card(const MemoryCard& card, CardFormat format) {
    if (format == CardFormat::Json) return to_json(card).dump(2) + "\n";
    std::ostringstream out;
    out << "# " << card.theme_title << "\n";
    for (const auto& s : card.sections) {
        out << "\n## " << s.title << "\n\n";
        for (const auto& e : s.entries) {
            std::string summary = e.summary;
            std::replace(summary.begin(), summary.end(), '\n', ' ');
            out << "- **" << e.title << "** (`" << e.thread_id << "`): " << summary << "\n";
        }
    }
    return out.str();
}

} // namespace nmem
