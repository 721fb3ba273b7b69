#include "nmem/ingest.hpp"

#include "nmem/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace nmem {

using nlohmann::json;

std::size_t Conversation::utterance_count() const {
    std::size_t n = 0;
    for (const auto& s : sessions) n += s.utterances.size();
    return n;
}

bool Conversation::is_participant(const std::string& speaker) const {
    return participants[0] == speaker || participants[1] == speaker;
}

const Session& Conversation::session(int index) const {
    for (const auto& s : sessions) {
        if (s.index == index) return s;
    }
    throw NotFoundError({std::to_string(index)}, "session");
}

std::string_view to_string(QACategory c) {
    switch (c) {
        case QACategory::SingleHop:  return "single-hop";
        case QACategory::MultiHop:   return "multi-hop";
        case QACategory::Temporal:   return "temporal";
        case QACategory::OpenDomain: return "open-domain";
    }
    return "single-hop";
}

QACategory parse_category(std::string_view s) {
    for (auto c : kAllCategories) {
        if (to_string(c) == s) return c;
    }
    fail(ErrorCode::UnknownCategory, "unknown QA category '" + std::string(s) + "'");
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::MalformedInput, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::MalformedInput, path.string() + ": " + e.what());
    }
}

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        fail(ErrorCode::MalformedInput, where + ": missing field '" + key + "'");
    }
    return obj.at(key);
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
    const auto& v = field(obj, key, where);
    if (!v.is_string()) fail(ErrorCode::MalformedInput, where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

int int_field(const json& obj, const char* key, const std::string& where) {
    const auto& v = field(obj, key, where);
    if (!v.is_number_integer()) fail(ErrorCode::MalformedInput, where + ": field '" + key + "' must be an integer");
    return v.get<int>();
}

} // namespace

void validate(const Conversation& c) {
    if (c.conversation_id.empty()) fail(ErrorCode::InvariantViolation, "conversation_id is empty");
    if (c.participants[0].empty() || c.participants[1].empty() || c.participants[0] == c.participants[1]) {
        fail(ErrorCode::InvariantViolation, "participants must be exactly two distinct speaker ids");
    }
    if (c.sessions.empty() || c.utterance_count() == 0) {
        fail(ErrorCode::EmptyConversation, "conversation '" + c.conversation_id + "' has no utterances");
    }
    std::optional<int> prev_index;
    for (const auto& s : c.sessions) {
        const std::string where = "session " + std::to_string(s.index);
        if (s.index < 0) fail(ErrorCode::InvariantViolation, where + ": negative index");
        if (prev_index && s.index <= *prev_index) {
            fail(ErrorCode::InvariantViolation, where + ": session indices must be strictly increasing");
        }
        prev_index = s.index;
        if (s.utterances.empty()) fail(ErrorCode::InvariantViolation, where + ": session has no utterances");
        for (std::size_t i = 0; i < s.utterances.size(); ++i) {
            const auto& u = s.utterances[i];
            const std::string uwhere = where + " turn " + std::to_string(i);
            if (u.session_index != s.index || u.turn_index != static_cast<int>(i)) {
                fail(ErrorCode::InvariantViolation, uwhere + ": turn coordinates out of order");
            }
            if (u.text.empty()) fail(ErrorCode::InvariantViolation, uwhere + ": empty text");
            if (!c.is_participant(u.speaker_id)) {
                fail(ErrorCode::InvariantViolation, uwhere + ": speaker '" + u.speaker_id + "' is not a participant");
            }
            if (i > 0 && u.timestamp < s.utterances[i - 1].timestamp) {
                fail(ErrorCode::InvariantViolation, uwhere + ": timestamp goes backwards");
            }
        }
    }
}

Conversation parse_conversation(const json& j) {
    if (!j.is_object()) fail(ErrorCode::MalformedInput, "conversation must be a JSON object");
    Conversation c;
    c.conversation_id = string_field(j, "conversation_id", "conversation");
    const auto& parts = field(j, "participants", "conversation");
    if (!parts.is_array()) fail(ErrorCode::MalformedInput, "participants must be an array");
    if (parts.size() != 2) {
        fail(ErrorCode::InvariantViolation, "expected exactly 2 participants, got " + std::to_string(parts.size()));
    }
    for (std::size_t i = 0; i < 2; ++i) {
        if (!parts[i].is_string()) fail(ErrorCode::MalformedInput, "participant ids must be strings");
        c.participants[i] = parts[i].get<std::string>();
    }
    const auto& sessions = field(j, "sessions", "conversation");
    if (!sessions.is_array()) fail(ErrorCode::MalformedInput, "sessions must be an array");
    for (const auto& sj : sessions) {
        Session s;
        s.index = int_field(sj, "index", "session");
        const std::string where = "session " + std::to_string(s.index);
        s.datetime = Timestamp::parse(string_field(sj, "datetime", where));
        const auto& utts = field(sj, "utterances", where);
        if (!utts.is_array()) fail(ErrorCode::MalformedInput, where + ": utterances must be an array");
        int turn = 0;
        for (const auto& uj : utts) {
            const std::string uwhere = where + " turn " + std::to_string(turn);
            Utterance u;
            u.speaker_id = string_field(uj, "speaker_id", uwhere);
            u.text = string_field(uj, "text", uwhere);
            u.timestamp = Timestamp::parse(string_field(uj, "timestamp", uwhere));
            if (uj.contains("image_caption") && !uj.at("image_caption").is_null()) {
                auto caption = string_field(uj, "image_caption", uwhere);
                if (!caption.empty()) u.image_caption = std::move(caption);
            }
            u.session_index = s.index;
            u.turn_index = turn++;
            s.utterances.push_back(std::move(u));
        }
        c.sessions.push_back(std::move(s));
    }
    validate(c);
    return c;
}

Conversation load_conversation(const std::filesystem::path& path) {
    return parse_conversation(read_json_file(path));
}

json to_json(const Conversation& c) {
    json sessions = json::array();
    for (const auto& s : c.sessions) {
        json utts = json::array();
        for (const auto& u : s.utterances) {
            json uj = {{"speaker_id", u.speaker_id}, {"text", u.text}, {"timestamp", u.timestamp.iso}};
            if (u.image_caption) uj["image_caption"] = *u.image_caption;
            utts.push_back(std::move(uj));
        }
        sessions.push_back({{"index", s.index}, {"datetime", s.datetime.iso}, {"utterances", std::move(utts)}});
    }
    return {{"conversation_id", c.conversation_id},
            {"participants", {c.participants[0], c.participants[1]}},
            {"sessions", std::move(sessions)}};
}

std::vector<QAItem> parse_qa(const json& j) {
    if (!j.is_array()) fail(ErrorCode::MalformedInput, "QA file must be a JSON array");
    std::vector<QAItem> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& item = j[i];
        const std::string where = "qa item " + std::to_string(i);
        QAItem q;
        q.question = string_field(item, "question", where);
        const auto& answer = field(item, "answer", where);
        // LoCoMo stores some answers as numbers (years); keep their text form.
        q.gold_answer = answer.is_string() ? answer.get<std::string>() : answer.dump();
        q.category = parse_category(string_field(item, "category", where));
        if (item.contains("evidence")) {
            const auto& ev = item.at("evidence");
            if (!ev.is_array()) fail(ErrorCode::MalformedInput, where + ": evidence must be an array");
            for (const auto& pair : ev) {
                if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
                    !pair[1].is_number_integer()) {
                    fail(ErrorCode::MalformedInput, where + ": evidence entries must be [session, turn]");
                }
                q.evidence.emplace_back(pair[0].get<int>(), pair[1].get<int>());
            }
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::vector<QAItem> load_qa(const std::filesystem::path& path) {
    return parse_qa(read_json_file(path));
}

json to_json(const std::vector<QAItem>& items) {
    json out = json::array();
    for (const auto& q : items) {
        json ev = json::array();
        for (const auto& [s, t] : q.evidence) ev.push_back({s, t});
        out.push_back({{"question", q.question},
                       {"answer", q.gold_answer},
                       {"category", std::string(to_string(q.category))},
                       {"evidence", std::move(ev)}});
    }
    return out;
}

} // namespace nmem
