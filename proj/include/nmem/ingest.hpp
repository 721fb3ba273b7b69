#pragma once

#include "nmem/timestamp.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nmem {

struct Utterance {
    std::string speaker_id;
    std::string text;
    int session_index = 0;
    int turn_index = 0;  // position within the session
    Timestamp timestamp;
    std::optional<std::string> image_caption;  // textual stand-in for an attached image

    bool operator==(const Utterance&) const = default;
};

struct Session {
    int index = 0;
    Timestamp datetime;
    std::vector<Utterance> utterances;

    bool operator==(const Session&) const = default;
};

struct Conversation {
    std::string conversation_id;
    std::array<std::string, 2> participants;
    std::vector<Session> sessions;

    std::size_t utterance_count() const;
    bool is_participant(const std::string& speaker) const;
    const Session& session(int index) const;  // throws NotFound

    bool operator==(const Conversation&) const = default;
};

enum class QACategory { SingleHop, MultiHop, Temporal, OpenDomain };

inline constexpr std::array<QACategory, 4> kAllCategories = {
    QACategory::SingleHop, QACategory::MultiHop, QACategory::Temporal, QACategory::OpenDomain};

std::string_view to_string(QACategory c);
QACategory parse_category(std::string_view s);  // throws Error{UnknownCategory}

struct QAItem {
    std::string question;
    std::string gold_answer;
    QACategory category = QACategory::SingleHop;
    std::vector<std::pair<int, int>> evidence;  // (session_index, turn_index)

    bool operator==(const QAItem&) const = default;
};

// Conversation file:
//   {conversation_id, participants: [a, b],
//    sessions: [{index, datetime, utterances: [{speaker_id, text, timestamp, image_caption?}]}]}
Conversation parse_conversation(const nlohmann::json& j);
Conversation load_conversation(const std::filesystem::path& path);
nlohmann::json to_json(const Conversation& c);

// Throws InvariantViolation / EmptyConversation; parse_conversation calls it.
void validate(const Conversation& c);

// QA file: [{question, answer, category, evidence: [[session, turn], ...]}]
std::vector<QAItem> parse_qa(const nlohmann::json& j);
std::vector<QAItem> load_qa(const std::filesystem::path& path);
nlohmann::json to_json(const std::vector<QAItem>& items);

// Reads and parses a JSON document; IoFailure / MalformedInput on error.
nlohmann::json read_json_file(const std::filesystem::path& path);

} // namespace nmem
