#pragma once

#include "nmem/ingest.hpp"
#include "nmem/llm.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nmem {

enum class IntentLabel { TC, TD };  // topic change / topic development

struct UtteranceRef {
    int session_index = 0;
    int turn_index = 0;

    bool operator==(const UtteranceRef&) const = default;
};

struct Episode {
    std::string episode_id;  // "<conversation>:s<session>:t<first turn>"
    std::string conversation_id;
    int session_index = 0;
    int first_turn = 0;  // inclusive span
    int last_turn = 0;
    std::vector<UtteranceRef> utterance_refs;

    bool contains(const UtteranceRef& ref) const {
        return ref.session_index == session_index && ref.turn_index >= first_turn && ref.turn_index <= last_turn;
    }
    bool operator==(const Episode&) const = default;
};

struct SemanticFact {
    std::string fact_id;
    std::string text;
    UtteranceRef source_turn;
    std::string source_episode;
    std::string speaker_id;

    bool operator==(const SemanticFact&) const = default;
};

struct StmOptions {
    std::size_t preceding_window = 6;  // D_pre: tail of the current episode
    bool batch_classification = true;  // one prompt per session, per-turn fallback
};

struct StmOutput {
    std::vector<Episode> episodes;
    std::map<std::string, std::vector<SemanticFact>> facts_by_episode;  // one key per episode
};

std::string make_episode_id(const std::string& conversation_id, int session_index, int first_turn);

// "speaker: text", with " [image: caption]" appended when a caption exists.
std::string format_utterance(const Utterance& u);

// The first utterance of a session is TC without consulting the backend.
IntentLabel classify_intent(Gateway& gateway, const Utterance& current, std::span<const Utterance> preceding,
                            const Utterance* subsequent);

std::vector<Episode> segment_session(Gateway& gateway, const std::string& conversation_id, const Session& session,
                                     const StmOptions& options = {});

// `prev2` holds up to two utterances immediately before `current` (oldest
// first). Returned facts carry source_turn; source_episode is left empty.
std::vector<SemanticFact> extract_semantics(Gateway& gateway, const Utterance& current,
                                            std::span<const Utterance> prev2,
                                            const std::optional<std::string>& caption);

StmOutput process_session(Gateway& gateway, const std::string& conversation_id, const Session& session,
                          const StmOptions& options = {});

// All sessions, processed concurrently; episodes keep session order.
StmOutput process_conversation(Gateway& gateway, const Conversation& conversation, const StmOptions& options = {});

nlohmann::json to_json(const StmOutput& out);
StmOutput stm_output_from_json(const nlohmann::json& j);

} // namespace nmem
