#pragma once

#include "nmem/ingest.hpp"
#include "nmem/llm.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace nmem {

enum class ScoringMode { OfflineMatch, LlmJudge };

std::string_view to_string(ScoringMode mode);

struct CategoryScore {
    long correct = 0;
    long total = 0;
    double accuracy() const { return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct QuestionOutcome {
    QAItem item;
    std::string predicted;
    bool correct = false;
};

struct EvalReport {
    std::map<QACategory, CategoryScore> per_category;  // every category present, possibly empty
    double overall_accuracy = 0.0;
    ScoringMode mode = ScoringMode::OfflineMatch;
    std::vector<QuestionOutcome> outcomes;
    std::vector<std::string> warnings;

    long total() const;
    long correct() const;
};

// Normalized gold contained in normalized prediction (lowercase, no punctuation).
bool score_offline(const std::string& predicted, const std::string& gold);

// Strict: the reply must start with CORRECT or WRONG, else UnparseableVerdict.
bool judge_llm(Gateway& gateway, const std::string& question, const std::string& predicted, const std::string& gold);

using AnswerFn = std::function<std::string(const QAItem&)>;

struct EvalOptions {
    ScoringMode mode = ScoringMode::OfflineMatch;
    int workers = 4;
    Gateway* judge = nullptr;  // required for LlmJudge
};

// Answers every item with `answer_fn` and scores it. Any answering function
// works here, not just the memory engine's.
EvalReport run_eval(std::span<const QAItem> qa, const AnswerFn& answer_fn, const EvalOptions& options = {});

EvalReport make_report(std::vector<QuestionOutcome> outcomes, ScoringMode mode);

// {"SingleHop":..,"MultiHop":..,"Temporal":..,"OpenDomain":..,"Overall":..} plus details.
nlohmann::json to_json(const EvalReport& report);

} // namespace nmem
