#include "nmem/eval.hpp"

#include "nmem/errors.hpp"
#include "nmem/text.hpp"

namespace nmem {

using nlohmann::json;

std::string_view to_string(ScoringMode mode) {
    return mode == ScoringMode::LlmJudge ? "llm_judge" : "offline_match";
}

long EvalReport::total() const {
    long n = 0;
    for (const auto& [_, s] : per_category) n += s.total;
    return n;
}

long EvalReport::correct() const {
    long n = 0;
    for (const auto& [_, s] : per_category) n += s.correct;
    return n;
}

bool score_offline(const std::string& predicted, const std::string& gold) {
    const auto g = text::normalize_for_match(gold);
    const auto p = text::normalize_for_match(predicted);
    if (g.empty()) return p.empty();
    return p == g || p.find(g) != std::string::npos;
}

bool judge_llm(Gateway& gateway, const std::string& question, const std::string& predicted, const std::string& gold) {
    const auto reply = ask(gateway, TemplateId::Judge, {{"question", question}, {"gold", gold}, {"predicted", predicted}}, 16);
    auto verdict = text::to_lower(text::trim(reply));
    while (!verdict.empty() && (verdict.front() == '*' || verdict.front() == '"')) verdict.erase(0, 1);
    const auto toks = text::tokenize(verdict);
    if (!toks.empty() && toks.front() == "correct") return true;
    if (!toks.empty() && (toks.front() == "wrong" || toks.front() == "incorrect")) return false;
    fail(ErrorCode::UnparseableVerdict, "judge replied '" + text::utf8_prefix(reply, 80) + "'");
}

EvalReport make_report(std::vector<QuestionOutcome> outcomes, ScoringMode mode) {
    EvalReport r;
    r.mode = mode;
    for (auto c : kAllCategories) r.per_category[c];
    for (const auto& o : outcomes) {
        auto& s = r.per_category[o.item.category];
        ++s.total;
        if (o.correct) ++s.correct;
    }
    const long total = r.total();
    if (total == 0) {
        r.warnings.push_back("no questions evaluated; overall accuracy reported as 0");
        r.overall_accuracy = 0.0;
    } else {
        r.overall_accuracy = static_cast<double>(r.correct()) / static_cast<double>(total);
    }
    r.outcomes = std::move(outcomes);
    return r;
}

EvalReport run_eval(std::span<const QAItem> qa, const AnswerFn& answer_fn, const EvalOptions& options) {
    if (options.mode == ScoringMode::LlmJudge && !options.judge) {
        fail(ErrorCode::Usage, "llm_judge scoring needs a gateway");
    }
    auto outcomes = parallel_map<QuestionOutcome>(qa.size(), std::max(1, options.workers), [&](std::size_t i) {
        QuestionOutcome o;
        o.item = qa[i];
        o.predicted = answer_fn(qa[i]);
        o.correct = options.mode == ScoringMode::LlmJudge
                        ? judge_llm(*options.judge, qa[i].question, o.predicted, qa[i].gold_answer)
                        : score_offline(o.predicted, qa[i].gold_answer);
        return o;
    });
    return make_report(std::move(outcomes), options.mode);
}

namespace {

std::string_view column(QACategory c) {
    switch (c) {
        case QACategory::SingleHop: return "SingleHop";
        case QACategory::MultiHop: return "MultiHop";
        case QACategory::Temporal: return "Temporal";
        case QACategory::OpenDomain: return "OpenDomain";
    }
    return "SingleHop";
}

} // namespace

json to_json(const EvalReport& r) {
    json out = json::object();
    json details = json::object();
    for (const auto& [c, s] : r.per_category) {
        out[std::string(column(c))] = s.accuracy();
        details[std::string(column(c))] = {{"correct", s.correct}, {"total", s.total}, {"accuracy", s.accuracy()}};
    }
    out["Overall"] = r.overall_accuracy;
    json questions = json::array();
    for (const auto& o : r.outcomes) {
        questions.push_back({{"question", o.item.question},
                             {"category", to_string(o.item.category)},
                             {"gold", o.item.gold_answer},
                             {"predicted", o.predicted},
                             {"correct", o.correct}});
    }
    out["details"] = {{"mode", to_string(r.mode)},
                      {"per_category", std::move(details)},
                      {"questions", std::move(questions)},
                      {"warnings", r.warnings}};
    return out;
}

} // namespace nmem
