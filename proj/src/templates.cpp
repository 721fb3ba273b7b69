#include "nmem/templates.hpp"

#include "nmem/builtin_templates.hpp"
#include "nmem/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace nmem {

namespace {

constexpr std::array<std::string_view, kTemplateCount> kNames = {
    "segment",          "segment_batch",   "extract_semantics", "summarize_episode",
    "distill_experience", "summarize_thread", "title_topic",     "title_theme",
    "select_cards",     "select_threads",  "answer",            "judge",
};

std::string xml_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default:  out.push_back(c);
        }
    }
    return out;
}

int parse_version(const std::string& text) {
    const auto pos = text.find("version=\"");
    if (pos == std::string::npos) return 0;
    return std::atoi(text.c_str() + pos + 9);
}

} // namespace

std::string_view to_string(TemplateId id) {
    return kNames[static_cast<std::size_t>(id)];
}

std::optional<TemplateId> parse_template_id(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) return static_cast<TemplateId>(i);
    }
    return std::nullopt;
}

PromptTemplate PromptTemplate::parse(TemplateId id, std::string text) {
    PromptTemplate t;
    t.id = id;
    t.version = parse_version(text);
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string::npos) {
        const auto end = text.find("}}", pos + 2);
        if (end == std::string::npos) break;
        auto name = text.substr(pos + 2, end - pos - 2);
        if (std::find(t.placeholders.begin(), t.placeholders.end(), name) == t.placeholders.end()) {
            t.placeholders.push_back(std::move(name));
        }
        pos = end + 2;
    }
    t.text = std::move(text);
    return t;
}

std::string PromptTemplate::render(const Variables& vars) const {
    std::vector<std::string> unbound;
    for (const auto& p : placeholders) {
        if (!vars.contains(p)) unbound.push_back(p);
    }
    if (!unbound.empty()) {
        std::string msg = std::string(to_string(id)) + " missing";
        for (const auto& u : unbound) msg += " " + u;
        fail(ErrorCode::TemplateUnbound, msg);
    }
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("{{", pos);
        const auto close = open == std::string::npos ? std::string::npos : text.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        out += xml_escape(vars.at(text.substr(open + 2, close - open - 2)));
        pos = close + 2;
    }
    return out;
}

TemplateLibrary TemplateLibrary::builtin() {
    TemplateLibrary lib;
    for (const auto& f : builtin::kTemplates) {
        if (auto id = parse_template_id(f.name)) {
            lib.templates_[static_cast<std::size_t>(*id)] = PromptTemplate::parse(*id, std::string(f.text));
        }
    }
    return lib;
}

TemplateLibrary TemplateLibrary::with_overrides(const std::filesystem::path& dir) {
    auto lib = builtin();
    for (std::size_t i = 0; i < kTemplateCount; ++i) {
        const auto path = dir / (std::string(kNames[i]) + ".xml");
        std::ifstream in(path, std::ios::binary);
        if (!in) continue;
        std::ostringstream ss;
        ss << in.rdbuf();
        lib.templates_[i] = PromptTemplate::parse(static_cast<TemplateId>(i), ss.str());
    }
    return lib;
}

const PromptTemplate& TemplateLibrary::get(TemplateId id) const {
    const auto& t = templates_[static_cast<std::size_t>(id)];
    if (!t) fail(ErrorCode::TemplateUnbound, "no template for " + std::string(to_string(id)));
    return *t;
}

} // namespace nmem
