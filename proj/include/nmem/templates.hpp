#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nmem {

enum class TemplateId {
    Segment,
    SegmentBatch,
    ExtractSemantics,
    SummarizeEpisode,
    DistillExperience,
    SummarizeThread,
    TitleTopic,
    TitleTheme,
    SelectCards,
    SelectThreads,
    Answer,
    Judge,
};

inline constexpr std::size_t kTemplateCount = 12;

// File stem of the template, e.g. "summarize_episode" -> templates/summarize_episode.xml.
std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view name);

using Variables = std::map<std::string, std::string>;

struct PromptTemplate {
    TemplateId id = TemplateId::Segment;
    int version = 0;
    std::string text;
    std::vector<std::string> placeholders;  // distinct {{name}} occurrences, in order

    // Variable values are XML-escaped. Throws TemplateUnbound listing every
    // placeholder missing from `vars`.
    std::string render(const Variables& vars) const;

    static PromptTemplate parse(TemplateId id, std::string text);
};

class TemplateLibrary {
public:
    // The templates compiled into the binary.
    static TemplateLibrary builtin();
    // Builtins overridden by any <id>.xml found in `dir`.
    static TemplateLibrary with_overrides(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateId id) const;

private:
    std::array<std::optional<PromptTemplate>, kTemplateCount> templates_;
};

} // namespace nmem
