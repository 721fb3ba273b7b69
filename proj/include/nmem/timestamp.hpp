#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace nmem {

// An ISO-8601 instant. The original text is kept so files round-trip
// unchanged; ordering uses the parsed UTC epoch seconds.
struct Timestamp {
    std::string iso;
    std::int64_t epoch_seconds = 0;

    static Timestamp parse(std::string_view iso);  // throws Error{MalformedInput}
    static Timestamp from_epoch(std::int64_t seconds);  // renders as YYYY-MM-DDTHH:MM:SSZ

    friend bool operator==(const Timestamp& a, const Timestamp& b) { return a.epoch_seconds == b.epoch_seconds; }
    friend auto operator<=>(const Timestamp& a, const Timestamp& b) { return a.epoch_seconds <=> b.epoch_seconds; }
};

} // namespace nmem
