#include "nmem/timestamp.hpp"

#include "nmem/errors.hpp"

#include <chrono>
#include <cstdio>

namespace nmem {

namespace {

int read_digits(std::string_view s, std::size_t& pos, std::size_t count) {
    if (pos + count > s.size()) return -1;
    int v = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') return -1;
        v = v * 10 + (c - '0');
    }
    pos += count;
    return v;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
    if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
    }
    return false;
}

[[noreturn]] void bad(std::string_view iso) {
    fail(ErrorCode::MalformedInput, "invalid ISO-8601 datetime '" + std::string(iso) + "'");
}

} // namespace

// Accepts YYYY-MM-DD, optionally followed by [T ]HH:MM[:SS[.fff]] and a zone
// designator (Z or +HH:MM / -HH:MM). No zone means UTC.
Timestamp Timestamp::parse(std::string_view iso) {
    using namespace std::chrono;
    std::size_t pos = 0;
    const int y = read_digits(iso, pos, 4);
    if (y < 0 || !expect(iso, pos, '-')) bad(iso);
    const int mo = read_digits(iso, pos, 2);
    if (mo < 0 || !expect(iso, pos, '-')) bad(iso);
    const int d = read_digits(iso, pos, 2);
    if (d < 0) bad(iso);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) bad(iso);

    int hh = 0, mm = 0, ss = 0;
    std::int64_t offset = 0;
    if (pos < iso.size()) {
        if (iso[pos] != 'T' && iso[pos] != 't' && iso[pos] != ' ') bad(iso);
        ++pos;
        hh = read_digits(iso, pos, 2);
        if (hh < 0 || hh > 23 || !expect(iso, pos, ':')) bad(iso);
        mm = read_digits(iso, pos, 2);
        if (mm < 0 || mm > 59) bad(iso);
        if (expect(iso, pos, ':')) {
            ss = read_digits(iso, pos, 2);
            if (ss < 0 || ss > 60) bad(iso);
            if (expect(iso, pos, '.')) {
                std::size_t start = pos;
                while (pos < iso.size() && iso[pos] >= '0' && iso[pos] <= '9') ++pos;
                if (pos == start) bad(iso);
            }
        }
        if (pos < iso.size()) {
            const char z = iso[pos];
            if (z == 'Z' || z == 'z') {
                ++pos;
            } else if (z == '+' || z == '-') {
                ++pos;
                const int oh = read_digits(iso, pos, 2);
                if (oh < 0) bad(iso);
                expect(iso, pos, ':');
                const int om = read_digits(iso, pos, 2);
                if (om < 0) bad(iso);
                offset = (z == '+' ? 1 : -1) * (oh * 3600 + om * 60);
            } else {
                bad(iso);
            }
        }
        if (pos != iso.size()) bad(iso);
    }
    const auto days = sys_days{ymd}.time_since_epoch().count();
    Timestamp t;
    t.iso = std::string(iso);
    t.epoch_seconds = static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss - offset;
    return t;
}

Timestamp Timestamp::from_epoch(std::int64_t seconds) {
    using namespace std::chrono;
    const auto day_count = seconds >= 0 ? seconds / 86400 : (seconds - 86399) / 86400;
    const std::int64_t rem = seconds - day_count * 86400;
    const year_month_day ymd{sys_days{days{day_count}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60), static_cast<int>(rem % 60));
    Timestamp t;
    t.iso = buf;
    t.epoch_seconds = seconds;
    return t;
}

} // namespace nmem
