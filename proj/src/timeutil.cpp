#include "raildelay/timeutil.hpp"

#include <cstdio>

#include "raildelay/errors.hpp"

namespace raildelay {

// Howard Hinnant's civil-date algorithms.
Day days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<Day>(era * 146097 + static_cast<int>(doe) - 719468);
}

void civil_from_days(Day z, int& year, int& month, int& day) {
    int zz = z + 719468;
    const int era = (zz >= 0 ? zz : zz - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(zz - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int y = static_cast<int>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    month = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    year = y + (month <= 2);
}

namespace {

bool all_digits(const std::string& s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) return false;
    for (std::size_t i = pos; i < pos + n; ++i)
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

int num(const std::string& s, std::size_t pos, std::size_t n) {
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) v = v * 10 + (s[i] - '0');
    return v;
}

} // namespace

Day parse_date(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
        !all_digits(text, 0, 4) || !all_digits(text, 5, 2) || !all_digits(text, 8, 2))
        throw ParseError("bad date '" + text + "', expected YYYY-MM-DD");
    const int y = num(text, 0, 4), m = num(text, 5, 2), d = num(text, 8, 2);
    if (m < 1 || m > 12 || d < 1 || d > 31)
        throw ParseError("date out of range: '" + text + "'");
    return days_from_civil(y, m, d);
}

std::string format_date(Day day) {
    int y, m, d;
    civil_from_days(day, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

Minute parse_minute(const std::string& text) {
    if (text.size() != 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' ||
        !all_digits(text, 11, 2) || !all_digits(text, 14, 2))
        throw ParseError("bad timestamp '" + text + "', expected YYYY-MM-DDTHH:MM");
    const Day day = parse_date(text.substr(0, 10));
    const int h = num(text, 11, 2), mi = num(text, 14, 2);
    if (h > 23 || mi > 59)
        throw ParseError("timestamp out of range: '" + text + "'");
    return static_cast<Minute>(day) * 1440 + h * 60 + mi;
}

std::string format_minute(Minute t) {
    Day day = static_cast<Day>(t >= 0 ? t / 1440 : (t - 1439) / 1440);
    int rem = static_cast<int>(t - static_cast<Minute>(day) * 1440);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%sT%02d:%02d", format_date(day).c_str(), rem / 60,
                  rem % 60);
    return buf;
}

Day day_of_minute(Minute t) {
    return static_cast<Day>(t >= 0 ? t / 1440 : (t - 1439) / 1440);
}

Minute minute_of_day(Day day, int hour, int min) {
    return static_cast<Minute>(day) * 1440 + hour * 60 + min;
}

Minute round_to_hour(Minute t) {
    Minute base = (t >= 0 ? t / 60 : (t - 59) / 60) * 60;
    return (t - base >= 30) ? base + 60 : base;
}

} // namespace raildelay
