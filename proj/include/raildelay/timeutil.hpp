#pragma once

#include <cstdint>
#include <string>

namespace raildelay {

// Minutes since 1970-01-01T00:00. All timestamps live in one fixed offset;
// there is no timezone arithmetic anywhere in the pipeline.
using Minute = std::int64_t;

// Days since 1970-01-01.
using Day = std::int32_t;

Day days_from_civil(int year, int month, int day);
void civil_from_days(Day z, int& year, int& month, int& day);

// "YYYY-MM-DD"
Day parse_date(const std::string& text);
std::string format_date(Day day);

// "YYYY-MM-DDTHH:MM" (a space instead of 'T' is accepted on input).
Minute parse_minute(const std::string& text);
std::string format_minute(Minute t);

Day day_of_minute(Minute t);
Minute minute_of_day(Day day, int hour, int min);

// Nearest hour, exact half-hours round up.
Minute round_to_hour(Minute t);

} // namespace raildelay
