#pragma once

#include <string>
#include <vector>

namespace raildelay {

struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; throws ParseError naming the file.
    int col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// Numeric field parsing with file/line context in the error message.
double csv_double(const CsvTable& t, std::size_t row, int col);
long long csv_int(const CsvTable& t, std::size_t row, int col);

// %.17g: enough digits that a double round-trips exactly.
std::string format_double(double v);

// Joins fields with commas, quoting any field that needs it.
std::string csv_line(const std::vector<std::string>& fields);

} // namespace raildelay
