#include "raildelay/jsonio.hpp"

#include <cmath>
#include <cstdio>

#include "raildelay/csvio.hpp"

namespace raildelay {

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

void JsonWriter::comma() {
    if (after_key_) {
        after_key_ = false;
        return;
    }
    if (!has_item_.empty()) {
        if (has_item_.back()) out_ << ',';
        has_item_.back() = true;
        newline_indent();
    }
}

void JsonWriter::newline_indent() {
    out_ << '\n';
    for (std::size_t i = 0; i < has_item_.size(); ++i) out_ << "  ";
}

JsonWriter& JsonWriter::begin_object() {
    comma();
    out_ << '{';
    has_item_.push_back(false);
    return *this;
}

JsonWriter& JsonWriter::end_object() {
    bool had = has_item_.back();
    has_item_.pop_back();
    if (had) newline_indent();
    out_ << '}';
    if (has_item_.empty()) out_ << '\n';
    return *this;
}

JsonWriter& JsonWriter::begin_array() {
    comma();
    out_ << '[';
    has_item_.push_back(false);
    return *this;
}

JsonWriter& JsonWriter::end_array() {
    bool had = has_item_.back();
    has_item_.pop_back();
    if (had) newline_indent();
    out_ << ']';
    return *this;
}

JsonWriter& JsonWriter::key(const std::string& k) {
    comma();
    out_ << '"';
    write_escaped(k);
    out_ << "\": ";
    after_key_ = true;
    return *this;
}

JsonWriter& JsonWriter::value(double v) {
    comma();
    // JSON has no representation for non-finite numbers; an unbounded
    // confidence limit or failed statistic serializes as null.
    if (std::isfinite(v))
        out_ << format_double(v);
    else
        out_ << "null";
    return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v) {
    comma();
    out_ << v;
    return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
    comma();
    out_ << v;
    return *this;
}

JsonWriter& JsonWriter::value(bool v) {
    comma();
    out_ << (v ? "true" : "false");
    return *this;
}

JsonWriter& JsonWriter::value(const std::string& v) {
    comma();
    out_ << '"';
    write_escaped(v);
    out_ << '"';
    return *this;
}

JsonWriter& JsonWriter::null() {
    comma();
    out_ << "null";
    return *this;
}

JsonWriter& JsonWriter::kv(const std::string& k, const std::vector<double>& vs) {
    key(k);
    begin_array();
    for (double v : vs) value(v);
    return end_array();
}

void JsonWriter::write_escaped(const std::string& s) { out_ << json_escape(s); }

} // namespace raildelay
