#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace raildelay {

// Streaming JSON writer. Keys keep insertion order and doubles are written
// with 17 significant digits, so a given document is byte-stable and every
// number round-trips exactly.
class JsonWriter {
public:
    explicit JsonWriter(std::ostream& out) : out_(out) {}

    JsonWriter& begin_object();
    JsonWriter& end_object();
    JsonWriter& begin_array();
    JsonWriter& end_array();
    JsonWriter& key(const std::string& k);

    JsonWriter& value(double v);
    JsonWriter& value(std::int64_t v);
    JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
    JsonWriter& value(std::uint64_t v);
    JsonWriter& value(bool v);
    JsonWriter& value(const std::string& v);
    JsonWriter& value(const char* v) { return value(std::string(v)); }
    JsonWriter& null();

    template <typename T>
    JsonWriter& kv(const std::string& k, const T& v) {
        key(k);
        return value(v);
    }
    JsonWriter& kv(const std::string& k, const std::vector<double>& vs);

private:
    void comma();
    void newline_indent();
    void write_escaped(const std::string& s);

    std::ostream& out_;
    // Per-nesting-level flag: has the container already got an element?
    std::vector<bool> has_item_;
    bool after_key_ = false;
};

std::string json_escape(const std::string& s);

} // namespace raildelay
