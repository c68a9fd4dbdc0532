#pragma once

// Line codec for telemetry frames:  "t=<ms> ch=<id> v=<counts> f=<raw|filtered>"
//
// Values are written in shortest round-trip form, so smoothed (non-integer)
// readings survive encode/decode bit-exactly.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "circumsense/adc.hpp"
#include "circumsense/errors.hpp"

namespace circumsense::io {

inline constexpr int kFrameFormatVersion = 1;

enum class FrameKind : std::uint8_t { raw, filtered };

struct StreamFrame {
    std::uint64_t timestamp = 0;  // ms
    std::uint8_t channel = 0;
    double value = 0.0;  // ADC counts, 0..1023
    FrameKind kind = FrameKind::raw;

    friend bool operator==(const StreamFrame&, const StreamFrame&) = default;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty())
        return false;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), out);
    return r.ec == std::errc{} && r.ptr == text.data() + text.size();
}

inline bool valid_value(double v) { return std::isfinite(v) && v >= 0.0 && v <= adc::kMaxCount; }

}  // namespace detail

inline std::string encode_frame(const StreamFrame& f) {
    if (!detail::valid_value(f.value))
        throw DomainError("frame value " + detail::format_double(f.value) + " outside 0.." +
                          std::to_string(adc::kMaxCount));
    std::string line = "t=" + std::to_string(f.timestamp) + " ch=" + std::to_string(f.channel) +
                       " v=" + detail::format_double(f.value) + " f=";
    line += f.kind == FrameKind::raw ? "raw" : "filtered";
    return line;
}

/// Strict decoder: exactly four space-separated fields in order.
inline StreamFrame decode_frame(std::string_view line, std::size_t line_no = 0) {
    if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);

    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const auto next = line.find(' ', pos);
        const auto end = next == std::string_view::npos ? line.size() : next;
        fields.push_back(line.substr(pos, end - pos));
        if (next == std::string_view::npos)
            break;
        pos = next + 1;
    }
    if (fields.size() != 4)
        throw ParseError("frame must have 4 fields: '" + std::string(line) + "'", line_no);

    auto value_of = [&](std::string_view field, std::string_view key) {
        if (field.substr(0, key.size()) != key)
            throw ParseError("expected field '" + std::string(key) + "' in '" + std::string(line) + "'", line_no);
        return field.substr(key.size());
    };

    StreamFrame f;
    if (!detail::parse_number(value_of(fields[0], "t="), f.timestamp))
        throw ParseError("bad timestamp in '" + std::string(line) + "'", line_no);
    unsigned channel = 0;
    if (!detail::parse_number(value_of(fields[1], "ch="), channel) || channel > 255)
        throw ParseError("bad channel in '" + std::string(line) + "'", line_no);
    f.channel = static_cast<std::uint8_t>(channel);
    if (!detail::parse_number(value_of(fields[2], "v="), f.value) || !detail::valid_value(f.value))
        throw ParseError("bad or out-of-range value in '" + std::string(line) + "'", line_no);
    const auto kind = value_of(fields[3], "f=");
    if (kind == "raw")
        f.kind = FrameKind::raw;
    else if (kind == "filtered")
        f.kind = FrameKind::filtered;
    else
        throw ParseError("bad frame kind in '" + std::string(line) + "'", line_no);
    return f;
}

inline void write_frames(std::ostream& out, const std::vector<StreamFrame>& frames) {
    out << "format_version=" << kFrameFormatVersion << '\n';
    for (const auto& f : frames)
        out << encode_frame(f) << '\n';
}

/// Reads a frame stream. A leading "format_version=N" line is checked when present;
/// blank lines and '#' comments are skipped.
inline std::vector<StreamFrame> read_frames(std::istream& in) {
    std::vector<StreamFrame> frames;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        if (first && line.starts_with("format_version=")) {
            int version = 0;
            if (!detail::parse_number(std::string_view(line).substr(15), version) || version != kFrameFormatVersion)
                throw ParseError("unsupported frame format version: " + line, line_no);
            first = false;
            continue;
        }
        first = false;
        frames.push_back(decode_frame(line, line_no));
    }
    return frames;
}

}  // namespace circumsense::io
