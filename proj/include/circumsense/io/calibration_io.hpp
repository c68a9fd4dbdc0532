#pragma once

// Bench calibration data (CSV, one distance column plus one voltage column per
// unit) and the fitted parameter file (JSON).

#include <algorithm>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "circumsense/errors.hpp"
#include "circumsense/io/frame_codec.hpp"
#include "circumsense/optical_model.hpp"

namespace circumsense::io {

inline constexpr int kCalibrationFormatVersion = 1;

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(',', pos);
        auto cell = line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
            cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
            cell.remove_suffix(1);
        cells.push_back(cell);
        if (next == std::string_view::npos)
            break;
        pos = next + 1;
    }
    return cells;
}

}  // namespace detail

/// Per-unit sample lists from a CSV whose header is `distance_mm, unit0_v, unit1_v, ...`.
inline std::vector<std::vector<optical::CalibrationSample>> parse_calibration_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, header_line)) {
        ++line_no;
        if (!header_line.empty() && header_line.back() == '\r')
            header_line.pop_back();
        if (!header_line.empty() && header_line[0] != '#')
            break;
    }
    if (header_line.empty())
        throw ParseError("calibration CSV is empty");
    header = detail::split_csv(header_line);
    if (header.size() < 2 || header[0] != "distance_mm")
        throw ParseError("header must start with distance_mm followed by unit voltage columns", line_no);
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string expected = "unit" + std::to_string(i - 1) + "_v";
        if (header[i] != expected)
            throw ParseError("column " + std::to_string(i + 1) + " must be '" + expected + "', got '" +
                                 std::string(header[i]) + "'",
                             line_no);
    }

    const std::size_t units = header.size() - 1;
    std::vector<std::vector<optical::CalibrationSample>> out(units);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        const auto cells = detail::split_csv(line);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " columns, got " +
                                 std::to_string(cells.size()),
                             line_no);
        double distance = 0.0;
        if (!detail::parse_number(cells[0], distance))
            throw ParseError("non-numeric distance '" + std::string(cells[0]) + "'", line_no);
        for (std::size_t u = 0; u < units; ++u) {
            double v = 0.0;
            if (!detail::parse_number(cells[u + 1], v))
                throw ParseError("non-numeric voltage '" + std::string(cells[u + 1]) + "' in column " +
                                     std::string(header[u + 1]),
                                 line_no);
            out[u].push_back({distance, v});
        }
        ++rows;
    }
    if (rows == 0)
        throw ParseError("calibration CSV has no data rows");
    return out;
}

inline std::vector<std::vector<optical::CalibrationSample>> parse_calibration_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path);
    return parse_calibration_csv(in);
}

inline void write_calibration_csv(std::ostream& out, const std::vector<std::vector<optical::CalibrationSample>>& units) {
    out << "distance_mm";
    for (std::size_t u = 0; u < units.size(); ++u)
        out << ",unit" << u << "_v";
    out << '\n';
    const std::size_t rows = units.empty() ? 0 : units[0].size();
    for (std::size_t r = 0; r < rows; ++r) {
        out << detail::format_double(units[0][r].distance);
        for (const auto& unit : units)
            out << ',' << detail::format_double(unit[r].voltage);
        out << '\n';
    }
}

struct CalibrationRecord {
    int unit_id = 0;
    optical::SensorCalibration calibration;
    std::optional<double> r_squared;
};

inline nlohmann::json calibration_to_json(const std::vector<CalibrationRecord>& records) {
    nlohmann::json units = nlohmann::json::array();
    for (const auto& r : records) {
        const auto& c = r.calibration;
        nlohmann::json u = {{"unit_id", r.unit_id},       {"v_max", c.v_max},
                            {"k_slope", c.k_slope},       {"delta_z0", c.delta_z0},
                            {"epsilon", c.epsilon},       {"threshold_low", c.threshold_low},
                            {"threshold_up", c.threshold_up}, {"max_distance", c.max_distance}};
        u["r_squared"] = r.r_squared ? nlohmann::json(*r.r_squared) : nlohmann::json(nullptr);
        units.push_back(std::move(u));
    }
    return {{"format_version", kCalibrationFormatVersion}, {"units", std::move(units)}};
}

/// Parses a calibration file. Records are returned sorted by unit id; ids must be
/// unique and every field present.
inline std::vector<CalibrationRecord> calibration_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("format_version") || !doc.contains("units"))
        throw ParseError("calibration file needs format_version and units");
    if (doc.at("format_version") != kCalibrationFormatVersion)
        throw ParseError("unsupported calibration format version");
    const std::set<std::string> allowed = {"unit_id",      "v_max",        "k_slope",      "delta_z0", "epsilon",
                                           "threshold_low", "threshold_up", "max_distance", "r_squared"};
    std::vector<CalibrationRecord> out;
    std::set<int> seen;
    for (const auto& u : doc.at("units")) {
        for (const auto& [key, _] : u.items())
            if (!allowed.count(key))
                throw ParseError("unknown calibration field '" + key + "'");
        for (const auto& key : allowed)
            if (!u.contains(key))
                throw ParseError("calibration record missing '" + key + "'");
        auto num = [&u](const char* key) {
            if (!u.at(key).is_number())
                throw ParseError(std::string("calibration field '") + key + "' must be numeric");
            return u.at(key).get<double>();
        };
        CalibrationRecord r;
        if (!u.at("unit_id").is_number_integer())
            throw ParseError("unit_id must be an integer");
        r.unit_id = u.at("unit_id").get<int>();
        if (!seen.insert(r.unit_id).second)
            throw ParseError("duplicate unit_id " + std::to_string(r.unit_id));
        r.calibration.v_max = num("v_max");
        r.calibration.k_slope = num("k_slope");
        r.calibration.delta_z0 = num("delta_z0");
        r.calibration.epsilon = num("epsilon");
        r.calibration.threshold_low = num("threshold_low");
        r.calibration.threshold_up = num("threshold_up");
        r.calibration.max_distance = num("max_distance");
        if (!u.at("r_squared").is_null())
            r.r_squared = num("r_squared");
        if (!r.calibration.has_valid_curve() || !r.calibration.has_valid_thresholds())
            throw ParseError("unit " + std::to_string(r.unit_id) + " has invalid calibration values");
        out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.unit_id < b.unit_id; });
    return out;
}

inline std::vector<CalibrationRecord> read_calibration_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return calibration_from_json(doc);
}

/// Calibrations indexed by unit id 0..n-1; ids must be contiguous.
inline std::vector<optical::SensorCalibration> calibrations_by_unit(const std::vector<CalibrationRecord>& records) {
    std::vector<optical::SensorCalibration> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].unit_id != static_cast<int>(i))
            throw ParseError("calibration unit ids must be 0..n-1 without gaps");
        out.push_back(records[i].calibration);
    }
    return out;
}

}  // namespace circumsense::io
