#pragma once

// Run outputs: per-tick trace (CSV), metrics report (JSON), map export (JSON
// lines), and atomic file replacement.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "circumsense/errors.hpp"
#include "circumsense/io/calibration_io.hpp"
#include "circumsense/io/frame_codec.hpp"
#include "circumsense/lumen_sim.hpp"
#include "circumsense/ring_mapping.hpp"

namespace circumsense::io {

inline constexpr int kTraceFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;
inline constexpr int kMapFormatVersion = 1;

/// Writes via a sibling temporary file and renames it into place. The temporary is
/// removed if `produce` throws, so a failed command leaves no partial output.
inline void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& produce) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
                throw Error("cannot write " + tmp.string());
            produce(out);
            out.flush();
            if (!out)
                throw Error("write failed for " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

namespace detail {

inline std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline const char* const kTraceColumns =
    "t_ms,channel,raw_counts,filtered_counts,rejected,centroid_ms,status,estimate_mm,ray_mm,euclid_mm,"
    "reference_mm,zone,sensor_x,sensor_y,sensor_z,bore_x,bore_y,bore_z";

}  // namespace detail

/// Long-format trace: one row per tick and channel. Contains no timing data, so
/// identical scenarios give byte-identical files.
inline void write_trace(std::ostream& out, const std::vector<sim::TickRecord>& trace) {
    using detail::format_double;
    out << "format_version=" << kTraceFormatVersion << '\n' << detail::kTraceColumns << '\n';
    for (const auto& r : trace) {
        out << r.t_ms << ',' << r.channel << ',' << r.raw_counts << ',' << format_double(r.filtered_counts) << ','
            << (r.rejected ? 1 : 0) << ',' << format_double(r.centroid_ms) << ',' << mapping::to_string(r.status)
            << ',' << format_double(r.estimate_mm) << ',' << detail::opt(r.ray_mm) << ','
            << detail::opt(r.euclid_mm) << ',' << detail::opt(r.reference_mm) << ','
            << mapping::to_string(r.zone);
        for (int i = 0; i < 3; ++i)
            out << ',' << format_double(r.sensor_position[i]);
        for (int i = 0; i < 3; ++i)
            out << ',' << format_double(r.boresight[i]);
        out << '\n';
    }
}

/// Subset of a trace row needed for error reporting.
struct TraceRow {
    std::uint64_t t_ms = 0;
    int channel = 0;
    std::string status;
    double estimate_mm = 0.0;
    std::optional<double> reference_mm;
    std::string zone;
};

inline std::vector<TraceRow> read_trace(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (!line.empty())
                return true;
        }
        return false;
    };
    if (!next_line() || line != "format_version=" + std::to_string(kTraceFormatVersion))
        throw ParseError("trace must start with format_version=" + std::to_string(kTraceFormatVersion), line_no);
    if (!next_line() || line != detail::kTraceColumns)
        throw ParseError("unexpected trace column header", line_no);

    std::vector<TraceRow> rows;
    while (next_line()) {
        const auto cells = detail::split_csv(line);
        if (cells.size() != 18)
            throw ParseError("trace row needs 18 columns, got " + std::to_string(cells.size()), line_no);
        TraceRow r;
        if (!detail::parse_number(cells[0], r.t_ms) || !detail::parse_number(cells[1], r.channel) ||
            !detail::parse_number(cells[7], r.estimate_mm))
            throw ParseError("malformed trace row", line_no);
        r.status = std::string(cells[6]);
        r.zone = std::string(cells[11]);
        if (!cells[10].empty()) {
            double ref = 0.0;
            if (!detail::parse_number(cells[10], ref))
                throw ParseError("malformed reference_mm", line_no);
            r.reference_mm = ref;
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

inline nlohmann::json metrics_to_json(const sim::RunMetrics& m) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json channels = json::array();
    for (std::size_t i = 0; i < m.channels.size(); ++i)
        channels.push_back({{"channel", i},
                            {"rmse_mm", opt(m.channels[i].rmse)},
                            {"max_abs_error_mm", opt(m.channels[i].max_abs)},
                            {"scored_ticks", m.channels[i].scored_ticks}});
    json transitions = json::array();
    for (const auto& t : m.transitions)
        transitions.push_back({{"t_ms", t.t_ms},
                               {"channel", t.channel},
                               {"from", std::string(mapping::to_string(t.from))},
                               {"to", std::string(mapping::to_string(t.to))}});
    return {{"format_version", kReportFormatVersion},
            {"channels", std::move(channels)},
            {"overall_rmse_mm", opt(m.overall_rmse)},
            {"latency_ms",
             {{"median", m.latency.median_ms},
              {"p95", m.latency.p95_ms},
              {"max", m.latency.max_ms},
              {"samples", m.latency.samples}}},
            {"zone_transitions", std::move(transitions)}};
}

/// Header record of a map export: ring coverage, with everything outside the
/// observed arc reported as unknown.
inline nlohmann::json map_header_json(const mapping::RingLayout& ring) {
    const auto az = mapping::unit_azimuths(ring);
    return {{"format_version", kMapFormatVersion},
            {"kind", "obstacle_map"},
            {"channels", ring.unit_count},
            {"unit_azimuths_rad", az},
            {"coverage", {{"start_rad", az.front()}, {"end_rad", az.back()}, {"outside", "unknown"}}}};
}

/// One tick of the map: per-channel gap and zone, points stamped at this tick, and
/// the current planes.
inline nlohmann::json map_tick_json(const mapping::ObstacleMap& map) {
    using nlohmann::json;
    json channels = json::array();
    for (std::size_t ch = 0; ch < map.channels(); ++ch) {
        json c = {{"channel", ch}, {"zone", std::string(mapping::to_string(map.zones[ch]))}};
        if (map.latest[ch]) {
            c["distance_mm"] = map.latest[ch]->distance;
            c["status"] = std::string(mapping::to_string(map.latest[ch]->status));
        } else {
            c["distance_mm"] = nullptr;
            c["status"] = nullptr;
        }
        channels.push_back(std::move(c));
    }
    json points = json::array();
    for (const auto& p : map.points) {
        if (p.timestamp != map.stamp)
            continue;
        points.push_back({{"channel", p.channel},
                          {"t_ms", p.timestamp},
                          {"position", {p.position.x(), p.position.y(), p.position.z()}}});
    }
    json planes = json::array();
    for (std::size_t ch = 0; ch < map.planes.size(); ++ch)
        if (map.planes[ch])
            planes.push_back({{"channel", ch},
                              {"point", {map.planes[ch]->point.x(), map.planes[ch]->point.y(), map.planes[ch]->point.z()}},
                              {"normal",
                               {map.planes[ch]->normal.x(), map.planes[ch]->normal.y(), map.planes[ch]->normal.z()}}});
    return {{"t_ms", map.stamp},
            {"channels", std::move(channels)},
            {"new_points", std::move(points)},
            {"retained_points", map.points.size()},
            {"planes", std::move(planes)}};
}

}  // namespace circumsense::io
