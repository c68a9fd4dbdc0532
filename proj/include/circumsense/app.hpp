#pragma once

// Command implementations behind the `circumsense` executable. Each command
// validates its inputs fully before writing anything, writes outputs atomically,
// and throws circumsense::Error on failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "circumsense/adc.hpp"
#include "circumsense/errors.hpp"
#include "circumsense/io/calibration_io.hpp"
#include "circumsense/io/frame_codec.hpp"
#include "circumsense/io/scenario_io.hpp"
#include "circumsense/io/trace_io.hpp"
#include "circumsense/lumen_sim.hpp"
#include "circumsense/optical_model.hpp"
#include "circumsense/ring_mapping.hpp"
#include "circumsense/scenarios.hpp"
#include "circumsense/signal_pipeline.hpp"

namespace circumsense::app {

namespace fs = std::filesystem;

struct CalibrateArgs {
    std::string csv_in;
    std::string params_out;
    double sensitivity_floor = scenarios::kSensitivityFloor;
};

/// Fits every unit column of a bench CSV and writes the calibration file.
inline std::vector<io::CalibrationRecord> calibrate(const CalibrateArgs& args, std::ostream& log) {
    const auto units = io::parse_calibration_csv(args.csv_in);
    std::vector<io::CalibrationRecord> records;
    for (std::size_t u = 0; u < units.size(); ++u) {
        optical::FitReport fit;
        try {
            fit = optical::fit_calibration(units[u]);
        } catch (const FitFailure& e) {
            throw FitFailure("unit " + std::to_string(u) + ": " + e.what(), e.iterations(), e.residual_rms());
        }
        io::CalibrationRecord rec;
        rec.unit_id = static_cast<int>(u);
        rec.calibration = optical::with_thresholds(fit.calibration, args.sensitivity_floor);
        rec.r_squared = fit.r_squared;
        records.push_back(rec);
        log << "unit " << u << ": R^2=" << std::setprecision(15) << fit.r_squared
            << " rms_V=" << std::setprecision(6) << fit.residual_rms << " iterations=" << fit.iterations
            << " band_V=(" << rec.calibration.threshold_low << ", " << rec.calibration.threshold_up
            << ") max_distance_mm=" << rec.calibration.max_distance << '\n';
    }
    const auto doc = io::calibration_to_json(records);
    io::write_file_atomic(args.params_out, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
    return records;
}

struct SimulateArgs {
    std::string scenario_in;
    std::string trace_out;
    std::string report_out;
    std::string frames_out;  // optional raw frame stream
};

inline sim::RunMetrics simulate(const SimulateArgs& args, std::ostream& log) {
    const auto scenario = io::read_scenario_file(args.scenario_in);
    const auto result = sim::run_scenario(scenario);

    // Render everything first so a failure leaves no partial outputs.
    std::ostringstream trace, frames;
    io::write_trace(trace, result.trace);
    const auto report = io::metrics_to_json(result.metrics).dump(2) + "\n";
    if (!args.frames_out.empty()) {
        std::vector<io::StreamFrame> out;
        out.reserve(result.frames.size());
        for (const auto& f : result.frames)
            out.push_back({f.timestamp, static_cast<std::uint8_t>(f.channel), f.value, io::FrameKind::raw});
        io::write_frames(frames, out);
    }
    io::write_file_atomic(args.trace_out, [&](std::ostream& out) { out << trace.str(); });
    io::write_file_atomic(args.report_out, [&](std::ostream& out) { out << report; });
    if (!args.frames_out.empty())
        io::write_file_atomic(args.frames_out, [&](std::ostream& out) { out << frames.str(); });

    log << "ticks=" << scenario.tick_count() << " channels=" << scenario.ring.unit_count << '\n';
    for (std::size_t ch = 0; ch < result.metrics.channels.size(); ++ch) {
        const auto& m = result.metrics.channels[ch];
        log << "channel " << ch << ": scored=" << m.scored_ticks << " rmse_mm=";
        if (m.rmse)
            log << *m.rmse;
        else
            log << "none";
        log << '\n';
    }
    log << "latency_ms median=" << result.metrics.latency.median_ms << " p95=" << result.metrics.latency.p95_ms
        << " max=" << result.metrics.latency.max_ms << '\n';
    return result.metrics;
}

struct ReplayArgs {
    std::string frames_in;
    std::string scenario_in;
    std::string map_out;
};

/// Feeds recorded frames through filtering and mapping. Frames sharing a time stamp
/// form one tick; robot kinematics come from the scenario's actuation schedule.
/// Frames marked filtered bypass the filter.
inline std::size_t replay(const ReplayArgs& args, std::ostream& log) {
    const auto scenario = io::read_scenario_file(args.scenario_in);
    std::vector<io::StreamFrame> frames;
    {
        std::ifstream in(args.frames_in);
        if (!in)
            throw ParseError("cannot open " + args.frames_in);
        frames = io::read_frames(in);
    }
    const auto units = static_cast<std::size_t>(scenario.ring.unit_count);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].channel >= units)
            throw ConfigError("frame " + std::to_string(i + 1) + " references unknown channel " +
                              std::to_string(frames[i].channel) + " (ring has " + std::to_string(units) +
                              " units)");
        if (i > 0 && frames[i].timestamp < frames[i - 1].timestamp)
            throw ConfigError("frame " + std::to_string(i + 1) + " goes back in time");
    }

    signal::FilterBank filters(units, scenario.filter);
    auto map = mapping::ObstacleMap::empty(units);
    std::size_t ticks = 0;

    io::write_file_atomic(args.map_out, [&](std::ostream& out) {
        out << io::map_header_json(scenario.ring).dump() << '\n';
        std::size_t i = 0;
        while (i < frames.size()) {
            const auto stamp = frames[i].timestamp;
            const auto cfg = pcc::config_from_cables(sim::actuation_at(scenario.actuation, static_cast<double>(stamp)),
                                                     scenario.geometry, scenario.segment_length);
            const auto all_poses = mapping::sensor_world_poses(cfg, scenario.geometry, scenario.ring);
            std::vector<mapping::GapEstimate> gaps;
            std::vector<Pose> poses;
            for (; i < frames.size() && frames[i].timestamp == stamp; ++i) {
                const auto& f = frames[i];
                double counts = f.value;
                if (f.kind == io::FrameKind::raw)
                    counts = filters.push({f.timestamp, f.channel, f.value}).value;
                gaps.push_back(mapping::reading_to_gap(adc::counts_to_volts(counts), scenario.calibration[f.channel],
                                                       f.channel, stamp));
                poses.push_back(all_poses[f.channel]);
            }
            map = mapping::update_map(gaps, poses, scenario.map, map);
            out << io::map_tick_json(map).dump() << '\n';
            ++ticks;
        }
    });
    log << "replayed " << frames.size() << " frames in " << ticks << " ticks\n";
    return ticks;
}

struct ReportArgs {
    std::string trace_in;
    std::string columns_out;  // optional per-tick error table
};

struct ChannelSummary {
    int channel = 0;
    std::size_t rows = 0;
    std::size_t scored = 0;
    std::optional<double> rmse;
    std::optional<double> max_abs;
    std::map<std::string, std::size_t> zone_ticks;
};

/// Per-channel error table from a trace; optionally writes the per-tick
/// (t, channel, estimate, reference, error) columns for plotting.
inline std::vector<ChannelSummary> report(const ReportArgs& args, std::ostream& out) {
    std::vector<io::TraceRow> rows;
    {
        std::ifstream in(args.trace_in);
        if (!in)
            throw ParseError("cannot open " + args.trace_in);
        rows = io::read_trace(in);
    }
    std::map<int, ChannelSummary> by_channel;
    std::map<int, double> sq;
    for (const auto& r : rows) {
        auto& s = by_channel[r.channel];
        s.channel = r.channel;
        ++s.rows;
        ++s.zone_ticks[r.zone];
        if (r.status == "in-range" && r.reference_mm) {
            const double e = r.estimate_mm - *r.reference_mm;
            sq[r.channel] += e * e;
            s.max_abs = std::max(s.max_abs.value_or(0.0), std::abs(e));
            ++s.scored;
        }
    }
    std::vector<ChannelSummary> out_rows;
    out << "channel,rows,scored,rmse_mm,max_abs_error_mm,ticks_safe,ticks_warning,ticks_intrusion,ticks_unknown\n";
    for (auto& [ch, s] : by_channel) {
        if (s.scored > 0)
            s.rmse = std::sqrt(sq[ch] / static_cast<double>(s.scored));
        out << ch << ',' << s.rows << ',' << s.scored << ',' << io::detail::opt(s.rmse) << ','
            << io::detail::opt(s.max_abs) << ',' << s.zone_ticks["safe"] << ',' << s.zone_ticks["warning"] << ','
            << s.zone_ticks["intrusion"] << ',' << s.zone_ticks["unknown"] << '\n';
        out_rows.push_back(s);
    }
    if (!args.columns_out.empty()) {
        io::write_file_atomic(args.columns_out, [&](std::ostream& col) {
            col << "t_ms,channel,estimate_mm,reference_mm,error_mm\n";
            for (const auto& r : rows) {
                if (r.status != "in-range" || !r.reference_mm)
                    continue;
                col << r.t_ms << ',' << r.channel << ',' << io::detail::format_double(r.estimate_mm) << ','
                    << io::detail::format_double(*r.reference_mm) << ','
                    << io::detail::format_double(r.estimate_mm - *r.reference_mm) << '\n';
            }
        });
    }
    return out_rows;
}

struct BenchArgs {
    std::string csv_out;
    double variance_counts = scenarios::kBenchRawVariance;
    std::uint64_t seed = 1;
};

/// Synthetic displacement-stage run of the reference units, in the calibrate input format.
inline void write_bench_csv(const BenchArgs& args, std::ostream& log) {
    if (!(args.variance_counts >= 0.0))
        throw ConfigError("noise variance must be >= 0");
    std::mt19937_64 rng(args.seed);
    std::vector<std::vector<optical::CalibrationSample>> units;
    for (const auto& c : scenarios::reference_units())
        units.push_back(scenarios::bench_samples(c, rng, args.variance_counts));
    io::write_file_atomic(args.csv_out, [&](std::ostream& out) { io::write_calibration_csv(out, units); });
    log << "wrote " << units.size() << " units x " << units.front().size() << " stations to " << args.csv_out << '\n';
}

struct ScenarioArgs {
    std::string kind;  // approach | approach-noiseless | lumen | empty
    std::string out_dir;
    std::uint64_t seed = 7;
};

/// Writes a ready-made scenario plus its calibration files into a directory.
inline void write_builtin_scenario(const ScenarioArgs& args, std::ostream& log) {
    sim::Scenario s;
    if (args.kind == "approach")
        s = scenarios::approach_scenario({.noisy = true, .seed = args.seed});
    else if (args.kind == "approach-noiseless")
        s = scenarios::approach_scenario({.noisy = false, .seed = args.seed});
    else if (args.kind == "lumen")
        s = scenarios::lumen_scenario(100000.0, args.seed);
    else if (args.kind == "empty") {
        s = scenarios::approach_scenario({.noisy = false, .seed = args.seed});
        s.obstacles.clear();
        s.duration_ms = 5000.0;
    } else
        throw ConfigError("unknown scenario kind '" + args.kind + "'");

    const fs::path dir = args.out_dir;
    fs::create_directories(dir);
    auto records = [](const std::vector<optical::SensorCalibration>& cals) {
        std::vector<io::CalibrationRecord> out;
        for (std::size_t i = 0; i < cals.size(); ++i)
            out.push_back({static_cast<int>(i), cals[i], std::nullopt});
        return out;
    };
    const auto cal = io::calibration_to_json(records(s.calibration));
    const auto truth = io::calibration_to_json(records(s.truth()));
    io::write_file_atomic(dir / "calibration.json", [&](std::ostream& o) { o << cal.dump(2) << '\n'; });
    io::write_file_atomic(dir / "sensor_truth.json", [&](std::ostream& o) { o << truth.dump(2) << '\n'; });
    const auto doc = io::scenario_to_json(s, "calibration.json", "sensor_truth.json");
    io::write_file_atomic(dir / "scenario.json", [&](std::ostream& o) { o << doc.dump(2) << '\n'; });
    log << "wrote " << (dir / "scenario.json").string() << '\n';
}

}  // namespace circumsense::app
