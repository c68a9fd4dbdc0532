#pragma once

// Scenario documents (JSON). Every section is checked against a fixed key set
// before anything is built; unknown keys are errors.
//
//   {
//     "format_version": 1,
//     "robot":   {"L", "r", "xi", "eta", "mount_disk"},
//     "ring":    {"D_o", "L_s", "units", "first_azimuth"},
//     "calibration_ref": "<path relative to the scenario file>",
//     "sensor_truth_ref": "<optional path>",
//     "noise":   {"kind": "gaussian-iid"|"ar1", "sigma", "ar_coefficient", "outlier_rate", "outlier_magnitude"},
//     "obstacles": [{"shape": "plane"|"sphere"|"cylinder", ...geometry..., "trajectory": [{"t", "offset"}]}],
//     "actuation": [{"t", "q": [q1, q2, q3]}],
//     "run":     {"duration_ms", "rate_hz", "seed"},
//     "zones":   {"d_warn", "d_intrude"},
//     "filter":    optional {"window", "gate_factor", "fence_floor", "min_gate_count", "reseed_after"},
//     "reference": optional {"rate_hz", "noise_mm"},
//     "map":       optional {"history_ms"},
//     "ray_horizon_mm": optional number
//   }

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <string>
#include <type_traits>
#include <variant>

#include <json.hpp>

#include "circumsense/errors.hpp"
#include "circumsense/io/calibration_io.hpp"
#include "circumsense/lumen_sim.hpp"

namespace circumsense::io {

inline constexpr int kScenarioFormatVersion = 1;

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional = {}) {
    if (!obj.is_object())
        throw ParseError(where + " must be an object");
    std::set<std::string> allowed;
    for (const char* k : required) {
        allowed.insert(k);
        if (!obj.contains(k))
            throw ParseError(where + ": missing key '" + k + "'");
    }
    for (const char* k : optional)
        allowed.insert(k);
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ParseError(where + ": unknown key '" + it.key() + "'");
}

inline double number(const json& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number())
        throw ParseError(where + "." + key + " must be a number");
    return v.get<double>();
}

inline long long integer(const json& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number_integer())
        throw ParseError(where + "." + key + " must be an integer");
    return v.get<long long>();
}

inline Vec3 vec3(const json& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_array() || v.size() != 3)
        throw ParseError(where + "." + key + " must be a 3-element array");
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
        if (!v[static_cast<std::size_t>(i)].is_number())
            throw ParseError(where + "." + key + " must hold numbers");
        out[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

/// Builds a scenario from its document. `base_dir` resolves calibration references.
inline sim::Scenario scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    using namespace detail;
    check_keys(doc, "scenario",
               {"format_version", "robot", "ring", "calibration_ref", "noise", "obstacles", "actuation", "run", "zones"},
               {"sensor_truth_ref", "filter", "reference", "map", "ray_horizon_mm"});
    if (doc.at("format_version") != kScenarioFormatVersion)
        throw ParseError("unsupported scenario format version");

    sim::Scenario s;

    const auto& robot = doc.at("robot");
    check_keys(robot, "robot", {"L", "r", "xi", "eta", "mount_disk"});
    s.segment_length = number(robot, "L", "robot");
    try {
        s.geometry = pcc::SegmentGeometry(number(robot, "r", "robot"), number(robot, "xi", "robot"),
                                          static_cast<int>(integer(robot, "eta", "robot")));
    } catch (const ConfigError& e) {
        throw ParseError(std::string("robot: ") + e.what());
    }

    const auto& ring = doc.at("ring");
    check_keys(ring, "ring", {"D_o", "L_s", "units", "first_azimuth"});
    s.ring.sleeve_outer_diameter = number(ring, "D_o", "ring");
    s.ring.unit_spacing = number(ring, "L_s", "ring");
    s.ring.unit_count = static_cast<int>(integer(ring, "units", "ring"));
    s.ring.first_unit_azimuth = number(ring, "first_azimuth", "ring");
    s.ring.mount_disk_index = static_cast<int>(integer(robot, "mount_disk", "robot"));

    auto load_calibration = [&](const char* key) {
        const auto& ref = doc.at(key);
        if (!ref.is_string())
            throw ParseError(std::string(key) + " must be a path string");
        std::filesystem::path p = ref.get<std::string>();
        if (p.is_relative())
            p = base_dir / p;
        return calibrations_by_unit(read_calibration_file(p.string()));
    };
    s.calibration = load_calibration("calibration_ref");
    if (doc.contains("sensor_truth_ref"))
        s.sensor_truth = load_calibration("sensor_truth_ref");

    const auto& noise = doc.at("noise");
    check_keys(noise, "noise", {"kind", "sigma"}, {"ar_coefficient", "outlier_rate", "outlier_magnitude"});
    if (!noise.at("kind").is_string())
        throw ParseError("noise.kind must be a string");
    const auto kind = noise.at("kind").get<std::string>();
    if (kind == "gaussian-iid")
        s.noise.kind = sim::NoiseKind::gaussian_iid;
    else if (kind == "ar1")
        s.noise.kind = sim::NoiseKind::ar1;
    else
        throw ParseError("noise.kind must be 'gaussian-iid' or 'ar1'");
    s.noise.sigma = number(noise, "sigma", "noise");
    if (noise.contains("ar_coefficient"))
        s.noise.ar_coefficient = number(noise, "ar_coefficient", "noise");
    if (noise.contains("outlier_rate"))
        s.noise.outlier_rate = number(noise, "outlier_rate", "noise");
    if (noise.contains("outlier_magnitude"))
        s.noise.outlier_magnitude = number(noise, "outlier_magnitude", "noise");

    const auto& obstacles = doc.at("obstacles");
    if (!obstacles.is_array())
        throw ParseError("obstacles must be an array");
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        const auto& o = obstacles[i];
        const std::string where = "obstacles[" + std::to_string(i) + "]";
        if (!o.is_object() || !o.contains("shape") || !o.at("shape").is_string())
            throw ParseError(where + ": missing shape");
        const auto shape = o.at("shape").get<std::string>();
        sim::Obstacle ob;
        if (shape == "plane") {
            check_keys(o, where, {"shape", "point", "normal"}, {"trajectory"});
            ob.shape = sim::PlaneShape{vec3(o, "point", where), vec3(o, "normal", where)};
        } else if (shape == "sphere") {
            check_keys(o, where, {"shape", "center", "radius"}, {"trajectory"});
            ob.shape = sim::SphereShape{vec3(o, "center", where), number(o, "radius", where)};
        } else if (shape == "cylinder") {
            check_keys(o, where, {"shape", "point", "direction", "radius"}, {"trajectory"});
            ob.shape = sim::CylinderShape{vec3(o, "point", where), vec3(o, "direction", where),
                                          number(o, "radius", where)};
        } else {
            throw ParseError(where + ": unknown shape '" + shape + "'");
        }
        if (o.contains("trajectory")) {
            const auto& traj = o.at("trajectory");
            if (!traj.is_array())
                throw ParseError(where + ".trajectory must be an array");
            for (const auto& w : traj) {
                check_keys(w, where + ".trajectory[]", {"t", "offset"});
                ob.trajectory.push_back({number(w, "t", where), vec3(w, "offset", where)});
            }
        }
        s.obstacles.push_back(std::move(ob));
    }

    const auto& actuation = doc.at("actuation");
    if (!actuation.is_array())
        throw ParseError("actuation must be an array");
    for (const auto& k : actuation) {
        check_keys(k, "actuation[]", {"t", "q"});
        const Vec3 q = vec3(k, "q", "actuation[]");
        try {
            s.actuation.push_back({number(k, "t", "actuation[]"), pcc::ActuationVector(q.x(), q.y(), q.z())});
        } catch (const ConfigError& e) {
            throw ParseError(std::string("actuation: ") + e.what());
        }
    }

    const auto& run = doc.at("run");
    check_keys(run, "run", {"duration_ms", "rate_hz", "seed"});
    s.duration_ms = number(run, "duration_ms", "run");
    s.rate_hz = number(run, "rate_hz", "run");
    const long long seed = integer(run, "seed", "run");
    if (seed < 0)
        throw ParseError("run.seed must be non-negative");
    s.seed = static_cast<std::uint64_t>(seed);

    const auto& zones = doc.at("zones");
    check_keys(zones, "zones", {"d_warn", "d_intrude"});
    s.map.thresholds.d_warn = number(zones, "d_warn", "zones");
    s.map.thresholds.d_intrude = number(zones, "d_intrude", "zones");

    if (doc.contains("filter")) {
        const auto& f = doc.at("filter");
        check_keys(f, "filter", {}, {"window", "gate_factor", "fence_floor", "min_gate_count", "reseed_after"});
        auto count = [&](const char* key) {
            const long long v = integer(f, key, "filter");
            if (v < 0)
                throw ParseError(std::string("filter.") + key + " must be non-negative");
            return static_cast<std::size_t>(v);
        };
        if (f.contains("window"))
            s.filter.window = count("window");
        if (f.contains("gate_factor"))
            s.filter.gate_factor = number(f, "gate_factor", "filter");
        if (f.contains("fence_floor"))
            s.filter.fence_floor = number(f, "fence_floor", "filter");
        if (f.contains("min_gate_count"))
            s.filter.min_gate_count = count("min_gate_count");
        if (f.contains("reseed_after"))
            s.filter.reseed_after = count("reseed_after");
    }
    if (doc.contains("reference")) {
        const auto& r = doc.at("reference");
        check_keys(r, "reference", {}, {"rate_hz", "noise_mm"});
        if (r.contains("rate_hz"))
            s.reference.rate_hz = number(r, "rate_hz", "reference");
        if (r.contains("noise_mm") && !r.at("noise_mm").is_null())
            s.reference.noise_mm = number(r, "noise_mm", "reference");
    }
    if (doc.contains("map")) {
        const auto& m = doc.at("map");
        check_keys(m, "map", {}, {"history_ms"});
        if (m.contains("history_ms")) {
            const long long h = integer(m, "history_ms", "map");
            if (h < 0)
                throw ParseError("map.history_ms must be non-negative");
            s.map.history_ms = static_cast<std::uint64_t>(h);
        }
    }
    if (doc.contains("ray_horizon_mm"))
        s.ray_horizon = number(doc, "ray_horizon_mm", "scenario");

    // Semantic checks (ranges, consistency) are part of the schema.
    try {
        s.validate();
    } catch (const ConfigError& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
    return s;
}

inline sim::Scenario read_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return scenario_from_json(doc, std::filesystem::path(path).parent_path());
}

/// Scenario document referencing calibration files by path.
inline nlohmann::json scenario_to_json(const sim::Scenario& s, const std::string& calibration_ref,
                                       const std::string& sensor_truth_ref = {}) {
    using detail::json;
    using detail::to_json;
    json doc;
    doc["format_version"] = kScenarioFormatVersion;
    doc["robot"] = {{"L", s.segment_length},
                    {"r", s.geometry.cable_radius()},
                    {"xi", s.geometry.cable_phase()},
                    {"eta", s.geometry.disk_count()},
                    {"mount_disk", s.ring.mount_disk_index}};
    doc["ring"] = {{"D_o", s.ring.sleeve_outer_diameter},
                   {"L_s", s.ring.unit_spacing},
                   {"units", s.ring.unit_count},
                   {"first_azimuth", s.ring.first_unit_azimuth}};
    doc["calibration_ref"] = calibration_ref;
    if (!sensor_truth_ref.empty())
        doc["sensor_truth_ref"] = sensor_truth_ref;
    doc["noise"] = {{"kind", s.noise.kind == sim::NoiseKind::ar1 ? "ar1" : "gaussian-iid"},
                    {"sigma", s.noise.sigma},
                    {"ar_coefficient", s.noise.ar_coefficient},
                    {"outlier_rate", s.noise.outlier_rate},
                    {"outlier_magnitude", s.noise.outlier_magnitude}};
    json obstacles = json::array();
    for (const auto& o : s.obstacles) {
        json jo = std::visit(
            [](const auto& sh) -> json {
                using S = std::decay_t<decltype(sh)>;
                if constexpr (std::is_same_v<S, sim::PlaneShape>)
                    return {{"shape", "plane"}, {"point", to_json(sh.point)}, {"normal", to_json(sh.normal)}};
                else if constexpr (std::is_same_v<S, sim::SphereShape>)
                    return {{"shape", "sphere"}, {"center", to_json(sh.center)}, {"radius", sh.radius}};
                else
                    return {{"shape", "cylinder"},
                            {"point", to_json(sh.point)},
                            {"direction", to_json(sh.direction)},
                            {"radius", sh.radius}};
            },
            o.shape);
        if (!o.trajectory.empty()) {
            json traj = json::array();
            for (const auto& w : o.trajectory)
                traj.push_back({{"t", w.t_ms}, {"offset", to_json(w.offset)}});
            jo["trajectory"] = std::move(traj);
        }
        obstacles.push_back(std::move(jo));
    }
    doc["obstacles"] = std::move(obstacles);
    json actuation = json::array();
    for (const auto& k : s.actuation)
        actuation.push_back({{"t", k.t_ms}, {"q", json::array({k.q[0], k.q[1], k.q[2]})}});
    doc["actuation"] = std::move(actuation);
    doc["run"] = {{"duration_ms", s.duration_ms}, {"rate_hz", s.rate_hz}, {"seed", s.seed}};
    doc["zones"] = {{"d_warn", s.map.thresholds.d_warn}, {"d_intrude", s.map.thresholds.d_intrude}};
    doc["filter"] = {{"window", s.filter.window},
                     {"gate_factor", s.filter.gate_factor},
                     {"fence_floor", s.filter.fence_floor},
                     {"min_gate_count", s.filter.min_gate_count},
                     {"reseed_after", s.filter.reseed_after}};
    doc["reference"] = {{"rate_hz", s.reference.rate_hz},
                        {"noise_mm", s.reference.noise_mm ? json(*s.reference.noise_mm) : json(nullptr)}};
    doc["map"] = {{"history_ms", s.map.history_ms}};
    doc["ray_horizon_mm"] = s.ray_horizon;
    return doc;
}

}  // namespace circumsense::io
