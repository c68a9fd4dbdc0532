#pragma once

// Sensing-ring geometry on one vertebral disk, per-reading gap estimation with
// saturation clamping, and the local obstacle map with zone labels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "circumsense/errors.hpp"
#include "circumsense/optical_model.hpp"
#include "circumsense/pcc_kinematics.hpp"
#include "circumsense/pose.hpp"

namespace circumsense::mapping {

struct RingLayout {
    double sleeve_outer_diameter = 10.7;  // D_o, mm
    double unit_spacing = 6.25;           // L_s, mm, center-to-center along the sleeve surface
    int unit_count = 4;
    int mount_disk_index = 1;             // g of the instrumented disk
    double first_unit_azimuth = 0.0;      // rad, in the disk frame

    void validate() const {
        if (unit_count < 1)
            throw ConfigError("ring needs at least one unit");
        if (!(sleeve_outer_diameter > 0.0))
            throw ConfigError("sleeve diameter must be positive");
        if (!(unit_spacing >= 0.0))
            throw ConfigError("unit spacing must be non-negative");
        if (!(unit_spacing * (unit_count - 1) < std::numbers::pi * sleeve_outer_diameter))
            throw ConfigError("units do not fit on the sleeve circumference");
        if (mount_disk_index < 1)
            throw ConfigError("mount disk index must be >= 1");
    }

    /// Angle between adjacent unit centers: arc length over radius.
    double unit_pitch() const { return 2.0 * unit_spacing / sleeve_outer_diameter; }
};

/// Azimuth of each unit in the disk frame.
inline std::vector<double> unit_azimuths(const RingLayout& layout) {
    layout.validate();
    std::vector<double> out(static_cast<std::size_t>(layout.unit_count));
    const double pitch = layout.unit_pitch();
    for (int i = 0; i < layout.unit_count; ++i)
        out[static_cast<std::size_t>(i)] = layout.first_unit_azimuth + i * pitch;
    return out;
}

/// Angular span between the outermost unit centers (rad).
inline double azimuth_span(const RingLayout& layout) {
    layout.validate();
    return (layout.unit_count - 1) * layout.unit_pitch();
}

/// World pose of a sensing unit. The unit frame is the disk frame turned about its
/// z axis by the unit azimuth; its +x axis is the outward boresight.
inline Pose sensor_world_pose(const pcc::DiskPose& disk, const RingLayout& layout, int unit) {
    if (unit < 0 || unit >= layout.unit_count)
        throw ConfigError("unit index " + std::to_string(unit) + " outside ring of " +
                          std::to_string(layout.unit_count));
    const double azimuth = layout.first_unit_azimuth + unit * layout.unit_pitch();
    const Mat3 rotation = disk.pose.rotation * rot_z(azimuth);
    const Vec3 position = disk.pose.position + 0.5 * layout.sleeve_outer_diameter * rotation.col(0);
    return {position, rotation};
}

inline Vec3 boresight(const Pose& sensor) { return sensor.rotation.col(0); }

/// World poses of every unit on the mount disk for a segment configuration.
inline std::vector<Pose> sensor_world_poses(const pcc::SegmentConfig& cfg, const pcc::SegmentGeometry& geom,
                                            const RingLayout& layout) {
    const auto disk = pcc::disk_pose(layout.mount_disk_index, cfg, geom);
    std::vector<Pose> out;
    out.reserve(static_cast<std::size_t>(layout.unit_count));
    for (int u = 0; u < layout.unit_count; ++u)
        out.push_back(sensor_world_pose(disk, layout, u));
    return out;
}

enum class GapStatus { contact, in_range, beyond_range };
enum class Zone { unknown, safe, warning, intrusion };

inline std::string_view to_string(GapStatus s) {
    switch (s) {
        case GapStatus::contact: return "contact";
        case GapStatus::in_range: return "in-range";
        case GapStatus::beyond_range: return "beyond-range";
    }
    return "?";
}

inline std::string_view to_string(Zone z) {
    switch (z) {
        case Zone::unknown: return "unknown";
        case Zone::safe: return "safe";
        case Zone::warning: return "warning";
        case Zone::intrusion: return "intrusion";
    }
    return "?";
}

/// Severity rank: unknown < safe < warning < intrusion.
inline int severity(Zone z) { return static_cast<int>(z); }

struct GapEstimate {
    int channel = 0;
    double distance = 0.0;  // mm
    GapStatus status = GapStatus::beyond_range;
    std::uint64_t timestamp = 0;  // ms

    friend bool operator==(const GapEstimate&, const GapEstimate&) = default;
};

struct ZoneThresholds {
    double d_warn = 10.0;    // mm
    double d_intrude = 3.0;  // mm

    void validate() const {
        if (!(d_intrude > 0.0 && d_intrude < d_warn))
            throw ConfigError("zone thresholds need 0 < d_intrude < d_warn");
    }
};

/// A distance exactly on a threshold belongs to the outer zone.
inline Zone classify_zone(double distance, const ZoneThresholds& t) {
    if (distance < t.d_intrude)
        return Zone::intrusion;
    if (distance < t.d_warn)
        return Zone::warning;
    return Zone::safe;
}

/// Calibrated gap for one filtered voltage. Saturation ends are chosen by the sign of
/// k: for k < 0 high voltage means near, for k > 0 low voltage means near.
inline GapEstimate reading_to_gap(double voltage, const optical::SensorCalibration& calib, int channel = 0,
                                  std::uint64_t timestamp = 0) {
    if (!calib.has_valid_thresholds())
        throw ConfigError("calibration for channel " + std::to_string(channel) + " has undefined thresholds");
    if (!calib.has_valid_curve())
        throw ConfigError("calibration for channel " + std::to_string(channel) + " has an invalid curve");

    const GapEstimate contact{channel, 0.0, GapStatus::contact, timestamp};
    const GapEstimate beyond{channel, calib.max_distance, GapStatus::beyond_range, timestamp};
    const bool rising_when_near = calib.k_slope < 0.0;

    if (!(voltage > calib.threshold_low))  // also catches NaN
        return rising_when_near ? beyond : contact;
    if (!(voltage < calib.threshold_up))
        return rising_when_near ? contact : beyond;

    const double d = optical::invert_voltage(voltage, calib);
    if (!(d > 0.0))
        return contact;
    if (!(d < calib.max_distance))
        return beyond;
    return {channel, d, GapStatus::in_range, timestamp};
}

struct Plane {
    Vec3 point;
    Vec3 normal;  // unit, pointing away from the robot

    friend bool operator==(const Plane& a, const Plane& b) { return a.point == b.point && a.normal == b.normal; }
};

struct ObstaclePoint {
    Vec3 position;
    int channel;
    std::uint64_t timestamp;

    friend bool operator==(const ObstaclePoint& a, const ObstaclePoint& b) {
        return a.position == b.position && a.channel == b.channel && a.timestamp == b.timestamp;
    }
};

struct ObstacleMap {
    std::vector<ObstaclePoint> points;
    std::vector<std::optional<Plane>> planes;
    std::vector<Zone> zones;
    std::vector<std::optional<GapEstimate>> latest;  // last gap seen per channel
    std::uint64_t stamp = 0;

    static ObstacleMap empty(std::size_t channels) {
        ObstacleMap m;
        m.planes.resize(channels);
        m.zones.assign(channels, Zone::unknown);
        m.latest.resize(channels);
        return m;
    }

    std::size_t channels() const noexcept { return zones.size(); }

    friend bool operator==(const ObstacleMap&, const ObstacleMap&) = default;
};

struct MapOptions {
    ZoneThresholds thresholds{};
    std::uint64_t history_ms = 2000;  // points older than this are dropped
};

/// One mapping step. Channels absent from `gaps` keep their previous state.
inline ObstacleMap update_map(std::span<const GapEstimate> gaps, std::span<const Pose> poses,
                              const MapOptions& options, const ObstacleMap& prev) {
    if (gaps.size() != poses.size())
        throw ConfigError("update_map: " + std::to_string(gaps.size()) + " gaps but " +
                          std::to_string(poses.size()) + " poses");
    options.thresholds.validate();

    ObstacleMap next;
    next.planes = prev.planes;
    next.zones = prev.zones;
    next.latest = prev.latest;
    next.stamp = prev.stamp;
    for (const auto& g : gaps)
        next.stamp = std::max(next.stamp, g.timestamp);

    for (const auto& p : prev.points)
        if (next.stamp - p.timestamp < options.history_ms)
            next.points.push_back(p);

    for (std::size_t i = 0; i < gaps.size(); ++i) {
        const auto& gap = gaps[i];
        if (gap.channel < 0 || static_cast<std::size_t>(gap.channel) >= next.channels())
            throw ConfigError("update_map: unknown channel " + std::to_string(gap.channel));
        const auto ch = static_cast<std::size_t>(gap.channel);
        const Vec3 origin = poses[i].position;
        const Vec3 normal = boresight(poses[i]);

        next.latest[ch] = gap;
        switch (gap.status) {
            case GapStatus::in_range: {
                const Vec3 hit = origin + gap.distance * normal;
                next.points.push_back({hit, gap.channel, gap.timestamp});
                next.planes[ch] = Plane{hit, normal};
                next.zones[ch] = classify_zone(gap.distance, options.thresholds);
                break;
            }
            case GapStatus::contact:
                next.points.push_back({origin, gap.channel, gap.timestamp});
                next.planes[ch] = Plane{origin, normal};
                next.zones[ch] = Zone::intrusion;
                break;
            case GapStatus::beyond_range:
                next.planes[ch].reset();
                next.zones[ch] = Zone::safe;
                break;
        }
    }
    return next;
}

/// Most severe zone over all channels.
inline Zone worst_zone(const ObstacleMap& map) {
    Zone worst = Zone::unknown;
    for (Zone z : map.zones)
        if (severity(z) > severity(worst))
            worst = z;
    return worst;
}

}  // namespace circumsense::mapping
