#pragma once

// Constant-curvature kinematics of a single cable-driven segment and the
// poses of the vertebral disks that subdivide it.
//
// Frame convention: the segment base frame has +z along the undeflected
// backbone. A segment bends by `theta` in the plane at angle `phi` from +x.
// The tip (and every disk) frame is base * Rz(phi) * Ry(theta) * Rz(-phi),
// which keeps the local +z axis tangent to the backbone arc.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "circumsense/errors.hpp"
#include "circumsense/pose.hpp"

namespace circumsense::pcc {

/// Below this bending angle the closed-form position switches to its Taylor series.
inline constexpr double kSeriesThreshold = 1e-6;

/// Cable spacing for which the closed-form inverse map is exact.
inline constexpr double kDefaultCablePhase = 2.0 * std::numbers::pi / 3.0;

/// (theta, phi, L) of one segment. theta in [0, pi], phi in [-pi, pi], L > 0 (mm).
class SegmentConfig {
public:
    SegmentConfig(double theta, double phi, double length) : theta_(theta), phi_(phi), length_(length) {
        constexpr double pi = std::numbers::pi;
        if (!(theta >= 0.0 && theta <= pi))
            throw ConfigError("segment theta out of [0, pi]: " + std::to_string(theta));
        if (!(phi >= -pi && phi <= pi))
            throw ConfigError("segment phi out of [-pi, pi]: " + std::to_string(phi));
        if (!(length > 0.0) || !std::isfinite(length))
            throw ConfigError("segment length must be positive: " + std::to_string(length));
    }

    double theta() const noexcept { return theta_; }
    double phi() const noexcept { return phi_; }
    double length() const noexcept { return length_; }

    /// Bending radius L/theta; infinite for a straight segment.
    double radius() const noexcept {
        return theta_ > 0.0 ? length_ / theta_ : std::numeric_limits<double>::infinity();
    }

    friend bool operator==(const SegmentConfig&, const SegmentConfig&) = default;

private:
    double theta_;
    double phi_;
    double length_;
};

/// Cable pitch radius r (mm), phase xi between adjacent cables, disk count eta.
class SegmentGeometry {
public:
    SegmentGeometry(double cable_radius, double cable_phase = kDefaultCablePhase, int disk_count = 1)
        : cable_radius_(cable_radius), cable_phase_(cable_phase), disk_count_(disk_count) {
        if (!(cable_radius > 0.0) || !std::isfinite(cable_radius))
            throw ConfigError("cable radius must be positive");
        if (!(cable_phase > 0.0 && cable_phase <= std::numbers::pi))
            throw ConfigError("cable phase must lie in (0, pi]");
        if (disk_count < 1)
            throw ConfigError("disk count must be >= 1");
    }

    double cable_radius() const noexcept { return cable_radius_; }
    double cable_phase() const noexcept { return cable_phase_; }
    int disk_count() const noexcept { return disk_count_; }

private:
    double cable_radius_;
    double cable_phase_;
    int disk_count_;
};

/// Three cable lengths q1..q3 (mm), all positive.
class ActuationVector {
public:
    explicit ActuationVector(std::array<double, 3> q) : q_(q) {
        for (double v : q_)
            if (!(v > 0.0) || !std::isfinite(v))
                throw ConfigError("cable lengths must be positive: " + std::to_string(v));
    }
    ActuationVector(double q1, double q2, double q3) : ActuationVector(std::array{q1, q2, q3}) {}

    double operator[](std::size_t i) const { return q_[i]; }
    const std::array<double, 3>& values() const noexcept { return q_; }

private:
    std::array<double, 3> q_;
};

/// The five pose parameters of a disk: position plus (theta_g, phi_g).
struct DiskParams {
    double x;
    double y;
    double z;
    double theta;
    double phi;
};

struct DiskPose {
    int index;  // 1..eta
    Pose pose;
    DiskParams params;
};

namespace detail {

/// (1 - cos t)/t and sin(t)/t, series-expanded near zero.
inline std::pair<double, double> arc_factors(double theta) {
    if (theta < kSeriesThreshold) {
        const double t2 = theta * theta;
        return {theta / 2.0 - theta * t2 / 24.0, 1.0 - t2 / 6.0};
    }
    const double h = std::sin(0.5 * theta);  // 1 - cos t = 2 sin^2(t/2), no cancellation
    return {2.0 * h * h / theta, std::sin(theta) / theta};
}

}  // namespace detail

inline Vec3 segment_tip_position(double theta, double phi, double length) {
    const auto [bend, axial] = detail::arc_factors(theta);
    return length * Vec3(bend * std::cos(phi), bend * std::sin(phi), axial);
}

inline Mat3 segment_tip_rotation(double theta, double phi) {
    return rot_z(phi) * rot_y(theta) * rot_z(-phi);
}

/// Tip pose of a segment relative to its base frame.
inline Pose forward_segment_pose(const SegmentConfig& cfg) {
    return {segment_tip_position(cfg.theta(), cfg.phi(), cfg.length()),
            segment_tip_rotation(cfg.theta(), cfg.phi())};
}

/// q_i = L - r * theta * cos(phi + (i-1) xi). Throws if any cable would be non-positive.
inline ActuationVector cables_from_config(const SegmentConfig& cfg, const SegmentGeometry& geom) {
    std::array<double, 3> q{};
    for (int i = 0; i < 3; ++i) {
        q[i] = cfg.length() -
               geom.cable_radius() * cfg.theta() * std::cos(cfg.phi() + i * geom.cable_phase());
        if (!(q[i] > 0.0))
            throw ConfigError("infeasible bend: cable " + std::to_string(i + 1) + " length " +
                              std::to_string(q[i]) + " mm");
    }
    return ActuationVector(q);
}

/// Closed-form inverse of the cable map, valid for three cables at 2*pi/3 spacing.
/// phi is 0 by convention when all cables are equal.
inline SegmentConfig config_from_cables(const ActuationVector& q, const SegmentGeometry& geom, double length) {
    if (std::abs(geom.cable_phase() - kDefaultCablePhase) > 1e-12)
        throw ConfigError("closed-form cable inverse requires a cable phase of 2*pi/3");

    const double d12 = q[0] - q[1];
    const double d23 = q[1] - q[2];
    const double d31 = q[2] - q[0];
    // q1^2+q2^2+q3^2-q1q2-q2q3-q1q3, written as half the sum of squared differences.
    const double radicand = std::max(0.0, 0.5 * (d12 * d12 + d23 * d23 + d31 * d31));
    double theta = 2.0 * std::sqrt(radicand) / (3.0 * geom.cable_radius());

    constexpr double pi = std::numbers::pi;
    if (theta > pi) {
        if (theta - pi > 1e-12)
            throw ConfigError("cable lengths imply theta > pi: " + std::to_string(theta));
        theta = pi;
    }

    const double sy = std::sqrt(3.0) * (q[1] - q[2]);
    const double sx = (q[1] - q[0]) + (q[2] - q[0]);
    const double phi = (sy == 0.0 && sx == 0.0) ? 0.0 : std::atan2(sy, sx);
    return SegmentConfig(theta, phi, length);
}

/// Pose of disk g (1..eta): the sub-arc with L_g = (g/eta) L, theta_g = (g/eta) theta.
inline DiskPose disk_pose(int g, const SegmentConfig& cfg, const SegmentGeometry& geom) {
    const int eta = geom.disk_count();
    if (g < 1 || g > eta)
        throw ConfigError("disk index " + std::to_string(g) + " outside 1.." + std::to_string(eta));

    const double frac = static_cast<double>(g) / eta;
    const double theta_g = frac * cfg.theta();
    const double length_g = frac * cfg.length();
    const Pose pose = forward_segment_pose(SegmentConfig(theta_g, cfg.phi(), length_g));
    return {g, pose, {pose.position.x(), pose.position.y(), pose.position.z(), theta_g, cfg.phi()}};
}

/// Poses of all disks 1..eta in order.
inline std::vector<DiskPose> disk_poses(const SegmentConfig& cfg, const SegmentGeometry& geom) {
    std::vector<DiskPose> out;
    out.reserve(geom.disk_count());
    for (int g = 1; g <= geom.disk_count(); ++g)
        out.push_back(disk_pose(g, cfg, geom));
    return out;
}

/// Tip poses of a chain of segments, each expressed in the world frame.
inline std::vector<Pose> chain_tip_poses(std::span<const SegmentConfig> segments, const Pose& base = {}) {
    std::vector<Pose> out;
    out.reserve(segments.size());
    Pose current = base;
    for (const auto& seg : segments) {
        current = current.compose(forward_segment_pose(seg));
        out.push_back(current);
    }
    return out;
}

}  // namespace circumsense::pcc
