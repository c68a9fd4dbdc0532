#pragma once

// Synthetic lumen environment: parametric obstacles on linear trajectories,
// ray-cast ground truth, a noisy ADC measurement chain, and a scenario runner
// that drives filtering, kinematics and mapping tick by tick and scores the
// estimated gaps against the reference.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "circumsense/adc.hpp"
#include "circumsense/errors.hpp"
#include "circumsense/optical_model.hpp"
#include "circumsense/pcc_kinematics.hpp"
#include "circumsense/pose.hpp"
#include "circumsense/ring_mapping.hpp"
#include "circumsense/signal_pipeline.hpp"

namespace circumsense::sim {

struct PlaneShape {
    Vec3 point;
    Vec3 normal;
};

struct SphereShape {
    Vec3 center;
    double radius;
};

/// Infinite circular cylinder.
struct CylinderShape {
    Vec3 point;
    Vec3 direction;
    double radius;
};

using Shape = std::variant<PlaneShape, SphereShape, CylinderShape>;

/// Translation of an obstacle at a time stamp.
struct Waypoint {
    double t_ms;
    Vec3 offset;
};

struct Obstacle {
    Shape shape;
    std::vector<Waypoint> trajectory;  // empty: static; clamped outside its time span

    void validate() const {
        std::visit(
            [](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, PlaneShape>) {
                    if (std::abs(s.normal.norm() - 1.0) > 1e-9)
                        throw ConfigError("plane normal must be unit length");
                } else if constexpr (std::is_same_v<S, SphereShape>) {
                    if (!(s.radius > 0.0))
                        throw ConfigError("sphere radius must be positive");
                } else {
                    if (!(s.radius > 0.0))
                        throw ConfigError("cylinder radius must be positive");
                    if (std::abs(s.direction.norm() - 1.0) > 1e-9)
                        throw ConfigError("cylinder direction must be unit length");
                }
            },
            shape);
        for (std::size_t i = 1; i < trajectory.size(); ++i)
            if (!(trajectory[i].t_ms > trajectory[i - 1].t_ms))
                throw ConfigError("obstacle trajectory time stamps must be strictly increasing");
    }

    Vec3 offset_at(double t_ms) const {
        if (trajectory.empty())
            return Vec3::Zero();
        if (t_ms <= trajectory.front().t_ms)
            return trajectory.front().offset;
        if (t_ms >= trajectory.back().t_ms)
            return trajectory.back().offset;
        const auto it = std::upper_bound(trajectory.begin(), trajectory.end(), t_ms,
                                         [](double t, const Waypoint& w) { return t < w.t_ms; });
        const auto& b = *it;
        const auto& a = *(it - 1);
        const double u = (t_ms - a.t_ms) / (b.t_ms - a.t_ms);
        return a.offset + u * (b.offset - a.offset);
    }

    /// Shape moved to its position at time t.
    Shape shape_at(double t_ms) const {
        const Vec3 off = offset_at(t_ms);
        return std::visit(
            [&off](auto s) -> Shape {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, SphereShape>)
                    s.center += off;
                else
                    s.point += off;
                return s;
            },
            shape);
    }
};

namespace detail {

/// Smallest non-negative root of a t^2 + b t + c = 0, if any.
inline std::optional<double> smallest_nonnegative_root(double a, double b, double c) {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0 || a == 0.0)
        return std::nullopt;
    const double sq = std::sqrt(disc);
    // Numerically stable pair of roots.
    const double q = -0.5 * (b + std::copysign(sq, b));
    double t0 = q / a;
    double t1 = q != 0.0 ? c / q : t0;
    if (t0 > t1)
        std::swap(t0, t1);
    if (t0 >= 0.0)
        return t0;
    if (t1 >= 0.0)
        return t1;
    return std::nullopt;
}

inline std::optional<double> ray_hit(const Vec3& o, const Vec3& d, const PlaneShape& p) {
    const double denom = p.normal.dot(d);
    if (denom == 0.0)
        return std::nullopt;
    const double t = p.normal.dot(p.point - o) / denom;
    return t >= 0.0 ? std::optional(t) : std::nullopt;
}

inline std::optional<double> ray_hit(const Vec3& o, const Vec3& d, const SphereShape& s) {
    const Vec3 oc = o - s.center;
    return smallest_nonnegative_root(d.dot(d), 2.0 * oc.dot(d), oc.dot(oc) - s.radius * s.radius);
}

inline std::optional<double> ray_hit(const Vec3& o, const Vec3& d, const CylinderShape& c) {
    // Project out the axis component and solve in the cross-section.
    const Vec3 oc = o - c.point;
    const Vec3 dp = d - d.dot(c.direction) * c.direction;
    const Vec3 op = oc - oc.dot(c.direction) * c.direction;
    return smallest_nonnegative_root(dp.dot(dp), 2.0 * op.dot(dp), op.dot(op) - c.radius * c.radius);
}

inline double surface_distance(const Vec3& x, const PlaneShape& p) { return std::abs(p.normal.dot(x - p.point)); }

inline double surface_distance(const Vec3& x, const SphereShape& s) {
    return std::abs((x - s.center).norm() - s.radius);
}

inline double surface_distance(const Vec3& x, const CylinderShape& c) {
    const Vec3 v = x - c.point;
    return std::abs((v - v.dot(c.direction) * c.direction).norm() - c.radius);
}

}  // namespace detail

/// Distance along the sensor boresight to the first obstacle surface at time t,
/// or none when nothing is hit within `max_distance`.
inline std::optional<double> raycast_distance(const Pose& sensor, const std::vector<Obstacle>& env, double t_ms,
                                              double max_distance) {
    const Vec3 o = sensor.position;
    const Vec3 d = mapping::boresight(sensor);
    std::optional<double> best;
    for (const auto& ob : env) {
        const auto hit = std::visit([&](const auto& s) { return detail::ray_hit(o, d, s); }, ob.shape_at(t_ms));
        if (hit && *hit <= max_distance && (!best || *hit < *best))
            best = hit;
    }
    return best;
}

/// Minimum Euclidean distance from the sensor origin to any obstacle surface.
inline std::optional<double> min_surface_distance(const Pose& sensor, const std::vector<Obstacle>& env,
                                                  double t_ms) {
    std::optional<double> best;
    for (const auto& ob : env) {
        const double dist =
            std::visit([&](const auto& s) { return detail::surface_distance(sensor.position, s); }, ob.shape_at(t_ms));
        if (!best || dist < *best)
            best = dist;
    }
    return best;
}

enum class NoiseKind { gaussian_iid, ar1 };

/// Additive reading noise in ADC counts. `sigma` is the stationary standard deviation
/// of the process (for ar1 the innovation is scaled by sqrt(1 - a^2)).
struct NoiseModel {
    NoiseKind kind = NoiseKind::gaussian_iid;
    double sigma = 0.0;
    double ar_coefficient = 0.0;
    double outlier_rate = 0.0;
    double outlier_magnitude = 0.0;

    void validate() const {
        if (!(sigma >= 0.0))
            throw ConfigError("noise sigma must be >= 0");
        if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0))
            throw ConfigError("AR coefficient must lie in [0, 1)");
        if (!(outlier_rate >= 0.0 && outlier_rate < 1.0))
            throw ConfigError("outlier rate must lie in [0, 1)");
        if (!(outlier_magnitude >= 0.0))
            throw ConfigError("outlier magnitude must be >= 0");
    }

    /// Constants reproducing the static-position variances of the bench unit:
    /// raw about 1.38 counts^2, moving-average (N = 10) output about 0.35 counts^2.
    static NoiseModel bench_matched() {
        NoiseModel n;
        n.kind = NoiseKind::ar1;
        n.sigma = 1.13;
        n.ar_coefficient = 0.5;
        return n;
    }
};

using Rng = std::mt19937_64;

/// Stateful noise stream for one channel.
class NoiseSource {
public:
    explicit NoiseSource(NoiseModel model = {}) : model_(model) { model_.validate(); }

    double draw(Rng& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        double value = 0.0;
        if (model_.sigma > 0.0) {
            if (model_.kind == NoiseKind::ar1) {
                const double a = model_.ar_coefficient;
                state_ = started_ ? a * state_ + std::sqrt(1.0 - a * a) * model_.sigma * normal(rng)
                                  : model_.sigma * normal(rng);
                value = state_;
            } else {
                value = model_.sigma * normal(rng);
            }
        }
        started_ = true;
        if (model_.outlier_rate > 0.0) {
            std::uniform_real_distribution<double> uniform(0.0, 1.0);
            if (uniform(rng) < model_.outlier_rate)
                value += (uniform(rng) < 0.5 ? -1.0 : 1.0) * model_.outlier_magnitude;
        }
        return value;
    }

    const NoiseModel& model() const noexcept { return model_; }

private:
    NoiseModel model_;
    double state_ = 0.0;
    bool started_ = false;
};

/// ADC reading for a true distance; none means nothing in view (far-field voltage).
inline int synthesize_reading(std::optional<double> true_distance, const optical::SensorCalibration& sensor,
                              NoiseSource& noise, Rng& rng) {
    const double volts =
        true_distance ? optical::response_voltage(*true_distance, sensor) : sensor.far_field_voltage();
    return adc::quantize_counts(adc::volts_to_counts(volts) + noise.draw(rng));
}

/// Cable lengths at a time stamp.
struct ActuationKey {
    double t_ms;
    pcc::ActuationVector q;
};

/// Reference distance source standing in for an external motion-capture rig.
struct ReferenceConfig {
    double rate_hz = 180.0;                  // 0: evaluate exactly at the requested time
    std::optional<double> noise_mm;          // uniform +-noise on each reference sample
};

struct Scenario {
    double segment_length = 60.0;  // mm
    pcc::SegmentGeometry geometry{2.5, pcc::kDefaultCablePhase, 10};
    mapping::RingLayout ring{};
    std::vector<optical::SensorCalibration> calibration;   // used by the pipeline
    std::vector<optical::SensorCalibration> sensor_truth;  // used for synthesis; empty: same as calibration
    NoiseModel noise{};
    std::vector<Obstacle> obstacles;
    std::vector<ActuationKey> actuation;
    double duration_ms = 1000.0;
    double rate_hz = 100.0;
    std::uint64_t seed = 1;
    mapping::MapOptions map{};
    signal::FilterConfig filter{};
    ReferenceConfig reference{};
    double ray_horizon = 100.0;  // mm

    const std::vector<optical::SensorCalibration>& truth() const {
        return sensor_truth.empty() ? calibration : sensor_truth;
    }

    std::size_t tick_count() const {
        return static_cast<std::size_t>(std::floor(duration_ms * rate_hz / 1000.0 + 1e-9));
    }

    void validate() const {
        if (!(segment_length > 0.0))
            throw ConfigError("segment length must be positive");
        ring.validate();
        if (ring.mount_disk_index > geometry.disk_count())
            throw ConfigError("mount disk index exceeds disk count");
        const auto units = static_cast<std::size_t>(ring.unit_count);
        if (calibration.size() != units)
            throw ConfigError("need one calibration per unit: " + std::to_string(units) + " units, " +
                              std::to_string(calibration.size()) + " calibrations");
        if (!sensor_truth.empty() && sensor_truth.size() != units)
            throw ConfigError("sensor truth must list one calibration per unit");
        for (const auto& c : calibration)
            if (!c.has_valid_curve() || !c.has_valid_thresholds())
                throw ConfigError("calibration lacks a valid curve or thresholds");
        for (const auto& c : truth())
            if (!c.has_valid_curve())
                throw ConfigError("sensor truth has an invalid curve");
        noise.validate();
        for (const auto& o : obstacles)
            o.validate();
        if (actuation.empty())
            throw ConfigError("actuation schedule is empty");
        for (std::size_t i = 1; i < actuation.size(); ++i)
            if (!(actuation[i].t_ms > actuation[i - 1].t_ms))
                throw ConfigError("actuation time stamps must be strictly increasing");
        for (const auto& k : actuation)
            (void)pcc::config_from_cables(k.q, geometry, segment_length);
        if (!(duration_ms > 0.0))
            throw ConfigError("duration must be positive");
        if (!(rate_hz > 0.0))
            throw ConfigError("sample rate must be positive");
        map.thresholds.validate();
        if (filter.window == 0 || !(filter.gate_factor > 0.0) || filter.reseed_after == 0)
            throw ConfigError("invalid filter configuration");
        if (!(reference.rate_hz >= 0.0))
            throw ConfigError("reference rate must be >= 0");
        if (reference.noise_mm && !(*reference.noise_mm >= 0.0))
            throw ConfigError("reference noise must be >= 0");
        if (!(ray_horizon > 0.0))
            throw ConfigError("ray horizon must be positive");
    }
};

/// Cable lengths at time t, linearly interpolated and clamped to the schedule.
inline pcc::ActuationVector actuation_at(const std::vector<ActuationKey>& schedule, double t_ms) {
    if (t_ms <= schedule.front().t_ms)
        return schedule.front().q;
    if (t_ms >= schedule.back().t_ms)
        return schedule.back().q;
    const auto it = std::upper_bound(schedule.begin(), schedule.end(), t_ms,
                                     [](double t, const ActuationKey& k) { return t < k.t_ms; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double u = (t_ms - a.t_ms) / (b.t_ms - a.t_ms);
    std::array<double, 3> q{};
    for (std::size_t i = 0; i < 3; ++i)
        q[i] = a.q[i] + u * (b.q[i] - a.q[i]);
    return pcc::ActuationVector(q);
}

inline std::vector<Pose> sensor_poses_at(const Scenario& s, double t_ms) {
    const auto cfg = pcc::config_from_cables(actuation_at(s.actuation, t_ms), s.geometry, s.segment_length);
    return mapping::sensor_world_poses(cfg, s.geometry, s.ring);
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined key
    std::uint64_t z = seed ^ (a * 0x9E3779B97F4A7C15ull) ^ (b * 0xC2B2AE3D27D4EB4Full);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Reference distance for `channel` near time t. The exact ray-cast distance is sampled
/// on the reference grid (nearest sample to t), then perturbed by bounded uniform noise.
struct ReferenceSample {
    double t_ms;                     // time of the reference sample used
    std::optional<double> distance;  // mm
};

inline ReferenceSample ground_truth_reference(const Scenario& s, int channel, double t_ms) {
    double t_ref = t_ms;
    std::uint64_t index = 0;
    if (s.reference.rate_hz > 0.0) {
        const double period = 1000.0 / s.reference.rate_hz;
        index = static_cast<std::uint64_t>(std::llround(std::max(0.0, t_ms) / period));
        t_ref = static_cast<double>(index) * period;
    }
    const auto poses = sensor_poses_at(s, t_ref);
    auto d = raycast_distance(poses[static_cast<std::size_t>(channel)], s.obstacles, t_ref, s.ray_horizon);
    if (d && s.reference.noise_mm && *s.reference.noise_mm > 0.0) {
        Rng rng(detail::mix_seed(s.seed, index, static_cast<std::uint64_t>(channel) + 1));
        std::uniform_real_distribution<double> u(-*s.reference.noise_mm, *s.reference.noise_mm);
        d = std::max(0.0, *d + u(rng));
    }
    return {t_ref, d};
}

/// One channel at one tick.
struct TickRecord {
    std::uint64_t t_ms = 0;
    int channel = 0;
    int raw_counts = 0;
    double filtered_counts = 0.0;
    bool rejected = false;
    double centroid_ms = 0.0;
    mapping::GapStatus status = mapping::GapStatus::beyond_range;
    double estimate_mm = 0.0;
    std::optional<double> ray_mm;        // boresight distance at the tick
    std::optional<double> euclid_mm;     // minimum surface distance at the tick
    std::optional<double> reference_mm;  // reference aligned to the filter centroid
    mapping::Zone zone = mapping::Zone::unknown;
    Vec3 sensor_position = Vec3::Zero();
    Vec3 boresight = Vec3::UnitX();
};

struct ZoneTransition {
    std::uint64_t t_ms;
    int channel;
    mapping::Zone from;
    mapping::Zone to;
};

struct ChannelMetrics {
    std::optional<double> rmse;     // mm, over scored ticks
    std::optional<double> max_abs;  // mm
    std::size_t scored_ticks = 0;
};

struct LatencyStats {
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double max_ms = 0.0;
    std::size_t samples = 0;
};

struct RunMetrics {
    std::vector<ChannelMetrics> channels;
    std::optional<double> overall_rmse;
    LatencyStats latency;
    std::vector<ZoneTransition> transitions;
};

struct RunResult {
    RunMetrics metrics;
    std::vector<TickRecord> trace;          // tick-major, channel-minor
    std::vector<signal::RawSample> frames;  // raw readings as produced
    mapping::ObstacleMap final_map;
};

inline LatencyStats latency_stats(std::vector<double> samples) {
    LatencyStats out;
    out.samples = samples.size();
    if (samples.empty())
        return out;
    std::sort(samples.begin(), samples.end());
    out.median_ms = signal::quantile_sorted(samples, 0.5);
    out.p95_ms = signal::quantile_sorted(samples, 0.95);
    out.max_ms = samples.back();
    return out;
}

/// Runs the full measurement and mapping loop at the scenario sample rate.
///
/// Per tick: synthesis (untimed) computes the true robot pose, ray-cast distances and
/// noisy ADC readings; the timed pipeline filters each channel, recomputes the robot
/// configuration from the cable lengths, locates the sensing units, converts readings
/// to gaps and commits one map update. Gaps with status in-range are scored against the
/// reference at the filter centroid time.
inline RunResult run_scenario(const Scenario& s) {
    s.validate();
    using Clock = std::chrono::steady_clock;

    const auto units = static_cast<std::size_t>(s.ring.unit_count);
    const auto& truth = s.truth();
    Rng rng(s.seed);
    std::vector<NoiseSource> noise(units, NoiseSource(s.noise));
    signal::FilterBank filters(units, s.filter);
    mapping::ObstacleMap map = mapping::ObstacleMap::empty(units);

    RunResult out;
    const std::size_t ticks = s.tick_count();
    out.trace.reserve(ticks * units);
    out.frames.reserve(ticks * units);
    std::vector<double> latencies;
    latencies.reserve(ticks);
    std::vector<double> sq_err(units, 0.0), max_err(units, 0.0);
    std::vector<std::size_t> scored(units, 0);

    std::vector<signal::RawSample> raw(units);
    std::vector<signal::FilteredSample> filtered(units);
    std::vector<mapping::GapEstimate> gaps(units);

    for (std::size_t tick = 0; tick < ticks; ++tick) {
        const double t = static_cast<double>(tick) * 1000.0 / s.rate_hz;
        const auto stamp = static_cast<std::uint64_t>(std::llround(t));

        // Synthetic measurement (not part of the deployed pipeline).
        const auto true_poses = sensor_poses_at(s, t);
        std::vector<std::optional<double>> ray(units), euclid(units);
        for (std::size_t u = 0; u < units; ++u) {
            ray[u] = raycast_distance(true_poses[u], s.obstacles, t, s.ray_horizon);
            euclid[u] = min_surface_distance(true_poses[u], s.obstacles, t);
            raw[u] = {stamp, static_cast<int>(u),
                      static_cast<double>(synthesize_reading(ray[u], truth[u], noise[u], rng))};
        }

        // Deployed pipeline.
        const auto start = Clock::now();
        for (std::size_t u = 0; u < units; ++u)
            filtered[u] = filters.push(raw[u]);
        const auto cfg = pcc::config_from_cables(actuation_at(s.actuation, t), s.geometry, s.segment_length);
        const auto poses = mapping::sensor_world_poses(cfg, s.geometry, s.ring);
        for (std::size_t u = 0; u < units; ++u)
            gaps[u] = mapping::reading_to_gap(adc::counts_to_volts(filtered[u].value), s.calibration[u],
                                              static_cast<int>(u), stamp);
        mapping::ObstacleMap next = mapping::update_map(gaps, poses, s.map, map);
        latencies.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());

        for (std::size_t u = 0; u < units; ++u) {
            if (next.zones[u] != map.zones[u])
                out.metrics.transitions.push_back({stamp, static_cast<int>(u), map.zones[u], next.zones[u]});

            TickRecord rec;
            rec.t_ms = stamp;
            rec.channel = static_cast<int>(u);
            rec.raw_counts = static_cast<int>(raw[u].value);
            rec.filtered_counts = filtered[u].value;
            rec.rejected = filtered[u].rejected;
            rec.centroid_ms = filtered[u].centroid_ms;
            rec.status = gaps[u].status;
            rec.estimate_mm = gaps[u].distance;
            rec.ray_mm = ray[u];
            rec.euclid_mm = euclid[u];
            rec.zone = next.zones[u];
            rec.sensor_position = poses[u].position;
            rec.boresight = mapping::boresight(poses[u]);
            if (gaps[u].status == mapping::GapStatus::in_range) {
                rec.reference_mm = ground_truth_reference(s, static_cast<int>(u), filtered[u].centroid_ms).distance;
                if (rec.reference_mm) {
                    const double err = gaps[u].distance - *rec.reference_mm;
                    sq_err[u] += err * err;
                    max_err[u] = std::max(max_err[u], std::abs(err));
                    ++scored[u];
                }
            }
            out.trace.push_back(rec);
            out.frames.push_back(raw[u]);
        }
        map = std::move(next);
    }

    double total_sq = 0.0;
    std::size_t total_n = 0;
    out.metrics.channels.resize(units);
    for (std::size_t u = 0; u < units; ++u) {
        auto& m = out.metrics.channels[u];
        m.scored_ticks = scored[u];
        if (scored[u] > 0) {
            m.rmse = std::sqrt(sq_err[u] / static_cast<double>(scored[u]));
            m.max_abs = max_err[u];
        }
        total_sq += sq_err[u];
        total_n += scored[u];
    }
    if (total_n > 0)
        out.metrics.overall_rmse = std::sqrt(total_sq / static_cast<double>(total_n));
    out.metrics.latency = latency_stats(std::move(latencies));
    out.final_map = std::move(map);
    return out;
}

}  // namespace circumsense::sim
