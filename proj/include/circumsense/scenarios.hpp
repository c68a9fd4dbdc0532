#pragma once

// Reference sensor units and ready-made scenarios: a bench calibration run, a
// sequential proximity-approach protocol, and a bending robot inside a lumen.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "circumsense/adc.hpp"
#include "circumsense/lumen_sim.hpp"
#include "circumsense/optical_model.hpp"
#include "circumsense/pcc_kinematics.hpp"

namespace circumsense::scenarios {

/// Sensitivity floor (V/mm) bounding the calibrated band of the reference units.
inline constexpr double kSensitivityFloor = 0.25;

/// Raw-reading variance of a static unit, counts^2.
inline constexpr double kBenchRawVariance = 1.38;

/// Logistic parameters of four reference units (voltage rises as the wall gets closer).
inline std::vector<optical::SensorCalibration> reference_units() {
    constexpr std::array<std::array<double, 4>, 4> params = {{
        {3.80, -1.20, 4.00, 0.35},
        {3.70, -1.10, 4.20, 0.40},
        {3.90, -1.30, 3.80, 0.30},
        {3.75, -1.15, 4.10, 0.38},
    }};
    std::vector<optical::SensorCalibration> out;
    for (const auto& p : params) {
        optical::SensorCalibration c;
        c.v_max = p[0];
        c.k_slope = p[1];
        c.delta_z0 = p[2];
        c.epsilon = p[3];
        out.push_back(optical::with_thresholds(c, kSensitivityFloor));
    }
    return out;
}

/// Distance-voltage pairs from a displacement-stage run: `count` stations spaced by
/// `step` mm starting at `step`, with Gaussian reading noise of the given variance
/// (counts^2) converted to volts.
inline std::vector<optical::CalibrationSample> bench_samples(const optical::SensorCalibration& truth,
                                                             std::mt19937_64& rng, double variance_counts = 0.0,
                                                             int count = 60, double step = 0.25) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd_volts = std::sqrt(variance_counts) * adc::kVoltsPerCount;
    std::vector<optical::CalibrationSample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 1; i <= count; ++i) {
        const double d = i * step;
        double v = optical::response_voltage(d, truth);
        if (sd_volts > 0.0)
            v += sd_volts * normal(rng);
        out.push_back({d, std::max(0.0, v)});
    }
    return out;
}

/// Calibrations fitted from a noisy bench run of each reference unit.
inline std::vector<optical::FitReport> bench_calibrate(const std::vector<optical::SensorCalibration>& truth,
                                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<optical::FitReport> out;
    for (const auto& unit : truth) {
        const auto samples = bench_samples(unit, rng, kBenchRawVariance);
        auto report = optical::fit_calibration(samples);
        report.calibration = optical::with_thresholds(report.calibration, kSensitivityFloor);
        out.push_back(report);
    }
    return out;
}

/// Static bent robot shared by the scenarios below.
inline void set_robot(sim::Scenario& s, double theta, double phi) {
    s.segment_length = 60.0;
    s.geometry = pcc::SegmentGeometry(2.5, pcc::kDefaultCablePhase, 10);
    s.ring = mapping::RingLayout{};
    s.ring.mount_disk_index = 5;
    const auto q = pcc::cables_from_config(pcc::SegmentConfig(theta, phi, s.segment_length), s.geometry);
    s.actuation = {{0.0, q}};
}

struct ApproachOptions {
    bool noisy = true;  // bench-matched reading noise, fitted calibration, noisy reference
    std::uint64_t seed = 7;
    double speed_mm_per_s = 1.0;
    double start_gap = 8.0;  // mm
    double end_gap = 1.0;    // mm
};

/// Sequential approach protocol: for each unit in turn a flat target facing its
/// boresight moves in from a parked position, approaches at constant speed to
/// `end_gap`, holds for one second, then recedes at the same speed and parks again.
inline sim::Scenario approach_scenario(const ApproachOptions& opt = {}) {
    sim::Scenario s;
    set_robot(s, std::numbers::pi / 6.0, std::numbers::pi / 4.0);
    s.sensor_truth = reference_units();
    if (opt.noisy) {
        for (const auto& r : bench_calibrate(s.sensor_truth, opt.seed ^ 0xCA11B7A7Eull))
            s.calibration.push_back(r.calibration);
        s.noise = sim::NoiseModel::bench_matched();
        s.noise.outlier_rate = 0.005;
        s.noise.outlier_magnitude = 30.0;
        s.reference.noise_mm = 0.1;
    } else {
        s.calibration = s.sensor_truth;
    }
    s.seed = opt.seed;
    s.map.thresholds = {5.0, 2.5};

    const double park = 40.0;
    const double travel_ms = (opt.start_gap - opt.end_gap) / opt.speed_mm_per_s * 1000.0;
    const double period = 1000.0 + travel_ms + 1000.0 + travel_ms + 1000.0;
    const auto poses = sim::sensor_poses_at(s, 0.0);
    for (std::size_t u = 0; u < poses.size(); ++u) {
        const Vec3 b = mapping::boresight(poses[u]);
        sim::Obstacle target;
        target.shape = sim::PlaneShape{poses[u].position, -b};
        const double t0 = static_cast<double>(u) * period;
        const double gaps[][2] = {{t0, park},
                                  {t0 + 1000.0, opt.start_gap},
                                  {t0 + 1000.0 + travel_ms, opt.end_gap},
                                  {t0 + 2000.0 + travel_ms, opt.end_gap},
                                  {t0 + 2000.0 + 2.0 * travel_ms, opt.start_gap},
                                  {t0 + period, park}};
        for (const auto& g : gaps)
            target.trajectory.push_back({g[0], g[1] * b});
        s.obstacles.push_back(std::move(target));
    }
    s.duration_ms = period * static_cast<double>(poses.size());
    return s;
}

/// Robot bending back and forth inside a straight cylindrical lumen while a
/// spherical protrusion drifts past the sensing ring.
inline sim::Scenario lumen_scenario(double duration_ms = 100000.0, std::uint64_t seed = 11) {
    sim::Scenario s;
    set_robot(s, 0.0, 0.0);
    s.sensor_truth = reference_units();
    s.calibration = s.sensor_truth;
    s.noise = sim::NoiseModel::bench_matched();
    s.noise.outlier_rate = 0.005;
    s.noise.outlier_magnitude = 30.0;
    s.seed = seed;
    s.map.thresholds = {5.0, 2.5};
    s.duration_ms = duration_ms;

    s.actuation.clear();
    const double key_step = 250.0;
    for (double t = 0.0; t <= duration_ms + key_step; t += key_step) {
        const double theta = 0.45 * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * t / 20000.0));
        double phi = std::remainder(2.0 * std::numbers::pi * t / 45000.0, 2.0 * std::numbers::pi);
        phi = std::clamp(phi, -std::numbers::pi, std::numbers::pi);
        s.actuation.push_back({t, pcc::cables_from_config(pcc::SegmentConfig(theta, phi, s.segment_length), s.geometry)});
    }

    s.obstacles.push_back({sim::CylinderShape{Vec3::Zero(), Vec3::UnitZ(), 10.0}, {}});
    sim::Obstacle polyp{sim::SphereShape{Vec3(9.5, 0.0, 30.0), 2.0}, {}};
    polyp.trajectory = {{0.0, Vec3(0.0, 0.0, -20.0)}, {duration_ms, Vec3(0.0, 0.0, 20.0)}};
    s.obstacles.push_back(std::move(polyp));
    return s;
}

}  // namespace circumsense::scenarios
