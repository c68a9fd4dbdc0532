#pragma once

// Logistic voltage-vs-distance model of one reflective proximity unit:
//
//     V(dz) = v_max / (1 + exp(-k (dz - dz0))) + epsilon
//
// k is signed. A unit whose output rises as the wall gets closer has k < 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "circumsense/errors.hpp"

namespace circumsense::optical {

struct SensorCalibration {
    double v_max = 1.0;        // V
    double k_slope = -1.0;     // 1/mm
    double delta_z0 = 1.0;     // mm
    double epsilon = 0.0;      // V
    double threshold_low = std::numeric_limits<double>::quiet_NaN();  // V
    double threshold_up = std::numeric_limits<double>::quiet_NaN();   // V
    double max_distance = std::numeric_limits<double>::quiet_NaN();   // mm

    bool has_valid_curve() const {
        return v_max > 0.0 && k_slope != 0.0 && std::isfinite(v_max) && std::isfinite(k_slope) &&
               std::isfinite(delta_z0) && std::isfinite(epsilon);
    }

    bool has_valid_thresholds() const {
        return std::isfinite(threshold_low) && std::isfinite(threshold_up) && threshold_low < threshold_up &&
               std::isfinite(max_distance) && max_distance > 0.0;
    }

    /// Voltage at the midpoint of the curve, v_max/2 + epsilon.
    double midpoint_voltage() const { return 0.5 * v_max + epsilon; }

    /// Voltage approached as the target recedes to infinity.
    double far_field_voltage() const { return k_slope < 0.0 ? epsilon : v_max + epsilon; }

    /// Largest |dV/d(dz)|, attained at delta_z0.
    double peak_slope() const { return std::abs(k_slope) * v_max / 4.0; }

    friend bool operator==(const SensorCalibration&, const SensorCalibration&) = default;
};

struct CalibrationSample {
    double distance;  // mm
    double voltage;   // V
};

struct FitReport {
    SensorCalibration calibration;
    double r_squared = 0.0;
    double residual_rms = 0.0;  // V
    int iterations = 0;
};

inline double response_voltage(double delta_z, const SensorCalibration& c) {
    return c.v_max / (1.0 + std::exp(-c.k_slope * (delta_z - c.delta_z0))) + c.epsilon;
}

/// dV/d(dz).
inline double response_slope(double delta_z, const SensorCalibration& c) {
    const double s = 1.0 / (1.0 + std::exp(-c.k_slope * (delta_z - c.delta_z0)));
    return c.v_max * c.k_slope * s * (1.0 - s);
}

/// Closed-form inverse of the logistic, ignoring the calibrated band.
/// Throws DomainError unless epsilon < v < v_max + epsilon.
inline double invert_logistic(double v, const SensorCalibration& c) {
    const double u = v - c.epsilon;
    if (!(u > 0.0 && u < c.v_max))
        throw DomainError("voltage " + std::to_string(v) + " outside the logistic range (" +
                          std::to_string(c.epsilon) + ", " + std::to_string(c.v_max + c.epsilon) + ")");
    return c.delta_z0 - std::log(c.v_max / u - 1.0) / c.k_slope;
}

/// Distance for a voltage inside the calibrated band (threshold_low, threshold_up).
/// Throws OutOfRangeReading outside the band; the caller applies clamping.
inline double invert_voltage(double v, const SensorCalibration& c) {
    if (!c.has_valid_thresholds())
        throw ConfigError("calibration has no valid thresholds");
    if (!(v > c.threshold_low && v < c.threshold_up))
        throw OutOfRangeReading("voltage " + std::to_string(v) + " outside calibrated band (" +
                                std::to_string(c.threshold_low) + ", " + std::to_string(c.threshold_up) + ")");
    return invert_logistic(v, c);
}

/// Voltages on either side of delta_z0 where |dV/d(dz)| drops to `sensitivity_floor` (V/mm).
/// Returns (low, up) with low <= up.
inline std::pair<double, double> derive_thresholds(const SensorCalibration& c, double sensitivity_floor) {
    if (!(sensitivity_floor > 0.0))
        throw ConfigError("sensitivity floor must be positive");
    const double peak = c.peak_slope();
    if (sensitivity_floor > peak)
        throw ConfigError("sensitivity floor " + std::to_string(sensitivity_floor) +
                          " V/mm exceeds peak slope " + std::to_string(peak) + " V/mm");
    // |dV/dz| = v_max |k| s (1 - s)  =>  s (1 - s) = floor / (v_max |k|)
    const double half_width = 0.5 * std::sqrt(std::max(0.0, 1.0 - sensitivity_floor / peak));
    return {c.epsilon + c.v_max * (0.5 - half_width), c.epsilon + c.v_max * (0.5 + half_width)};
}

/// Fills thresholds from a sensitivity floor and sets max_distance to the distance
/// at the far-field threshold.
inline SensorCalibration with_thresholds(SensorCalibration c, double sensitivity_floor) {
    const auto [low, up] = derive_thresholds(c, sensitivity_floor);
    if (!(low < up))
        throw ConfigError("sensitivity floor leaves an empty calibrated band");
    c.threshold_low = low;
    c.threshold_up = up;
    c.max_distance = invert_logistic(c.k_slope < 0.0 ? low : up, c);
    if (!(c.max_distance > 0.0))
        throw ConfigError("calibrated band lies entirely at negative distance");
    return c;
}

struct FitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-10;  // relative parameter step
    std::optional<SensorCalibration> seed;
};

namespace detail {

using Params = Eigen::Vector4d;  // v_max, k, dz0, epsilon

inline SensorCalibration to_calibration(const Params& p) {
    SensorCalibration c;
    c.v_max = p[0];
    c.k_slope = p[1];
    c.delta_z0 = p[2];
    c.epsilon = p[3];
    return c;
}

inline Params to_params(const SensorCalibration& c) { return {c.v_max, c.k_slope, c.delta_z0, c.epsilon}; }

inline double sum_squares(std::span<const CalibrationSample> samples, const Params& p) {
    const auto c = to_calibration(p);
    double ss = 0.0;
    for (const auto& s : samples) {
        const double r = s.voltage - response_voltage(s.distance, c);
        ss += r * r;
    }
    return ss;
}

/// Data-driven starting point: amplitude and baseline from the voltage range, midpoint
/// distance from the sample nearest mid-voltage, slope sign from the trend and magnitude
/// from the steepest finite difference.
inline Params initial_guess(std::span<const CalibrationSample> samples) {
    std::vector<CalibrationSample> sorted(samples.begin(), samples.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.distance < b.distance; });

    const auto [lo, hi] = std::minmax_element(sorted.begin(), sorted.end(),
                                              [](const auto& a, const auto& b) { return a.voltage < b.voltage; });
    const double v_min = lo->voltage;
    const double amplitude = hi->voltage - v_min;
    const double v_mid = v_min + 0.5 * amplitude;

    const auto mid = std::min_element(sorted.begin(), sorted.end(), [v_mid](const auto& a, const auto& b) {
        return std::abs(a.voltage - v_mid) < std::abs(b.voltage - v_mid);
    });

    // Trend: least-squares slope sign of voltage against distance.
    const double n = static_cast<double>(sorted.size());
    double mz = 0.0, mv = 0.0;
    for (const auto& s : sorted) {
        mz += s.distance;
        mv += s.voltage;
    }
    mz /= n;
    mv /= n;
    double cov = 0.0;
    for (const auto& s : sorted)
        cov += (s.distance - mz) * (s.voltage - mv);
    const double sign = cov < 0.0 ? -1.0 : 1.0;

    double steepest = 0.0;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double dz = sorted[i].distance - sorted[i - 1].distance;
        if (dz > 0.0)
            steepest = std::max(steepest, std::abs(sorted[i].voltage - sorted[i - 1].voltage) / dz);
    }
    if (steepest == 0.0)
        steepest = amplitude;

    return {amplitude, sign * 4.0 * steepest / amplitude, mid->distance, v_min};
}

}  // namespace detail

/// Four-parameter logistic fit by damped Gauss-Newton (Levenberg-Marquardt) with an
/// analytic Jacobian. Deterministic for identical input and seed.
inline FitReport fit_calibration(std::span<const CalibrationSample> samples, const FitOptions& options = {}) {
    using detail::Params;
    if (samples.size() < 8)
        throw FitFailure("at least 8 samples required, got " + std::to_string(samples.size()), 0, 0.0);
    for (const auto& s : samples)
        if (!(s.distance >= 0.0) || !(s.voltage >= 0.0) || !std::isfinite(s.distance) || !std::isfinite(s.voltage))
            throw FitFailure("samples must have finite non-negative distance and voltage", 0, 0.0);

    const double n = static_cast<double>(samples.size());
    const double mean_v =
        std::accumulate(samples.begin(), samples.end(), 0.0, [](double a, const auto& s) { return a + s.voltage; }) / n;
    double ss_tot = 0.0;
    for (const auto& s : samples)
        ss_tot += (s.voltage - mean_v) * (s.voltage - mean_v);
    const auto [lo, hi] = std::ranges::minmax(samples, {}, &CalibrationSample::voltage);
    if (!(ss_tot > 0.0) || lo.voltage == hi.voltage)
        throw FitFailure("degenerate data: all voltages equal", 0, 0.0);

    Params p = options.seed ? detail::to_params(*options.seed) : detail::initial_guess(samples);
    double cost = detail::sum_squares(samples, p);
    double lambda = 1e-3;
    const Eigen::Index m = static_cast<Eigen::Index>(samples.size());

    int iter = 0;
    bool converged = false;
    while (iter < options.max_iterations) {
        ++iter;
        Eigen::MatrixXd jac(m, 4);
        Eigen::VectorXd res(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& smp = samples[static_cast<std::size_t>(i)];
            const double dz = smp.distance - p[2];
            const double s = 1.0 / (1.0 + std::exp(-p[1] * dz));
            const double ds = s * (1.0 - s);
            jac(i, 0) = s;
            jac(i, 1) = p[0] * ds * dz;
            jac(i, 2) = -p[0] * ds * p[1];
            jac(i, 3) = 1.0;
            res[i] = smp.voltage - (p[0] * s + p[3]);
        }
        const Eigen::Matrix4d jtj = jac.transpose() * jac;
        const Eigen::Vector4d jtr = jac.transpose() * res;

        // Inner loop: raise damping until the step lowers the cost.
        bool accepted = false;
        Params step = Params::Zero();
        while (lambda < 1e16) {
            Eigen::Matrix4d damped = jtj;
            for (int d = 0; d < 4; ++d)
                damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
            step = damped.ldlt().solve(jtr);
            const Params trial = p + step;
            const double trial_cost = (trial[0] > 0.0 && trial[1] != 0.0 && std::isfinite(trial[1]))
                                          ? detail::sum_squares(samples, trial)
                                          : std::numeric_limits<double>::infinity();
            if (trial_cost <= cost) {
                p = trial;
                cost = trial_cost;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }

        double rel_step = 0.0;
        for (int d = 0; d < 4; ++d)
            rel_step = std::max(rel_step, std::abs(step[d]) / std::max(std::abs(p[d]), 1e-12));
        // A rejected step at maximal damping means no descent direction is left.
        if (!accepted || rel_step < options.step_tolerance) {
            converged = true;
            break;
        }
    }

    const double rms = std::sqrt(cost / n);
    if (!converged)
        throw FitFailure("logistic fit did not converge within " + std::to_string(options.max_iterations) +
                             " iterations",
                         iter, rms);

    FitReport report;
    report.calibration = detail::to_calibration(p);
    report.r_squared = 1.0 - cost / ss_tot;
    report.residual_rms = rms;
    report.iterations = iter;
    return report;
}

/// Coefficient of determination of a calibration against samples.
inline double r_squared(std::span<const CalibrationSample> samples, const SensorCalibration& c) {
    const double n = static_cast<double>(samples.size());
    double mean_v = 0.0;
    for (const auto& s : samples)
        mean_v += s.voltage;
    mean_v /= n;
    double ss_tot = 0.0, ss_res = 0.0;
    for (const auto& s : samples) {
        ss_tot += (s.voltage - mean_v) * (s.voltage - mean_v);
        const double r = s.voltage - response_voltage(s.distance, c);
        ss_res += r * r;
    }
    return 1.0 - ss_res / ss_tot;
}

}  // namespace circumsense::optical
