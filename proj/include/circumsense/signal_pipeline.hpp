#pragma once

// Per-channel streaming preprocessing: Tukey/IQR gating in front of a
// fixed-length moving average, plus window statistics (variance, SQI).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <deque>
#include <iterator>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "circumsense/errors.hpp"

namespace circumsense::signal {

struct RawSample {
    std::uint64_t timestamp = 0;  // ms
    int channel = 0;
    double value = 0.0;  // ADC counts
};

struct FilteredSample {
    std::uint64_t timestamp = 0;  // ms, tick of the contributing raw sample
    int channel = 0;
    double value = 0.0;           // smoothed ADC counts
    bool rejected = false;        // contributing raw sample failed the gate
    double centroid_ms = 0.0;     // mean timestamp of the averaged window
};

struct FilterConfig {
    std::size_t window = 10;       // moving-average length N
    double gate_factor = 1.5;      // Tukey fence multiplier f
    double fence_floor = 1.0;      // lower bound on the IQR used for fences (one ADC step)
    std::size_t min_gate_count = 4;  // gate only once this many samples are held
    std::size_t reseed_after = 5;  // consecutive rejections treated as a level shift
};

struct Quartiles {
    double q1;
    double median;
    double q3;
    double iqr() const { return q3 - q1; }
};

/// Quantile of sorted data by linear interpolation between order statistics,
/// position (n - 1) p (the "inclusive" method).
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty())
        throw DomainError("quantile of empty window");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

template <std::ranges::input_range R>
    requires std::convertible_to<std::ranges::range_value_t<R>, double>
Quartiles quartiles(const R& values) {
    std::vector<double> sorted(std::ranges::begin(values), std::ranges::end(values));
    std::sort(sorted.begin(), sorted.end());
    return {quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.5), quantile_sorted(sorted, 0.75)};
}

template <std::ranges::input_range R>
    requires std::convertible_to<std::ranges::range_value_t<R>, double>
double mean(const R& values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        sum += v;
        ++n;
    }
    if (n == 0)
        throw DomainError("mean of empty window");
    return sum / static_cast<double>(n);
}

/// Unbiased sample variance. Throws for fewer than two values.
template <std::ranges::input_range R>
    requires std::convertible_to<std::ranges::range_value_t<R>, double>
double variance(const R& values) {
    std::size_t n = 0;
    double m = 0.0, m2 = 0.0;
    for (double v : values) {  // Welford
        ++n;
        const double delta = v - m;
        m += delta / static_cast<double>(n);
        m2 += delta * (v - m);
    }
    if (n < 2)
        throw DomainError("variance needs at least 2 values, got " + std::to_string(n));
    return m2 / static_cast<double>(n - 1);
}

/// Standard deviation of the residual after removing the least-squares line.
inline double detrended_sd(std::span<const double> w) {
    const std::size_t n = w.size();
    if (n < 2)
        return 0.0;
    const double nx = static_cast<double>(n);
    const double mx = (nx - 1.0) / 2.0;
    const double my = mean(w);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - mx;
        sxy += dx * (w[i] - my);
        sxx += dx * dx;
    }
    const double slope = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = w[i] - (my + slope * (static_cast<double>(i) - mx));
        ss += r * r;
    }
    return std::sqrt(ss / (nx - 1.0));
}

/// SQI(w) = 1 - sd_detrended / (|mean| + sd_detrended), in [0, 1]. 1 for a flat window.
inline double signal_quality(std::span<const double> w) {
    if (w.empty())
        throw DomainError("SQI of empty window");
    const double sd = detrended_sd(w);
    const double denom = std::abs(mean(w)) + sd;
    if (denom == 0.0)
        return 1.0;
    return 1.0 - sd / denom;
}

/// Relative SQI improvement of `filtered` over `raw`: SQI(filtered)/SQI(raw) - 1.
inline double signal_quality_index(std::span<const double> raw, std::span<const double> filtered) {
    if (raw.empty() || raw.size() != filtered.size())
        throw DomainError("SQI windows must be nonempty and of equal length");
    const double base = signal_quality(raw);
    if (base == 0.0)
        throw DomainError("raw window has zero signal quality");
    return signal_quality(filtered) / base - 1.0;
}

/// Moving average over the last N admitted samples of one channel, with samples
/// outside [Q1 - f*IQR, Q3 + f*IQR] of the current window held out.
///
/// A rejected sample emits the previous smoothed value. After `reseed_after`
/// consecutive rejections on the same side of the fences the window is replaced
/// by the rejected run, so a genuine level shift is followed instead of being
/// gated forever.
template <std::floating_point T = double>
class GatedMovingAverage {
public:
    explicit GatedMovingAverage(FilterConfig config = {}) : config_(config) {
        if (config_.window == 0)
            throw ConfigError("filter window must be >= 1");
        if (!(config_.gate_factor > 0.0))
            throw ConfigError("IQR gate factor must be positive");
        if (config_.reseed_after == 0)
            throw ConfigError("reseed_after must be >= 1");
    }

    FilteredSample push(const RawSample& s) {
        if (has_output_ && s.timestamp < last_timestamp_)
            throw ConfigError("timestamps must be non-decreasing on channel " + std::to_string(s.channel));
        last_timestamp_ = s.timestamp;

        const T value = static_cast<T>(s.value);
        bool rejected = false;
        const int side = gate_side(value);
        if (side == 0) {
            pending_.clear();
            append(value, s.timestamp);
        } else {
            if (side != pending_side_)
                pending_.clear();
            pending_side_ = side;
            pending_.push_back({value, s.timestamp});
            if (pending_.size() >= config_.reseed_after) {
                window_.clear();
                for (const auto& e : pending_)
                    append(e.value, e.timestamp);
                pending_.clear();
            } else {
                rejected = true;
            }
        }

        if (!rejected)
            recompute();
        has_output_ = true;
        return {s.timestamp, s.channel, static_cast<double>(smoothed_), rejected, centroid_};
    }

    std::size_t size() const noexcept { return window_.size(); }
    const FilterConfig& config() const noexcept { return config_; }

    std::vector<T> window_values() const {
        std::vector<T> out;
        out.reserve(window_.size());
        for (const auto& e : window_)
            out.push_back(e.value);
        return out;
    }

    /// Gate fences of the current window, or none while the gate is inactive.
    std::optional<std::pair<double, double>> fences() const {
        if (window_.size() < config_.min_gate_count)
            return std::nullopt;
        const auto q = quartiles(window_values());
        const double spread = config_.gate_factor * std::max(q.iqr(), config_.fence_floor);
        return std::pair{q.q1 - spread, q.q3 + spread};
    }

private:
    struct Entry {
        T value;
        std::uint64_t timestamp;
    };

    // 0 inside the fences, -1 below, +1 above.
    int gate_side(T value) const {
        const auto f = fences();
        if (!f || (value >= f->first && value <= f->second))
            return 0;
        return value < f->first ? -1 : 1;
    }

    void append(T value, std::uint64_t timestamp) {
        window_.push_back({value, timestamp});
        if (window_.size() > config_.window)
            window_.pop_front();
    }

    void recompute() {
        T sum = 0;
        double tsum = 0.0;
        for (const auto& e : window_) {
            sum += e.value;
            tsum += static_cast<double>(e.timestamp);
        }
        const auto n = static_cast<T>(window_.size());
        smoothed_ = sum / n;
        centroid_ = tsum / static_cast<double>(window_.size());
    }

    FilterConfig config_;
    std::deque<Entry> window_;
    std::vector<Entry> pending_;  // current run of rejections, all on one side
    int pending_side_ = 0;
    T smoothed_ = 0;
    double centroid_ = 0.0;
    std::uint64_t last_timestamp_ = 0;
    bool has_output_ = false;
};

/// One independent filter per channel.
class FilterBank {
public:
    FilterBank(std::size_t channels, FilterConfig config = {}) : filters_(channels, GatedMovingAverage<>(config)) {}

    FilteredSample push(const RawSample& s) {
        if (s.channel < 0 || static_cast<std::size_t>(s.channel) >= filters_.size())
            throw ConfigError("unknown channel " + std::to_string(s.channel));
        return filters_[static_cast<std::size_t>(s.channel)].push(s);
    }

    std::size_t channels() const noexcept { return filters_.size(); }

private:
    std::vector<GatedMovingAverage<>> filters_;
};

}  // namespace circumsense::signal
