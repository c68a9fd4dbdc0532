#pragma once

#include <algorithm>
#include <cmath>

namespace circumsense::adc {

// 10-bit converter over a 5 V reference.
inline constexpr int kMaxCount = 1023;
inline constexpr double kReferenceVolts = 5.0;
inline constexpr double kVoltsPerCount = kReferenceVolts / kMaxCount;

inline double counts_to_volts(double counts) { return counts * kVoltsPerCount; }
inline double volts_to_counts(double volts) { return volts / kVoltsPerCount; }

/// Round-to-nearest onto the converter grid, saturating at both rails.
inline int quantize_counts(double counts) {
    if (std::isnan(counts))
        return 0;
    return static_cast<int>(std::clamp(std::round(counts), 0.0, static_cast<double>(kMaxCount)));
}

inline int quantize_volts(double volts) { return quantize_counts(volts_to_counts(volts)); }

}  // namespace circumsense::adc
