#pragma once

#include "circumsense/ring_mapping.hpp"

#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace testing_support {

using namespace circumsense;
using namespace circumsense::mapping;

// Rebuilds the map from the whole gap history without reusing previous maps.
inline ObstacleMap rebuild_map(const std::vector<std::vector<GapEstimate>>& gap_steps,
                    const std::vector<std::vector<Pose>>& pose_steps, const MapOptions& opt, std::size_t channels) {
    ObstacleMap m = ObstacleMap::empty(channels);
    std::vector<ObstaclePoint> all;
    for (std::size_t s = 0; s < gap_steps.size(); ++s)
        for (std::size_t i = 0; i < gap_steps[s].size(); ++i) {
            const auto& g = gap_steps[s][i];
            const auto& p = pose_steps[s][i];
            m.stamp = std::max(m.stamp, g.timestamp);
            const auto ch = static_cast<std::size_t>(g.channel);
            m.latest[ch] = g;
            const Vec3 n = p.rotation.col(0);
            if (g.status == GapStatus::in_range) {
                const Vec3 hit = p.position + g.distance * n;
                all.push_back({hit, g.channel, g.timestamp});
                m.planes[ch] = Plane{hit, n};
                m.zones[ch] = g.distance < opt.thresholds.d_intrude ? Zone::intrusion
                              : g.distance < opt.thresholds.d_warn   ? Zone::warning
                                                                     : Zone::safe;
            } else if (g.status == GapStatus::contact) {
                all.push_back({p.position, g.channel, g.timestamp});
                m.planes[ch] = Plane{p.position, n};
                m.zones[ch] = Zone::intrusion;
            } else {
                m.planes[ch].reset();
                m.zones[ch] = Zone::safe;
            }
        }
    for (const auto& p : all)
        if (m.stamp - p.timestamp < opt.history_ms)
            m.points.push_back(p);
    return m;
}

/// One random multi-step instance: incremental updates versus a rebuild from history.
inline bool random_map_instance_matches(std::mt19937_64& rng) {
    constexpr double pi = std::numbers::pi;
    std::uniform_int_distribution<int> nch(1, 4), nsteps(1, 12), status(0, 2), dt(0, 900), pick(0, 1);
    std::uniform_real_distribution<double> dist(0.05, 9.0), th(0.0, pi), ph(-pi, pi);
    const auto channels = static_cast<std::size_t>(nch(rng));
    RingLayout r;
    r.unit_count = static_cast<int>(channels);
    r.mount_disk_index = 3;
    const pcc::SegmentGeometry geom(2.5, pcc::kDefaultCablePhase, 6);
    MapOptions opt;
    opt.history_ms = 1500;
    opt.thresholds = {5.0, 2.0};

    std::vector<std::vector<GapEstimate>> gap_steps;
    std::vector<std::vector<Pose>> pose_steps;
    auto m = ObstacleMap::empty(channels);
    std::uint64_t t = 0;
    const int steps = nsteps(rng);
    for (int s = 0; s < steps; ++s) {
        t += static_cast<std::uint64_t>(dt(rng));
        const auto all = sensor_world_poses(pcc::SegmentConfig(th(rng), ph(rng), 60.0), geom, r);
        std::vector<GapEstimate> gaps;
        std::vector<Pose> poses;
        for (std::size_t ch = 0; ch < channels; ++ch) {
            if (pick(rng) == 0 && ch > 0)
                continue;  // channel silent this step
            const auto st = static_cast<GapStatus>(status(rng));
            const double d = st == GapStatus::contact ? 0.0 : st == GapStatus::beyond_range ? 9.5 : dist(rng);
            gaps.push_back({static_cast<int>(ch), d, st, t});
            poses.push_back(all[ch]);
        }
        m = update_map(gaps, poses, opt, m);
        gap_steps.push_back(gaps);
        pose_steps.push_back(poses);
    }
    return m == rebuild_map(gap_steps, pose_steps, opt, channels);
}

}  // namespace testing_support
