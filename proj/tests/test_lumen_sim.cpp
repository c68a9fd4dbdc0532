#include "circumsense/lumen_sim.hpp"
#include "circumsense/scenarios.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

using namespace circumsense;
using namespace circumsense::sim;

namespace {

const Pose kOrigin{Vec3::Zero(), Mat3::Identity()};

Obstacle fixed(Shape s) { return {s, {}}; }

// Static robot with a flat target at `gap` mm in front of every unit.
Scenario static_plane_scenario(double gap) {
    Scenario s;
    scenarios::set_robot(s, 0.4, 0.3);
    s.calibration = scenarios::reference_units();
    s.duration_ms = 2000.0;
    s.map.thresholds = {5.0, 2.5};
    for (const auto& p : sensor_poses_at(s, 0.0)) {
        const Vec3 b = mapping::boresight(p);
        s.obstacles.push_back(fixed(PlaneShape{p.position + gap * b, -b}));
    }
    return s;
}

std::size_t hash_obstacles(const std::vector<Obstacle>& obs, double t) {
    std::size_t h = 0;
    auto mix = [&h](double v) { h = h * 1000003u ^ std::hash<double>{}(v); };
    for (const auto& o : obs) {
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, SphereShape>) {
                    for (int i = 0; i < 3; ++i)
                        mix(s.center[i]);
                } else {
                    for (int i = 0; i < 3; ++i)
                        mix(s.point[i]);
                }
            },
            o.shape_at(t));
    }
    return h;
}

}  // namespace

TEST(Raycast, PlaneAhead) {
    const std::vector env = {fixed(PlaneShape{Vec3(5, 0, 0), Vec3(-1, 0, 0)})};
    EXPECT_DOUBLE_EQ(raycast_distance(kOrigin, env, 0.0, 100.0).value(), 5.0);
}

TEST(Raycast, Sphere) {
    const std::vector env = {fixed(SphereShape{Vec3(10, 0, 0), 2.0})};
    // |t x - c|^2 = r^2 -> t^2 - 20 t + 96 = 0 -> t = 8
    EXPECT_NEAR(raycast_distance(kOrigin, env, 0.0, 100.0).value(), 8.0, 1e-12);
}

TEST(Raycast, BehindOrBeyondHorizon) {
    const std::vector behind = {fixed(PlaneShape{Vec3(-5, 0, 0), Vec3(1, 0, 0)})};
    EXPECT_FALSE(raycast_distance(kOrigin, behind, 0.0, 100.0));
    const std::vector far = {fixed(PlaneShape{Vec3(50, 0, 0), Vec3(-1, 0, 0)})};
    EXPECT_FALSE(raycast_distance(kOrigin, far, 0.0, 20.0));
    const std::vector parallel = {fixed(PlaneShape{Vec3(0, 3, 0), Vec3(0, -1, 0)})};
    EXPECT_FALSE(raycast_distance(kOrigin, parallel, 0.0, 100.0));
}

TEST(Raycast, InsideCylinderAndSphere) {
    const std::vector tube = {fixed(CylinderShape{Vec3::Zero(), Vec3::UnitZ(), 10.0})};
    const Pose off{Vec3(2, 0, 7), Mat3::Identity()};
    EXPECT_NEAR(raycast_distance(off, tube, 0.0, 100.0).value(), 8.0, 1e-12);
    const std::vector ball = {fixed(SphereShape{Vec3::Zero(), 4.0})};
    EXPECT_NEAR(raycast_distance(kOrigin, ball, 0.0, 100.0).value(), 4.0, 1e-12);
}

TEST(Raycast, NearestOfSeveral) {
    const std::vector env = {fixed(PlaneShape{Vec3(9, 0, 0), Vec3(-1, 0, 0)}),
                             fixed(SphereShape{Vec3(5, 0, 0), 1.0})};
    EXPECT_NEAR(raycast_distance(kOrigin, env, 0.0, 100.0).value(), 4.0, 1e-12);
}

TEST(Obstacle, TrajectoryInterpolatesAndClamps) {
    Obstacle o{SphereShape{Vec3::Zero(), 1.0}, {{0.0, Vec3(0, 0, 0)}, {100.0, Vec3(10, 0, 0)}}};
    EXPECT_EQ(o.offset_at(-5.0), Vec3::Zero());
    EXPECT_EQ(o.offset_at(50.0), Vec3(5, 0, 0));
    EXPECT_EQ(o.offset_at(500.0), Vec3(10, 0, 0));
    o.trajectory.push_back({100.0, Vec3::Zero()});
    EXPECT_THROW(o.validate(), ConfigError);
}

TEST(SynthesizeReading, NoiselessMidpointAndFarField) {
    const auto c = scenarios::reference_units()[0];
    NoiseSource quiet;
    Rng rng(1);
    EXPECT_EQ(synthesize_reading(c.delta_z0, c, quiet, rng),
              static_cast<int>(std::lround((0.5 * c.v_max + c.epsilon) * 1023.0 / 5.0)));
    EXPECT_EQ(synthesize_reading(std::nullopt, c, quiet, rng), static_cast<int>(std::lround(c.epsilon * 1023.0 / 5.0)));
}

TEST(SynthesizeReading, GaussianBenchVariance) {
    const auto c = scenarios::reference_units()[0];
    NoiseModel nm;
    nm.sigma = std::sqrt(1.38);
    int inside = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        NoiseSource src(nm);
        Rng rng(seed);
        std::vector<double> draws;
        for (int i = 0; i < 200; ++i)
            draws.push_back(synthesize_reading(3.3, c, src, rng));
        const double v = signal::variance(draws);
        inside += (v >= 1.0 && v <= 1.8);
    }
    EXPECT_GE(inside, 98);
}

TEST(NoiseModel, BenchMatchedReproducesStaticVariances) {
    const auto c = scenarios::reference_units()[1];
    NoiseSource src(NoiseModel::bench_matched());
    Rng rng(77);
    signal::GatedMovingAverage<> f;
    std::vector<double> raw, filtered;
    for (std::uint64_t i = 0; i < 100000; ++i) {
        raw.push_back(synthesize_reading(4.7, c, src, rng));
        filtered.push_back(f.push({10 * i, 0, raw.back()}).value);
    }
    const double vr = signal::variance(raw), vf = signal::variance(filtered);
    EXPECT_GE(vr, 1.2);
    EXPECT_LE(vr, 1.6);
    EXPECT_GE(vf, 0.30);
    EXPECT_LE(vf, 0.40);
}

TEST(NoiseModel, Validation) {
    NoiseModel nm;
    nm.sigma = -1;
    EXPECT_THROW(nm.validate(), ConfigError);
    nm = {};
    nm.ar_coefficient = 1.0;
    EXPECT_THROW(nm.validate(), ConfigError);
}

TEST(GroundTruthReference, ExactWithoutNoiseOrGrid) {
    auto s = static_plane_scenario(3.0);
    s.reference.rate_hz = 0.0;
    const auto r = ground_truth_reference(s, 1, 123.0);
    EXPECT_EQ(r.t_ms, 123.0);
    EXPECT_EQ(r.distance, raycast_distance(sensor_poses_at(s, 123.0)[1], s.obstacles, 123.0, s.ray_horizon));
    EXPECT_NEAR(*r.distance, 3.0, 1e-9);
}

TEST(GroundTruthReference, NoiseIsBounded) {
    auto s = static_plane_scenario(3.0);
    s.reference.noise_mm = 0.1;
    double widest = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const auto r = ground_truth_reference(s, i % 4, 10.0 * i);
        const double err = std::abs(*r.distance - 3.0);
        EXPECT_LE(err, 0.1 + 1e-9);
        widest = std::max(widest, err);
    }
    EXPECT_GT(widest, 0.09);
}

TEST(GroundTruthReference, GridAlignmentGap) {
    // Nearest-neighbour gap between a 100 Hz and a 180 Hz grid, by enumeration.
    double oracle = 0.0;
    for (int n = 0; n < 1000; ++n) {
        double best = 1e9;
        for (int k = 0; k < 2000; ++k)
            best = std::min(best, std::abs(10.0 * n - k * 1000.0 / 180.0));
        oracle = std::max(oracle, best);
    }
    const auto s = static_plane_scenario(3.0);
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n)
        worst = std::max(worst, std::abs(ground_truth_reference(s, 0, 10.0 * n).t_ms - 10.0 * n));
    EXPECT_NEAR(worst, oracle, 1e-9);
    EXPECT_LE(worst, 2.8);
}

TEST(RunScenario, StaticNoiselessRmseAtQuantizationFloor) {
    for (double gap : {2.5, 3.5, 4.5, 5.5}) {
        const auto r = run_scenario(static_plane_scenario(gap));
        for (const auto& m : r.metrics.channels) {
            ASSERT_TRUE(m.rmse);
            EXPECT_LE(*m.rmse, 0.01) << "gap " << gap;
        }
    }
}

TEST(RunScenario, PhysicsConsistencyBound) {
    const auto s = static_plane_scenario(4.2);
    const auto r = run_scenario(s);
    for (const auto& rec : r.trace) {
        if (rec.status != mapping::GapStatus::in_range)
            continue;
        const auto& c = s.calibration[static_cast<std::size_t>(rec.channel)];
        const double bound = adc::kVoltsPerCount / std::abs(optical::response_slope(*rec.ray_mm, c));
        EXPECT_LE(std::abs(rec.estimate_mm - *rec.ray_mm), bound);
    }
}

TEST(RunScenario, EmptyEnvironment) {
    auto s = static_plane_scenario(3.0);
    s.obstacles.clear();
    const auto r = run_scenario(s);
    for (const auto& m : r.metrics.channels)
        EXPECT_FALSE(m.rmse);
    EXPECT_FALSE(r.metrics.overall_rmse);
    for (const auto& rec : r.trace)
        EXPECT_EQ(rec.status, mapping::GapStatus::beyond_range);
    for (auto z : r.final_map.zones)
        EXPECT_EQ(z, mapping::Zone::safe);
}

TEST(RunScenario, Reproducible) {
    const auto s = scenarios::approach_scenario({.noisy = true, .seed = 3});
    auto short_run = s;
    short_run.duration_ms = 20000.0;
    const auto a = run_scenario(short_run), b = run_scenario(short_run);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        EXPECT_EQ(a.trace[i].raw_counts, b.trace[i].raw_counts);
        EXPECT_EQ(a.trace[i].estimate_mm, b.trace[i].estimate_mm);
    }
    EXPECT_EQ(a.metrics.overall_rmse, b.metrics.overall_rmse);
    EXPECT_EQ(a.final_map, b.final_map);
}

TEST(RunScenario, ApproachScenarioMeetsRmseTargets) {
    const auto noiseless = run_scenario(scenarios::approach_scenario({.noisy = false}));
    const auto noisy = run_scenario(scenarios::approach_scenario({.noisy = true}));
    for (std::size_t ch = 0; ch < 4; ++ch) {
        ASSERT_TRUE(noiseless.metrics.channels[ch].rmse);
        ASSERT_TRUE(noisy.metrics.channels[ch].rmse);
        EXPECT_LE(*noiseless.metrics.channels[ch].rmse, 0.01);
        EXPECT_LE(*noisy.metrics.channels[ch].rmse, 0.25);
        EXPECT_GT(noisy.metrics.channels[ch].scored_ticks, 500u);
    }
}

TEST(RunScenario, RmseNonDecreasingInNoise) {
    const auto base = scenarios::approach_scenario({.noisy = true, .seed = 5});
    const double sigma0 = base.noise.sigma;
    double previous = -1.0;
    for (double f : {0.0, 0.5, 1.0, 2.0}) {
        auto s = base;
        s.noise.sigma = f * sigma0;
        s.noise.outlier_rate = 0.0;
        s.reference.noise_mm.reset();
        const auto r = run_scenario(s);
        ASSERT_TRUE(r.metrics.overall_rmse);
        EXPECT_GE(*r.metrics.overall_rmse, previous) << "factor " << f;
        previous = *r.metrics.overall_rmse;
    }
}

TEST(RunScenario, RobotAndObstaclesStaySeparate) {
    auto s = scenarios::lumen_scenario(3000.0);
    const std::size_t before = hash_obstacles(s.obstacles, 1500.0);
    const auto r1 = run_scenario(s);
    EXPECT_EQ(hash_obstacles(s.obstacles, 1500.0), before);

    // Different obstacles: identical robot poses.
    auto moved = s;
    moved.obstacles.pop_back();
    const auto r2 = run_scenario(moved);
    ASSERT_EQ(r1.trace.size(), r2.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i) {
        EXPECT_EQ(r1.trace[i].sensor_position, r2.trace[i].sensor_position);
        EXPECT_EQ(r1.trace[i].boresight, r2.trace[i].boresight);
    }

    // Different actuation: obstacles unchanged.
    auto bent = s;
    scenarios::set_robot(bent, 1.0, 0.5);
    (void)run_scenario(bent);
    EXPECT_EQ(hash_obstacles(bent.obstacles, 1500.0), before);
}

TEST(RunScenario, LatencyWithinBudget) {
    const auto r = run_scenario(scenarios::lumen_scenario(20000.0));
    EXPECT_EQ(r.metrics.latency.samples, 2000u);
    EXPECT_LT(r.metrics.latency.median_ms, 5.0);
    EXPECT_LT(r.metrics.latency.max_ms, 200.0);
}

TEST(RunScenario, InvalidScenarioRejectedBeforeRunning) {
    auto s = static_plane_scenario(3.0);
    s.calibration.pop_back();
    EXPECT_THROW(run_scenario(s), ConfigError);
}
