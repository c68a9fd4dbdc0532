#include "circumsense/pcc_kinematics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace circumsense;
using namespace circumsense::pcc;

namespace {

constexpr double kPi = std::numbers::pi;

double angle_diff(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

double ortho_error(const Mat3& r) { return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(SegmentConfig, RejectsInvalidValues) {
    EXPECT_THROW(SegmentConfig(-0.1, 0.0, 10.0), ConfigError);
    EXPECT_THROW(SegmentConfig(kPi + 1e-9, 0.0, 10.0), ConfigError);
    EXPECT_THROW(SegmentConfig(0.1, 3.2, 10.0), ConfigError);
    EXPECT_THROW(SegmentConfig(0.1, 0.0, 0.0), ConfigError);
    EXPECT_THROW(SegmentGeometry(0.0), ConfigError);
    EXPECT_THROW(SegmentGeometry(4.0, 0.0), ConfigError);
    EXPECT_THROW(SegmentGeometry(4.0, kDefaultCablePhase, 0), ConfigError);
    EXPECT_THROW(ActuationVector(1.0, -1.0, 1.0), ConfigError);
    EXPECT_NO_THROW(SegmentConfig(kPi, -kPi, 1.0));
}

TEST(ForwardSegmentPose, QuarterBendInXZPlane) {
    const auto pose = forward_segment_pose(SegmentConfig(kPi / 2, 0.0, 100.0));
    // (L/theta) (1 - cos, 0, sin) at theta = pi/2
    const double r = 100.0 / (kPi / 2);
    EXPECT_NEAR(pose.position.x(), r, 1e-12);
    EXPECT_NEAR(pose.position.x(), 63.662, 1e-3);
    EXPECT_NEAR(pose.position.y(), 0.0, 1e-12);
    EXPECT_NEAR(pose.position.z(), 63.662, 1e-3);
}

TEST(ForwardSegmentPose, HalfTurnTowardsY) {
    const auto pose = forward_segment_pose(SegmentConfig(kPi, kPi / 2, 100.0));
    const double r = 100.0 / kPi;
    EXPECT_NEAR(pose.position.x(), 0.0, 1e-12);
    EXPECT_NEAR(pose.position.y(), 2.0 * r, 1e-12);
    EXPECT_NEAR(pose.position.y(), 63.662, 1e-3);
    EXPECT_NEAR(pose.position.z(), 0.0, 1e-12);
}

TEST(ForwardSegmentPose, StraightLimit) {
    const auto pose = forward_segment_pose(SegmentConfig(0.0, 1.3, 100.0));
    EXPECT_EQ(pose.position, Vec3(0.0, 0.0, 100.0));
    EXPECT_TRUE(pose.rotation.isApprox(Mat3::Identity(), 1e-15));
}

TEST(ForwardSegmentPose, ContinuousAcrossSeriesSwitch) {
    const double below = std::nextafter(kSeriesThreshold, 0.0);
    const auto a = forward_segment_pose(SegmentConfig(below, 0.7, 100.0));
    const auto b = forward_segment_pose(SegmentConfig(kSeriesThreshold, 0.7, 100.0));
    EXPECT_LT((a.position - b.position).norm(), 1e-12);

    const auto tiny = forward_segment_pose(SegmentConfig(1e-8, 0.3, 100.0));
    EXPECT_LT((tiny.position - Vec3(0, 0, 100)).norm(), 1e-6);
}

TEST(ForwardSegmentPose, ZAxisIsTangentToArc) {
    // Tangent by central finite difference of the backbone curve in arc length.
    const SegmentConfig cfg(1.1, -0.6, 80.0);
    const auto pose = forward_segment_pose(cfg);
    const double h = 1e-4;
    const double kappa = cfg.theta() / cfg.length();
    const Vec3 ahead = segment_tip_position(kappa * (cfg.length() + h), cfg.phi(), cfg.length() + h);
    const Vec3 behind = segment_tip_position(kappa * (cfg.length() - h), cfg.phi(), cfg.length() - h);
    const Vec3 tangent = (ahead - behind).normalized();
    EXPECT_LT((pose.rotation.col(2) - tangent).norm(), 1e-7);
    EXPECT_TRUE(pose.is_proper_rotation());
}

TEST(CablesFromConfig, Examples) {
    const SegmentGeometry geom(4.0);
    const auto straight = cables_from_config(SegmentConfig(0.0, 0.4, 100.0), geom);
    for (double q : straight.values())
        EXPECT_DOUBLE_EQ(q, 100.0);

    const auto bent = cables_from_config(SegmentConfig(kPi / 2, 0.0, 100.0), geom);
    EXPECT_NEAR(bent[0], 100.0 - 4.0 * kPi / 2, 1e-12);
    EXPECT_NEAR(bent[0], 93.717, 1e-3);
}

TEST(CablesFromConfig, MeanEqualsLengthForThirdTurnSpacing) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> th(0.0, kPi), ph(-kPi, kPi);
    const SegmentGeometry geom(4.0);
    for (int i = 0; i < 1000; ++i) {
        const auto q = cables_from_config(SegmentConfig(th(rng), ph(rng), 100.0), geom);
        EXPECT_NEAR((q[0] + q[1] + q[2]) / 3.0, 100.0, 1e-12);
    }
}

TEST(CablesFromConfig, InfeasibleBendRejected) {
    EXPECT_THROW(cables_from_config(SegmentConfig(kPi, 0.0, 10.0), SegmentGeometry(4.0)), ConfigError);
}

TEST(ConfigFromCables, EqualCablesGiveStraightSegment) {
    const auto cfg = config_from_cables(ActuationVector(50.0, 50.0, 50.0), SegmentGeometry(4.0), 50.0);
    EXPECT_EQ(cfg.theta(), 0.0);
    EXPECT_EQ(cfg.phi(), 0.0);
}

TEST(ConfigFromCables, SymmetricPairGivesZeroDirection) {
    const auto cfg = config_from_cables(ActuationVector(98.0, 101.0, 101.0), SegmentGeometry(4.0), 100.0);
    EXPECT_EQ(cfg.phi(), 0.0);
    EXPECT_GT(cfg.theta(), 0.0);
}

TEST(ConfigFromCables, RecoversKnownConfiguration) {
    const SegmentGeometry geom(4.0);
    const auto q = cables_from_config(SegmentConfig(kPi / 3, kPi / 6, 100.0), geom);
    const auto cfg = config_from_cables(q, geom, 100.0);
    EXPECT_NEAR(cfg.theta(), kPi / 3, 1e-9);
    EXPECT_NEAR(cfg.phi(), kPi / 6, 1e-9);
}

TEST(ConfigFromCables, RequiresThirdTurnSpacing) {
    EXPECT_THROW(config_from_cables(ActuationVector(1, 1, 1), SegmentGeometry(4.0, kPi / 2), 1.0), ConfigError);
}

TEST(ConfigFromCables, RoundTripProperty) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> th(1e-4, kPi), ph(-kPi, kPi), rr(1.0, 6.0);
    double worst_theta = 0.0, worst_phi = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const SegmentGeometry geom(rr(rng));
        const SegmentConfig cfg(th(rng), ph(rng), 100.0);
        const auto back = config_from_cables(cables_from_config(cfg, geom), geom, 100.0);
        worst_theta = std::max(worst_theta, std::abs(back.theta() - cfg.theta()));
        worst_phi = std::max(worst_phi, angle_diff(back.phi(), cfg.phi()));
    }
    EXPECT_LT(worst_theta, 1e-9);
    EXPECT_LT(worst_phi, 1e-9);
}

TEST(ConfigFromCables, RadicandIdentity) {
    // q1^2+q2^2+q3^2-q1q2-q2q3-q1q3 == (9/4) r^2 theta^2, evaluated in the expanded form.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> th(0.0, kPi), ph(-kPi, kPi);
    const double r = 3.0;
    const SegmentGeometry geom(r);
    for (int i = 0; i < 1000; ++i) {
        const SegmentConfig cfg(th(rng), ph(rng), 100.0);
        const auto q = cables_from_config(cfg, geom);
        const double lhs = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] - q[0] * q[1] - q[1] * q[2] - q[0] * q[2];
        const double rhs = 2.25 * r * r * cfg.theta() * cfg.theta();
        EXPECT_NEAR(lhs, rhs, 1e-8);
    }
}

TEST(DiskPose, LastDiskMatchesSegmentTip) {
    const SegmentGeometry geom(4.0, kDefaultCablePhase, 7);
    const SegmentConfig cfg(1.2, 2.0, 90.0);
    const auto disk = disk_pose(7, cfg, geom);
    const auto tip = forward_segment_pose(cfg);
    EXPECT_EQ(disk.pose.position, tip.position);
    EXPECT_EQ(disk.pose.rotation, tip.rotation);
}

TEST(DiskPose, StraightDisksAreEvenlySpaced) {
    const SegmentGeometry geom(4.0, kDefaultCablePhase, 4);
    const SegmentConfig cfg(0.0, 0.0, 100.0);
    for (int g = 1; g <= 4; ++g)
        EXPECT_LT((disk_pose(g, cfg, geom).pose.position - Vec3(0, 0, 25.0 * g)).norm(), 1e-12);
}

TEST(DiskPose, ParamsFollowSubdivision) {
    const SegmentGeometry geom(4.0, kDefaultCablePhase, 5);
    const auto d = disk_pose(2, SegmentConfig(kPi / 2, 0.3, 100.0), geom);
    EXPECT_NEAR(d.params.theta, kPi / 5, 1e-12);
    EXPECT_EQ(d.params.phi, 0.3);
    EXPECT_EQ(d.index, 2);
    // Position from the closed form with L_g = 40, theta_g = pi/5.
    const double lg = 40.0, tg = kPi / 5;
    EXPECT_NEAR(d.params.x, lg / tg * (1 - std::cos(tg)) * std::cos(0.3), 1e-12);
    EXPECT_NEAR(d.params.z, lg / tg * std::sin(tg), 1e-12);
}

TEST(DiskPose, IndexOutOfRange) {
    const SegmentGeometry geom(4.0, kDefaultCablePhase, 5);
    const SegmentConfig cfg(0.5, 0.0, 100.0);
    EXPECT_THROW(disk_pose(0, cfg, geom), ConfigError);
    EXPECT_THROW(disk_pose(6, cfg, geom), ConfigError);
}

TEST(DiskPose, ChordLengthsBelowArcAndConverge) {
    const SegmentConfig cfg(2.0, 0.5, 100.0);
    double previous_sum = 0.0;
    for (int eta : {2, 5, 20, 200}) {
        const SegmentGeometry geom(4.0, kDefaultCablePhase, eta);
        const auto disks = disk_poses(cfg, geom);
        Vec3 prev = Vec3::Zero();
        double sum = 0.0;
        for (const auto& d : disks) {
            const double chord = (d.pose.position - prev).norm();
            EXPECT_GT(chord, 0.0);
            sum += chord;
            prev = d.pose.position;
        }
        EXPECT_LT(sum, cfg.length());
        EXPECT_GT(sum, previous_sum);
        previous_sum = sum;
    }
    EXPECT_NEAR(previous_sum, cfg.length(), 1e-3);
}

TEST(Rotations, StayOrthonormal) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> th(0.0, kPi), ph(-kPi, kPi);
    const SegmentGeometry geom(4.0, kDefaultCablePhase, 6);
    for (int i = 0; i < 500; ++i) {
        const SegmentConfig cfg(th(rng), ph(rng), 50.0);
        EXPECT_LT(ortho_error(forward_segment_pose(cfg).rotation), 1e-9);
        for (const auto& d : disk_poses(cfg, geom)) {
            EXPECT_LT(ortho_error(d.pose.rotation), 1e-9);
            EXPECT_NEAR(d.pose.rotation.determinant(), 1.0, 1e-9);
        }
    }
}

TEST(ChainTipPoses, ComposesSegments) {
    const std::vector<SegmentConfig> segs = {SegmentConfig(kPi / 2, 0.0, 10.0), SegmentConfig(kPi / 2, 0.0, 10.0)};
    const auto tips = chain_tip_poses(segs);
    ASSERT_EQ(tips.size(), 2u);
    // Two quarter turns in the same plane make a half circle of radius 20/pi.
    const double r = 10.0 / (kPi / 2);
    EXPECT_NEAR(tips[1].position.x(), 2.0 * r, 1e-12);
    EXPECT_NEAR(tips[1].position.z(), 0.0, 1e-12);
    EXPECT_TRUE(tips[1].is_proper_rotation());
}
