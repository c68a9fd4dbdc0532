#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace circumsense {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform, world <- local. Position in mm.
struct Pose {
    Vec3 position = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();

    static Pose identity() { return {}; }

    /// this * other: express `other` (given in this pose's local frame) in the world frame.
    Pose compose(const Pose& other) const {
        return {position + rotation * other.position, rotation * other.rotation};
    }

    Vec3 transform_point(const Vec3& local) const { return position + rotation * local; }

    bool is_proper_rotation(double tol = 1e-9) const {
        const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
        return ortho < tol && std::abs(rotation.determinant() - 1.0) < tol;
    }
};

inline Mat3 rot_z(double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

inline Mat3 rot_y(double angle) {
    return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}

}  // namespace circumsense
