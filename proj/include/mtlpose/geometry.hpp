#pragma once

// Quaternion helpers, camera orientation and the angular pose metric.
// Quaternions are Eigen quaternions; whenever they cross a file or a flat
// array the component order is (w, x, y, z).

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "mtlpose/error.hpp"

namespace mtlpose {

using Quat = Eigen::Quaterniond;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

template <typename Scalar>
using Vec4T = Eigen::Matrix<Scalar, 4, 1>;

// Camera placed at `position`, rotation `orientation` maps camera axes to
// object axes. The camera looks along its local -z.
struct CameraPose {
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();
};

inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;

template <typename Scalar>
Vec4T<Scalar> to_wxyz(const Eigen::Quaternion<Scalar>& q) {
    return {q.w(), q.x(), q.y(), q.z()};
}

template <typename Scalar, typename Derived>
Eigen::Quaternion<Scalar> from_wxyz(const Eigen::MatrixBase<Derived>& v) {
    return Eigen::Quaternion<Scalar>(Scalar(v(0)), Scalar(v(1)), Scalar(v(2)), Scalar(v(3)));
}

template <typename Scalar>
Eigen::Quaternion<Scalar> quat_normalize(const Eigen::Quaternion<Scalar>& q) {
    const Scalar n = q.norm();
    if (!(n > Scalar(0)) || !std::isfinite(static_cast<double>(n)))
        throw DomainError("cannot normalize a zero-norm quaternion");
    return Eigen::Quaternion<Scalar>(q.coeffs() / n);
}

// theta = 2 acos(|<q, q_hat>|) on normalized inputs, in radians within [0, pi].
template <typename Scalar>
double angular_error(const Eigen::Quaternion<Scalar>& q, const Eigen::Quaternion<Scalar>& q_hat) {
    const Eigen::Vector4d a = to_wxyz(q).template cast<double>();
    const Eigen::Vector4d b = to_wxyz(q_hat).template cast<double>();
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0))
        throw DomainError("angular_error on a zero-norm quaternion");
    // 2 acos|a.b| in half-angle form: exact for duplicates, stable near 0.
    const Eigen::Vector4d u = a / na;
    const Eigen::Vector4d v = u.dot(b) < 0.0 ? Eigen::Vector4d(-b / nb) : Eigen::Vector4d(b / nb);
    return 4.0 * std::atan2((u - v).norm(), (u + v).norm());
}

// Throws DomainError when |q| deviates from 1 by more than `tol`.
Mat3 quat_to_rotmat(const Quat& q, double tol = 1e-6);

// Rotation whose columns are (right, up, back) for a camera at `eye`
// aimed at the origin, rolled by `roll` radians about its optical axis.
Mat3 look_at_matrix(const Vec3& eye, double roll);

// Quaternion of look_at_matrix, canonicalized to w >= 0.
Quat look_at_quat(const Vec3& eye, double roll);

CameraPose make_camera(const Vec3& eye, double roll);

}  // namespace mtlpose
