#include "mtlpose/geometry.hpp"

namespace mtlpose {

Mat3 quat_to_rotmat(const Quat& q, double tol) {
    if (std::abs(q.norm() - 1.0) > tol)
        throw DomainError("quat_to_rotmat expects a unit quaternion");
    return q.toRotationMatrix();
}

Mat3 look_at_matrix(const Vec3& eye, double roll) {
    const double dist = eye.norm();
    if (!(dist > 0.0))
        throw DomainError("look_at with a zero eye vector");
    const Vec3 forward = -eye / dist;

    Vec3 right = forward.cross(Vec3::UnitZ());
    if (right.norm() < 1e-9)
        right = forward.cross(Vec3::UnitX());
    right.normalize();
    const Vec3 up = right.cross(forward);

    Mat3 aim;
    aim.col(0) = right;
    aim.col(1) = up;
    aim.col(2) = -forward;
    if (roll == 0.0)
        return aim;
    const double c = std::cos(roll);
    const double s = std::sin(roll);
    Mat3 spin;
    spin << c, -s, 0.0,
            s, c, 0.0,
            0.0, 0.0, 1.0;
    return aim * spin;
}

Quat look_at_quat(const Vec3& eye, double roll) {
    Quat q(look_at_matrix(eye, roll));
    q.normalize();
    if (q.w() < 0.0)
        q.coeffs() = -q.coeffs();
    return q;
}

CameraPose make_camera(const Vec3& eye, double roll) {
    return CameraPose{eye, look_at_quat(eye, roll)};
}

}  // namespace mtlpose
