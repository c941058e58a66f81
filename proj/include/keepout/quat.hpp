#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace keepout {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Unit attitude quaternion, scalar-first (q0, qv). q and -q encode the same
// rotation; no canonical sign is enforced so that integrated trajectories
// stay continuous.
struct Quaternion {
    double q0 = 1.0;
    Vec3 qv = Vec3::Zero();

    Quaternion() = default;
    Quaternion(double s, const Vec3& v) : q0(s), qv(v) {}
    Quaternion(double s, double x, double y, double z) : q0(s), qv(x, y, z) {}

    static Quaternion identity() { return {1.0, Vec3::Zero()}; }

    // Rotation by `angle` radians about a unit axis.
    static Quaternion from_axis_angle(const Vec3& axis, double angle) {
        return {std::cos(0.5 * angle), std::sin(0.5 * angle) * axis};
    }

    double norm() const { return std::sqrt(q0 * q0 + qv.squaredNorm()); }

    Quaternion normalized() const {
        const double n = norm();
        return {q0 / n, qv / n};
    }

    Eigen::Vector4d coeffs() const { return {q0, qv.x(), qv.y(), qv.z()}; }

    bool is_finite() const {
        return std::isfinite(q0) && qv.allFinite();
    }
};

inline Quaternion quat_mul(const Quaternion& a, const Quaternion& b) {
    return {a.q0 * b.q0 - a.qv.dot(b.qv),
            a.q0 * b.qv + b.q0 * a.qv + a.qv.cross(b.qv)};
}

inline Quaternion quat_conj(const Quaternion& a) { return {a.q0, -a.qv}; }

// Direction cosine matrix taking body-frame vectors to the inertial frame.
inline Mat3 to_rotation_matrix(const Quaternion& q) {
    const double w = q.q0, x = q.qv.x(), y = q.qv.y(), z = q.qv.z();
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

// q maps body -> inertial: v^I = q (0, v^B) q*.
inline Vec3 rotate_to_inertial(const Quaternion& q, const Vec3& v_body) {
    return quat_mul(quat_mul(q, {0.0, v_body}), quat_conj(q)).qv;
}

inline Vec3 rotate_to_body(const Quaternion& q, const Vec3& v_inertial) {
    return quat_mul(quat_mul(quat_conj(q), {0.0, v_inertial}), q).qv;
}

// Relative attitude q_e = q_d* x q.
inline Quaternion error_quat(const Quaternion& q_d, const Quaternion& q) {
    return quat_mul(quat_conj(q_d), q);
}

// phi = arccos(q_e0), half the geodesic rotation angle.
inline double deviation_angle(const Quaternion& q_e) {
    return std::acos(std::clamp(q_e.q0, -1.0, 1.0));
}

// Geodesic rotation angle between two attitudes, in [0, pi].
inline double rotation_angle_between(const Quaternion& a, const Quaternion& b) {
    const double c = std::clamp(std::abs(a.coeffs().dot(b.coeffs())), 0.0, 1.0);
    return 2.0 * std::acos(c);
}

// Shorter-arc slerp. At the exact 180-degree tie the relative rotation axis
// sign is canonicalized (first nonzero component positive) so the result is
// deterministic.
Quaternion slerp_shortest(const Quaternion& a, const Quaternion& b, double t);

} // namespace keepout
