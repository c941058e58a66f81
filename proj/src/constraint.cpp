#include "keepout/constraint.hpp"

#include "keepout/error.hpp"

namespace keepout {

KeepOutZone make_keep_out_zone(const Vec3& n_F, double theta_F) {
    if (!n_F.allFinite() || !std::isfinite(theta_F)) {
        throw ValidationError("keep-out zone has non-finite parameters");
    }
    const double n = n_F.norm();
    if (std::abs(n - 1.0) > 1e-6) {
        throw ValidationError("avoid direction is not a unit vector");
    }
    if (!(theta_F > 0.0 && theta_F < M_PI / 2.0)) {
        throw ValidationError("cone half-angle must lie in (0, pi/2)");
    }
    return {n_F / n, theta_F};
}

Boresight make_boresight(const Vec3& r_F_body) {
    if (!r_F_body.allFinite()) {
        throw ValidationError("boresight has non-finite components");
    }
    const double n = r_F_body.norm();
    if (std::abs(n - 1.0) > 1e-6) {
        throw ValidationError("boresight is not a unit vector");
    }
    return {r_F_body / n};
}

double cone_angle(const Quaternion& q, const Boresight& bs, const KeepOutZone& zone) {
    const Vec3 r_inertial = rotate_to_inertial(q, bs.r_F_body);
    return std::acos(std::clamp(r_inertial.dot(zone.n_F), -1.0, 1.0));
}

DeltaN delta_n_body(const Quaternion& q, const Boresight& bs, const KeepOutZone& zone) {
    const Vec3 n_body = rotate_to_body(q, zone.n_F);
    const Vec3 diff = n_body - bs.r_F_body;
    const double n = diff.norm();
    if (n < 1e-9) {
        return {Vec3::Zero(), true};
    }
    return {diff / n, false};
}

KeepOutZone place_midpoint_zone(const Quaternion& q_init, const Quaternion& q_d,
                                const Boresight& bs, double theta_F) {
    if (rotation_angle_between(q_init, q_d) <= 1e-6) {
        throw ValidationError("midpoint zone placement needs distinct attitudes");
    }
    const Quaternion q_mid = slerp_shortest(q_init, q_d, 0.5);
    return make_keep_out_zone(rotate_to_inertial(q_mid, bs.r_F_body), theta_F);
}

} // namespace keepout
