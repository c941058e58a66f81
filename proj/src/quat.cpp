#include "keepout/quat.hpp"

namespace keepout {

Quaternion slerp_shortest(const Quaternion& a, const Quaternion& b, double t) {
    // Relative rotation in a's frame; flip sign to take the shorter arc.
    Quaternion rel = quat_mul(quat_conj(a), b);
    if (rel.q0 < 0.0) {
        rel.q0 = -rel.q0;
        rel.qv = -rel.qv;
    }

    const double vnorm = rel.qv.norm();
    if (vnorm < 1e-15) {
        return a; // same rotation
    }

    Vec3 axis = rel.qv / vnorm;
    if (rel.q0 < 1e-12) {
        // 180-degree tie: both arc directions are shortest. Canonicalize the
        // axis sign so the choice is deterministic.
        for (int i = 0; i < 3; ++i) {
            if (std::abs(axis[i]) > 1e-12) {
                if (axis[i] < 0.0) axis = -axis;
                break;
            }
        }
    }

    const double angle = 2.0 * std::atan2(vnorm, rel.q0);
    const Quaternion partial = Quaternion::from_axis_angle(axis, t * angle);
    return quat_mul(a, partial).normalized();
}

} // namespace keepout
