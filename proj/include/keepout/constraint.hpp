#pragma once

#include "keepout/quat.hpp"

namespace keepout {

// Inertial keep-out cone: avoid direction n_F and half-angle theta_F.
struct KeepOutZone {
    Vec3 n_F = Vec3::UnitX();
    double theta_F = 0.0; // rad, in (0, pi/2)
};

// Validates and normalizes; throws ValidationError on bad input.
KeepOutZone make_keep_out_zone(const Vec3& n_F, double theta_F);

// Body-fixed instrument axis.
struct Boresight {
    Vec3 r_F_body = Vec3::UnitX();
};

Boresight make_boresight(const Vec3& r_F_body);

// theta = arccos(r_F^I . n_F), the angle between the boresight (rotated into
// the inertial frame) and the avoid direction.
double cone_angle(const Quaternion& q, const Boresight& bs, const KeepOutZone& zone);

inline double theta_margin(double theta, const KeepOutZone& zone) {
    return theta - zone.theta_F;
}

// Boundary counts as violation.
inline bool violates(double margin) { return margin <= 0.0; }

struct DeltaN {
    Vec3 v = Vec3::Zero();
    bool degenerate = false; // boresight coincides with the avoid direction
};

// Unit vector from the boresight toward the avoid direction, body frame:
// (n_F^B - r_F^B) / ||n_F^B - r_F^B||. Degenerate input yields a zero vector
// plus flag instead of NaN.
DeltaN delta_n_body(const Quaternion& q, const Boresight& bs, const KeepOutZone& zone);

// Places the avoid direction where the boresight would sit halfway along the
// shortest rotation from q_init to q_d. Throws ValidationError when the two
// attitudes are closer than 1e-6 rad.
KeepOutZone place_midpoint_zone(const Quaternion& q_init, const Quaternion& q_d,
                                const Boresight& bs, double theta_F);

} // namespace keepout
