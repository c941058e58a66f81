#pragma once

#include "keepout/quat.hpp"

namespace keepout {

// Spacecraft moment of inertia. Validated symmetric positive definite at
// construction; the solve in dynamics_deriv relies on it.
class InertiaMatrix {
public:
    explicit InertiaMatrix(const Mat3& m);

    static InertiaMatrix default_spacecraft(); // 2.1-style 3-axis body used throughout

    const Mat3& matrix() const { return inertia_; }
    const Eigen::LLT<Mat3>& llt() const { return llt_; }

private:
    Mat3 inertia_;
    Eigen::LLT<Mat3> llt_;
};

// Euler rigid-body equation: omega_dot = I^-1 (-omega x (I omega) + tau).
Vec3 dynamics_deriv(const Vec3& w, const Vec3& tau, const InertiaMatrix& inertia);

struct Rk4Result {
    Quaternion q;
    Vec3 w;
    // |1 - ||q_raw||| before the post-step renormalization.
    double renorm_correction = 0.0;
};

// Classical RK4 on the coupled (q, omega) state with zero-order-hold torque.
// The quaternion is renormalized after the step. Throws NumericError if the
// state leaves the finite range.
Rk4Result rk4_step(const Quaternion& q, const Vec3& w, const Vec3& tau,
                   const InertiaMatrix& inertia, double dt);

// Inertial-frame angular momentum R(q) I omega.
inline Vec3 angular_momentum_inertial(const Quaternion& q, const Vec3& w,
                                      const InertiaMatrix& inertia) {
    return rotate_to_inertial(q, inertia.matrix() * w);
}

inline double rotational_energy(const Vec3& w, const InertiaMatrix& inertia) {
    return 0.5 * w.dot(inertia.matrix() * w);
}

} // namespace keepout
