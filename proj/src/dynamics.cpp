#include "keepout/dynamics.hpp"

#include "keepout/error.hpp"

namespace keepout {

InertiaMatrix::InertiaMatrix(const Mat3& m) : inertia_(m) {
    if (!m.allFinite()) {
        throw ValidationError("inertia matrix has non-finite entries");
    }
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw ValidationError("inertia matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(m);
    if (es.eigenvalues().minCoeff() <= 0.0) {
        throw ValidationError("inertia matrix is not positive definite");
    }
    llt_.compute(inertia_);
}

InertiaMatrix InertiaMatrix::default_spacecraft() {
    Mat3 m;
    m << 60, 5, 1,
         5, 50, 2,
         1, 2, 70;
    return InertiaMatrix(m);
}

Vec3 dynamics_deriv(const Vec3& w, const Vec3& tau, const InertiaMatrix& inertia) {
    return inertia.llt().solve(tau - w.cross(inertia.matrix() * w));
}

namespace {

struct Deriv {
    Eigen::Vector4d qdot;
    Vec3 wdot;
};

inline Eigen::Vector4d kinematics(const Eigen::Vector4d& q, const Vec3& w) {
    // qdot = 1/2 q (0, w), written out on the raw 4-vector (no normalization
    // inside the stages).
    const double q0 = q[0];
    const Vec3 qv(q[1], q[2], q[3]);
    Eigen::Vector4d qdot;
    qdot[0] = -0.5 * qv.dot(w);
    const Vec3 v = 0.5 * (q0 * w + qv.cross(w));
    qdot[1] = v.x();
    qdot[2] = v.y();
    qdot[3] = v.z();
    return qdot;
}

inline Deriv deriv(const Eigen::Vector4d& q, const Vec3& w, const Vec3& tau,
                   const InertiaMatrix& inertia) {
    return {kinematics(q, w), dynamics_deriv(w, tau, inertia)};
}

} // namespace

Rk4Result rk4_step(const Quaternion& q, const Vec3& w, const Vec3& tau,
                   const InertiaMatrix& inertia, double dt) {
    if (!(dt > 0.0)) {
        throw ValidationError("rk4_step requires dt > 0");
    }
    const Eigen::Vector4d q0 = q.coeffs();

    const Deriv k1 = deriv(q0, w, tau, inertia);
    const Deriv k2 = deriv(q0 + 0.5 * dt * k1.qdot, w + 0.5 * dt * k1.wdot, tau, inertia);
    const Deriv k3 = deriv(q0 + 0.5 * dt * k2.qdot, w + 0.5 * dt * k2.wdot, tau, inertia);
    const Deriv k4 = deriv(q0 + dt * k3.qdot, w + dt * k3.wdot, tau, inertia);

    const Eigen::Vector4d q_raw =
        q0 + (dt / 6.0) * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot);
    const Vec3 w_new = w + (dt / 6.0) * (k1.wdot + 2.0 * k2.wdot + 2.0 * k3.wdot + k4.wdot);

    if (!q_raw.allFinite() || !w_new.allFinite()) {
        throw NumericError("rk4_step produced a non-finite state");
    }

    const double n = q_raw.norm();
    Rk4Result out;
    out.q = Quaternion(q_raw[0] / n, Vec3(q_raw[1], q_raw[2], q_raw[3]) / n);
    out.w = w_new;
    out.renorm_correction = std::abs(1.0 - n);
    return out;
}

} // namespace keepout
