#include "keepout/env.hpp"

#include "keepout/error.hpp"

namespace keepout {

void EnvConfig::validate() const {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (episode_steps < 1) throw ValidationError("episode_steps must be >= 1");
    if (!(beta > 0.0)) throw ValidationError("beta must be positive");
    if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
    if (!(accuracy_threshold > 0.0)) throw ValidationError("accuracy threshold must be positive");
    if ((tau_max.array() <= 0.0).any()) throw ValidationError("tau_max components must be positive");
}

ObsVec Observation::as_vector() const {
    ObsVec v;
    v << q_e.q0, q_e.qv.x(), q_e.qv.y(), q_e.qv.z(),
         w.x(), w.y(), w.z(),
         r_F_body.x(), r_F_body.y(), r_F_body.z(),
         theta_margin, theta,
         delta_n_body.x(), delta_n_body.y(), delta_n_body.z(),
         q_e0_prev;
    return v;
}

Observation Observation::from_vector(const ObsVec& v) {
    Observation o;
    o.q_e = Quaternion(v[0], v[1], v[2], v[3]);
    o.w = Vec3(v[4], v[5], v[6]);
    o.r_F_body = Vec3(v[7], v[8], v[9]);
    o.theta_margin = v[10];
    o.theta = v[11];
    o.delta_n_body = Vec3(v[12], v[13], v[14]);
    o.q_e0_prev = v[15];
    return o;
}

double fzone_penalty(double margin, double beta, double alpha) {
    if (margin <= 0.0) return beta;
    return beta * std::exp(-alpha * margin);
}

double compute_reward(double phi, const Vec3& tau, const Vec3& tau_prev,
                      double margin, double q_e0, double q_e0_prev,
                      const EnvConfig& cfg) {
    double r = std::exp(-phi / (0.14 * 2.0 * M_PI))
               - 0.05 * tau.norm() / cfg.tau_max.norm()
               - 0.005 * (tau - tau_prev).norm();
    if (cfg.fzone_enabled) {
        r -= fzone_penalty(margin, cfg.beta, cfg.alpha);
    }
    if (!(q_e0 > q_e0_prev)) {
        r -= 1.0;
    }
    if (phi <= cfg.accuracy_threshold) {
        r += 9.0;
    }
    return r;
}

ScenarioSpec sample_scenario(const ScenarioDistribution& dist, Rng& rng) {
    if (dist.theta_max_deg < dist.theta_min_deg) {
        throw ValidationError("scenario rotation-angle range is inverted");
    }
    const double deg = M_PI / 180.0;
    for (int attempt = 0; attempt < dist.max_attempts; ++attempt) {
        const double theta = rng.uniform(dist.theta_min_deg, dist.theta_max_deg) * deg;
        const double z = rng.uniform(-1.0, 1.0);
        const double az = rng.uniform(0.0, 2.0 * M_PI);
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3 axis(s * std::cos(az), s * std::sin(az), z);

        ScenarioSpec spec;
        spec.q_d = Quaternion::identity();
        spec.q_init = Quaternion::from_axis_angle(axis, theta);
        for (int i = 0; i < 3; ++i) {
            spec.w_init[i] = rng.uniform(-dist.rate_limit_deg_s, dist.rate_limit_deg_s) * deg;
        }

        if (!dist.with_zone) {
            return spec;
        }

        const double theta_f = rng.uniform(dist.theta_f_min_deg, dist.theta_f_max_deg) * deg;
        if (rotation_angle_between(spec.q_init, spec.q_d) <= 1e-6) {
            continue; // midpoint undefined, retry
        }
        const KeepOutZone zone =
            place_midpoint_zone(spec.q_init, spec.q_d, dist.boresight, theta_f);
        const double margin0 =
            theta_margin(cone_angle(spec.q_init, dist.boresight, zone), zone);
        if (margin0 > 0.0) {
            spec.zone = zone;
            return spec;
        }
    }
    throw ValidationError("scenario sampling exhausted resampling attempts");
}

Environment::Environment(const EnvConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
}

Observation Environment::reset(const ScenarioSpec& spec) {
    if (!spec.q_d.is_finite() || !spec.q_init.is_finite() || !spec.w_init.allFinite()) {
        throw ValidationError("scenario has non-finite state");
    }
    if (std::abs(spec.q_d.norm() - 1.0) > 1e-6 || std::abs(spec.q_init.norm() - 1.0) > 1e-6) {
        throw ValidationError("scenario quaternions must be unit norm");
    }
    spec_ = spec;
    spec_.q_d = spec.q_d.normalized();
    spec_.q_init = spec.q_init.normalized();
    if (spec_.zone) {
        *spec_.zone = make_keep_out_zone(spec_.zone->n_F, spec_.zone->theta_F);
        const double margin0 =
            theta_margin(cone_angle(spec_.q_init, cfg_.boresight, *spec_.zone), *spec_.zone);
        if (margin0 <= 0.0) {
            throw ValidationError("initial boresight lies inside the keep-out zone");
        }
    }

    q_ = spec_.q_init;
    w_ = spec_.w_init;
    tau_prev_ = Vec3::Zero();
    q_e0_prev_ = error_quat(spec_.q_d, q_).q0;
    step_index_ = 0;
    active_ = true;
    clamped_actions_ = 0;
    last_renorm_ = 0.0;
    return observe();
}

Observation Environment::observe() const {
    Observation o;
    o.q_e = error_quat(spec_.q_d, q_);
    o.w = w_;
    o.r_F_body = cfg_.boresight.r_F_body;
    if (spec_.zone) {
        o.theta = cone_angle(q_, cfg_.boresight, *spec_.zone);
        o.theta_margin = theta_margin(o.theta, *spec_.zone);
        o.delta_n_body = delta_n_body(q_, cfg_.boresight, *spec_.zone).v;
    } else {
        // Zone-free episodes encode a virtual antipodal cone of zero width:
        // maximal clearance, constant direction cue.
        o.theta = M_PI;
        o.theta_margin = M_PI;
        o.delta_n_body = -cfg_.boresight.r_F_body;
    }
    o.q_e0_prev = q_e0_prev_;
    return o;
}

StepResult Environment::step(const Vec3& action) {
    if (!active_) throw UsageError("step() before reset()");
    if (episode_done()) throw UsageError("step() after episode end");
    if (!action.allFinite()) throw ValidationError("action has non-finite components");

    Vec3 a = action;
    bool clamped = false;
    for (int i = 0; i < 3; ++i) {
        if (a[i] < -1.0 || a[i] > 1.0) {
            a[i] = std::clamp(a[i], -1.0, 1.0);
            clamped = true;
        }
    }
    if (clamped) ++clamped_actions_;

    const Vec3 tau = a.cwiseProduct(cfg_.tau_max);
    const double q_e0_pre = error_quat(spec_.q_d, q_).q0;

    const Rk4Result r = rk4_step(q_, w_, tau, cfg_.inertia, cfg_.dt);
    q_ = r.q;
    w_ = r.w;
    last_renorm_ = r.renorm_correction;
    ++step_index_;

    const Quaternion q_e = error_quat(spec_.q_d, q_);
    const double phi = deviation_angle(q_e);
    double margin = M_PI;
    if (spec_.zone) {
        margin = theta_margin(cone_angle(q_, cfg_.boresight, *spec_.zone), *spec_.zone);
    }
    if (cfg_.fzone_enabled) ++fzone_evals_;

    StepResult out;
    out.reward = compute_reward(phi, tau, tau_prev_, margin, q_e.q0, q_e0_pre, cfg_);
    out.done = episode_done();
    out.info.theta_margin = margin;
    out.info.phi = phi;
    out.info.violated = spec_.zone.has_value() && violates(margin);
    out.info.torque_applied = tau;

    q_e0_prev_ = q_e0_pre;
    tau_prev_ = tau;
    out.obs = observe();
    return out;
}

} // namespace keepout
