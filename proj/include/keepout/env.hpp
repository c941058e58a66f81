#pragma once

#include <optional>

#include "keepout/constraint.hpp"
#include "keepout/dynamics.hpp"
#include "keepout/rng.hpp"

namespace keepout {

constexpr int kObsDim = 4 + 3 + 3 + 1 + 1 + 3 + 1; // 16
constexpr int kActDim = 3;

using ObsVec = Eigen::Matrix<double, kObsDim, 1>;

struct EnvConfig {
    double dt = 0.1;                    // s
    int episode_steps = 1000;           // 100 s
    InertiaMatrix inertia = InertiaMatrix::default_spacecraft();
    Vec3 tau_max = Vec3::Constant(2.0); // N*m, per axis
    double accuracy_threshold = 0.25 * M_PI / 180.0; // rad on phi
    double beta = 10.0;                 // F-zone penalty scale
    double alpha = 66.0;                // F-zone penalty decay, 1/rad
    bool fzone_enabled = false;
    Boresight boresight{Vec3::UnitX()};

    void validate() const;
};

struct ScenarioSpec {
    Quaternion q_d = Quaternion::identity();
    Quaternion q_init = Quaternion::identity();
    Vec3 w_init = Vec3::Zero(); // rad/s
    std::optional<KeepOutZone> zone;
    std::uint64_t seed = 0;
};

// The 16-component state of the reorientation task, fixed layout:
// [q_e(4), w(3), r_F_body(3), theta_margin, theta, delta_n_body(3), q_e0_prev].
struct Observation {
    Quaternion q_e;
    Vec3 w = Vec3::Zero();
    Vec3 r_F_body = Vec3::UnitX();
    double theta_margin = M_PI;
    double theta = M_PI;
    Vec3 delta_n_body = -Vec3::UnitX();
    double q_e0_prev = 1.0;

    ObsVec as_vector() const;
    static Observation from_vector(const ObsVec& v);
};

struct StepInfo {
    double theta_margin = M_PI;
    double phi = 0.0;
    bool violated = false;
    Vec3 torque_applied = Vec3::Zero();
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

// P_fzone: beta for margins at or below zero, exponential decay outside.
double fzone_penalty(double theta_margin, double beta, double alpha);

// Reward for one transition, evaluated on the post-step state. phi and
// theta_margin are radians; torques are the applied values in N*m.
double compute_reward(double phi, const Vec3& tau, const Vec3& tau_prev,
                      double theta_margin, double q_e0, double q_e0_prev,
                      const EnvConfig& cfg);

// Per-phase scenario sampling parameters.
struct ScenarioDistribution {
    double theta_min_deg = 0.0;   // rotation angle lower bound
    double theta_max_deg = 180.0; // rotation angle upper bound
    double rate_limit_deg_s = 0.001;
    bool with_zone = false;
    double theta_f_min_deg = 15.0;
    double theta_f_max_deg = 30.0;
    Boresight boresight{Vec3::UnitX()};
    int max_attempts = 100;
};

// Random regulation scenario: identity target, rotation angle uniform in the
// configured range, axis uniform on the sphere, per-component rate noise.
// With zones, the midpoint placement is retried until the initial boresight
// is strictly outside the cone.
ScenarioSpec sample_scenario(const ScenarioDistribution& dist, Rng& rng);

// Episodic environment wiring the constrained-reorientation
// task: torque-scaled actions, RK4 transitions, margin-shaped reward.
class Environment {
public:
    explicit Environment(const EnvConfig& cfg);

    Observation reset(const ScenarioSpec& spec);
    StepResult step(const Vec3& action);

    bool episode_done() const { return step_index_ >= cfg_.episode_steps; }
    int step_index() const { return step_index_; }
    const EnvConfig& config() const { return cfg_; }
    const ScenarioSpec& scenario() const { return spec_; }
    const Quaternion& attitude() const { return q_; }
    const Vec3& rate() const { return w_; }

    // Diagnostics.
    long clamped_action_count() const { return clamped_actions_; }
    long fzone_penalty_evaluations() const { return fzone_evals_; }
    double last_renorm_correction() const { return last_renorm_; }

private:
    Observation observe() const;

    EnvConfig cfg_;
    ScenarioSpec spec_;
    Quaternion q_;
    Vec3 w_ = Vec3::Zero();
    Vec3 tau_prev_ = Vec3::Zero();
    double q_e0_prev_ = 1.0;
    int step_index_ = 0;
    bool active_ = false;
    long clamped_actions_ = 0;
    long fzone_evals_ = 0;
    double last_renorm_ = 0.0;
};

} // namespace keepout
