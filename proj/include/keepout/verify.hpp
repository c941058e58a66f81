#pragma once

#include <string>
#include <vector>

#include "keepout/quat.hpp"

namespace keepout {

struct PropertyResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct VerifyOptions {
    // Test hook: perturbs the named implementation path so the matching
    // property must fail ("reward-constant").
    std::string inject_fault;
    int grad_configs = 25;
};

// Fast invariant suite behind `verify`: conservation, reward oracle,
// SAC gradient checks, policy log-prob normalization.
std::vector<PropertyResult> run_verification(const VerifyOptions& opts);

// One seeded finite-difference check of the SAC losses on miniature nets.
// fd_valid is false when the configuration lands too close to a ReLU/min/clamp
// kink for central differences to be a meaningful oracle; callers draw a
// fresh seed in that case.
struct GradCheckResult {
    double critic_err = 0.0;
    double actor_err = 0.0;
    double alpha_err = 0.0;
    bool fd_valid = true;
    double max_err() const { return std::max({critic_err, actor_err, alpha_err}); }
};
GradCheckResult sac_gradient_check(std::uint64_t seed);

// Integral over (-1, 1) of the 1-D tanh-Gaussian density defined by the
// policy's log-prob formula (adaptive Simpson in pre-squash space).
double tanh_gauss_density_integral(double mean, double log_std);

struct ConservationResult {
    double momentum_drift = 0.0;  // max ||L_t - L_0|| / ||L_0||
    double energy_drift = 0.0;    // max |E_t - E_0| / E_0
    double max_quat_norm_err = 0.0;
};
ConservationResult torque_free_conservation(double omega_norm, int steps, double dt);

} // namespace keepout
