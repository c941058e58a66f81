#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "keepout/net.hpp"
#include "keepout/replay.hpp"

namespace keepout {

struct SacHyper {
    int batch_size = 256;
    std::size_t buffer_capacity = 1000000;
    double gamma = 0.99;
    double lr = 1e-4;
    double soft_tau = 0.005;
    double target_entropy = -3.0; // "auto": minus the action dimension
    double log_std_min = -20.0;
    double log_std_max = 2.0;
    int updates_per_step = 1;
    long warmup_steps = 10000;
    std::vector<int> hidden = {256, 256};

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static SacHyper from_json(const nlohmann::json& j);
};

// Per-dimension pieces of the tanh-squashed Gaussian log-density; shared by
// the single-action and batched paths and by the normalization oracle.
inline double gauss_log_pdf_eps(double eps, double log_std) {
    return -0.5 * eps * eps - log_std - 0.5 * std::log(2.0 * M_PI);
}
inline double squash_log_correction(double a) {
    return std::log(1.0 - a * a + 1e-6);
}
// log pi(tanh(u)) for one dimension.
inline double tanh_gauss_log_prob_1d(double u, double mean, double log_std) {
    const double eps = (u - mean) * std::exp(-log_std);
    return gauss_log_pdf_eps(eps, log_std) - squash_log_correction(std::tanh(u));
}

struct ActionSample {
    Vec action;
    std::optional<double> log_prob; // stochastic mode only
};

// Batched reparameterized policy sample with the intermediates the actor
// backward pass needs.
struct PolicySample {
    Mat actions;  // act x B, tanh-squashed
    Vec log_prob; // B
    Mat mean, log_std_raw, log_std, stddev, eps;
    ForwardCache cache;
};

// Reparameterized sample with externally supplied standard-normal noise.
void sample_policy_with_eps(const DenseNet& policy, const SacHyper& hyper,
                            const Mat& obs, const Mat& eps, PolicySample& out);

// Draws the noise from rng; deterministic (tanh of the mean) when rng is null.
void sample_policy(const DenseNet& policy, const SacHyper& hyper, const Mat& obs,
                   Rng* rng, PolicySample& out);

// y = r + gamma (1 - done) (min(Q1', Q2')(s', a') - alpha log pi(a'|s')).
Vec critic_target_values(const DenseNet& q1_target, const DenseNet& q2_target,
                         const Mat& next_obs, const Mat& next_act,
                         const Vec& next_log_prob, const Vec& rew, const Vec& done,
                         double alpha, double gamma);

// Critic regression loss mean((Q(x) - y)^2). critic_loss_grad returns the MSE
// and fills grads with the gradient of 0.5 * MSE (the twin-critic convention).
double critic_loss_value(const DenseNet& q, const Mat& x, const Vec& y);
double critic_loss_grad(const DenseNet& q, const Mat& x, const Vec& y,
                        ForwardCache& cache, Gradients& grads);

struct ActorWorkspace {
    Mat x;
    ForwardCache c1, c2;
    Mat gq1, gq2;
};

// Actor objective mean(alpha log pi(a|s) - min Q(s, a)) with a reparameterized
// through the fixed noise in ps. The grad variant backpropagates through both
// the squash and the critics into the policy parameters.
double actor_loss_value(const DenseNet& policy, const DenseNet& q1, const DenseNet& q2,
                        const SacHyper& hyper, const Mat& obs, const Mat& eps,
                        double alpha);
double actor_loss_grad(const DenseNet& policy, const DenseNet& q1, const DenseNet& q2,
                       const SacHyper& hyper, const Mat& obs, const PolicySample& ps,
                       double alpha, ActorWorkspace& ws, Gradients& gpol);

// Temperature objective -log_alpha * mean(log pi + target_entropy).
inline double alpha_loss_value(double log_alpha, double mean_log_prob,
                               double target_entropy) {
    return -log_alpha * (mean_log_prob + target_entropy);
}
inline double alpha_loss_grad(double mean_log_prob, double target_entropy) {
    return -(mean_log_prob + target_entropy);
}

struct SacLosses {
    double q1 = 0.0;
    double q2 = 0.0;
    double actor = 0.0;
    double alpha_loss = 0.0;
    double alpha = 0.0;
    double mean_log_prob = 0.0;

    bool all_finite() const;
};

// Soft Actor-Critic with tanh-Gaussian policy, twin critics with Polyak
// targets and automatic entropy-temperature tuning.
class SacAgent {
public:
    SacAgent(const SacHyper& hyper, int obs_dim, int act_dim, std::uint64_t init_seed);

    ActionSample act(const Vec& obs, bool deterministic, Rng* rng) const;

    // One gradient update on a uniformly sampled batch: temperature, both
    // critics, actor, then Polyak target update.
    SacLosses update(const ReplayBuffer& buffer, Rng& rng);

    void save(const std::string& path,
              const nlohmann::ordered_json& trainer_meta = {}) const;
    static SacAgent load(const std::string& path,
                         nlohmann::json* trainer_meta = nullptr);

    const SacHyper& hyper() const { return hyper_; }
    // Re-points schedule hyperparameters (lr, gamma, tau, ...) on a loaded
    // agent; hidden dims must match the existing networks.
    void set_hyper(const SacHyper& h);
    int obs_dim() const { return obs_dim_; }
    int act_dim() const { return act_dim_; }
    double log_alpha() const { return log_alpha_; }
    double alpha() const { return std::exp(log_alpha_); }
    long updates() const { return updates_; }

    const DenseNet& policy() const { return policy_; }
    const DenseNet& q1() const { return q1_; }
    const DenseNet& q2() const { return q2_; }
    const DenseNet& q1_target() const { return q1t_; }
    const DenseNet& q2_target() const { return q2t_; }

    // Test access for constructing known network states.
    DenseNet& mutable_policy() { return policy_; }
    DenseNet& mutable_q1() { return q1_; }
    DenseNet& mutable_q2() { return q2_; }
    DenseNet& mutable_q1_target() { return q1t_; }
    DenseNet& mutable_q2_target() { return q2t_; }
    void set_log_alpha(double v) { log_alpha_ = v; }

private:
    SacAgent() = default;

    // Update-step buffers, reused across calls to avoid reallocation.
    struct Workspace {
        Mat S, A, S2;
        Vec R, D;
        PolicySample ps, ps2;
        Mat X;
        ForwardCache c1, c2;
        ActorWorkspace actor;
        Gradients g1, g2, gpol;
    };

    SacHyper hyper_;
    int obs_dim_ = 0;
    int act_dim_ = 0;
    DenseNet policy_, q1_, q2_, q1t_, q2t_;
    double log_alpha_ = 0.0;
    AdamState opt_policy_, opt_q1_, opt_q2_;
    ScalarAdam opt_alpha_;
    long updates_ = 0;
    Workspace ws_;
};

} // namespace keepout
