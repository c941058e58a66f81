#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "keepout/env.hpp"
#include "keepout/sac.hpp"

namespace keepout {

// Maps an observation to an action in [-1, 1]^3.
struct Controller {
    virtual ~Controller() = default;
    virtual Vec3 act(const Observation& obs) = 0;
};

// Deterministic SAC policy (tanh of the mean head).
class PolicyController : public Controller {
public:
    explicit PolicyController(const SacAgent& agent) : agent_(&agent) {}
    Vec3 act(const Observation& obs) override;

private:
    const SacAgent* agent_;
};

// Quaternion-feedback PD baseline, no zone awareness:
// tau = clamp(-kp sign(qe0) qe_vec - kd w). Serves as an independent,
// training-free oracle for the evaluation harness.
class PdController : public Controller {
public:
    PdController(double kp, double kd, const Vec3& tau_max)
        : kp_(kp), kd_(kd), tau_max_(tau_max) {}
    static PdController baseline() { return {20.0, 30.0, Vec3::Constant(2.0)}; }
    Vec3 act(const Observation& obs) override;

private:
    double kp_, kd_;
    Vec3 tau_max_;
};

class FnController : public Controller {
public:
    explicit FnController(std::function<Vec3(const Observation&)> fn) : fn_(std::move(fn)) {}
    Vec3 act(const Observation& obs) override { return fn_(obs); }

private:
    std::function<Vec3(const Observation&)> fn_;
};

// Per-step time series of one episode. Row k holds the post-step state at
// t = (k+1) dt together with the torque applied over that step.
struct EpisodeTrace {
    std::vector<double> t;
    std::vector<Quaternion> q_e;
    std::vector<Vec3> w;
    std::vector<Vec3> tau;
    std::vector<double> theta_margin;
    std::vector<double> phi;
    std::vector<double> reward;

    std::size_t size() const { return t.size(); }
};

enum class EpisodeClass { settled, non_settled, violation };

const char* to_string(EpisodeClass c);

struct EpisodeMetrics {
    double total_reward = 0.0;
    std::optional<double> settling_time; // s
    double control_effort = 0.0;         // N^2 m^2 s
    double final_accuracy_phi_deg = 0.0;
    bool violated = false;
    EpisodeClass classification = EpisodeClass::non_settled;
};

EpisodeTrace rollout(Controller& controller, const ScenarioSpec& spec,
                     const EnvConfig& cfg);

// Earliest time from which phi stays at or below the threshold until episode
// end; 0 when the whole trace is inside; nullopt when the final step is not.
std::optional<double> settling_time(const EpisodeTrace& trace, double threshold);

// Rectangle rule over the zero-order-hold torque.
double control_effort(const EpisodeTrace& trace, double dt);

// Violation takes precedence; otherwise non-settled when settling_time is
// absent.
EpisodeClass classify(const EpisodeTrace& trace, const std::optional<double>& settling);

EpisodeMetrics episode_metrics(const EpisodeTrace& trace, const EnvConfig& cfg);

void write_trace_csv(const EpisodeTrace& trace, const std::string& path);

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0; // population
    long count = 0;
};

struct MonteCarloEpisode {
    std::uint64_t seed = 0;
    bool ok = false;
    EpisodeMetrics metrics;
};

struct MonteCarloReport {
    int n = 0;
    std::uint64_t seed = 0;
    bool incomplete = false;
    MetricSummary reward;        // all completed episodes
    MetricSummary settling_s;    // settled-by-trace episodes only
    MetricSummary effort;        // settled-by-trace episodes only
    MetricSummary accuracy_deg;  // settled-by-trace episodes only
    double rate_settled = 0.0;
    double rate_non_settled = 0.0;
    double rate_violation = 0.0;
    std::vector<MonteCarloEpisode> episodes;

    nlohmann::ordered_json to_json() const;
    std::string summary_block() const; // human-readable metrics table
};

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

struct MonteCarloConfig {
    int n = 10000;
    std::uint64_t seed = 0;
    int workers = 0; // 0: KEEPOUT_RL_THREADS or hardware concurrency
    ScenarioDistribution dist;
    EnvConfig env;
};

// Deterministic seeded campaign: scenario i is generated and rolled out from
// split_seed(seed, i), so results are independent of worker count and
// execution order.
MonteCarloReport monte_carlo(const ControllerFactory& make_controller,
                             const MonteCarloConfig& cfg);

// The section-3 campaign defaults: rotation angle in [80, 180] deg, midpoint
// zone with half-angle in [15, 30] deg, rate noise 0.001 deg/s.
MonteCarloConfig default_campaign_config();

} // namespace keepout
