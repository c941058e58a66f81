#pragma once

#include <optional>
#include <string>

#include "keepout/eval.hpp"

namespace keepout {

struct StageConfig {
    double theta_min_deg = 0.0;
    double theta_max_deg = 180.0;
    long step_budget = 0;
};

struct PhaseConfig {
    int phase = 1;
    std::vector<StageConfig> stages;
    long eval_every = 5000;
    int eval_episodes = 50;
    double theta_f_min_deg = 15.0;
    double theta_f_max_deg = 30.0;
    double rate_limit_deg_s = 0.001;
    bool preload_buffer = true; // phase 2: continue on the phase-1 buffer
    double advance_success_rate = 0.9;

    bool fzone_enabled() const { return phase == 2; }
    void validate() const;
    static PhaseConfig phase1_defaults();
    static PhaseConfig phase2_defaults();
};

// Advance when the gate is met or the stage budget is spent, whichever first.
bool advance_stage(double success_rate, double required_rate, long stage_steps,
                   long step_budget);

struct EvalRecord {
    long env_steps = 0;
    int stage = 0;
    double mean_reward = 0.0;
    double success_rate = 0.0;
    double violation_rate = 0.0;
    std::optional<double> mean_settling_time;
};

struct TrainReport {
    std::vector<EvalRecord> evals;
    std::string best_checkpoint;
    double best_mean_reward = 0.0;
    long best_env_steps = -1;
    long total_env_steps = 0;
    long fzone_penalty_evaluations = 0;

    nlohmann::ordered_json to_json() const;
    void write(const std::string& path) const;
};

// Two-phase curriculum driver: stages of growing initial deviation, periodic
// deterministic evaluation, stage gating, best-agent tracking, stage-boundary
// agent + buffer checkpoints.
class CurriculumTrainer {
public:
    CurriculumTrainer(const PhaseConfig& phase, const SacHyper& hyper,
                      const EnvConfig& env_cfg, std::string out_dir,
                      std::uint64_t master_seed);

    // Phase 2 starts from a phase-1 checkpoint (and optionally its buffer).
    void init_from_checkpoint(const std::string& ckpt_path);
    // Continue an interrupted run from a stage-boundary checkpoint.
    void resume_from(const std::string& ckpt_path);

    TrainReport run();

    const SacAgent& agent() const { return *agent_; }

private:
    void run_eval(TrainReport& report);
    void save_stage(int completed_stage);
    nlohmann::ordered_json trainer_meta(int completed_stage) const;
    ScenarioDistribution stage_distribution(int stage) const;

    PhaseConfig phase_;
    SacHyper hyper_;
    EnvConfig env_cfg_;
    std::string out_dir_;
    std::uint64_t master_seed_;

    std::optional<SacAgent> agent_;
    std::optional<ReplayBuffer> buffer_;
    Rng train_rng_;
    long env_steps_ = 0;
    long stage_steps_ = 0;
    int stage_ = 0;
    long warmup_ = 0;
    double last_success_rate_ = 0.0;
    TrainReport* report_ = nullptr;
};

} // namespace keepout
