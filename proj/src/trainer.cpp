#include "keepout/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "keepout/error.hpp"

namespace keepout {

namespace fs = std::filesystem;

void PhaseConfig::validate() const {
    if (phase != 1 && phase != 2) throw ValidationError("phase must be 1 or 2");
    if (stages.empty()) throw ValidationError("curriculum needs at least one stage");
    for (const StageConfig& s : stages) {
        if (!(s.theta_max_deg > 0.0 && s.theta_max_deg <= 180.0)) {
            throw ValidationError("stage theta_max_deg must lie in (0, 180]");
        }
        if (s.theta_min_deg < 0.0 || s.theta_min_deg > s.theta_max_deg) {
            throw ValidationError("stage theta range is inverted");
        }
        if (s.step_budget < 1) throw ValidationError("stage step_budget must be >= 1");
    }
    if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
    if (eval_episodes < 1) throw ValidationError("eval_episodes must be >= 1");
    if (!(advance_success_rate > 0.0 && advance_success_rate <= 1.0)) {
        throw ValidationError("advance_success_rate must lie in (0, 1]");
    }
    if (phase == 2 && !(theta_f_min_deg > 0.0 && theta_f_max_deg >= theta_f_min_deg &&
                        theta_f_max_deg < 90.0)) {
        throw ValidationError("theta_F range must lie in (0, 90) deg");
    }
}

PhaseConfig PhaseConfig::phase1_defaults() {
    PhaseConfig cfg;
    cfg.phase = 1;
    for (double top : {25.0, 45.0, 90.0, 135.0, 180.0}) {
        cfg.stages.push_back({0.0, top, 160000});
    }
    return cfg;
}

PhaseConfig PhaseConfig::phase2_defaults() {
    PhaseConfig cfg;
    cfg.phase = 2;
    for (double top : {120.0, 150.0, 180.0}) {
        cfg.stages.push_back({80.0, top, 1000000});
    }
    return cfg;
}

bool advance_stage(double success_rate, double required_rate, long stage_steps,
                   long step_budget) {
    return success_rate >= required_rate || stage_steps >= step_budget;
}

nlohmann::ordered_json TrainReport::to_json() const {
    nlohmann::ordered_json j;
    j["total_env_steps"] = total_env_steps;
    j["best_checkpoint"] = best_checkpoint;
    j["best_mean_reward"] = best_mean_reward;
    j["best_env_steps"] = best_env_steps;
    j["fzone_penalty_evaluations"] = fzone_penalty_evaluations;
    nlohmann::ordered_json evs = nlohmann::ordered_json::array();
    for (const EvalRecord& e : evals) {
        nlohmann::ordered_json row;
        row["env_steps"] = e.env_steps;
        row["stage"] = e.stage;
        row["mean_reward"] = e.mean_reward;
        row["success_rate"] = e.success_rate;
        row["violation_rate"] = e.violation_rate;
        if (e.mean_settling_time.has_value()) {
            row["mean_settling_time_s"] = *e.mean_settling_time;
        } else {
            row["mean_settling_time_s"] = nullptr;
        }
        evs.push_back(std::move(row));
    }
    j["evaluations"] = std::move(evs);
    return j;
}

void TrainReport::write(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << to_json().dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

CurriculumTrainer::CurriculumTrainer(const PhaseConfig& phase, const SacHyper& hyper,
                                     const EnvConfig& env_cfg, std::string out_dir,
                                     std::uint64_t master_seed)
    : phase_(phase),
      hyper_(hyper),
      env_cfg_(env_cfg),
      out_dir_(std::move(out_dir)),
      master_seed_(master_seed),
      train_rng_(split_seed(master_seed, 2)) {
    phase_.validate();
    hyper_.validate();
    env_cfg_.fzone_enabled = phase_.fzone_enabled();
    env_cfg_.validate();
    fs::create_directories(out_dir_);

    agent_.emplace(hyper_, kObsDim, kActDim, split_seed(master_seed_, 1));
    buffer_.emplace(hyper_.buffer_capacity, kObsDim, kActDim);
    // Phase 1 warms up on uniform actions; a phase-2 continuation starts from
    // a trained policy, so it collects on-policy from the first step.
    warmup_ = phase_.phase == 1 ? hyper_.warmup_steps : 0;
}

void CurriculumTrainer::init_from_checkpoint(const std::string& ckpt_path) {
    agent_ = SacAgent::load(ckpt_path);
    if (agent_->obs_dim() != kObsDim || agent_->act_dim() != kActDim) {
        throw ValidationError("checkpoint network dims do not match the task");
    }
    // Learned state carries over; the schedule comes from this run's config.
    hyper_.hidden = agent_->hyper().hidden;
    agent_->set_hyper(hyper_);
    if (phase_.preload_buffer) {
        // Sibling buffer first (stage checkpoints), then the run's final
        // buffer (best.ckpt has no sibling of its own).
        fs::path buf = fs::path(ckpt_path).replace_extension(".buf");
        if (!fs::exists(buf)) {
            buf = fs::path(ckpt_path).parent_path() / "final.buf";
        }
        if (fs::exists(buf)) {
            buffer_ = ReplayBuffer::load(buf.string());
        }
    }
    warmup_ = 0;
}

void CurriculumTrainer::resume_from(const std::string& ckpt_path) {
    nlohmann::json meta;
    agent_ = SacAgent::load(ckpt_path, &meta);
    if (meta.is_null() || !meta.contains("env_steps")) {
        throw ValidationError("checkpoint lacks trainer state; cannot resume");
    }
    hyper_ = agent_->hyper();
    env_steps_ = meta.at("env_steps").get<long>();
    stage_ = meta.at("stage_completed").get<int>();
    stage_steps_ = 0;
    warmup_ = meta.at("warmup").get<long>();
    if (meta.at("master_seed").get<std::uint64_t>() != master_seed_) {
        throw ValidationError("resume seed differs from the checkpoint's master seed");
    }
    std::istringstream rng_in(meta.at("rng").get<std::string>());
    rng_in >> train_rng_.engine();
    if (!rng_in) throw IoError("cannot restore trainer RNG state");

    const fs::path buf = fs::path(ckpt_path).replace_extension(".buf");
    if (!fs::exists(buf)) {
        throw IoError("resume requires the replay buffer next to the checkpoint: " +
                      buf.string());
    }
    buffer_ = ReplayBuffer::load(buf.string());
}

ScenarioDistribution CurriculumTrainer::stage_distribution(int stage) const {
    const StageConfig& s = phase_.stages[static_cast<std::size_t>(stage)];
    ScenarioDistribution dist;
    dist.theta_min_deg = s.theta_min_deg;
    dist.theta_max_deg = s.theta_max_deg;
    dist.rate_limit_deg_s = phase_.rate_limit_deg_s;
    dist.with_zone = phase_.fzone_enabled();
    dist.theta_f_min_deg = phase_.theta_f_min_deg;
    dist.theta_f_max_deg = phase_.theta_f_max_deg;
    dist.boresight = env_cfg_.boresight;
    return dist;
}

nlohmann::ordered_json CurriculumTrainer::trainer_meta(int completed_stage) const {
    std::ostringstream rng_out;
    rng_out << train_rng_.engine();
    nlohmann::ordered_json meta;
    meta["phase"] = phase_.phase;
    meta["env_steps"] = env_steps_;
    meta["stage_completed"] = completed_stage;
    meta["warmup"] = warmup_;
    meta["master_seed"] = master_seed_;
    meta["rng"] = rng_out.str();
    return meta;
}

void CurriculumTrainer::save_stage(int completed_stage) {
    const std::string base = out_dir_ + "/stage" + std::to_string(completed_stage + 1);
    agent_->save(base + ".ckpt", trainer_meta(completed_stage + 1));
    buffer_->save(base + ".buf");
}

void CurriculumTrainer::run_eval(TrainReport& report) {
    const ScenarioDistribution dist = stage_distribution(stage_);
    const std::uint64_t eval_base = split_seed(master_seed_, 3);

    EvalRecord rec;
    rec.env_steps = env_steps_;
    rec.stage = stage_ + 1;
    PolicyController controller(*agent_);
    double reward_sum = 0.0;
    long successes = 0, violations = 0;
    double settle_sum = 0.0;
    long settle_count = 0;
    for (int i = 0; i < phase_.eval_episodes; ++i) {
        Rng rng(split_seed(eval_base + static_cast<std::uint64_t>(stage_),
                           static_cast<std::uint64_t>(i)));
        const ScenarioSpec spec = sample_scenario(dist, rng);
        const EpisodeTrace trace = rollout(controller, spec, env_cfg_);
        const EpisodeMetrics m = episode_metrics(trace, env_cfg_);
        reward_sum += m.total_reward;
        if (m.classification == EpisodeClass::settled) {
            ++successes;
            settle_sum += *m.settling_time;
            ++settle_count;
        } else if (m.classification == EpisodeClass::violation) {
            ++violations;
        }
    }
    rec.mean_reward = reward_sum / phase_.eval_episodes;
    rec.success_rate = static_cast<double>(successes) / phase_.eval_episodes;
    rec.violation_rate = static_cast<double>(violations) / phase_.eval_episodes;
    if (settle_count > 0) rec.mean_settling_time = settle_sum / settle_count;
    report.evals.push_back(rec);
    last_success_rate_ = rec.success_rate;

    if (report.best_env_steps < 0 || rec.mean_reward >= report.best_mean_reward) {
        report.best_mean_reward = rec.mean_reward;
        report.best_env_steps = env_steps_;
        report.best_checkpoint = "best.ckpt"; // relative to the run directory
        agent_->save(out_dir_ + "/best.ckpt", trainer_meta(stage_));
    }

    std::cout << "[train] steps=" << env_steps_ << " stage=" << rec.stage
              << " mean_reward=" << rec.mean_reward
              << " success=" << rec.success_rate
              << " violation=" << rec.violation_rate << std::endl;
}

TrainReport CurriculumTrainer::run() {
    TrainReport report;
    Environment env(env_cfg_);

    const int n_stages = static_cast<int>(phase_.stages.size());
    while (stage_ < n_stages) {
        const StageConfig& stage_cfg = phase_.stages[static_cast<std::size_t>(stage_)];
        const ScenarioDistribution dist = stage_distribution(stage_);
        stage_steps_ = 0;
        last_success_rate_ = 0.0;
        bool stage_done = false;

        while (!stage_done) {
            const ScenarioSpec spec = sample_scenario(dist, train_rng_);
            Observation obs = env.reset(spec);
            for (int k = 0; k < env_cfg_.episode_steps; ++k) {
                Vec3 action;
                if (env_steps_ < warmup_) {
                    for (int i = 0; i < 3; ++i) action[i] = train_rng_.uniform(-1.0, 1.0);
                } else {
                    const ActionSample s =
                        agent_->act(obs.as_vector(), /*deterministic=*/false, &train_rng_);
                    action = Vec3(s.action[0], s.action[1], s.action[2]);
                }
                const StepResult r = env.step(action);
                buffer_->push(obs.as_vector(), Vec(action), r.reward,
                              r.obs.as_vector(), r.done);
                obs = r.obs;
                ++env_steps_;
                ++stage_steps_;

                if (env_steps_ >= warmup_ &&
                    buffer_->size() >= static_cast<std::size_t>(hyper_.batch_size)) {
                    for (int u = 0; u < hyper_.updates_per_step; ++u) {
                        const SacLosses losses = agent_->update(*buffer_, train_rng_);
                        if (!losses.all_finite()) {
                            const std::string dump = out_dir_ + "/diverged.ckpt";
                            agent_->save(dump, trainer_meta(stage_));
                            throw NumericError(
                                "non-finite SAC loss at step " + std::to_string(env_steps_) +
                                "; diagnostic checkpoint written to " + dump);
                        }
                    }
                }
                if (env_steps_ % phase_.eval_every == 0) {
                    run_eval(report);
                }
            }
            if (advance_stage(last_success_rate_, phase_.advance_success_rate,
                              stage_steps_, stage_cfg.step_budget)) {
                stage_done = true;
            }
        }
        save_stage(stage_);
        ++stage_;
    }

    report.total_env_steps = env_steps_;
    report.fzone_penalty_evaluations = env.fzone_penalty_evaluations();
    if (phase_.phase == 1 && report.fzone_penalty_evaluations != 0) {
        throw NumericError("phase 1 must never evaluate the F-zone penalty");
    }
    agent_->save(out_dir_ + "/final.ckpt", trainer_meta(stage_));
    buffer_->save(out_dir_ + "/final.buf");
    if (report.best_env_steps < 0) {
        // No evaluation ever ran (tiny budgets): fall back to the final agent.
        report.best_checkpoint = "final.ckpt";
        report.best_env_steps = env_steps_;
    }
    return report;
}

} // namespace keepout
