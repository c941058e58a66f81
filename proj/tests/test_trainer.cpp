#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "keepout/error.hpp"
#include "keepout/trainer.hpp"

using namespace keepout;
namespace fs = std::filesystem;

namespace {

// Tiny everything: exercises the full loop in a few seconds.
SacHyper tiny_hyper() {
    SacHyper h;
    h.hidden = {16, 16};
    h.batch_size = 32;
    h.buffer_capacity = 20000;
    h.warmup_steps = 100;
    return h;
}

EnvConfig tiny_env() {
    EnvConfig cfg;
    cfg.episode_steps = 40;
    return cfg;
}

PhaseConfig tiny_phase(int phase, std::vector<StageConfig> stages) {
    PhaseConfig pc = phase == 2 ? PhaseConfig::phase2_defaults() : PhaseConfig::phase1_defaults();
    pc.stages = std::move(stages);
    pc.eval_every = 200;
    pc.eval_episodes = 2;
    return pc;
}

struct TempDir {
    explicit TempDir(const std::string& name) : path("trainer_test_" + name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string path;
};

} // namespace

TEST_CASE("phase config validation") {
    PhaseConfig empty;
    empty.stages.clear();
    CHECK_THROWS_AS(empty.validate(), ValidationError);

    PhaseConfig bad = PhaseConfig::phase1_defaults();
    bad.stages[0].theta_max_deg = 200.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    bad = PhaseConfig::phase1_defaults();
    bad.stages[0].theta_min_deg = 30.0;
    bad.stages[0].theta_max_deg = 20.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    bad = PhaseConfig::phase1_defaults();
    bad.stages[0].step_budget = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    CHECK_NOTHROW(PhaseConfig::phase1_defaults().validate());
    CHECK_NOTHROW(PhaseConfig::phase2_defaults().validate());
}

TEST_CASE("stage advancement gate") {
    CHECK(advance_stage(1.0, 0.9, 10, 1000));       // success gate
    CHECK(advance_stage(0.9, 0.9, 10, 1000));       // gate is inclusive
    CHECK_FALSE(advance_stage(0.5, 0.9, 10, 1000)); // keep training
    CHECK(advance_stage(0.0, 0.9, 1000, 1000));     // budget exhausted
    CHECK(advance_stage(0.0, 0.9, 1500, 1000));
}

TEST_CASE("tiny phase-1 run produces artifacts and never touches the penalty") {
    TempDir dir("p1");
    CurriculumTrainer trainer(tiny_phase(1, {{0.0, 20.0, 400}}), tiny_hyper(),
                              tiny_env(), dir.path, 12345);
    const TrainReport report = trainer.run();

    CHECK(report.total_env_steps >= 400);
    CHECK(report.fzone_penalty_evaluations == 0);
    CHECK_FALSE(report.evals.empty());
    CHECK(fs::exists(dir.path + "/stage1.ckpt"));
    CHECK(fs::exists(dir.path + "/stage1.buf"));
    CHECK(fs::exists(dir.path + "/final.ckpt"));
    CHECK(fs::exists(dir.path + "/final.buf"));
    CHECK(fs::exists(dir.path + "/" + report.best_checkpoint));

    // checkpoint and buffer load back
    const SacAgent agent = SacAgent::load(dir.path + "/stage1.ckpt");
    CHECK(agent.obs_dim() == kObsDim);
    const ReplayBuffer buf = ReplayBuffer::load(dir.path + "/stage1.buf");
    CHECK(buf.size() > 0);

    report.write(dir.path + "/train_report.json");
    CHECK(fs::exists(dir.path + "/train_report.json"));
}

TEST_CASE("phase-2 continuation consumes phase-1 artifacts and samples zones") {
    TempDir p1("p2_from");
    CurriculumTrainer t1(tiny_phase(1, {{0.0, 20.0, 300}}), tiny_hyper(), tiny_env(),
                         p1.path, 7);
    const TrainReport r1 = t1.run();

    TempDir p2("p2_to");
    CurriculumTrainer t2(tiny_phase(2, {{80.0, 120.0, 300}}), tiny_hyper(), tiny_env(),
                         p2.path, 8);
    t2.init_from_checkpoint(p1.path + "/" + r1.best_checkpoint);
    const TrainReport r2 = t2.run();
    CHECK(r2.total_env_steps >= 300);
    // phase 2 evaluates the penalty on every step
    CHECK(r2.fzone_penalty_evaluations >= 300);

    // corrupt checkpoint refuses to start
    TempDir p3("p2_bad");
    CurriculumTrainer t3(tiny_phase(2, {{80.0, 120.0, 300}}), tiny_hyper(), tiny_env(),
                         p3.path, 9);
    const std::string bogus = p3.path + "/bogus.ckpt";
    {
        std::ofstream out(bogus, std::ios::binary);
        out << "SACKgarbagegarbagegarbage";
    }
    CHECK_THROWS_AS(t3.init_from_checkpoint(bogus), IoError);
}

TEST_CASE("resuming from a stage boundary reproduces the uninterrupted run") {
    const SacHyper hyper = tiny_hyper();
    const EnvConfig env_cfg = tiny_env();
    const std::vector<StageConfig> both = {{0.0, 15.0, 240}, {0.0, 30.0, 240}};

    TempDir full("resume_full");
    CurriculumTrainer t_full(tiny_phase(1, both), hyper, env_cfg, full.path, 44);
    const TrainReport r_full = t_full.run();

    // First stage only...
    TempDir part("resume_part");
    CurriculumTrainer t_part(tiny_phase(1, both), hyper, env_cfg, part.path, 44);
    // same seed; stop after stage 1 by shrinking the stage list
    CurriculumTrainer t_stage1(tiny_phase(1, {both[0]}), hyper, env_cfg, part.path,
                               44);
    const TrainReport r_stage1 = t_stage1.run();
    (void)r_stage1;

    // ...then resume into the full schedule.
    CurriculumTrainer t_resume(tiny_phase(1, both), hyper, env_cfg, part.path,
                               44);
    t_resume.resume_from(part.path + "/stage1.ckpt");
    const TrainReport r_resumed = t_resume.run();

    // stage-2 evaluations match the uninterrupted run exactly
    std::vector<EvalRecord> full_stage2, resumed_stage2;
    for (const auto& e : r_full.evals) {
        if (e.stage == 2) full_stage2.push_back(e);
    }
    for (const auto& e : r_resumed.evals) {
        if (e.stage == 2) resumed_stage2.push_back(e);
    }
    REQUIRE(!full_stage2.empty());
    REQUIRE(full_stage2.size() == resumed_stage2.size());
    for (std::size_t i = 0; i < full_stage2.size(); ++i) {
        CHECK(full_stage2[i].env_steps == resumed_stage2[i].env_steps);
        CHECK(full_stage2[i].mean_reward == resumed_stage2[i].mean_reward);
        CHECK(full_stage2[i].success_rate == resumed_stage2[i].success_rate);
    }

    // resume with the wrong seed is rejected
    CurriculumTrainer t_wrong(tiny_phase(1, both), hyper, env_cfg, part.path, 999);
    CHECK_THROWS_AS(t_wrong.resume_from(part.path + "/stage1.ckpt"), ValidationError);
}

TEST_CASE("train report serializes") {
    TrainReport report;
    report.total_env_steps = 123;
    report.best_checkpoint = "x.ckpt";
    report.best_mean_reward = 4.5;
    report.best_env_steps = 100;
    EvalRecord rec;
    rec.env_steps = 100;
    rec.stage = 1;
    rec.mean_reward = 4.5;
    rec.success_rate = 0.5;
    rec.violation_rate = 0.0;
    report.evals.push_back(rec);
    const auto j = report.to_json();
    CHECK(j.at("total_env_steps") == 123);
    CHECK(j.at("evaluations").size() == 1);
    CHECK(j.at("evaluations")[0].at("mean_settling_time_s").is_null());
}
