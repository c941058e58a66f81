#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <zlib.h>

#include "keepout/config_io.hpp"
#include "keepout/error.hpp"
#include "keepout/eval.hpp"
#include "keepout/trainer.hpp"
#include "keepout/verify.hpp"
#include "keepout/version.hpp"

namespace fs = std::filesystem;
using namespace keepout;

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string file_crc32_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
                             static_cast<uInt>(bytes.size()));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

void write_manifest(const std::string& out_dir, const std::string& command_line,
                    const std::string& config_hash, std::uint64_t seed,
                    const std::vector<std::string>& artifacts) {
    nlohmann::ordered_json j;
    j["tool_version"] = kToolVersion;
    j["command_line"] = command_line;
    j["config_hash"] = config_hash;
    j["master_seed"] = seed;
    j["artifacts"] = artifacts;
    j["started_utc"] = utc_timestamp();
    std::ofstream out(out_dir + "/manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + out_dir);
    out << j.dump(2) << "\n";
}

SacAgent load_task_agent(const std::string& path) {
    SacAgent agent = SacAgent::load(path);
    if (agent.obs_dim() != kObsDim || agent.act_dim() != kActDim) {
        throw ValidationError("checkpoint was trained for different dimensions");
    }
    return agent;
}

int cmd_train(int phase, const std::string& config_path, const std::string& out_dir,
              const std::string& resume, const std::string& from_phase1,
              std::uint64_t seed, const std::string& command_line) {
    if (phase == 2 && from_phase1.empty() && resume.empty()) {
        throw UsageError("--phase 2 requires --from-phase1 (or --resume)");
    }

    std::optional<KvDoc> doc;
    std::string config_hash = "default";
    if (!config_path.empty()) {
        doc = KvDoc::parse_file(config_path);
        config_hash = file_crc32_hex(config_path);
    }
    const TrainSetup setup = make_train_setup(phase, doc ? &*doc : nullptr);

    fs::create_directories(out_dir);
    write_manifest(out_dir, command_line, config_hash, seed,
                   {"train_report.json", "best.ckpt", "final.ckpt"});

    CurriculumTrainer trainer(setup.phase, setup.hyper, setup.env, out_dir, seed);
    if (!resume.empty()) {
        trainer.resume_from(resume);
    } else if (phase == 2) {
        trainer.init_from_checkpoint(from_phase1);
    }
    const TrainReport report = trainer.run();
    report.write(out_dir + "/train_report.json");
    std::cout << "best checkpoint: " << out_dir << "/" << report.best_checkpoint
              << " (mean eval reward " << report.best_mean_reward << " at "
              << report.best_env_steps << " steps)\n";
    return 0;
}

int cmd_rollout(const std::string& ckpt, const std::string& scenario_path,
                const std::string& trace_path) {
    const ScenarioSpec spec = load_scenario(scenario_path);
    const SacAgent agent = load_task_agent(ckpt);
    EnvConfig cfg;
    cfg.fzone_enabled = spec.zone.has_value();
    PolicyController controller(agent);
    const EpisodeTrace trace = rollout(controller, spec, cfg);
    if (!trace_path.empty()) {
        write_trace_csv(trace, trace_path);
    }
    const EpisodeMetrics m = episode_metrics(trace, cfg);
    double min_margin = M_PI;
    for (double v : trace.theta_margin) min_margin = std::min(min_margin, v);
    std::cout << "steps:            " << trace.size() << "\n"
              << "classification:   " << to_string(m.classification) << "\n"
              << "total reward:     " << m.total_reward << "\n"
              << "settling time:    "
              << (m.settling_time ? std::to_string(*m.settling_time) + " s" : "none")
              << "\n"
              << "control effort:   " << m.control_effort << " N^2 m^2 s\n"
              << "final phi:        " << m.final_accuracy_phi_deg << " deg\n"
              << "min theta_margin: " << min_margin << " rad\n";
    return 0;
}

int cmd_montecarlo(const std::string& ckpt, int n, std::uint64_t seed,
                   const std::string& report_path, int workers) {
    const SacAgent agent = load_task_agent(ckpt);
    MonteCarloConfig cfg = default_campaign_config();
    cfg.n = n;
    cfg.seed = seed;
    cfg.workers = workers;
    const MonteCarloReport report = monte_carlo(
        [&agent]() { return std::make_unique<PolicyController>(agent); }, cfg);
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + report_path);
        out << report.to_json().dump(2) << "\n";
        if (!out) throw IoError("write failed: " + report_path);
    }
    std::cout << report.summary_block();
    return report.incomplete ? 5 : 0;
}

int cmd_verify(const std::string& inject) {
    VerifyOptions opts;
    opts.inject_fault = inject;
    const auto results = run_verification(opts);
    int failures = 0;
    for (const PropertyResult& r : results) {
        std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name << " (" << r.detail
                  << ")\n";
        if (!r.pass) ++failures;
    }
    return failures == 0 ? 0 : 5;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained spacecraft reorientation workbench"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string command_line;
    for (int i = 0; i < argc; ++i) {
        if (i) command_line += ' ';
        command_line += argv[i];
    }

    auto* train = app.add_subcommand("train", "Run curriculum training");
    int phase = 1;
    std::string config_path, out_dir, resume, from_phase1;
    std::uint64_t seed = 0;
    train->add_option("--phase", phase, "Curriculum phase")->required()
        ->check(CLI::IsMember({1, 2}));
    train->add_option("--config", config_path, "Key-value training config");
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_option("--resume", resume, "Stage-boundary checkpoint to resume");
    train->add_option("--from-phase1", from_phase1, "Phase-1 checkpoint to continue from");
    train->add_option("--seed", seed, "Master seed");

    auto* roll = app.add_subcommand("rollout", "Deterministic single-scenario rollout");
    std::string r_ckpt, r_scenario, r_trace;
    roll->add_option("--checkpoint", r_ckpt, "Agent checkpoint")->required();
    roll->add_option("--scenario", r_scenario, "Scenario file")->required();
    roll->add_option("--trace", r_trace, "Trace CSV output path");

    auto* mc = app.add_subcommand("montecarlo", "Seeded Monte Carlo campaign");
    std::string m_ckpt, m_report;
    int m_n = 10000;
    std::uint64_t m_seed = 0;
    int m_workers = 0;
    mc->add_option("--checkpoint", m_ckpt, "Agent checkpoint")->required();
    mc->add_option("--n", m_n, "Number of scenarios")->required();
    mc->add_option("--seed", m_seed, "Master seed");
    mc->add_option("--report", m_report, "Report JSON output path");
    mc->add_option("--workers", m_workers, "Worker threads (0: auto)");

    auto* ver = app.add_subcommand("verify", "Run the fast invariant suite");
    std::string inject;
    ver->add_option("--inject", inject, "Fault injection hook for self-tests");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << "\n";
        return 2;
    }

    try {
        if (train->parsed()) {
            return cmd_train(phase, config_path, out_dir, resume, from_phase1, seed,
                             command_line);
        }
        if (roll->parsed()) {
            return cmd_rollout(r_ckpt, r_scenario, r_trace);
        }
        if (mc->parsed()) {
            if (m_n < 1) throw UsageError("--n must be >= 1");
            return cmd_montecarlo(m_ckpt, m_n, m_seed, m_report, m_workers);
        }
        if (ver->parsed()) {
            return cmd_verify(inject);
        }
    } catch (const Error& e) {
        const char* kind = "numeric";
        switch (e.kind()) {
            case ErrorKind::usage: kind = "usage"; break;
            case ErrorKind::validation: kind = "validation"; break;
            case ErrorKind::io: kind = "io"; break;
            case ErrorKind::numeric: kind = "numeric"; break;
        }
        std::cerr << "error[" << kind << "]: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error[numeric]: " << e.what() << "\n";
        return 5;
    }
    return 0;
}
