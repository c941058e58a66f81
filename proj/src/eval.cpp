#include "keepout/eval.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "keepout/error.hpp"

namespace keepout {

Vec3 PolicyController::act(const Observation& obs) {
    const ObsVec v = obs.as_vector();
    const ActionSample s = agent_->act(v, /*deterministic=*/true, nullptr);
    return {s.action[0], s.action[1], s.action[2]};
}

Vec3 PdController::act(const Observation& obs) {
    const double sign = obs.q_e.q0 < 0.0 ? -1.0 : 1.0;
    const Vec3 tau = (-kp_ * sign * obs.q_e.qv - kd_ * obs.w)
                         .cwiseMax(-tau_max_)
                         .cwiseMin(tau_max_);
    return tau.cwiseQuotient(tau_max_);
}

const char* to_string(EpisodeClass c) {
    switch (c) {
        case EpisodeClass::settled: return "settled";
        case EpisodeClass::non_settled: return "non-settled";
        case EpisodeClass::violation: return "violation";
    }
    return "unknown";
}

EpisodeTrace rollout(Controller& controller, const ScenarioSpec& spec,
                     const EnvConfig& cfg) {
    Environment env(cfg);
    Observation obs = env.reset(spec);
    EpisodeTrace trace;
    const auto steps = static_cast<std::size_t>(cfg.episode_steps);
    trace.t.reserve(steps);
    trace.q_e.reserve(steps);
    trace.w.reserve(steps);
    trace.tau.reserve(steps);
    trace.theta_margin.reserve(steps);
    trace.phi.reserve(steps);
    trace.reward.reserve(steps);
    for (int k = 0; k < cfg.episode_steps; ++k) {
        const StepResult r = env.step(controller.act(obs));
        trace.t.push_back((k + 1) * cfg.dt);
        trace.q_e.push_back(r.obs.q_e);
        trace.w.push_back(r.obs.w);
        trace.tau.push_back(r.info.torque_applied);
        trace.theta_margin.push_back(r.info.theta_margin);
        trace.phi.push_back(r.info.phi);
        trace.reward.push_back(r.reward);
        obs = r.obs;
    }
    return trace;
}

std::optional<double> settling_time(const EpisodeTrace& trace, double threshold) {
    if (trace.size() == 0) throw ValidationError("settling_time on empty trace");
    std::ptrdiff_t last_out = -1;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        if (trace.phi[k] > threshold) last_out = static_cast<std::ptrdiff_t>(k);
    }
    if (last_out == static_cast<std::ptrdiff_t>(trace.size()) - 1) {
        return std::nullopt; // never settles
    }
    if (last_out < 0) {
        return 0.0; // inside the band from the start
    }
    return trace.t[static_cast<std::size_t>(last_out) + 1];
}

double control_effort(const EpisodeTrace& trace, double dt) {
    double e = 0.0;
    for (const Vec3& tau : trace.tau) {
        e += tau.squaredNorm() * dt;
    }
    return e;
}

EpisodeClass classify(const EpisodeTrace& trace, const std::optional<double>& settling) {
    for (double m : trace.theta_margin) {
        if (violates(m)) return EpisodeClass::violation;
    }
    return settling.has_value() ? EpisodeClass::settled : EpisodeClass::non_settled;
}

EpisodeMetrics episode_metrics(const EpisodeTrace& trace, const EnvConfig& cfg) {
    EpisodeMetrics m;
    for (double r : trace.reward) m.total_reward += r;
    m.settling_time = settling_time(trace, cfg.accuracy_threshold);
    m.control_effort = control_effort(trace, cfg.dt);
    m.final_accuracy_phi_deg = trace.phi.back() * 180.0 / M_PI;
    m.classification = classify(trace, m.settling_time);
    m.violated = m.classification == EpisodeClass::violation;
    return m;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

} // namespace

void write_trace_csv(const EpisodeTrace& trace, const std::string& path) {
    std::string body =
        "t,qe0,qe1,qe2,qe3,w1,w2,w3,tau1,tau2,tau3,theta_margin_rad,phi_rad,reward\n";
    for (std::size_t k = 0; k < trace.size(); ++k) {
        append_double(body, trace.t[k]);
        const Quaternion& q = trace.q_e[k];
        for (double v : {q.q0, q.qv.x(), q.qv.y(), q.qv.z(), trace.w[k].x(),
                         trace.w[k].y(), trace.w[k].z(), trace.tau[k].x(),
                         trace.tau[k].y(), trace.tau[k].z(), trace.theta_margin[k],
                         trace.phi[k], trace.reward[k]}) {
            body.push_back(',');
            append_double(body, v);
        }
        body.push_back('\n');
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << body;
    if (!out) throw IoError("write failed: " + path);
}

namespace {

MetricSummary summarize(const std::vector<double>& xs) {
    MetricSummary s;
    s.count = static_cast<long>(xs.size());
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
    return s;
}

nlohmann::ordered_json summary_json(const MetricSummary& s) {
    nlohmann::ordered_json j;
    j["mean"] = s.mean;
    j["std"] = s.stddev;
    j["count"] = s.count;
    return j;
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("KEEPOUT_RL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

} // namespace

MonteCarloConfig default_campaign_config() {
    MonteCarloConfig cfg;
    cfg.dist.theta_min_deg = 80.0;
    cfg.dist.theta_max_deg = 180.0;
    cfg.dist.rate_limit_deg_s = 0.001;
    cfg.dist.with_zone = true;
    cfg.dist.theta_f_min_deg = 15.0;
    cfg.dist.theta_f_max_deg = 30.0;
    cfg.env.fzone_enabled = true;
    return cfg;
}

MonteCarloReport monte_carlo(const ControllerFactory& make_controller,
                             const MonteCarloConfig& cfg) {
    if (cfg.n < 1) throw ValidationError("monte carlo requires n >= 1");
    cfg.env.validate();

    MonteCarloReport report;
    report.n = cfg.n;
    report.seed = cfg.seed;
    report.episodes.resize(cfg.n);

    const int workers = std::min(resolve_workers(cfg.workers), cfg.n);
    std::atomic<int> next{0};
    std::atomic<bool> any_failed{false};

    const auto run_worker = [&]() {
        std::unique_ptr<Controller> controller = make_controller();
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= cfg.n) break;
            MonteCarloEpisode& ep = report.episodes[static_cast<std::size_t>(i)];
            ep.seed = split_seed(cfg.seed, static_cast<std::uint64_t>(i));
            try {
                Rng rng(ep.seed);
                ScenarioSpec spec = sample_scenario(cfg.dist, rng);
                spec.seed = ep.seed;
                const EpisodeTrace trace = rollout(*controller, spec, cfg.env);
                ep.metrics = episode_metrics(trace, cfg.env);
                ep.ok = true;
            } catch (const std::exception&) {
                ep.ok = false;
                any_failed.store(true);
            }
        }
    };

    if (workers <= 1) {
        run_worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int t = 0; t < workers; ++t) pool.emplace_back(run_worker);
        for (auto& th : pool) th.join();
    }
    report.incomplete = any_failed.load();

    std::vector<double> rewards, settle, effort, accuracy;
    long n_settled = 0, n_non_settled = 0, n_violation = 0, n_ok = 0;
    for (const MonteCarloEpisode& ep : report.episodes) {
        if (!ep.ok) continue;
        ++n_ok;
        rewards.push_back(ep.metrics.total_reward);
        switch (ep.metrics.classification) {
            case EpisodeClass::settled: ++n_settled; break;
            case EpisodeClass::non_settled: ++n_non_settled; break;
            case EpisodeClass::violation: ++n_violation; break;
        }
        // Table-4 exclusion: episodes that never settle do not contribute to
        // the starred statistics.
        if (ep.metrics.settling_time.has_value()) {
            settle.push_back(*ep.metrics.settling_time);
            effort.push_back(ep.metrics.control_effort);
            accuracy.push_back(ep.metrics.final_accuracy_phi_deg);
        }
    }
    report.reward = summarize(rewards);
    report.settling_s = summarize(settle);
    report.effort = summarize(effort);
    report.accuracy_deg = summarize(accuracy);
    if (n_ok > 0) {
        report.rate_settled = static_cast<double>(n_settled) / n_ok;
        report.rate_non_settled = static_cast<double>(n_non_settled) / n_ok;
        report.rate_violation = static_cast<double>(n_violation) / n_ok;
    }
    return report;
}

nlohmann::ordered_json MonteCarloReport::to_json() const {
    nlohmann::ordered_json j;
    j["n"] = n;
    j["seed"] = seed;
    j["incomplete"] = incomplete;
    j["reward"] = summary_json(reward);
    j["settling_time_s"] = summary_json(settling_s);
    j["control_effort"] = summary_json(effort);
    j["control_accuracy_deg"] = summary_json(accuracy_deg);
    j["rate_settled"] = rate_settled;
    j["rate_non_settled"] = rate_non_settled;
    j["rate_violation"] = rate_violation;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        const MonteCarloEpisode& ep = episodes[i];
        nlohmann::ordered_json row;
        row["index"] = i;
        row["seed"] = ep.seed;
        row["ok"] = ep.ok;
        if (ep.ok) {
            row["class"] = to_string(ep.metrics.classification);
            row["total_reward"] = ep.metrics.total_reward;
            if (ep.metrics.settling_time.has_value()) {
                row["settling_time_s"] = *ep.metrics.settling_time;
                row["plot_settling_time_s"] = *ep.metrics.settling_time;
            } else {
                row["settling_time_s"] = nullptr;
                row["plot_settling_time_s"] = 200.0; // plotting substitution
            }
            row["control_effort"] = ep.metrics.control_effort;
            row["final_accuracy_phi_deg"] = ep.metrics.final_accuracy_phi_deg;
            row["violated"] = ep.metrics.violated;
        }
        rows.push_back(std::move(row));
    }
    j["episodes"] = std::move(rows);
    return j;
}

std::string MonteCarloReport::summary_block() const {
    char buf[1024];
    std::snprintf(buf, sizeof(buf),
                  "Monte Carlo simulation (%d tests)\n"
                  "  Mean reward              %10.2f +/- %.2f\n"
                  "  Mean settling time* (s)  %10.2f +/- %.2f\n"
                  "  Mean control effort*     %10.2f +/- %.2f\n"
                  "  Mean control accuracy*   %10.4f +/- %.4f deg\n"
                  "  Rate of non-settled      %9.2f%%\n"
                  "  Rate of violation        %9.2f%%\n"
                  "  (* non-settled cases excluded)\n",
                  n, reward.mean, reward.stddev, settling_s.mean, settling_s.stddev,
                  effort.mean, effort.stddev, accuracy_deg.mean, accuracy_deg.stddev,
                  100.0 * rate_non_settled, 100.0 * rate_violation);
    return buf;
}

} // namespace keepout
