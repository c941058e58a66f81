#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "keepout/eval.hpp"

using namespace keepout;

namespace {

constexpr double kDeg = M_PI / 180.0;

EpisodeTrace constant_trace(int steps, double dt, double phi, const Vec3& tau,
                            double margin) {
    EpisodeTrace t;
    for (int k = 0; k < steps; ++k) {
        t.t.push_back((k + 1) * dt);
        t.q_e.push_back(Quaternion::identity());
        t.w.push_back(Vec3::Zero());
        t.tau.push_back(tau);
        t.theta_margin.push_back(margin);
        t.phi.push_back(phi);
        t.reward.push_back(0.0);
    }
    return t;
}

} // namespace

TEST_CASE("settling time on constructed traces") {
    const double thr = 0.25 * kDeg;
    EnvConfig cfg;

    // inside the band the whole time
    EpisodeTrace zero = constant_trace(1000, 0.1, 0.0, Vec3::Zero(), 1.0);
    CHECK(settling_time(zero, thr) == 0.0);

    // crosses below at t = 30 s and stays
    EpisodeTrace cross = zero;
    for (std::size_t k = 0; k < cross.size(); ++k) {
        cross.phi[k] = cross.t[k] < 30.0 ? 1.0 : 0.0;
    }
    CHECK(settling_time(cross, thr) == doctest::Approx(30.0).epsilon(1e-12));

    // dips below at 20 s, re-exceeds during [25, 40), settles from 40 s
    EpisodeTrace dip = zero;
    for (std::size_t k = 0; k < dip.size(); ++k) {
        const double t = dip.t[k];
        dip.phi[k] = (t < 20.0 || (t >= 25.0 && t < 40.0)) ? 1.0 : 0.0;
    }
    CHECK(settling_time(dip, thr) == doctest::Approx(40.0).epsilon(1e-12));

    // never settles
    EpisodeTrace never = constant_trace(1000, 0.1, 1.0, Vec3::Zero(), 1.0);
    CHECK_FALSE(settling_time(never, thr).has_value());
}

TEST_CASE("control effort on constructed traces") {
    EpisodeTrace zero = constant_trace(1000, 0.1, 0.0, Vec3::Zero(), 1.0);
    CHECK(control_effort(zero, 0.1) == 0.0);

    EpisodeTrace full = constant_trace(1000, 0.1, 0.0, Vec3(2, 2, 2), 1.0);
    CHECK(control_effort(full, 0.1) == doctest::Approx(1200.0).epsilon(1e-12));

    // sinusoidal torque sampled at interval midpoints vs the exact integral
    const double w = 0.7, dt = 0.1, T = 100.0;
    EpisodeTrace sine = constant_trace(1000, dt, 0.0, Vec3::Zero(), 1.0);
    for (std::size_t k = 0; k < sine.size(); ++k) {
        const double tm = (static_cast<double>(k) + 0.5) * dt;
        sine.tau[k] = Vec3(std::sin(w * tm), 0.0, 0.0);
    }
    const double analytic = T / 2.0 - std::sin(2.0 * w * T) / (4.0 * w);
    CHECK(std::abs(control_effort(sine, dt) - analytic) < 5e-3); // O(dt^2)
}

TEST_CASE("classification precedence") {
    const double thr = 0.25 * kDeg;
    EpisodeTrace settled = constant_trace(100, 0.1, 0.0, Vec3::Zero(), 0.01);
    CHECK(classify(settled, settling_time(settled, thr)) == EpisodeClass::settled);

    EpisodeTrace violated = settled;
    violated.theta_margin[50] = -0.01; // single dip into the zone
    CHECK(classify(violated, settling_time(violated, thr)) == EpisodeClass::violation);

    EpisodeTrace boundary = settled;
    boundary.theta_margin[50] = 0.0; // boundary contact counts
    CHECK(classify(boundary, settling_time(boundary, thr)) == EpisodeClass::violation);

    EpisodeTrace wandering = constant_trace(100, 0.1, 1.0, Vec3::Zero(), 0.5);
    CHECK(classify(wandering, settling_time(wandering, thr)) == EpisodeClass::non_settled);
}

TEST_CASE("rollout of a zero-torque agent resting on target") {
    EnvConfig cfg;
    ScenarioSpec spec; // at target, zero rate
    FnController zero([](const Observation&) { return Vec3::Zero(); });
    const EpisodeTrace trace = rollout(zero, spec, cfg);
    REQUIRE(trace.size() == 1000);
    for (std::size_t k = 0; k < trace.size(); ++k) {
        CHECK(trace.phi[k] == 0.0);
        CHECK(trace.tau[k].norm() == 0.0);
    }
    const EpisodeMetrics m = episode_metrics(trace, cfg);
    CHECK(m.settling_time == 0.0);
    CHECK(m.control_effort == 0.0);
    CHECK(m.classification == EpisodeClass::settled);
    CHECK(m.final_accuracy_phi_deg == 0.0);
}

TEST_CASE("PD baseline on the published test scenario clips the keep-out cone") {
    EnvConfig cfg;
    cfg.fzone_enabled = true;
    ScenarioSpec spec;
    spec.q_init = Quaternion(0.6428, Vec3(0.3138, -0.5892, 0.3757)).normalized();
    spec.w_init = Vec3(-5.7e-4, -1.1e-4, -9.9e-4) * kDeg;
    spec.zone = make_keep_out_zone(Vec3(0.703, 0.263, 0.661).normalized(), 15.20 * kDeg);

    PdController pd = PdController::baseline();
    const EpisodeTrace trace = rollout(pd, spec, cfg);
    double min_margin = M_PI;
    for (double m : trace.theta_margin) min_margin = std::min(min_margin, m);
    // A shortest-path controller drives the boresight through the mid-path zone.
    CHECK(min_margin < 0.0);
    CHECK(classify(trace, settling_time(trace, cfg.accuracy_threshold)) ==
          EpisodeClass::violation);
    // ... while still reorienting the spacecraft
    CHECK(trace.phi.back() < 0.25 * kDeg);
}

TEST_CASE("trace CSV header and row count") {
    EnvConfig cfg;
    cfg.episode_steps = 10;
    ScenarioSpec spec;
    FnController zero([](const Observation&) { return Vec3::Zero(); });
    const EpisodeTrace trace = rollout(zero, spec, cfg);
    const std::string path = "eval_test_trace.csv";
    write_trace_csv(trace, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "t,qe0,qe1,qe2,qe3,w1,w2,w3,tau1,tau2,tau3,theta_margin_rad,phi_rad,reward");
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 10);
    std::remove(path.c_str());
}

TEST_CASE("monte carlo with a single scenario reduces to that episode") {
    MonteCarloConfig cfg;
    cfg.n = 1;
    cfg.seed = 5;
    cfg.dist.theta_min_deg = 80.0;
    cfg.dist.theta_max_deg = 180.0;
    cfg.dist.with_zone = false;
    const MonteCarloReport report = monte_carlo(
        []() { return std::make_unique<PdController>(PdController::baseline()); }, cfg);
    REQUIRE(report.episodes.size() == 1);
    REQUIRE(report.episodes[0].ok);
    const EpisodeMetrics& m = report.episodes[0].metrics;
    CHECK(report.reward.mean == m.total_reward);
    CHECK(report.reward.stddev == 0.0);
    if (m.settling_time.has_value()) {
        CHECK(report.settling_s.mean == *m.settling_time);
        CHECK(report.settling_s.stddev == 0.0);
    }
}

TEST_CASE("monte carlo determinism across worker counts") {
    MonteCarloConfig cfg;
    cfg.n = 32;
    cfg.seed = 99;
    cfg.dist.theta_min_deg = 80.0;
    cfg.dist.theta_max_deg = 180.0;
    cfg.dist.with_zone = true;
    cfg.env.fzone_enabled = true;
    const auto factory = []() {
        return std::make_unique<PdController>(PdController::baseline());
    };
    cfg.workers = 1;
    const std::string a = monte_carlo(factory, cfg).to_json().dump();
    cfg.workers = 4;
    const std::string b = monte_carlo(factory, cfg).to_json().dump();
    cfg.workers = 7;
    const std::string c = monte_carlo(factory, cfg).to_json().dump();
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("monte carlo aggregation matches a streaming recomputation") {
    MonteCarloConfig cfg;
    cfg.n = 64;
    cfg.seed = 321;
    cfg.dist.theta_min_deg = 80.0;
    cfg.dist.theta_max_deg = 180.0;
    cfg.dist.with_zone = true;
    cfg.env.fzone_enabled = true;
    const MonteCarloReport report = monte_carlo(
        []() { return std::make_unique<PdController>(PdController::baseline()); }, cfg);

    // Welford pass over the same rows.
    const auto welford = [](const std::vector<double>& xs) {
        double mean = 0.0, m2 = 0.0;
        long n = 0;
        for (double x : xs) {
            ++n;
            const double d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        return std::make_pair(mean, n ? std::sqrt(m2 / n) : 0.0);
    };
    std::vector<double> rewards, settle;
    long n_settled = 0, n_viol = 0, n_non = 0;
    for (const MonteCarloEpisode& ep : report.episodes) {
        REQUIRE(ep.ok);
        rewards.push_back(ep.metrics.total_reward);
        if (ep.metrics.settling_time) settle.push_back(*ep.metrics.settling_time);
        switch (ep.metrics.classification) {
            case EpisodeClass::settled: ++n_settled; break;
            case EpisodeClass::violation: ++n_viol; break;
            case EpisodeClass::non_settled: ++n_non; break;
        }
    }
    const auto [rm, rs] = welford(rewards);
    CHECK(std::abs(report.reward.mean - rm) < 1e-9);
    CHECK(std::abs(report.reward.stddev - rs) < 1e-9);
    const auto [sm, ss] = welford(settle);
    CHECK(std::abs(report.settling_s.mean - sm) < 1e-9);
    CHECK(std::abs(report.settling_s.stddev - ss) < 1e-9);

    // classes are exhaustive and rates sum to one
    CHECK(n_settled + n_viol + n_non == cfg.n);
    CHECK(report.rate_settled + report.rate_violation + report.rate_non_settled ==
          doctest::Approx(1.0).epsilon(1e-12));

    // exclusion rule: starred statistics only count trace-settled episodes
    CHECK(report.settling_s.count == static_cast<long>(settle.size()));
    CHECK(report.effort.count == static_cast<long>(settle.size()));
    CHECK(report.reward.count == cfg.n);
}

TEST_CASE("report JSON carries the plotting substitution separately") {
    MonteCarloConfig cfg;
    cfg.n = 8;
    cfg.seed = 17;
    cfg.dist.theta_min_deg = 170.0;
    cfg.dist.theta_max_deg = 180.0;
    cfg.dist.with_zone = false;
    // zero torque never settles from 170+ degrees
    const MonteCarloReport report = monte_carlo(
        []() {
            return std::make_unique<FnController>(
                [](const Observation&) { return Vec3::Zero(); });
        },
        cfg);
    const auto j = report.to_json();
    for (const auto& row : j.at("episodes")) {
        CHECK(row.at("class") == "non-settled");
        CHECK(row.at("settling_time_s").is_null());
        CHECK(row.at("plot_settling_time_s").get<double>() == 200.0);
    }
    CHECK(report.rate_non_settled == 1.0);
}
