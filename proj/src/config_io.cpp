#include "keepout/config_io.hpp"

#include <algorithm>
#include <set>

#include "keepout/error.hpp"

namespace keepout {

namespace {
constexpr double kDeg = M_PI / 180.0;
} // namespace

ScenarioSpec load_scenario(const std::string& path) {
    const KvDoc doc = KvDoc::parse_file(path);

    static const std::set<std::string> known = {
        "q_d", "q_init", "w_init_deg_s", "n_F", "theta_F_deg", "seed"};
    for (const std::string& k : doc.keys()) {
        if (!known.count(k)) {
            throw ValidationError("scenario: unknown key '" + k + "'");
        }
    }

    // File values are often rounded to a few decimals; accept near-unit
    // inputs and normalize exactly at this boundary.
    const auto unit_quat = [](const std::vector<double>& q, const char* key) {
        const Quaternion raw(q[0], q[1], q[2], q[3]);
        const double err = std::abs(raw.norm() - 1.0);
        if (!raw.is_finite() || err > 1e-3) {
            throw ValidationError(std::string("key '") + key +
                                  "': quaternion is not unit norm");
        }
        return err > 1e-9 ? raw.normalized() : raw;
    };

    ScenarioSpec spec;
    spec.q_d = unit_quat(doc.get_doubles("q_d", 4), "q_d");
    spec.q_init = unit_quat(doc.get_doubles("q_init", 4), "q_init");
    const auto w = doc.get_doubles("w_init_deg_s", 3);
    spec.w_init = Vec3(w[0], w[1], w[2]) * kDeg;
    if (doc.has("n_F") || doc.has("theta_F_deg")) {
        const auto n = doc.get_doubles("n_F", 3);
        const Vec3 raw(n[0], n[1], n[2]);
        const double err = std::abs(raw.norm() - 1.0);
        if (!raw.allFinite() || err > 1e-3) {
            throw ValidationError("key 'n_F': avoid direction is not a unit vector");
        }
        spec.zone = make_keep_out_zone(err > 1e-9 ? Vec3(raw.normalized()) : raw,
                                       doc.get_double("theta_F_deg") * kDeg);
    }
    if (doc.has("seed")) {
        spec.seed = static_cast<std::uint64_t>(doc.get_long("seed"));
    }
    return spec;
}

void save_scenario(const ScenarioSpec& spec, const std::string& path) {
    KvWriter w;
    w.comment("reorientation scenario");
    w.set("q_d", std::vector<double>{spec.q_d.q0, spec.q_d.qv.x(), spec.q_d.qv.y(), spec.q_d.qv.z()});
    w.set("q_init", std::vector<double>{spec.q_init.q0, spec.q_init.qv.x(), spec.q_init.qv.y(),
                     spec.q_init.qv.z()});
    w.set("w_init_deg_s", std::vector<double>{spec.w_init.x() / kDeg, spec.w_init.y() / kDeg,
                           spec.w_init.z() / kDeg});
    if (spec.zone) {
        w.set("n_F", std::vector<double>{spec.zone->n_F.x(), spec.zone->n_F.y(), spec.zone->n_F.z()});
        w.set("theta_F_deg", spec.zone->theta_F / kDeg);
    }
    w.set("seed", static_cast<long>(spec.seed));
    w.write(path);
}

TrainSetup make_train_setup(int phase, const KvDoc* doc) {
    TrainSetup setup;
    setup.phase = phase == 2 ? PhaseConfig::phase2_defaults() : PhaseConfig::phase1_defaults();
    if (phase != 1 && phase != 2) throw UsageError("phase must be 1 or 2");
    if (!doc) {
        setup.phase.validate();
        setup.hyper.validate();
        setup.env.validate();
        return setup;
    }

    static const std::set<std::string> known = {
        "stage", "eval_every", "eval_episodes", "theta_f_min_deg", "theta_f_max_deg",
        "rate_limit_deg_s", "preload_buffer", "advance_success_rate",
        "batch_size", "buffer_capacity", "gamma", "lr", "soft_tau", "target_entropy",
        "log_std_min", "log_std_max", "updates_per_step", "warmup_steps", "hidden",
        "dt_s", "episode_steps", "tau_max_nm", "accuracy_deg", "beta", "alpha",
        "inertia_row1", "inertia_row2", "inertia_row3", "boresight"};
    for (const std::string& k : doc->keys()) {
        if (!known.count(k)) {
            throw ValidationError("train config: unknown key '" + k + "'");
        }
    }

    PhaseConfig& pc = setup.phase;
    const auto stage_rows = doc->get_rows("stage");
    if (!stage_rows.empty()) {
        pc.stages.clear();
        for (const auto& row : stage_rows) {
            if (row.size() != 3) {
                throw ValidationError(
                    "stage rows take 'theta_min_deg theta_max_deg step_budget'");
            }
            pc.stages.push_back({row[0], row[1], static_cast<long>(row[2])});
        }
    }
    pc.eval_every = doc->get_or<long>("eval_every", pc.eval_every);
    pc.eval_episodes = doc->get_or<int>("eval_episodes", pc.eval_episodes);
    pc.theta_f_min_deg = doc->get_or<double>("theta_f_min_deg", pc.theta_f_min_deg);
    pc.theta_f_max_deg = doc->get_or<double>("theta_f_max_deg", pc.theta_f_max_deg);
    pc.rate_limit_deg_s = doc->get_or<double>("rate_limit_deg_s", pc.rate_limit_deg_s);
    pc.preload_buffer = doc->get_or<bool>("preload_buffer", pc.preload_buffer);
    pc.advance_success_rate =
        doc->get_or<double>("advance_success_rate", pc.advance_success_rate);

    SacHyper& h = setup.hyper;
    h.batch_size = doc->get_or<int>("batch_size", h.batch_size);
    h.buffer_capacity = static_cast<std::size_t>(
        doc->get_or<long>("buffer_capacity", static_cast<long>(h.buffer_capacity)));
    h.gamma = doc->get_or<double>("gamma", h.gamma);
    h.lr = doc->get_or<double>("lr", h.lr);
    h.soft_tau = doc->get_or<double>("soft_tau", h.soft_tau);
    h.target_entropy = doc->get_or<double>("target_entropy", h.target_entropy);
    h.log_std_min = doc->get_or<double>("log_std_min", h.log_std_min);
    h.log_std_max = doc->get_or<double>("log_std_max", h.log_std_max);
    h.updates_per_step = doc->get_or<int>("updates_per_step", h.updates_per_step);
    h.warmup_steps = doc->get_or<long>("warmup_steps", h.warmup_steps);
    if (doc->has("hidden")) {
        h.hidden.clear();
        for (double d : doc->get_doubles("hidden")) {
            h.hidden.push_back(static_cast<int>(d));
        }
    }

    EnvConfig& e = setup.env;
    e.dt = doc->get_or<double>("dt_s", e.dt);
    e.episode_steps = doc->get_or<int>("episode_steps", e.episode_steps);
    if (doc->has("tau_max_nm")) {
        e.tau_max = Vec3::Constant(doc->get_double("tau_max_nm"));
    }
    if (doc->has("accuracy_deg")) {
        e.accuracy_threshold = doc->get_double("accuracy_deg") * kDeg;
    }
    e.beta = doc->get_or<double>("beta", e.beta);
    e.alpha = doc->get_or<double>("alpha", e.alpha);
    if (doc->has("inertia_row1") || doc->has("inertia_row2") || doc->has("inertia_row3")) {
        const auto r1 = doc->get_doubles("inertia_row1", 3);
        const auto r2 = doc->get_doubles("inertia_row2", 3);
        const auto r3 = doc->get_doubles("inertia_row3", 3);
        Mat3 m;
        m << r1[0], r1[1], r1[2], r2[0], r2[1], r2[2], r3[0], r3[1], r3[2];
        e.inertia = InertiaMatrix(m);
    }
    if (doc->has("boresight")) {
        const auto b = doc->get_doubles("boresight", 3);
        e.boresight = make_boresight(Vec3(b[0], b[1], b[2]));
    }

    setup.phase.validate();
    setup.hyper.validate();
    setup.env.validate();
    return setup;
}

} // namespace keepout
