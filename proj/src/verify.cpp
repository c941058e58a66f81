#include "keepout/verify.hpp"

#include <sstream>

#include "keepout/dynamics.hpp"
#include "keepout/env.hpp"
#include "keepout/fdcheck.hpp"
#include "keepout/sac.hpp"

namespace keepout {

namespace {

// Eqs. restated branch by branch, deliberately kept apart from the
// environment's compute_reward.
double reward_oracle(double phi, const Vec3& tau, const Vec3& tau_prev, double margin,
                     double q_e0, double q_e0_prev, bool fzone_enabled, double beta,
                     double alpha_pen, double tau_max_norm, double accuracy_rad) {
    double p_fzone = 0.0;
    if (fzone_enabled) {
        if (margin <= 0.0) {
            p_fzone = beta;
        } else {
            p_fzone = beta * std::exp(-alpha_pen * margin);
        }
    }
    const double attitude = std::exp(-phi / (0.14 * 2.0 * M_PI));
    const double effort =
        0.05 *
        std::sqrt(tau[0] * tau[0] + tau[1] * tau[1] + tau[2] * tau[2]) /
        tau_max_norm;
    const double d0 = tau[0] - tau_prev[0];
    const double d1 = tau[1] - tau_prev[1];
    const double d2 = tau[2] - tau_prev[2];
    const double smoothness = 0.005 * std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
    double r1;
    if (q_e0 > q_e0_prev) {
        r1 = attitude - effort - smoothness - p_fzone;
    } else {
        r1 = attitude - effort - smoothness - p_fzone - 1.0;
    }
    if (phi <= accuracy_rad) {
        return r1 + 9.0;
    }
    return r1;
}

double simpson(const std::function<double(double)>& f, double a, double b, double fa,
               double fm, double fb, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return simpson(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1) +
           simpson(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    return simpson(f, a, b, fa, fm, fb, tol, 40);
}

} // namespace

double tanh_gauss_density_integral(double mean, double log_std) {
    // Substituting a = tanh(u): da = (1 - tanh^2 u) du.
    const auto integrand = [mean, log_std](double u) {
        const double a = std::tanh(u);
        return std::exp(tanh_gauss_log_prob_1d(u, mean, log_std)) * (1.0 - a * a);
    };
    const double sigma = std::exp(log_std);
    const double lo = mean - 12.0 * sigma - 2.0;
    const double hi = mean + 12.0 * sigma + 2.0;
    return adaptive_simpson(integrand, lo, hi, 1e-9);
}

ConservationResult torque_free_conservation(double omega_norm, int steps, double dt) {
    const InertiaMatrix inertia = InertiaMatrix::default_spacecraft();
    Quaternion q = Quaternion(0.9, 0.3, -0.2, 0.1).normalized();
    Vec3 w = Vec3(0.4, -0.7, 0.59).normalized() * omega_norm;
    const Vec3 L0 = angular_momentum_inertial(q, w, inertia);
    const double E0 = rotational_energy(w, inertia);

    ConservationResult res;
    for (int k = 0; k < steps; ++k) {
        const Rk4Result r = rk4_step(q, w, Vec3::Zero(), inertia, dt);
        q = r.q;
        w = r.w;
        const Vec3 L = angular_momentum_inertial(q, w, inertia);
        res.momentum_drift = std::max(res.momentum_drift, (L - L0).norm() / L0.norm());
        res.energy_drift =
            std::max(res.energy_drift, std::abs(rotational_energy(w, inertia) - E0) / E0);
        res.max_quat_norm_err = std::max(res.max_quat_norm_err, std::abs(q.norm() - 1.0));
    }
    return res;
}

GradCheckResult sac_gradient_check(std::uint64_t seed) {
    Rng rng(seed);
    SacHyper hyper;
    hyper.hidden = {8, 8};

    const int obs_dim = 16;
    const int act_dim = 3;
    const int batch = 8;
    DenseNet policy = DenseNet::init({obs_dim, 8, 8, 2 * act_dim}, rng);
    DenseNet q1 = DenseNet::init({obs_dim + act_dim, 8, 8, 1}, rng);
    DenseNet q2 = DenseNet::init({obs_dim + act_dim, 8, 8, 1}, rng);

    Mat S(obs_dim, batch), A(act_dim, batch), eps(act_dim, batch);
    Vec y(batch);
    for (int b = 0; b < batch; ++b) {
        for (int i = 0; i < obs_dim; ++i) S(i, b) = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < act_dim; ++i) A(i, b) = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < act_dim; ++i) eps(i, b) = rng.normal();
        y[b] = rng.uniform(-1.0, 1.0);
    }
    const double alpha = rng.uniform(0.05, 1.0);
    const double h = 1e-6;

    GradCheckResult res;

    // Kink guard: central differences are not a valid oracle when a ReLU
    // pre-activation, the twin-Q gap, or the log-std clamp sits within the
    // probe radius.
    const auto kink_distance = [&](const DenseNet& net, const Mat& x) {
        ForwardCache cache;
        forward(net, x, &cache);
        double d = 1e300;
        for (std::size_t l = 0; l + 1 < cache.pre.size(); ++l) {
            d = std::min(d, cache.pre[l].cwiseAbs().minCoeff());
        }
        return d;
    };

    Mat x(obs_dim + act_dim, batch);
    x.topRows(obs_dim) = S;
    x.bottomRows(act_dim) = A;

    // Critic loss (Q1 stands for both twins; same code path).
    {
        ForwardCache cache;
        Gradients grads;
        critic_loss_grad(q1, x, y, cache, grads);
        const Vec analytic = grads.to_flat();
        const Vec theta0 = q1.to_flat();
        DenseNet probe = q1;
        const auto f = [&](const Vec& th) {
            probe.from_flat(th);
            return 0.5 * critic_loss_value(probe, x, y);
        };
        const Vec numeric = central_difference_grad(f, theta0, h);
        res.critic_err = gradient_rel_error(analytic, numeric);
        if (kink_distance(q1, x) < 1e-4) res.fd_valid = false;
    }

    // Actor loss.
    {
        PolicySample ps;
        sample_policy_with_eps(policy, hyper, S, eps, ps);
        ActorWorkspace ws;
        Gradients gpol;
        actor_loss_grad(policy, q1, q2, hyper, S, ps, alpha, ws, gpol);
        const Vec analytic = gpol.to_flat();
        const Vec theta0 = policy.to_flat();
        DenseNet probe = policy;
        const auto f = [&](const Vec& th) {
            probe.from_flat(th);
            return actor_loss_value(probe, q1, q2, hyper, S, eps, alpha);
        };
        const Vec numeric = central_difference_grad(f, theta0, h);
        res.actor_err = gradient_rel_error(analytic, numeric);

        Mat xpi(obs_dim + act_dim, batch);
        xpi.topRows(obs_dim) = S;
        xpi.bottomRows(act_dim) = ps.actions;
        const Mat v1 = forward(q1, xpi);
        const Mat v2 = forward(q2, xpi);
        if ((v1 - v2).cwiseAbs().minCoeff() < 1e-4) res.fd_valid = false;
        if (kink_distance(policy, S) < 1e-4 || kink_distance(q1, xpi) < 1e-4 ||
            kink_distance(q2, xpi) < 1e-4) {
            res.fd_valid = false;
        }
        const double clamp_gap =
            std::min((ps.log_std_raw.array() - hyper.log_std_min).abs().minCoeff(),
                     (ps.log_std_raw.array() - hyper.log_std_max).abs().minCoeff());
        if (clamp_gap < 1e-4) res.fd_valid = false;
    }

    // Temperature loss (1-D).
    {
        PolicySample ps;
        sample_policy_with_eps(policy, hyper, S, eps, ps);
        const double mean_lp = ps.log_prob.mean();
        const double log_alpha = rng.uniform(-1.0, 1.0);
        const double analytic = alpha_loss_grad(mean_lp, hyper.target_entropy);
        const double fp = alpha_loss_value(log_alpha + h, mean_lp, hyper.target_entropy);
        const double fm = alpha_loss_value(log_alpha - h, mean_lp, hyper.target_entropy);
        const double numeric = (fp - fm) / (2.0 * h);
        res.alpha_err = std::abs(analytic - numeric) /
                        std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    }

    return res;
}

std::vector<PropertyResult> run_verification(const VerifyOptions& opts) {
    std::vector<PropertyResult> results;

    {
        PropertyResult p;
        p.name = "torque-free conservation (momentum, energy, quat norm)";
        const ConservationResult c = torque_free_conservation(0.1, 1000, 0.1);
        std::ostringstream os;
        os << "momentum drift " << c.momentum_drift << ", energy drift " << c.energy_drift
           << ", quat norm err " << c.max_quat_norm_err;
        p.detail = os.str();
        p.pass = c.momentum_drift <= 1e-6 && c.energy_drift <= 1e-6 &&
                 c.max_quat_norm_err <= 1e-9;
        results.push_back(p);
    }

    {
        PropertyResult p;
        p.name = "reward matches independent oracle (1e4 transitions)";
        EnvConfig cfg;
        Rng rng(20250901);
        double max_err = 0.0;
        const double inject =
            opts.inject_fault == "reward-constant" ? 1e-6 : 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double phi = rng.uniform(0.0, M_PI);
            Vec3 tau, tau_prev;
            for (int k = 0; k < 3; ++k) {
                tau[k] = rng.uniform(-2.0, 2.0);
                tau_prev[k] = rng.uniform(-2.0, 2.0);
            }
            const double margin = rng.uniform(-0.3, M_PI);
            const double qe0 = rng.uniform(-1.0, 1.0);
            const double qe0_prev = rng.uniform(-1.0, 1.0);
            cfg.fzone_enabled = rng.uniform() < 0.5;
            const double got =
                compute_reward(phi, tau, tau_prev, margin, qe0, qe0_prev, cfg) + inject;
            const double want = reward_oracle(phi, tau, tau_prev, margin, qe0, qe0_prev,
                                              cfg.fzone_enabled, cfg.beta, cfg.alpha,
                                              cfg.tau_max.norm(), cfg.accuracy_threshold);
            max_err = std::max(max_err, std::abs(got - want));
        }
        // Spot values straight from the equations.
        cfg.fzone_enabled = false;
        const bool spot =
            std::abs(fzone_penalty(-0.1, cfg.beta, cfg.alpha) - 10.0) < 1e-15 &&
            std::abs(fzone_penalty(0.0, cfg.beta, cfg.alpha) - 10.0) < 1e-15 &&
            std::abs(compute_reward(0.14 * 2.0 * M_PI, Vec3::Zero(), Vec3::Zero(), M_PI,
                                    0.9, 0.5, cfg) -
                     std::exp(-1.0)) < 1e-12;
        std::ostringstream os;
        os << "max abs diff " << max_err << (spot ? ", spot values ok" : ", spot values BAD");
        p.detail = os.str();
        p.pass = max_err <= 1e-12 && spot;
        results.push_back(p);
    }

    {
        PropertyResult p;
        p.name = "SAC loss gradients vs central differences";
        double worst = 0.0;
        int accepted = 0;
        std::uint64_t seed = 7001;
        while (accepted < opts.grad_configs) {
            const GradCheckResult g = sac_gradient_check(seed++);
            if (!g.fd_valid) continue;
            worst = std::max(worst, g.max_err());
            ++accepted;
        }
        std::ostringstream os;
        os << "worst rel err " << worst << " over " << accepted << " configs";
        p.detail = os.str();
        p.pass = worst <= 1e-4;
        results.push_back(p);
    }

    {
        PropertyResult p;
        p.name = "tanh-Gaussian log-prob normalization";
        Rng rng(424242);
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const double mean = rng.uniform(-1.5, 1.5);
            const double log_std = rng.uniform(-3.0, 0.0);
            const double integral = tanh_gauss_density_integral(mean, log_std);
            worst = std::max(worst, std::abs(integral - 1.0));
        }
        std::ostringstream os;
        os << "worst |integral - 1| = " << worst;
        p.detail = os.str();
        p.pass = worst <= 1e-4;
        results.push_back(p);
    }

    return results;
}

} // namespace keepout
