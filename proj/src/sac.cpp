#include "keepout/sac.hpp"

#include "keepout/checkpoint.hpp"
#include "keepout/error.hpp"

namespace keepout {

namespace {
constexpr std::uint32_t kCheckpointFormatVersion = 1;
} // namespace

void SacHyper::validate() const {
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (buffer_capacity == 0) throw ValidationError("buffer_capacity must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("gamma must lie in [0, 1)");
    if (!(soft_tau > 0.0 && soft_tau <= 1.0)) throw ValidationError("soft_tau must lie in (0, 1]");
    if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(log_std_min < log_std_max)) throw ValidationError("log_std bounds are inverted");
    if (updates_per_step < 0) throw ValidationError("updates_per_step must be >= 0");
    if (warmup_steps < 0) throw ValidationError("warmup_steps must be >= 0");
    if (hidden.empty()) throw ValidationError("at least one hidden layer is required");
    for (int h : hidden) {
        if (h < 1) throw ValidationError("hidden widths must be positive");
    }
}

nlohmann::ordered_json SacHyper::to_json() const {
    nlohmann::ordered_json j;
    j["batch_size"] = batch_size;
    j["buffer_capacity"] = buffer_capacity;
    j["gamma"] = gamma;
    j["lr"] = lr;
    j["soft_tau"] = soft_tau;
    j["target_entropy"] = target_entropy;
    j["log_std_min"] = log_std_min;
    j["log_std_max"] = log_std_max;
    j["updates_per_step"] = updates_per_step;
    j["warmup_steps"] = warmup_steps;
    j["hidden"] = hidden;
    return j;
}

SacHyper SacHyper::from_json(const nlohmann::json& j) {
    SacHyper h;
    h.batch_size = j.at("batch_size").get<int>();
    h.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
    h.gamma = j.at("gamma").get<double>();
    h.lr = j.at("lr").get<double>();
    h.soft_tau = j.at("soft_tau").get<double>();
    h.target_entropy = j.at("target_entropy").get<double>();
    h.log_std_min = j.at("log_std_min").get<double>();
    h.log_std_max = j.at("log_std_max").get<double>();
    h.updates_per_step = j.at("updates_per_step").get<int>();
    h.warmup_steps = j.at("warmup_steps").get<long>();
    h.hidden = j.at("hidden").get<std::vector<int>>();
    h.validate();
    return h;
}

void sample_policy_with_eps(const DenseNet& policy, const SacHyper& hyper,
                            const Mat& obs, const Mat& eps, PolicySample& out) {
    const Mat heads = forward(policy, obs, &out.cache);
    const int act_dim = policy.output_dim() / 2;
    const auto B = obs.cols();
    out.mean = heads.topRows(act_dim);
    out.log_std_raw = heads.bottomRows(act_dim);
    out.log_std = out.log_std_raw.cwiseMax(hyper.log_std_min).cwiseMin(hyper.log_std_max);
    out.stddev = out.log_std.array().exp();
    out.eps = eps;
    out.actions = (out.mean + out.stddev.cwiseProduct(out.eps)).array().tanh();
    out.log_prob.resize(B);
    for (Eigen::Index b = 0; b < B; ++b) {
        double lp = 0.0;
        for (int i = 0; i < act_dim; ++i) {
            lp += gauss_log_pdf_eps(out.eps(i, b), out.log_std(i, b));
            lp -= squash_log_correction(out.actions(i, b));
        }
        out.log_prob[b] = lp;
    }
}

void sample_policy(const DenseNet& policy, const SacHyper& hyper, const Mat& obs,
                   Rng* rng, PolicySample& out) {
    const int act_dim = policy.output_dim() / 2;
    const auto B = obs.cols();
    if (!rng) {
        const Mat heads = forward(policy, obs, &out.cache);
        out.mean = heads.topRows(act_dim);
        out.log_std_raw = heads.bottomRows(act_dim);
        out.log_std =
            out.log_std_raw.cwiseMax(hyper.log_std_min).cwiseMin(hyper.log_std_max);
        out.stddev = out.log_std.array().exp();
        out.actions = out.mean.array().tanh();
        out.eps = Mat::Zero(act_dim, B);
        out.log_prob.resize(0);
        return;
    }
    Mat eps(act_dim, B);
    for (Eigen::Index b = 0; b < B; ++b) {
        for (int i = 0; i < act_dim; ++i) {
            eps(i, b) = rng->normal();
        }
    }
    sample_policy_with_eps(policy, hyper, obs, eps, out);
}

Vec critic_target_values(const DenseNet& q1_target, const DenseNet& q2_target,
                         const Mat& next_obs, const Mat& next_act,
                         const Vec& next_log_prob, const Vec& rew, const Vec& done,
                         double alpha, double gamma) {
    const auto B = next_obs.cols();
    Mat x(next_obs.rows() + next_act.rows(), B);
    x.topRows(next_obs.rows()) = next_obs;
    x.bottomRows(next_act.rows()) = next_act;
    const Mat q1v = forward(q1_target, x);
    const Mat q2v = forward(q2_target, x);
    Vec y(B);
    for (Eigen::Index b = 0; b < B; ++b) {
        const double qmin = std::min(q1v(0, b), q2v(0, b));
        y[b] = rew[b] + gamma * (1.0 - done[b]) * (qmin - alpha * next_log_prob[b]);
    }
    return y;
}

double critic_loss_value(const DenseNet& q, const Mat& x, const Vec& y) {
    const Mat qv = forward(q, x);
    return (qv.row(0).transpose() - y).squaredNorm() / static_cast<double>(y.size());
}

double critic_loss_grad(const DenseNet& q, const Mat& x, const Vec& y,
                        ForwardCache& cache, Gradients& grads) {
    const auto B = y.size();
    const Mat qv = forward(q, x, &cache);
    const Vec e = qv.row(0).transpose() - y;
    backward(q, cache, e.transpose() / static_cast<double>(B), &grads);
    return e.squaredNorm() / static_cast<double>(B);
}

namespace {

// Loss arithmetic shared by the value and grad variants.
double actor_loss_from_sample(const DenseNet& q1, const DenseNet& q2,
                              const Mat& obs, const PolicySample& ps, double alpha,
                              ActorWorkspace* ws, Mat* q1pi, Mat* q2pi) {
    const auto B = obs.cols();
    Mat x_local;
    Mat& x = ws ? ws->x : x_local;
    x.resize(obs.rows() + ps.actions.rows(), B);
    x.topRows(obs.rows()) = obs;
    x.bottomRows(ps.actions.rows()) = ps.actions;
    const Mat v1 = ws ? forward(q1, x, &ws->c1) : forward(q1, x);
    const Mat v2 = ws ? forward(q2, x, &ws->c2) : forward(q2, x);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < B; ++b) {
        loss += alpha * ps.log_prob[b] - std::min(v1(0, b), v2(0, b));
    }
    if (q1pi) *q1pi = v1;
    if (q2pi) *q2pi = v2;
    return loss / static_cast<double>(B);
}

} // namespace

double actor_loss_value(const DenseNet& policy, const DenseNet& q1, const DenseNet& q2,
                        const SacHyper& hyper, const Mat& obs, const Mat& eps,
                        double alpha) {
    PolicySample ps;
    sample_policy_with_eps(policy, hyper, obs, eps, ps);
    return actor_loss_from_sample(q1, q2, obs, ps, alpha, nullptr, nullptr, nullptr);
}

double actor_loss_grad(const DenseNet& policy, const DenseNet& q1, const DenseNet& q2,
                       const SacHyper& hyper, const Mat& obs, const PolicySample& ps,
                       double alpha, ActorWorkspace& ws, Gradients& gpol) {
    const auto B = obs.cols();
    const auto act_dim = ps.actions.rows();
    Mat q1pi, q2pi;
    const double loss = actor_loss_from_sample(q1, q2, obs, ps, alpha, &ws, &q1pi, &q2pi);

    // Per-sample min routes the Q gradient through one critic (ties -> Q1).
    ws.gq1 = Mat::Zero(1, B);
    ws.gq2 = Mat::Zero(1, B);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (Eigen::Index b = 0; b < B; ++b) {
        if (q1pi(0, b) <= q2pi(0, b)) {
            ws.gq1(0, b) = -inv_b;
        } else {
            ws.gq2(0, b) = -inv_b;
        }
    }
    const Mat gin1 = backward(q1, ws.c1, ws.gq1, nullptr);
    const Mat gin2 = backward(q2, ws.c2, ws.gq2, nullptr);
    const Mat g_act = (gin1 + gin2).bottomRows(act_dim);

    // Chain through a = tanh(mean + std eps) and through the log-prob terms;
    // the Gaussian piece of log pi is independent of the mean under the
    // reparameterization, only the squash correction and -log_std survive.
    const Eigen::ArrayXXd a = ps.actions.array();
    const Eigen::ArrayXXd one_minus_a2 = 1.0 - a.square();
    const Eigen::ArrayXXd t = 2.0 * a * one_minus_a2 / (one_minus_a2 + 1e-6);
    const Eigen::ArrayXXd sde = ps.stddev.array() * ps.eps.array();
    const Eigen::ArrayXXd g_act_a = g_act.array();
    const double aob = alpha * inv_b;

    Mat g_heads(2 * act_dim, B);
    g_heads.topRows(act_dim) = (aob * t + g_act_a * one_minus_a2).matrix();
    Eigen::ArrayXXd dls = aob * (t * sde - 1.0) + g_act_a * one_minus_a2 * sde;
    // Hard clamp on log-std: no gradient outside the bounds.
    dls *= ((ps.log_std_raw.array() > hyper.log_std_min) &&
            (ps.log_std_raw.array() < hyper.log_std_max))
               .cast<double>();
    g_heads.bottomRows(act_dim) = dls.matrix();

    backward(policy, ps.cache, g_heads, &gpol);
    return loss;
}

bool SacLosses::all_finite() const {
    return std::isfinite(q1) && std::isfinite(q2) && std::isfinite(actor) &&
           std::isfinite(alpha_loss) && std::isfinite(alpha);
}

SacAgent::SacAgent(const SacHyper& hyper, int obs_dim, int act_dim,
                   std::uint64_t init_seed)
    : hyper_(hyper), obs_dim_(obs_dim), act_dim_(act_dim) {
    hyper_.validate();
    if (obs_dim < 1 || act_dim < 1) throw ValidationError("bad network dimensions");

    std::vector<int> pol_dims, q_dims;
    pol_dims.push_back(obs_dim);
    q_dims.push_back(obs_dim + act_dim);
    for (int h : hyper_.hidden) {
        pol_dims.push_back(h);
        q_dims.push_back(h);
    }
    pol_dims.push_back(2 * act_dim); // stacked mean / log-std heads
    q_dims.push_back(1);

    Rng rng(init_seed);
    policy_ = DenseNet::init(pol_dims, rng);
    q1_ = DenseNet::init(q_dims, rng);
    q2_ = DenseNet::init(q_dims, rng);
    q1t_ = q1_;
    q2t_ = q2_;
    log_alpha_ = 0.0;

    const AdamConfig adam{hyper_.lr, 0.9, 0.999, 1e-8};
    opt_policy_ = AdamState::zeros_like(policy_, adam);
    opt_q1_ = AdamState::zeros_like(q1_, adam);
    opt_q2_ = AdamState::zeros_like(q2_, adam);
    opt_alpha_ = ScalarAdam{adam};
}

void SacAgent::set_hyper(const SacHyper& h) {
    h.validate();
    if (h.hidden != hyper_.hidden) {
        throw ValidationError("cannot change hidden dims of a trained agent");
    }
    hyper_ = h;
    opt_policy_.cfg.lr = h.lr;
    opt_q1_.cfg.lr = h.lr;
    opt_q2_.cfg.lr = h.lr;
    opt_alpha_.cfg.lr = h.lr;
}

ActionSample SacAgent::act(const Vec& obs, bool deterministic, Rng* rng) const {
    if (obs.size() != obs_dim_) throw ValidationError("observation dimension mismatch");
    const Mat out = forward(policy_, obs);
    ActionSample s;
    s.action.resize(act_dim_);
    if (deterministic) {
        for (int i = 0; i < act_dim_; ++i) s.action[i] = std::tanh(out(i, 0));
        return s;
    }
    if (!rng) throw ValidationError("stochastic action requires an RNG");
    double lp = 0.0;
    for (int i = 0; i < act_dim_; ++i) {
        const double mean = out(i, 0);
        const double ls = std::clamp(out(act_dim_ + i, 0), hyper_.log_std_min,
                                     hyper_.log_std_max);
        const double eps = rng->normal();
        const double a = std::tanh(mean + std::exp(ls) * eps);
        lp += gauss_log_pdf_eps(eps, ls) - squash_log_correction(a);
        s.action[i] = a;
    }
    s.log_prob = lp;
    return s;
}

SacLosses SacAgent::update(const ReplayBuffer& buffer, Rng& rng) {
    const int B = hyper_.batch_size;
    if (buffer.size() < static_cast<std::size_t>(B)) {
        throw ValidationError("replay buffer smaller than one batch");
    }
    auto& w = ws_;
    buffer.sample(rng, B, w.S, w.A, w.R, w.S2, w.D);

    // Reparameterized actions at s; log-probs drive the temperature loss.
    sample_policy(policy_, hyper_, w.S, &rng, w.ps);
    const double alpha_used = std::exp(log_alpha_);
    const double mean_lp = w.ps.log_prob.mean();

    SacLosses losses;
    losses.alpha = alpha_used;
    losses.mean_log_prob = mean_lp;
    losses.alpha_loss = -log_alpha_ * (mean_lp + hyper_.target_entropy);
    const double alpha_grad = -(mean_lp + hyper_.target_entropy);
    log_alpha_ = opt_alpha_.step(log_alpha_, alpha_grad);

    // Bootstrap targets from fresh next-state actions.
    sample_policy(policy_, hyper_, w.S2, &rng, w.ps2);
    const Vec y = critic_target_values(q1t_, q2t_, w.S2, w.ps2.actions, w.ps2.log_prob,
                                       w.R, w.D, alpha_used, hyper_.gamma);

    // Twin critic regression, loss 0.5 * (mse1 + mse2).
    w.X.resize(obs_dim_ + act_dim_, B);
    w.X.topRows(obs_dim_) = w.S;
    w.X.bottomRows(act_dim_) = w.A;
    losses.q1 = critic_loss_grad(q1_, w.X, y, w.c1, w.g1);
    losses.q2 = critic_loss_grad(q2_, w.X, y, w.c2, w.g2);
    adam_step(q1_, w.g1, opt_q1_);
    adam_step(q2_, w.g2, opt_q2_);

    // Actor objective against the freshly updated critics.
    losses.actor =
        actor_loss_grad(policy_, q1_, q2_, hyper_, w.S, w.ps, alpha_used, w.actor, w.gpol);
    adam_step(policy_, w.gpol, opt_policy_);

    soft_update(q1t_, q1_, hyper_.soft_tau);
    soft_update(q2t_, q2_, hyper_.soft_tau);
    ++updates_;
    return losses;
}

void SacAgent::save(const std::string& path,
                    const nlohmann::ordered_json& trainer_meta) const {
    nlohmann::ordered_json meta;
    meta["obs_dim"] = obs_dim_;
    meta["act_dim"] = act_dim_;
    meta["hyper"] = hyper_.to_json();
    meta["updates"] = updates_;
    meta["adam_t"] = {{"policy", opt_policy_.t},
                      {"q1", opt_q1_.t},
                      {"q2", opt_q2_.t},
                      {"alpha", opt_alpha_.t}};
    if (!trainer_meta.is_null() && !trainer_meta.empty()) {
        meta["trainer"] = trainer_meta;
    }

    EnvelopeWriter w("SACK", kCheckpointFormatVersion, meta);
    const auto put_net = [&w](const DenseNet& n) {
        const Vec f = n.to_flat();
        w.add_blob(f.data(), f.size());
    };
    const auto put_adam = [&w](const AdamState& s) {
        for (std::size_t l = 0; l < s.mW.size(); ++l) {
            w.add_blob(s.mW[l].data(), s.mW[l].size());
            w.add_blob(s.mb[l].data(), s.mb[l].size());
        }
        for (std::size_t l = 0; l < s.vW.size(); ++l) {
            w.add_blob(s.vW[l].data(), s.vW[l].size());
            w.add_blob(s.vb[l].data(), s.vb[l].size());
        }
    };
    put_net(policy_);
    put_net(q1_);
    put_net(q2_);
    put_net(q1t_);
    put_net(q2t_);
    w.add_scalar(log_alpha_);
    put_adam(opt_policy_);
    put_adam(opt_q1_);
    put_adam(opt_q2_);
    w.add_scalar(opt_alpha_.m);
    w.add_scalar(opt_alpha_.v);
    w.write(path);
}

SacAgent SacAgent::load(const std::string& path, nlohmann::json* trainer_meta) {
    EnvelopeReader r = EnvelopeReader::open(path, "SACK");
    if (r.version() != kCheckpointFormatVersion) {
        throw IoError("unsupported checkpoint format version");
    }
    const auto& meta = r.meta();
    SacAgent agent;
    try {
        agent.hyper_ = SacHyper::from_json(meta.at("hyper"));
        agent.obs_dim_ = meta.at("obs_dim").get<int>();
        agent.act_dim_ = meta.at("act_dim").get<int>();
        agent.updates_ = meta.at("updates").get<long>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint metadata invalid: ") + e.what());
    }
    if (agent.obs_dim_ < 1 || agent.act_dim_ < 1) {
        throw IoError("checkpoint declares invalid network dimensions");
    }

    std::vector<int> pol_dims{agent.obs_dim_}, q_dims{agent.obs_dim_ + agent.act_dim_};
    for (int h : agent.hyper_.hidden) {
        pol_dims.push_back(h);
        q_dims.push_back(h);
    }
    pol_dims.push_back(2 * agent.act_dim_);
    q_dims.push_back(1);
    agent.policy_ = DenseNet::zeros(pol_dims);
    agent.q1_ = DenseNet::zeros(q_dims);
    agent.q2_ = DenseNet::zeros(q_dims);
    agent.q1t_ = DenseNet::zeros(q_dims);
    agent.q2t_ = DenseNet::zeros(q_dims);

    // policy + its moments (3x), four q-nets + two moment pairs (8x), plus
    // log_alpha and its two moments.
    const std::size_t want =
        agent.policy_.parameter_count() * 3 + agent.q1_.parameter_count() * 8 + 3;
    if (r.remaining_doubles() != want) {
        throw IoError("checkpoint payload does not match declared layer dims");
    }

    const auto get_net = [&r](DenseNet& n) {
        Vec f(n.parameter_count());
        r.read_blob(f.data(), f.size());
        n.from_flat(f);
    };
    const AdamConfig adam{agent.hyper_.lr, 0.9, 0.999, 1e-8};
    const auto get_adam = [&r, &adam](const DenseNet& n, AdamState& s, long t) {
        s = AdamState::zeros_like(n, adam);
        s.t = t;
        for (std::size_t l = 0; l < s.mW.size(); ++l) {
            r.read_blob(s.mW[l].data(), s.mW[l].size());
            r.read_blob(s.mb[l].data(), s.mb[l].size());
        }
        for (std::size_t l = 0; l < s.vW.size(); ++l) {
            r.read_blob(s.vW[l].data(), s.vW[l].size());
            r.read_blob(s.vb[l].data(), s.vb[l].size());
        }
    };

    get_net(agent.policy_);
    get_net(agent.q1_);
    get_net(agent.q2_);
    get_net(agent.q1t_);
    get_net(agent.q2t_);
    agent.log_alpha_ = r.read_scalar();
    const auto& t_meta = meta.at("adam_t");
    get_adam(agent.policy_, agent.opt_policy_, t_meta.at("policy").get<long>());
    get_adam(agent.q1_, agent.opt_q1_, t_meta.at("q1").get<long>());
    get_adam(agent.q2_, agent.opt_q2_, t_meta.at("q2").get<long>());
    agent.opt_alpha_ = ScalarAdam{adam};
    agent.opt_alpha_.t = t_meta.at("alpha").get<long>();
    agent.opt_alpha_.m = r.read_scalar();
    agent.opt_alpha_.v = r.read_scalar();
    r.expect_consumed();

    if (trainer_meta) {
        *trainer_meta = meta.contains("trainer") ? meta.at("trainer") : nlohmann::json();
    }
    return agent;
}

} // namespace keepout
