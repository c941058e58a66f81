#include "keepout/net.hpp"

#include "keepout/error.hpp"

namespace keepout {

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < layer_count(); ++l) {
        n += static_cast<std::size_t>(weights[l].size()) + biases[l].size();
    }
    return n;
}

DenseNet DenseNet::init(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw ValidationError("net needs at least one layer");
    DenseNet net;
    net.dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        Mat w(dims[l + 1], dims[l]);
        for (int c = 0; c < w.cols(); ++c) {
            for (int r = 0; r < w.rows(); ++r) {
                w(r, c) = rng.uniform(-bound, bound);
            }
        }
        Vec b(dims[l + 1]);
        for (int r = 0; r < b.size(); ++r) {
            b[r] = rng.uniform(-bound, bound);
        }
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

DenseNet DenseNet::zeros(const std::vector<int>& dims) {
    if (dims.size() < 2) throw ValidationError("net needs at least one layer");
    DenseNet net;
    net.dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        net.weights.push_back(Mat::Zero(dims[l + 1], dims[l]));
        net.biases.push_back(Vec::Zero(dims[l + 1]));
    }
    return net;
}

Vec DenseNet::to_flat() const {
    Vec flat(parameter_count());
    Eigen::Index off = 0;
    for (int l = 0; l < layer_count(); ++l) {
        flat.segment(off, weights[l].size()) =
            Eigen::Map<const Vec>(weights[l].data(), weights[l].size());
        off += weights[l].size();
        flat.segment(off, biases[l].size()) = biases[l];
        off += biases[l].size();
    }
    return flat;
}

void DenseNet::from_flat(const Vec& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
        throw ValidationError("flat parameter vector has wrong length");
    }
    Eigen::Index off = 0;
    for (int l = 0; l < layer_count(); ++l) {
        Eigen::Map<Vec>(weights[l].data(), weights[l].size()) =
            flat.segment(off, weights[l].size());
        off += weights[l].size();
        biases[l] = flat.segment(off, biases[l].size());
        off += biases[l].size();
    }
}

Mat forward(const DenseNet& net, const Mat& x, ForwardCache* cache) {
    if (x.rows() != net.input_dim()) {
        throw ValidationError("forward: input dimension mismatch");
    }
    const int layers = net.layer_count();
    if (!cache) {
        Mat a = x;
        for (int l = 0; l < layers; ++l) {
            Mat z(net.weights[l].rows(), a.cols());
            z.noalias() = net.weights[l] * a;
            z.colwise() += net.biases[l];
            a = (l + 1 < layers) ? z.cwiseMax(0.0) : std::move(z);
        }
        return a;
    }
    cache->input = x;
    cache->pre.resize(layers);
    cache->act.resize(layers > 0 ? layers - 1 : 0);
    const Mat* a = &cache->input;
    for (int l = 0; l < layers; ++l) {
        Mat& z = cache->pre[l];
        z.resize(net.weights[l].rows(), a->cols());
        z.noalias() = net.weights[l] * (*a);
        z.colwise() += net.biases[l];
        if (l + 1 < layers) {
            cache->act[l] = z.cwiseMax(0.0);
            a = &cache->act[l];
        }
    }
    return cache->pre.back();
}

Gradients Gradients::zeros_like(const DenseNet& net) {
    Gradients g;
    for (int l = 0; l < net.layer_count(); ++l) {
        g.dW.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.db.push_back(Vec::Zero(net.biases[l].size()));
    }
    return g;
}

Vec Gradients::to_flat() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < dW.size(); ++l) n += dW[l].size() + db[l].size();
    Vec flat(n);
    Eigen::Index off = 0;
    for (std::size_t l = 0; l < dW.size(); ++l) {
        flat.segment(off, dW[l].size()) = Eigen::Map<const Vec>(dW[l].data(), dW[l].size());
        off += dW[l].size();
        flat.segment(off, db[l].size()) = db[l];
        off += db[l].size();
    }
    return flat;
}

Mat backward(const DenseNet& net, const ForwardCache& cache, const Mat& grad_out,
             Gradients* grads) {
    const int layers = net.layer_count();
    if (static_cast<int>(cache.pre.size()) != layers || cache.input.cols() != grad_out.cols()) {
        throw ValidationError("backward: cache does not match forward pass");
    }
    if (grads) {
        grads->dW.resize(layers);
        grads->db.resize(layers);
    }
    Mat delta = grad_out;
    Mat next;
    for (int l = layers - 1; l >= 0; --l) {
        const Mat& a_in = (l == 0) ? cache.input : cache.act[l - 1];
        if (grads) {
            grads->dW[l].resize(net.weights[l].rows(), net.weights[l].cols());
            grads->dW[l].noalias() = delta * a_in.transpose();
            grads->db[l] = delta.rowwise().sum();
        }
        if (l > 0) {
            next.resize(net.weights[l].cols(), delta.cols());
            next.noalias() = net.weights[l].transpose() * delta;
            // ReLU subgradient, 0 at 0.
            next.array() *= (cache.pre[l - 1].array() > 0.0).cast<double>();
            delta.swap(next);
        } else {
            Mat grad_in(net.weights[0].cols(), delta.cols());
            grad_in.noalias() = net.weights[0].transpose() * delta;
            return grad_in;
        }
    }
    return Mat(); // unreachable for layer_count >= 1
}

AdamState AdamState::zeros_like(const DenseNet& net, const AdamConfig& cfg) {
    AdamState s;
    s.cfg = cfg;
    for (int l = 0; l < net.layer_count(); ++l) {
        s.mW.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.vW.push_back(Mat::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.mb.push_back(Vec::Zero(net.biases[l].size()));
        s.vb.push_back(Vec::Zero(net.biases[l].size()));
    }
    return s;
}

namespace {

template <typename P, typename G, typename M>
void adam_apply(P& p, const G& g, M& m, M& v, const AdamConfig& cfg, double bc1, double bc2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    p.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
}

} // namespace

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state) {
    if (grads.dW.size() != net.weights.size()) {
        throw ValidationError("adam_step: gradient/parameter shape mismatch");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.t));
    for (int l = 0; l < net.layer_count(); ++l) {
        adam_apply(net.weights[l], grads.dW[l], state.mW[l], state.vW[l], state.cfg, bc1, bc2);
        adam_apply(net.biases[l], grads.db[l], state.mb[l], state.vb[l], state.cfg, bc1, bc2);
    }
}

double ScalarAdam::step(double param, double grad) {
    t += 1;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
    const double mhat = m / (1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
    const double vhat = v / (1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
    return param - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
}

void soft_update(DenseNet& target, const DenseNet& online, double tau) {
    for (int l = 0; l < target.layer_count(); ++l) {
        target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
        target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
    }
}

} // namespace keepout
