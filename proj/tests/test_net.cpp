#include <doctest.h>

#include <cstring>

#include "keepout/error.hpp"
#include "keepout/fdcheck.hpp"
#include "keepout/net.hpp"

using namespace keepout;

namespace {

// Plain loop arithmetic, no Eigen products.
Vec mlp_oracle(const DenseNet& net, const Vec& x) {
    Vec a = x;
    for (int l = 0; l < net.layer_count(); ++l) {
        Vec z(net.biases[l].size());
        for (int r = 0; r < z.size(); ++r) {
            double acc = net.biases[l][r];
            for (int c = 0; c < a.size(); ++c) {
                acc += net.weights[l](r, c) * a[c];
            }
            z[r] = acc;
        }
        if (l + 1 < net.layer_count()) {
            for (int r = 0; r < z.size(); ++r) z[r] = std::max(0.0, z[r]);
        }
        a = z;
    }
    return a;
}

} // namespace

TEST_CASE("forward: zero net, identity layer, matrix oracle") {
    DenseNet zero = DenseNet::zeros({4, 3, 2});
    const Mat y = forward(zero, Mat::Random(4, 5));
    CHECK(y.cwiseAbs().maxCoeff() == 0.0);

    DenseNet id = DenseNet::zeros({3, 3});
    id.weights[0] = Mat::Identity(3, 3);
    Mat x(3, 2);
    x << 1, -2, 0.5, 3, -0.25, 0;
    CHECK((forward(id, x) - x).cwiseAbs().maxCoeff() == 0.0);

    Rng rng(61);
    DenseNet net = DenseNet::init({16, 8, 4}, rng);
    for (int i = 0; i < 50; ++i) {
        Vec v(16);
        for (int k = 0; k < 16; ++k) v[k] = rng.uniform(-2, 2);
        const Mat got = forward(net, v);
        const Vec want = mlp_oracle(net, v);
        CHECK((got.col(0) - want).norm() < 1e-12);
    }
}

TEST_CASE("forward is pure and deterministic") {
    Rng rng(62);
    DenseNet net = DenseNet::init({6, 5, 3}, rng);
    const Mat x = Mat::Random(6, 4);
    const Mat y1 = forward(net, x);
    const Mat y2 = forward(net, x);
    CHECK(std::memcmp(y1.data(), y2.data(), sizeof(double) * y1.size()) == 0);
}

TEST_CASE("forward rejects dimension mismatch") {
    DenseNet net = DenseNet::zeros({4, 2});
    CHECK_THROWS_AS(forward(net, Mat::Random(3, 1)), ValidationError);
}

TEST_CASE("backward: zero upstream gradient, scalar hand case") {
    Rng rng(63);
    DenseNet net = DenseNet::init({5, 4, 2}, rng);
    ForwardCache cache;
    forward(net, Mat::Random(5, 3), &cache);
    Gradients g;
    backward(net, cache, Mat::Zero(2, 3), &g);
    CHECK(g.to_flat().cwiseAbs().maxCoeff() == 0.0);

    // f(x) = w1 * relu(w0 x), x > 0: df/dw1 = relu(w0 x), df/dx = w1 w0
    DenseNet s = DenseNet::zeros({1, 1, 1});
    s.weights[0](0, 0) = 1.0;
    s.weights[1](0, 0) = 0.7;
    Mat x(1, 1);
    x << 1.3;
    ForwardCache c2;
    forward(s, x, &c2);
    Gradients g2;
    Mat one(1, 1);
    one << 1.0;
    const Mat gin = backward(s, c2, one, &g2);
    CHECK(g2.dW[1](0, 0) == doctest::Approx(1.3).epsilon(1e-15));
    CHECK(gin(0, 0) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("backward matches central finite differences") {
    Rng rng(64);
    int accepted = 0;
    std::uint64_t seed = 100;
    while (accepted < 20) {
        Rng lrng(seed++);
        DenseNet net = DenseNet::init({7, 6, 5, 3}, lrng);
        Mat x(7, 4);
        Mat c(3, 4);
        for (int j = 0; j < x.cols(); ++j) {
            for (int i = 0; i < x.rows(); ++i) x(i, j) = lrng.uniform(-1, 1);
            for (int i = 0; i < c.rows(); ++i) c(i, j) = lrng.uniform(-1, 1);
        }
        // kink guard: skip configurations with near-zero pre-activations
        ForwardCache cache;
        forward(net, x, &cache);
        double near = 1e300;
        for (std::size_t l = 0; l + 1 < cache.pre.size(); ++l) {
            near = std::min(near, cache.pre[l].cwiseAbs().minCoeff());
        }
        if (near < 1e-4) continue;
        ++accepted;

        Gradients g;
        backward(net, cache, c, &g);
        const Vec analytic = g.to_flat();

        DenseNet probe = net;
        const auto f = [&](const Vec& th) {
            probe.from_flat(th);
            return (forward(probe, x).array() * c.array()).sum();
        };
        const Vec numeric = central_difference_grad(f, net.to_flat(), 1e-6);
        CHECK(gradient_rel_error(analytic, numeric) <= 1e-5);
    }
}

TEST_CASE("adam: zero gradient, signed first step, quadratic descent") {
    Rng rng(65);
    DenseNet net = DenseNet::init({3, 2}, rng);
    AdamState st = AdamState::zeros_like(net, AdamConfig{1e-3, 0.9, 0.999, 1e-8});
    const Vec before = net.to_flat();
    Gradients zero = Gradients::zeros_like(net);
    adam_step(net, zero, st);
    CHECK((net.to_flat() - before).cwiseAbs().maxCoeff() == 0.0);
    CHECK(st.t == 1);

    // first step with nonzero gradient moves by ~lr against the sign
    DenseNet one = DenseNet::zeros({1, 1});
    one.weights[0](0, 0) = 0.4;
    one.biases[0][0] = -0.2;
    AdamState st1 = AdamState::zeros_like(one, AdamConfig{1e-3, 0.9, 0.999, 1e-8});
    Gradients g = Gradients::zeros_like(one);
    g.dW[0](0, 0) = 3.7;
    g.db[0][0] = -0.03;
    adam_step(one, g, st1);
    CHECK(one.weights[0](0, 0) == doctest::Approx(0.4 - 1e-3).epsilon(1e-6));
    CHECK(one.biases[0][0] == doctest::Approx(-0.2 + 1e-3).epsilon(1e-6));

    // 10 steps on f(w) = w^2 from w = 1 with lr 0.1: |w| strictly decreases
    ScalarAdam sopt{AdamConfig{0.1, 0.9, 0.999, 1e-8}};
    double w = 1.0;
    for (int i = 0; i < 10; ++i) {
        const double next = sopt.step(w, 2.0 * w);
        CHECK(std::abs(next) < std::abs(w));
        w = next;
    }
}

TEST_CASE("parameter flattening round-trips bit-exactly") {
    Rng rng(66);
    DenseNet net = DenseNet::init({9, 7, 5}, rng);
    const Vec flat = net.to_flat();
    DenseNet other = DenseNet::zeros({9, 7, 5});
    other.from_flat(flat);
    CHECK(std::memcmp(flat.data(), other.to_flat().data(), sizeof(double) * flat.size()) == 0);
    const Mat x = Mat::Random(9, 3);
    const Mat y1 = forward(net, x);
    const Mat y2 = forward(other, x);
    CHECK(std::memcmp(y1.data(), y2.data(), sizeof(double) * y1.size()) == 0);

    Vec bad(flat.size() + 1);
    CHECK_THROWS_AS(other.from_flat(bad), ValidationError);
}

TEST_CASE("weight init stays within the fan-in bound") {
    Rng rng(67);
    DenseNet net = DenseNet::init({16, 256, 6}, rng);
    const double b0 = 1.0 / std::sqrt(16.0);
    const double b1 = 1.0 / std::sqrt(256.0);
    CHECK(net.weights[0].cwiseAbs().maxCoeff() <= b0);
    CHECK(net.biases[0].cwiseAbs().maxCoeff() <= b0);
    CHECK(net.weights[1].cwiseAbs().maxCoeff() <= b1);
    // and actually explores the range
    CHECK(net.weights[0].cwiseAbs().maxCoeff() > 0.5 * b0);
}

TEST_CASE("soft update blends parameters") {
    Rng rng(68);
    DenseNet online = DenseNet::init({4, 3}, rng);
    DenseNet target = DenseNet::init({4, 3}, rng);
    DenseNet t1 = target;
    soft_update(t1, online, 1.0);
    CHECK((t1.to_flat() - online.to_flat()).cwiseAbs().maxCoeff() == 0.0);
    DenseNet t0 = target;
    soft_update(t0, online, 0.0);
    CHECK((t0.to_flat() - target.to_flat()).cwiseAbs().maxCoeff() == 0.0);

    DenseNet ts = DenseNet::zeros({1, 1});
    DenseNet os = DenseNet::zeros({1, 1});
    os.weights[0](0, 0) = 1.0;
    soft_update(ts, os, 0.005);
    CHECK(ts.weights[0](0, 0) == doctest::Approx(0.005).epsilon(1e-15));
}
