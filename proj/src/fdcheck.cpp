#include "keepout/fdcheck.hpp"

namespace keepout {

Vec central_difference_grad(const std::function<double(const Vec&)>& f, const Vec& x0,
                            double h) {
    Vec g(x0.size());
    Vec x = x0;
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        x[i] = x0[i] + h;
        const double fp = f(x);
        x[i] = x0[i] - h;
        const double fm = f(x);
        x[i] = x0[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double gradient_rel_error(const Vec& analytic, const Vec& numeric) {
    const double denom = std::max({analytic.norm(), numeric.norm(), 1e-12});
    return (analytic - numeric).norm() / denom;
}

} // namespace keepout
