#pragma once

#include <functional>

#include "keepout/net.hpp"

namespace keepout {

// Central finite differences of a scalar function over a flat parameter
// vector.
Vec central_difference_grad(const std::function<double(const Vec&)>& f, const Vec& x0,
                            double h);

// Norm-wise relative error between an analytic and a numeric gradient.
double gradient_rel_error(const Vec& analytic, const Vec& numeric);

} // namespace keepout
