#pragma once

// Central-difference gradient verification. Runs in 64-bit precision only:
// the analytic gradient comes from a fresh tape, the numeric one from
// (f(x+eps) - f(x-eps)) / (2 eps) per coordinate, and the relative error is
// |a - n| / max(|a|, |n|, 1e-8), maximised over coordinates.

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "saccn/tensor.hpp"

namespace saccn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

template <class F>
GradCheckReport grad_check(F&& f, const Tensor<double>& x0, double eps = 1e-4) {
    auto eval = [&](const Tensor<double>& x) -> double {
        Tensor<double> y = f(x);
        if (y.numel() != 1)
            throw ShapeError(msg("grad_check: f must return a scalar, got shape ", y.shape().str()));
        return y.data()[0];
    };

    // cheap determinism probe; a stochastic f invalidates the comparison
    {
        const double y1 = eval(x0.clone());
        const double y2 = eval(x0.clone());
        if (std::memcmp(&y1, &y2, sizeof(double)) != 0)
            throw NumericError("grad_check: f is not deterministic");
    }

    auto tape = Tape<double>::make();
    Tensor<double> x = tape->variable(x0.clone());
    Tensor<double> y = f(x);
    if (y.numel() != 1)
        throw ShapeError(msg("grad_check: f must return a scalar, got shape ", y.shape().str()));
    if (!y.on_tape()) throw Error("grad_check: f(x) is detached from the tape");
    tape->backward(y);
    Tensor<double> analytic = tape->grad(x);

    GradCheckReport rep;
    const int64_t n = x0.numel();
    for (int64_t i = 0; i < n; ++i) {
        Tensor<double> xp = x0.clone();
        Tensor<double> xm = x0.clone();
        xp.data()[static_cast<size_t>(i)] += eps;
        xm.data()[static_cast<size_t>(i)] -= eps;
        const double num = (eval(xp) - eval(xm)) / (2.0 * eps);
        const double ana = analytic.data()[static_cast<size_t>(i)];
        const double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
        if (rel >= rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = i;
            rep.analytic = ana;
            rep.numeric = num;
        }
    }
    return rep;
}

}  // namespace saccn
