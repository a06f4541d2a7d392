#pragma once

#include <cmath>
#include <utility>

#include "qlrnn/errors.hpp"
#include "qlrnn/matrix.hpp"

namespace qlrnn {

// Central-difference gradient of a scalar function of a matrix:
// g_i = (f(x + h e_i) - f(x - h e_i)) / (2h). The oracle every analytic
// backward pass in this project is checked against.
template <class F>
Matrix fd_gradient(F&& f, Matrix x, double h) {
    if (!(h > 0.0)) throw NumericError("fd_gradient: step size must be > 0");
    Matrix g(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x.data[i];
        x.data[i] = orig + h;
        const double fp = f(static_cast<const Matrix&>(x));
        x.data[i] = orig - h;
        const double fm = f(static_cast<const Matrix&>(x));
        x.data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("fd_gradient: non-finite function value");
        g.data[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Relative disagreement between an analytic and a finite-difference gradient,
// normalized by the larger entry magnitude of either tensor. Two tensors that
// are both numerically zero agree by definition.
inline double gradient_rel_error(const Matrix& analytic, const Matrix& fd) {
    double denom = std::max(max_abs(analytic), max_abs(fd));
    if (denom < 1e-10) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, std::fabs(analytic.data[i] - fd.data[i]));
    return worst / denom;
}

}  // namespace qlrnn
