#pragma once

#include <cmath>
#include <cstddef>

namespace dsnbench::detail {

/// Adaptive Simpson to an absolute tolerance. The integrands here are smooth
/// on the (possibly pre-split) intervals they are given.
template <class F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol, int depth = 48) {
    if (!(b > a)) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

} // namespace dsnbench::detail
