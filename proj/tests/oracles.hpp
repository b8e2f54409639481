#pragma once

// Reference computations used only by tests. They avoid the library's own maps so that
// agreement is evidence rather than tautology.

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

/// Midpoint Riemann sum with n panels.
inline double midpoint(const std::function<double(double)>& f, double a, double b, std::size_t n) {
    const double h = (b - a) / static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += f(a + (static_cast<double>(i) + 0.5) * h);
    return s * h;
}

/// Point of x y = c minimising v x + (1 - v) y over a log-spaced grid of x in [lo, hi].
inline std::pair<double, double> grid_equilibrium(double c, double v, double lo, double hi, std::size_t n) {
    double best_x = lo;
    double best = INFINITY;
    const double step = std::log(hi / lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = lo * std::exp(step * static_cast<double>(i));
        const double cap = v * x + (1.0 - v) * c / x;
        if (cap < best) {
            best = cap;
            best_x = x;
        }
    }
    return {best_x, best};
}

/// Equilibrium point on y = c / x found by bisection on the slope condition c / x^2 = v / (1 - v).
inline std::pair<double, double> bisect_equilibrium(double c, double v) {
    const double target = v / (1.0 - v);
    double lo = 1e-12;
    double hi = 1e12;
    for (int i = 0; i < 400; ++i) {
        const double mid = std::sqrt(lo * hi);
        if (c / (mid * mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double x = std::sqrt(lo * hi);
    return {x, c / x};
}

/// Value v' . (x, y).
inline double value(double v, std::pair<double, double> p) { return v * p.first + (1.0 - v) * p.second; }

/// Central difference.
inline double derivative(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Plain value iteration on Q over arrays T[s][a][s'] and R[s][a][s'].
inline std::vector<std::vector<double>> value_iteration(const std::vector<std::vector<std::vector<double>>>& T,
                                                        const std::vector<std::vector<std::vector<double>>>& R,
                                                        double gamma, double tol) {
    const std::size_t S = T.size();
    const std::size_t A = T[0].size();
    std::vector<std::vector<double>> q(S, std::vector<double>(A, 0.0));
    for (int iter = 0; iter < 100000; ++iter) {
        std::vector<double> best(S);
        for (std::size_t s = 0; s < S; ++s) {
            best[s] = q[s][0];
            for (std::size_t a = 1; a < A; ++a) best[s] = std::max(best[s], q[s][a]);
        }
        double diff = 0.0;
        auto next = q;
        for (std::size_t s = 0; s < S; ++s) {
            for (std::size_t a = 0; a < A; ++a) {
                double acc = 0.0;
                for (std::size_t s2 = 0; s2 < S; ++s2) acc += T[s][a][s2] * (R[s][a][s2] + gamma * best[s2]);
                next[s][a] = acc;
                diff = std::max(diff, std::abs(acc - q[s][a]));
            }
        }
        q = next;
        if (diff < tol) break;
    }
    return q;
}

}  // namespace oracle
