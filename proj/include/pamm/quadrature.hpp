#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace pamm {

/// Composite Simpson rule on [a, b] with `panels` subintervals (rounded up to even).
template <class F>
double simpson(F&& f, double a, double b, std::size_t panels) {
    if (panels < 2) panels = 2;
    if (panels % 2 != 0) ++panels;
    if (a == b) return 0.0;
    const double h = (b - a) / static_cast<double>(panels);
    double odd = 0.0;
    double even = 0.0;
    for (std::size_t i = 1; i < panels; ++i) {
        const double fx = f(a + h * static_cast<double>(i));
        if (i % 2 == 1) {
            odd += fx;
        } else {
            even += fx;
        }
    }
    return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

inline double logistic(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

inline double logit(double v) { return std::log(v / (1.0 - v)); }

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_pdf(double z) {
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

/// P(lo < Z < hi) for Z ~ N(0,1), accurate in either tail.
inline double normal_interval_mass(double lo, double hi) {
    if (hi <= lo) return 0.0;
    if (lo > 0.0) {
        return 0.5 * (std::erfc(lo / std::sqrt(2.0)) - std::erfc(hi / std::sqrt(2.0)));
    }
    if (hi < 0.0) {
        return 0.5 * (std::erfc(-hi / std::sqrt(2.0)) - std::erfc(-lo / std::sqrt(2.0)));
    }
    return 1.0 - normal_cdf(lo) - (1.0 - normal_cdf(hi));
}

}  // namespace pamm
