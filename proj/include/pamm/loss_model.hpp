#pragma once

// Divergence loss, slippage loss, load and expected load under a density of
// future valuations.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pamm/amm_core.hpp"
#include "pamm/quadrature.hpp"

namespace pamm {

/// loss_div(v, v') = v'.Phi(v) - v'.Phi(v'): the arbitrage profit taken from the pool.
inline double divergence_loss(const BondingCurve& curve, const Valuation& v, const Valuation& v_new) {
    if (v == v_new) return 0.0;
    const double loss = dot(v_new, equilibrium_state(curve, v)) - dot(v_new, equilibrium_state(curve, v_new));
    return std::max(loss, 0.0);
}

/// Closed form of loss_div(psi(x), psi(x + delta)) on f(x) = 1/x.
inline double divergence_loss_closed(double x, double delta) {
    if (!(x > 0.0) || !(x + delta > 0.0)) {
        throw std::domain_error("closed-form divergence loss needs x > 0 and x + delta > 0");
    }
    const double d2 = delta * delta;
    return d2 / (2.0 * delta * x * x + x * x * x + d2 * x + x);
}

/// loss_slip(v, v') = ((1-v')/(1-v)) (v.Phi(v') - v.Phi(v)). Nonnegative by equilibrium minimality.
inline double slippage_loss(const BondingCurve& curve, const Valuation& v, const Valuation& v_new) {
    if (v == v_new) return 0.0;
    const double gap = dot(v, equilibrium_state(curve, v_new)) - dot(v, equilibrium_state(curve, v));
    return std::max(v_new.complement() / v.complement() * gap, 0.0);
}

/// Closed form of slippage for trade size delta on f(x) = 1/x, with its printed leading minus.
/// The magnitude equals slippage_loss(psi(x), psi(x + delta)).
inline double slippage_loss_closed(double x, double delta) {
    if (!(x > 0.0) || !(x + delta > 0.0)) {
        throw std::domain_error("closed-form slippage loss needs x > 0 and x + delta > 0");
    }
    const double d2 = delta * delta;
    return -(d2 * (delta + x)) / (x * x * (d2 + x * x + 2.0 * delta * x + 1.0));
}

/// Gap between the linear-rate receipt -delta f'(x) and the curve receipt f(x) - f(x + delta).
inline double linear_slippage(const BondingCurve& curve, double x, double delta) {
    if (!(delta >= 0.0)) {
        throw std::domain_error("linear slippage needs a nonnegative trade size");
    }
    curve.require_domain(x);
    if (delta == 0.0) return 0.0;
    const double linear = -delta * curve.slope(x);
    const double realized = curve(x) - curve(x + delta);
    return linear - realized;
}

enum class Direction { X, Y };

/// load_X = loss_div * loss_slip; load_Y is load_X on the token-relabelled pool (x <-> y, v <-> 1-v).
inline double load(const BondingCurve& curve, const Valuation& v, const Valuation& v_new, Direction direction) {
    if (direction == Direction::X) {
        return divergence_loss(curve, v, v_new) * slippage_loss(curve, v, v_new);
    }
    const BondingCurve mirror = curve.mirrored();
    const Valuation mv = v.mirrored();
    const Valuation mv_new = v_new.mirrored();
    return divergence_loss(mirror, mv, mv_new) * slippage_loss(mirror, mv, mv_new);
}

struct LossReport {
    double divergence = 0.0;
    double slippage = 0.0;
    double load = 0.0;
    double expected_load = 0.0;
};

/// Density of future valuations on the clipped support [1e-4, 1 - 1e-4].
class ValuationDensity {
public:
    enum class Kind { Uniform, TruncatedGaussian, Gbm, Tabulated };

    static constexpr double kSupportEps = 1e-4;
    /// Gaussian kinds carry negligible mass beyond this many standard deviations.
    static constexpr double kTailWidth = 12.0;

    static ValuationDensity uniform() {
        ValuationDensity d(Kind::Uniform);
        d.norm_ = 1.0 / (d.hi_ - d.lo_);
        return d;
    }

    /// N(mean, width^2) in valuation space, truncated to the support and renormalised.
    static ValuationDensity truncated_gaussian(double mean, double width) {
        if (!(width > 0.0) || !std::isfinite(mean)) {
            throw std::invalid_argument("truncated gaussian needs a finite mean and positive width");
        }
        ValuationDensity d(Kind::TruncatedGaussian);
        d.center_ = mean;
        d.scale_ = width;
        const double mass = normal_interval_mass((d.lo_ - mean) / width, (d.hi_ - mean) / width);
        if (!(mass > 0.0)) {
            throw std::invalid_argument("truncated gaussian has no mass on the valuation support");
        }
        d.norm_ = 1.0 / mass;
        return d;
    }

    /// Valuation reached after `horizon` intervals of geometric Brownian motion in the price
    /// P = v/(1-v), starting from `anchor`. logit(v') is normal, so v' is logit-normal.
    static ValuationDensity gbm(const Valuation& anchor, double mu, double sigma, double horizon) {
        if (!(sigma > 0.0) || !(horizon > 0.0) || !std::isfinite(mu)) {
            throw std::invalid_argument("gbm density needs sigma > 0 and horizon > 0");
        }
        ValuationDensity d(Kind::Gbm);
        d.center_ = logit(anchor.value()) + (mu - 0.5 * sigma * sigma) * horizon;
        d.scale_ = sigma * std::sqrt(horizon);
        const double mass =
            normal_interval_mass((logit(d.lo_) - d.center_) / d.scale_, (logit(d.hi_) - d.center_) / d.scale_);
        if (!(mass > 0.0)) {
            throw std::invalid_argument("gbm density has no mass on the valuation support");
        }
        d.norm_ = 1.0 / mass;
        return d;
    }

    /// Piecewise-linear density through (v_i, p_i); not renormalised, so callers can detect bad input.
    static ValuationDensity tabulated(std::vector<double> v, std::vector<double> p) {
        if (v.size() != p.size() || v.size() < 2) {
            throw std::invalid_argument("tabulated density needs matching knot vectors of length >= 2");
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!(p[i] >= 0.0) || !std::isfinite(p[i])) throw std::invalid_argument("density values must be >= 0");
            if (i > 0 && !(v[i] > v[i - 1])) throw std::invalid_argument("density knots must increase");
        }
        ValuationDensity d(Kind::Tabulated);
        d.lo_ = std::max(v.front(), kSupportEps);
        d.hi_ = std::min(v.back(), 1.0 - kSupportEps);
        d.knots_ = std::move(v);
        d.values_ = std::move(p);
        return d;
    }

    Kind kind() const { return kind_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

    double pdf(double v) const {
        if (v < lo_ || v > hi_) return 0.0;
        switch (kind_) {
            case Kind::Uniform:
                return norm_;
            case Kind::TruncatedGaussian:
                return norm_ * normal_pdf((v - center_) / scale_) / scale_;
            case Kind::Gbm:
                return norm_ * normal_pdf((logit(v) - center_) / scale_) / (scale_ * v * (1.0 - v));
            case Kind::Tabulated: {
                const auto it = std::upper_bound(knots_.begin(), knots_.end(), v);
                if (it == knots_.begin() || it == knots_.end()) {
                    return v == knots_.back() ? values_.back() : 0.0;
                }
                const std::size_t i = static_cast<std::size_t>(it - knots_.begin());
                const double w = (v - knots_[i - 1]) / (knots_[i] - knots_[i - 1]);
                return (1.0 - w) * values_[i - 1] + w * values_[i];
            }
        }
        return 0.0;
    }

    /// Sub-interval of the support holding all but a negligible fraction of the mass.
    std::pair<double, double> window() const {
        switch (kind_) {
            case Kind::TruncatedGaussian:
                return {std::max(lo_, center_ - kTailWidth * scale_), std::min(hi_, center_ + kTailWidth * scale_)};
            case Kind::Gbm:
                return {std::max(lo_, logistic(center_ - kTailWidth * scale_)),
                        std::min(hi_, logistic(center_ + kTailWidth * scale_))};
            default:
                return {lo_, hi_};
        }
    }

    /// Mass on the clipped support.
    double mass() const {
        if (kind_ != Kind::Tabulated) return 1.0;
        double m = 0.0;
        for (std::size_t i = 1; i < knots_.size(); ++i) {
            const double a = std::max(knots_[i - 1], lo_);
            const double b = std::min(knots_[i], hi_);
            if (b > a) m += 0.5 * (pdf(a) + pdf(b)) * (b - a);
        }
        return m;
    }

private:
    explicit ValuationDensity(Kind kind) : kind_(kind) {}

    Kind kind_;
    double lo_ = kSupportEps;
    double hi_ = 1.0 - kSupportEps;
    double center_ = 0.0;
    double scale_ = 1.0;
    double norm_ = 1.0;
    std::vector<double> knots_;
    std::vector<double> values_;
};

inline constexpr std::size_t kExpectedLoadPanels = 2048;

/// E_p[load] = int_0^v p load_X + int_v^1 p load_Y, by composite Simpson per branch.
///
/// Each branch is integrated in log-odds s = logit(v'), dv' = v'(1-v') ds. The load grows like
/// 1/sqrt(v') near the support edges, which the substitution turns into a smooth, decaying
/// integrand; gaussian kinds are integrated over their 12-sigma window only.
inline double expected_load(const BondingCurve& curve, const Valuation& v, const ValuationDensity& density,
                            std::size_t panels = kExpectedLoadPanels) {
    const double mass = density.mass();
    if (std::abs(mass - 1.0) > 1e-6) {
        throw std::invalid_argument("valuation density is not normalised (mass " + std::to_string(mass) + ")");
    }
    const auto [lo, hi] = density.window();
    const auto branch = [&](double a, double b, Direction dir) {
        if (!(b > a)) return 0.0;
        const auto integrand = [&](double s) {
            const double w = std::clamp(logistic(s), a, b);
            const double p = density.pdf(w);
            if (p == 0.0) return 0.0;
            return p * load(curve, v, Valuation(w), dir) * w * (1.0 - w);
        };
        return simpson(integrand, logit(a), logit(b), panels);
    };
    return branch(lo, std::min(v.value(), hi), Direction::X) + branch(std::max(v.value(), lo), hi, Direction::Y);
}

inline LossReport loss_report(const BondingCurve& curve, const Valuation& v, const Valuation& v_new,
                              const ValuationDensity& density) {
    LossReport r;
    r.divergence = divergence_loss(curve, v, v_new);
    r.slippage = slippage_loss(curve, v, v_new);
    r.load = r.divergence * r.slippage;
    r.expected_load = expected_load(curve, v, density);
    return r;
}

}  // namespace pamm
