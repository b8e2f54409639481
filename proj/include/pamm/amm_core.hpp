#pragma once

// Constant-product pool state, swaps and the equilibrium maps between pool
// coordinates and market valuations.

#include <cmath>
#include <stdexcept>
#include <string>

namespace pamm {

/// Valuations are clamped away from the singular endpoints before any
/// equilibrium or inverse map is evaluated.
inline constexpr double kValuationClamp = 1e-9;

enum class Token { X, Y };

inline Token other(Token t) { return t == Token::X ? Token::Y : Token::X; }

/// Market consensus weight v in (0,1): v units worth of X equal (1-v) units worth of Y.
class Valuation {
public:
    explicit Valuation(double v) : v_(v) {
        if (!(v > 0.0 && v < 1.0)) {
            throw std::domain_error("valuation must lie strictly inside (0,1), got " + std::to_string(v));
        }
    }

    double value() const { return v_; }
    double complement() const { return 1.0 - v_; }
    /// Price of X in units of Y.
    double relative_price() const { return v_ / (1.0 - v_); }
    Valuation mirrored() const { return Valuation(1.0 - v_); }

    friend bool operator==(const Valuation&, const Valuation&) = default;

private:
    double v_;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// v . (x, y) with v = (v, 1-v).
inline double dot(const Valuation& v, const Point& p) { return v.value() * p.x + v.complement() * p.y; }

inline void check_clamped(const Valuation& v) {
    if (v.value() < kValuationClamp || v.value() > 1.0 - kValuationClamp) {
        throw std::domain_error("valuation outside the computable range [1e-9, 1-1e-9]");
    }
}

/// g(x) = c / (x - shift_x) - shift_y. The unshifted curve is the primary CPMM f(x) = c/x.
struct BondingCurve {
    double c = 1.0;
    double shift_x = 0.0;
    double shift_y = 0.0;

    explicit BondingCurve(double invariant, double dx = 0.0, double dy = 0.0)
        : c(invariant), shift_x(dx), shift_y(dy) {
        if (!(invariant > 0.0) || !std::isfinite(invariant)) {
            throw std::invalid_argument("curve invariant must be positive and finite");
        }
        if (!std::isfinite(dx) || !std::isfinite(dy)) {
            throw std::invalid_argument("curve shifts must be finite");
        }
    }

    bool in_domain(double x) const { return x > shift_x && std::isfinite(x); }

    void require_domain(double x) const {
        if (!in_domain(x)) {
            throw std::domain_error("x = " + std::to_string(x) + " outside curve domain (x > " +
                                    std::to_string(shift_x) + ")");
        }
    }

    bool is_shifted() const { return shift_x != 0.0 || shift_y != 0.0; }

    double operator()(double x) const {
        require_domain(x);
        return c / (x - shift_x) - shift_y;
    }

    double slope(double x) const {
        require_domain(x);
        const double u = x - shift_x;
        return -c / (u * u);
    }

    BondingCurve shifted(double dx, double dy) const { return BondingCurve(c, shift_x + dx, shift_y + dy); }
    BondingCurve primary() const { return BondingCurve(c); }

    /// Curve with the roles of X and Y exchanged: x = c/(y + shift_y) + shift_x.
    BondingCurve mirrored() const { return BondingCurve(c, -shift_y, -shift_x); }
};

/// -f'(x); c/x^2 on the unshifted curve.
inline double exchange_rate(const BondingCurve& curve, double x) { return -curve.slope(x); }

/// phi(v): the x-coordinate where the slope equals -v/(1-v).
inline double equilibrium_x(const BondingCurve& curve, const Valuation& v) {
    check_clamped(v);
    return curve.shift_x + std::sqrt(curve.c * v.complement() / v.value());
}

/// Phi(v) = (phi(v), f(phi(v))): the curve point minimising v . x.
inline Point equilibrium_state(const BondingCurve& curve, const Valuation& v) {
    const double x = equilibrium_x(curve, v);
    return {x, curve(x)};
}

/// psi(x) = -f'(x) / (1 - f'(x)); the valuation for which x is the equilibrium.
inline Valuation implied_valuation(const BondingCurve& curve, double x) {
    const double rate = exchange_rate(curve, x);
    const double v = rate / (1.0 + rate);
    if (!(v >= kValuationClamp && v <= 1.0 - kValuationClamp)) {
        throw std::domain_error("implied valuation at x = " + std::to_string(x) + " is outside the computable range");
    }
    return Valuation(v);
}

/// cap(x, v) = v x + (1-v) f(x).
inline double capitalization(const BondingCurve& curve, double x, const Valuation& v) {
    return dot(v, Point{x, curve(x)});
}

/// cap(v) = v . Phi(v).
inline double equilibrium_capitalization(const BondingCurve& curve, const Valuation& v) {
    return dot(v, equilibrium_state(curve, v));
}

/// Reserves of a primary-curve pool; x * y == c is maintained by construction.
class PoolState {
public:
    PoolState(double x, double y) : x_(x), y_(y), c_(x * y) { validate(); }

    static PoolState at_equilibrium(double c, const Valuation& v) {
        return on_curve(equilibrium_x(BondingCurve(c), v), c);
    }

    /// Reserves with an explicit invariant; rejects inputs that break x * y = c.
    PoolState(double x, double y, double c) : x_(x), y_(y), c_(c) {
        validate();
        if (std::abs(x * y - c) > 1e-12 * c) {
            throw std::invalid_argument("reserves do not satisfy x * y = c");
        }
    }

    double x() const { return x_; }
    double y() const { return y_; }
    double c() const { return c_; }
    double reserve(Token t) const { return t == Token::X ? x_ : y_; }
    BondingCurve curve() const { return BondingCurve(c_); }

private:
    void validate() const {
        if (!(x_ > 0.0) || !(y_ > 0.0) || !std::isfinite(x_) || !std::isfinite(y_)) {
            throw std::invalid_argument("pool reserves must be positive and finite");
        }
        if (!(c_ > 0.0) || !std::isfinite(c_)) {
            throw std::invalid_argument("pool invariant must be positive and finite");
        }
    }

    struct Unchecked {};
    PoolState(double x, double y, double c, Unchecked) : x_(x), y_(y), c_(c) { validate(); }

    double x_;
    double y_;
    double c_;

public:
    /// Point on the primary curve with the given x-reserve; y is derived as c / x.
    static PoolState on_curve(double x, double c) { return PoolState(x, c / x, c, Unchecked{}); }
    /// As `on_curve`, keyed by the y-reserve.
    static PoolState on_curve_y(double y, double c) { return PoolState(c / y, y, c, Unchecked{}); }
};

struct SwapResult {
    /// Units leaving the pool for `swap`, units entering the pool for `buy`.
    double amount;
    PoolState pool;
};

/// Exact-input swap: the trader deposits `delta_in` of `side_in` and receives the other token.
inline SwapResult swap(const PoolState& pool, Token side_in, double delta_in) {
    if (!(delta_in > 0.0) || !std::isfinite(delta_in)) {
        throw std::invalid_argument("swap input must be positive and finite");
    }
    const double in_reserve = pool.reserve(side_in) + delta_in;
    const double out_reserve = pool.c() / in_reserve;
    const double delta_out = pool.reserve(other(side_in)) - out_reserve;
    if (!(out_reserve > 0.0) || !(delta_out > 0.0)) {
        throw std::domain_error("swap would exhaust the opposing reserve");
    }
    if (side_in == Token::X) {
        return {delta_out, PoolState::on_curve(in_reserve, pool.c())};
    }
    return {delta_out, PoolState::on_curve_y(in_reserve, pool.c())};
}

/// Exact-output swap: the trader withdraws `delta_out` of `side_out` and deposits what (x-dx)(y+dy)=c forces.
inline SwapResult buy(const PoolState& pool, Token side_out, double delta_out) {
    if (!(delta_out > 0.0) || !std::isfinite(delta_out)) {
        throw std::invalid_argument("purchase amount must be positive and finite");
    }
    const double out_reserve = pool.reserve(side_out) - delta_out;
    if (!(out_reserve > 0.0)) {
        throw std::domain_error("purchase would exhaust the reserve");
    }
    const double in_reserve = pool.c() / out_reserve;
    const double delta_in = in_reserve - pool.reserve(other(side_out));
    if (side_out == Token::X) {
        return {delta_in, PoolState::on_curve(out_reserve, pool.c())};
    }
    return {delta_in, PoolState::on_curve_y(out_reserve, pool.c())};
}

}  // namespace pamm
