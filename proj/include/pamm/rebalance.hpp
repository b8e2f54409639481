#pragma once

// Pseudo-arbitrage: shift the bonding curve so the pool's current holdings become the
// equilibrium for the new valuation, then let liquidity providers top up the pool
// to return it to the primary curve.

#include <cmath>
#include <stdexcept>

#include "pamm/amm_core.hpp"

namespace pamm {

struct ShiftResult {
    /// a - a' (X left in the pool beyond the new equilibrium).
    double shift_x = 0.0;
    /// b' - b (Y missing relative to the new equilibrium).
    double shift_y = 0.0;
    /// Equilibrium for the new valuation on the shifted curve; equals the holdings point.
    Point new_equilibrium;
    BondingCurve curve{1.0};
};

/// Moves `curve` by (a - a', -(b' - b)) where (a, b) = Phi(v) and (a', b') = Phi(v_new) on `curve`.
inline ShiftResult pseudo_arbitrage_shift(const BondingCurve& curve, const Valuation& v, const Valuation& v_new) {
    if (v == v_new) {
        throw std::invalid_argument("pseudo-arbitrage shift needs distinct valuations");
    }
    const Point held = equilibrium_state(curve, v);
    const Point target = equilibrium_state(curve, v_new);
    ShiftResult r;
    r.shift_x = held.x - target.x;
    r.shift_y = target.y - held.y;
    r.curve = curve.shifted(r.shift_x, r.shift_y);
    r.new_equilibrium = equilibrium_state(r.curve, v_new);
    return r;
}

/// Arbitrage profit available at valuation `v` to a trader moving the pool from `held`
/// to the curve's equilibrium. Zero after a pseudo-arbitrage shift.
inline double arbitrage_profit(const BondingCurve& curve, const Point& held, const Valuation& v) {
    return dot(v, held) - dot(v, equilibrium_state(curve, v));
}

/// Accumulated curve offsets not yet covered by liquidity-provider deposits.
/// A negative component denotes the mirror case (shortage of X, surplus of Y).
struct InventoryLedger {
    double surplus_x = 0.0;
    double deficit_y = 0.0;

    bool empty() const { return surplus_x == 0.0 && deficit_y == 0.0; }
};

inline InventoryLedger accrue_shortfall(InventoryLedger ledger, const ShiftResult& shift) {
    ledger.surplus_x += shift.shift_x;
    ledger.deficit_y += shift.shift_y;
    return ledger;
}

/// Holdings tracked against a possibly shifted curve.
struct VirtualPool {
    BondingCurve curve;
    double x;
    double y;

    static VirtualPool from(const PoolState& pool) { return {pool.curve(), pool.x(), pool.y()}; }
    Point holdings() const { return {x, y}; }
};

/// True when either ledger component exceeds `fraction` of the matching reserve.
inline bool needs_rebalance(const VirtualPool& pool, const InventoryLedger& ledger, double fraction) {
    return std::abs(ledger.surplus_x) > fraction * pool.x || std::abs(ledger.deficit_y) > fraction * pool.y;
}

struct RebalanceResult {
    /// Signed per-token deposits by liquidity providers; negative amounts are surplus released.
    double deposit_x = 0.0;
    double deposit_y = 0.0;
    PoolState pool;
    InventoryLedger ledger;
};

/// Deposits that carry the holdings back onto the primary curve x * y = c and clear the ledger.
inline RebalanceResult rebalance_deposit(const VirtualPool& pool, const InventoryLedger& ledger) {
    const double c = pool.curve.c;
    if (ledger.empty()) {
        return {0.0, 0.0, PoolState::on_curve(pool.x, c), ledger};
    }
    const double tol = 1e-9 * (1.0 + std::abs(ledger.surplus_x) + std::abs(ledger.deficit_y));
    if (std::abs(pool.curve.shift_x - ledger.surplus_x) > tol || std::abs(pool.curve.shift_y - ledger.deficit_y) > tol) {
        throw std::logic_error("ledger does not match the curve offsets it is meant to clear");
    }
    const double new_x = pool.x - ledger.surplus_x;
    if (!(new_x > 0.0)) {
        throw std::domain_error("rebalance would exhaust the X reserve");
    }
    RebalanceResult r{-ledger.surplus_x, 0.0, PoolState::on_curve(new_x, c), InventoryLedger{}};
    r.deposit_y = r.pool.y() - pool.y;
    return r;
}

}  // namespace pamm
