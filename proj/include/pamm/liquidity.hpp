#pragma once

// Predictive liquidity incentives: a gaussian fee density centred on the forecast valuation,
// renormalised to (0,1), n-interval-ahead scheduling of its centre and the prediction log.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pamm/market_data.hpp"
#include "pamm/quadrature.hpp"

namespace pamm {

inline constexpr double kDefaultFeeSigma = 0.05;
inline constexpr std::size_t kFeeSigmaWindow = 50;

class FeeDistribution {
public:
    FeeDistribution(double mu, double sigma) : mu_(mu), sigma_(sigma) {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("fee sigma must be positive");
        if (!std::isfinite(mu)) throw std::invalid_argument("fee centre must be finite");
        norm_ = normal_interval_mass(-mu / sigma, (1.0 - mu) / sigma);
        if (!(norm_ > 0.0)) throw std::domain_error("fee distribution has no mass on (0,1)");
    }

    double mu() const { return mu_; }
    double sigma() const { return sigma_; }
    /// Gaussian mass on (0,1) used for renormalisation.
    double normalizer() const { return norm_; }

    /// Truncated density on (0,1); zero outside.
    double pdf(double x) const {
        if (!(x > 0.0 && x < 1.0)) return 0.0;
        return normal_pdf((x - mu_) / sigma_) / (sigma_ * norm_);
    }

    /// Truncated mass of [lo, hi] intersected with (0,1).
    double mass(double lo, double hi) const {
        lo = std::max(lo, 0.0);
        hi = std::min(hi, 1.0);
        if (!(hi > lo)) return 0.0;
        return normal_interval_mass((lo - mu_) / sigma_, (hi - mu_) / sigma_) / norm_;
    }

    bool operator==(const FeeDistribution&) const = default;

private:
    double mu_;
    double sigma_;
    double norm_ = 1.0;
};

/// Untruncated gaussian fee density phi(x) with centre mu and width sigma.
inline double fee_density(const FeeDistribution& dist, double x) {
    if (!(x > 0.0 && x < 1.0)) throw std::domain_error("fee density is evaluated on (0,1)");
    const double z = (x - dist.mu()) / dist.sigma();
    return std::exp(-0.5 * z * z) / (dist.sigma() * std::sqrt(2.0 * std::numbers::pi));
}

/// Rolling standard deviation of v over the last `window` intervals, or the fallback when it is
/// undefined or zero.
inline double default_fee_sigma(const std::vector<double>& values, std::size_t t,
                                std::size_t window = kFeeSigmaWindow, double fallback = kDefaultFeeSigma) {
    if (t >= values.size()) throw std::out_of_range("fee sigma index beyond the series");
    const double s = rolling_std(values, t, window);
    return s > 0.0 && std::isfinite(s) ? s : fallback;
}

struct LPPosition {
    std::string owner;
    double lo = 0.0;
    double hi = 1.0;
    double liquidity = 0.0;

    void validate() const {
        if (!(lo < hi)) throw std::invalid_argument("position range needs lo < hi");
        if (!(lo >= 0.0 && hi <= 1.0)) throw std::invalid_argument("position range must lie in [0,1]");
        if (!(liquidity >= 0.0)) throw std::invalid_argument("position liquidity must be nonnegative");
    }
};

struct OwnerFee {
    std::string owner;
    double amount = 0.0;
};

struct FeeAllocation {
    /// One entry per input position.
    std::vector<double> per_position;
    /// Per-owner totals in first-appearance order.
    std::vector<OwnerFee> per_owner;
    double distributed = 0.0;
    /// Fee kept in the pool because no position overlaps the density.
    double carried_over = 0.0;
};

/// Splits `total_fee` in proportion to liquidity times truncated mass over each range. The last
/// weighted position absorbs the rounding remainder so the shares sum to the total.
inline FeeAllocation allocate_fees(std::span<const LPPosition> positions, double total_fee,
                                   const FeeDistribution& dist) {
    if (!(total_fee >= 0.0) || !std::isfinite(total_fee)) throw std::invalid_argument("total fee must be nonnegative");
    std::vector<double> weights(positions.size(), 0.0);
    double weight_sum = 0.0;
    std::size_t last = positions.size();
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i].validate();
        weights[i] = positions[i].liquidity * dist.mass(positions[i].lo, positions[i].hi);
        if (weights[i] > 0.0) {
            weight_sum += weights[i];
            last = i;
        }
    }
    FeeAllocation out;
    out.per_position.assign(positions.size(), 0.0);
    if (last == positions.size()) {
        out.carried_over = total_fee;
    } else {
        double assigned = 0.0;
        for (std::size_t i = 0; i < positions.size(); ++i) {
            if (i == last || weights[i] == 0.0) continue;
            out.per_position[i] = total_fee * (weights[i] / weight_sum);
            assigned += out.per_position[i];
        }
        out.per_position[last] = std::max(0.0, total_fee - assigned);
        out.distributed = total_fee;
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
        auto it = std::find_if(out.per_owner.begin(), out.per_owner.end(),
                               [&](const OwnerFee& o) { return o.owner == positions[i].owner; });
        if (it == out.per_owner.end()) {
            out.per_owner.push_back({positions[i].owner, out.per_position[i]});
        } else {
            it->amount += out.per_position[i];
        }
    }
    return out;
}

struct PredictionRecord {
    std::int64_t t = 0;
    double v_pred = 0.0;
    std::int64_t effective_t = 0;
    std::optional<double> realized_v;
};

/// Append-only record of scheduled fee-centre shifts.
class PredictionLog {
public:
    void append(PredictionRecord r) {
        if (!records_.empty() && r.t < records_.back().t) {
            throw std::logic_error("prediction log is append-only in interval order");
        }
        records_.push_back(r);
    }

    /// Fills the realised valuation for every record effective at `t`.
    void realize(std::int64_t t, double v) {
        for (auto& r : records_) {
            if (r.effective_t == t) r.realized_v = v;
        }
    }

    const std::vector<PredictionRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    void write_csv(std::ostream& out) const {
        char buf[128];
        out << "t,v_pred,effective_t,realized_v\n";
        for (const auto& r : records_) {
            std::snprintf(buf, sizeof buf, "%lld,%.17g,%lld,", static_cast<long long>(r.t), r.v_pred,
                          static_cast<long long>(r.effective_t));
            out << buf;
            if (r.realized_v) {
                std::snprintf(buf, sizeof buf, "%.17g", *r.realized_v);
                out << buf;
            }
            out << '\n';
        }
    }

private:
    std::vector<PredictionRecord> records_;
};

/// Fee-centre schedule: a shift submitted at t with horizon n takes effect at t + n. For equal
/// effective times the later submission wins; every submission is logged.
class ConcentrationSchedule {
public:
    explicit ConcentrationSchedule(double sigma = kDefaultFeeSigma) : sigma_(sigma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("fee sigma must be positive");
    }

    FeeDistribution shift_concentration(std::int64_t t, double v_pred, std::int64_t n) {
        return shift_concentration(t, v_pred, n, sigma_);
    }

    FeeDistribution shift_concentration(std::int64_t t, double v_pred, std::int64_t n, double sigma) {
        if (n < 0) throw std::invalid_argument("shift horizon must be nonnegative");
        FeeDistribution dist(v_pred, sigma);
        log_.append({t, v_pred, t + n, std::nullopt});
        scheduled_.insert_or_assign(t + n, dist);
        return dist;
    }

    /// Distribution scheduled for exactly `t`, if any.
    std::optional<FeeDistribution> at(std::int64_t t) const {
        const auto it = scheduled_.find(t);
        if (it == scheduled_.end()) return std::nullopt;
        return it->second;
    }

    /// Distribution scheduled for `t`, else centred on `fallback_center`.
    FeeDistribution effective(std::int64_t t, double fallback_center) const {
        if (auto d = at(t)) return *d;
        return FeeDistribution(fallback_center, sigma_);
    }

    double sigma() const { return sigma_; }
    PredictionLog& log() { return log_; }
    const PredictionLog& log() const { return log_; }

private:
    double sigma_;
    std::map<std::int64_t, FeeDistribution> scheduled_;
    PredictionLog log_;
};

}  // namespace pamm
