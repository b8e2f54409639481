#pragma once

// LSTM forecaster for the forward valuation v'_p from a sliding window of
// (v_obs, tau, epsilon) features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pamm/amm_core.hpp"
#include "pamm/loss_model.hpp"
#include "pamm/market_data.hpp"
#include "pamm/neural.hpp"

namespace pamm {

struct PredictorConfig {
    std::size_t window = 50;
    std::size_t hidden = 100;
    std::size_t horizon = 5;
    std::size_t epochs = 50;
    std::size_t batch = 50;
    /// Per-epoch multiplicative learning-rate factor; epoch e trains at lr * lr_decay^e.
    double lr_decay = 0.7;

    void validate() const {
        if (horizon < 1 || window < horizon) throw std::invalid_argument("predictor needs window >= horizon >= 1");
        if (hidden < 1 || batch < 1) throw std::invalid_argument("predictor needs hidden >= 1 and batch >= 1");
        if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("predictor needs lr_decay in (0, 1]");
    }
};

inline constexpr std::size_t kFeatureCount = 3;

/// window x 3 matrix; row i holds (v_obs, tau, epsilon) for interval t - window + 1 + i.
struct FeatureWindow {
    nn::Matrix rows;
};

/// Rows are intervals t-window+1 .. t. Epsilon entries beyond `eps_history` are 0.
inline FeatureWindow make_window(const PriceSeries& series, std::span<const double> eps_history, std::size_t t,
                                 std::size_t window) {
    if (window == 0 || t + 1 < window) {
        throw std::out_of_range("insufficient history for a window ending at " + std::to_string(t));
    }
    if (t >= series.size()) throw std::out_of_range("window end beyond the series");
    FeatureWindow w{nn::Matrix(window, kFeatureCount)};
    const std::size_t first = t + 1 - window;
    for (std::size_t i = 0; i < window; ++i) {
        const auto& tick = series[first + i];
        const auto r = static_cast<Eigen::Index>(i);
        w.rows(r, 0) = tick.v_obs;
        w.rows(r, 1) = tick.tau;
        w.rows(r, 2) = first + i < eps_history.size() ? eps_history[first + i] : 0.0;
    }
    return w;
}

/// Packs windows into the time-major (features x window*batch) layout. The valuation enters
/// the network as log-odds, i.e. the log of the oracle price.
inline nn::Matrix pack_windows(std::span<const FeatureWindow> windows) {
    const Eigen::Index batch = static_cast<Eigen::Index>(windows.size());
    const Eigen::Index steps = batch ? windows.front().rows.rows() : 0;
    nn::Matrix xs(static_cast<Eigen::Index>(kFeatureCount), steps * batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const auto& w = windows[static_cast<std::size_t>(b)].rows;
        nn::require_shape(w.rows() == steps && w.cols() == static_cast<Eigen::Index>(kFeatureCount), "feature window");
        for (Eigen::Index t = 0; t < steps; ++t) {
            auto col = xs.col(t * batch + b);
            col(0) = logit(w(t, 0));
            col(1) = w(t, 1);
            col(2) = w(t, 2);
        }
    }
    return xs;
}

/// The equilibrium valuation for an observed valuation: psi(phi(v)).
inline Valuation equilibrium_valuation(const BondingCurve& curve, const Valuation& v_obs) {
    return implied_valuation(curve, equilibrium_x(curve, v_obs));
}

inline constexpr double kDensitySigmaFloor = 1e-4;

/// GBM forward density anchored at v_t. Volatility is the sample std of log-odds increments
/// over the last `lookback` intervals, floored at 1e-4.
inline ValuationDensity forward_density(std::span<const double> v, std::size_t t, std::size_t lookback,
                                        double horizon) {
    std::vector<double> steps;
    const std::size_t begin = t >= lookback ? t - lookback + 1 : 1;
    for (std::size_t i = std::max<std::size_t>(begin, 1); i <= t; ++i) steps.push_back(logit(v[i]) - logit(v[i - 1]));
    double sigma = 0.0;
    if (steps.size() >= 2) sigma = rolling_std(steps, steps.size() - 1, steps.size());
    return ValuationDensity::gbm(Valuation(v[t]), 0.0, std::max(sigma, kDensitySigmaFloor), horizon);
}

class Predictor {
public:
    explicit Predictor(PredictorConfig cfg = {}, std::uint64_t seed = 1)
        : cfg_(cfg), lstm_(static_cast<Eigen::Index>(kFeatureCount), static_cast<Eigen::Index>(cfg.hidden), "lstm"),
          head_(static_cast<Eigen::Index>(cfg.hidden), 1, nn::Activation::Linear, "head") {
        cfg_.validate();
        std::mt19937_64 rng(seed);
        lstm_.init(rng);
        head_.init(rng);
    }

    const PredictorConfig& config() const { return cfg_; }

    nn::ParameterList parameters() {
        nn::ParameterList p;
        lstm_.collect(p);
        head_.collect(p);
        return p;
    }

    /// v'_p through a logistic head, clamped to the valid valuation range.
    double predict(const FeatureWindow& window) const { return predict_batch(std::span(&window, 1)).front(); }

    std::vector<double> predict_batch(std::span<const FeatureWindow> windows) const {
        if (windows.empty()) return {};
        const auto steps = windows.front().rows.rows();
        const nn::Matrix z = head_.infer(lstm_.infer(pack_windows(windows), steps));
        std::vector<double> out(windows.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = std::clamp(nn::sigmoid(z(0, static_cast<Eigen::Index>(i))), kValuationClamp, 1.0 - kValuationClamp);
        }
        return out;
    }

    /// Training forward pass on packed inputs; caches activations for `backward`.
    std::vector<double> forward(const nn::Matrix& xs, Eigen::Index steps) {
        const nn::Matrix z = head_.forward(lstm_.forward(xs, steps));
        out_.resize(static_cast<std::size_t>(z.cols()));
        for (std::size_t i = 0; i < out_.size(); ++i) out_[i] = nn::sigmoid(z(0, static_cast<Eigen::Index>(i)));
        return out_;
    }

    /// Accumulates gradients for dL/dv'_p given per sample.
    void backward(std::span<const double> d_pred) {
        nn::Matrix dz(1, static_cast<Eigen::Index>(d_pred.size()));
        for (std::size_t i = 0; i < d_pred.size(); ++i) {
            dz(0, static_cast<Eigen::Index>(i)) = d_pred[i] * out_[i] * (1.0 - out_[i]);
        }
        lstm_.backward(head_.backward(dz));
    }

    void save(nn::Checkpoint& ck, const std::string& prefix = "predictor.") {
        ck.meta[prefix + "window"] = std::to_string(cfg_.window);
        ck.meta[prefix + "hidden"] = std::to_string(cfg_.hidden);
        ck.meta[prefix + "horizon"] = std::to_string(cfg_.horizon);
        ck.meta[prefix + "batch"] = std::to_string(cfg_.batch);
        ck.add_parameters(parameters(), prefix);
    }

    static Predictor load(const nn::Checkpoint& ck, const std::string& prefix = "predictor.") {
        PredictorConfig cfg;
        cfg.window = std::stoul(ck.get(prefix + "window"));
        cfg.hidden = std::stoul(ck.get(prefix + "hidden"));
        cfg.horizon = std::stoul(ck.get(prefix + "horizon"));
        cfg.batch = std::stoul(ck.get(prefix + "batch"));
        Predictor p(cfg);
        ck.load_parameters(p.parameters(), prefix);
        return p;
    }

private:
    PredictorConfig cfg_;
    nn::Lstm lstm_;
    nn::Dense head_;
    std::vector<double> out_;
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_abs_err = 0.0;
    double mean_expected_load = 0.0;
    double objective = 0.0;
};

/// Supervised samples: windows ending at t, targets are the equilibrium valuation at t + horizon.
struct SupervisedSet {
    std::vector<std::size_t> ends;
    std::vector<double> targets;
    std::vector<double> expected_loads;
};

inline SupervisedSet make_supervised_set(const PriceSeries& series, const PredictorConfig& cfg, double pool_c = 1.0) {
    if (series.size() < cfg.window + cfg.horizon) {
        throw std::invalid_argument("series too short: need at least window + horizon ticks");
    }
    const BondingCurve curve(pool_c);
    std::vector<double> v(series.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = series[i].v_obs;
    SupervisedSet set;
    for (std::size_t t = cfg.window - 1; t + cfg.horizon < series.size(); ++t) {
        set.ends.push_back(t);
        set.targets.push_back(equilibrium_valuation(curve, series.valuation(t + cfg.horizon)).value());
        const auto density = forward_density(v, t, cfg.window, static_cast<double>(cfg.horizon));
        set.expected_loads.push_back(expected_load(curve, series.valuation(t), density));
    }
    return set;
}

/// Minimises the mean absolute prediction error with Adam over shuffled minibatches.
///
/// Reports, per epoch, the mean of |v' - v'_p| over the epoch's minibatches, the mean expected
/// load over the samples and their sum (the full objective). The expected-load term does not depend
/// on the parameters and contributes no gradient; the subgradient of |.| at 0 is taken as 0.
/// Each epoch's shuffle is seeded from (seed, epoch) so training can resume from any epoch.
inline std::vector<EpochStats> train_supervised(Predictor& model, nn::AdamState& adam, const PriceSeries& series,
                                                const SupervisedSet& set, std::uint64_t seed,
                                                std::size_t first_epoch, std::size_t epochs) {
    const auto& cfg = model.config();
    const std::size_t n = set.ends.size();
    const double mean_load =
        std::accumulate(set.expected_loads.begin(), set.expected_loads.end(), 0.0) / static_cast<double>(n);
    auto params = model.parameters();
    std::vector<std::size_t> order(n);
    std::vector<FeatureWindow> windows;
    std::vector<double> d_pred;
    std::vector<EpochStats> curve;
    const double base_lr = adam.config.lr;
    for (std::size_t epoch = first_epoch; epoch < first_epoch + epochs; ++epoch) {
        adam.config.lr = base_lr * std::pow(cfg.lr_decay, static_cast<double>(epoch));
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double abs_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t end = std::min(n, start + cfg.batch);
            windows.clear();
            for (std::size_t i = start; i < end; ++i) windows.push_back(make_window(series, {}, set.ends[order[i]], cfg.window));
            const auto pred = model.forward(pack_windows(windows), static_cast<Eigen::Index>(cfg.window));
            d_pred.assign(pred.size(), 0.0);
            const double scale = 1.0 / static_cast<double>(pred.size());
            for (std::size_t j = 0; j < pred.size(); ++j) {
                const double err = pred[j] - set.targets[order[start + j]];
                abs_sum += std::abs(err);
                d_pred[j] = err > 0.0 ? scale : (err < 0.0 ? -scale : 0.0);
            }
            nn::zero_grads(params);
            model.backward(d_pred);
            nn::adam_update(adam, params);
        }
        EpochStats s;
        s.epoch = epoch;
        s.mean_abs_err = abs_sum / static_cast<double>(n);
        s.mean_expected_load = mean_load;
        s.objective = s.mean_abs_err + mean_load;
        curve.push_back(s);
    }
    adam.config.lr = base_lr;
    return curve;
}

inline std::vector<EpochStats> train_supervised(Predictor& model, nn::AdamState& adam, const PriceSeries& series,
                                                std::uint64_t seed, double pool_c = 1.0) {
    const auto set = make_supervised_set(series, model.config(), pool_c);
    return train_supervised(model, adam, series, set, seed, 0, model.config().epochs);
}

/// Mean |v' - v'_p| of a frozen model over a supervised set.
inline double evaluate_mae(const Predictor& model, const PriceSeries& series, const SupervisedSet& set) {
    std::vector<FeatureWindow> windows;
    double sum = 0.0;
    const std::size_t chunk = 256;
    for (std::size_t start = 0; start < set.ends.size(); start += chunk) {
        windows.clear();
        const std::size_t end = std::min(set.ends.size(), start + chunk);
        for (std::size_t i = start; i < end; ++i) windows.push_back(make_window(series, {}, set.ends[i], model.config().window));
        const auto pred = model.predict_batch(windows);
        for (std::size_t i = start; i < end; ++i) sum += std::abs(pred[i - start] - set.targets[i]);
    }
    return sum / static_cast<double>(set.ends.size());
}

}  // namespace pamm
