#pragma once

// Experiment orchestration: strict JSON configuration, paired replay of a price series with and
// without pseudo-arbitrage, predictor and agent training, fee-centering evaluation and the
// per-tick CSV from which every reported metric can be re-derived.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pamm/agent.hpp"
#include "pamm/amm_core.hpp"
#include "pamm/liquidity.hpp"
#include "pamm/loss_model.hpp"
#include "pamm/market_data.hpp"
#include "pamm/neural.hpp"
#include "pamm/predictor.hpp"
#include "pamm/rebalance.hpp"

namespace pamm {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kConfigVersion = 1;

struct DataConfig {
    std::string source = "synth_gbm";
    std::string path;
    bool price_column = false;
    std::size_t n = 10000;
    double mu = 0.0;
    double sigma = 0.01;
    double p0 = 1.0;
    double period = 200.0;
    double amplitude = 0.1;
    double center = 0.5;
};

struct PoolConfig {
    double c = 1.0;
    double rebalance_threshold = 0.01;
    double fee_rate = 0.003;
};

struct PredictorSection {
    PredictorConfig model;
    double learning_rate = 1e-3;
    double target_mae = 0.005;
    std::string checkpoint;
    std::string resume;
};

struct AgentSection {
    AgentConfig agent;
    std::string environment = "market";
    std::size_t episodes = 5;
    std::size_t max_events = 200;
    std::size_t episode_length = 50;
    std::size_t max_updates = 0;
};

struct LiquiditySection {
    std::optional<double> sigma;
    std::size_t sigma_window = kFeeSigmaWindow;
    std::size_t horizon = 5;
    std::vector<LPPosition> positions{{"wide", 0.0, 1.0, 1.0}, {"mid", 0.4, 0.6, 1.0}};
};

struct SimConfig {
    int version = kConfigVersion;
    std::optional<std::uint64_t> seed;
    DataConfig data;
    PoolConfig pool;
    EventConfig event;
    RewardConfig reward;
    PredictorSection predictor;
    AgentSection agent;
    LiquiditySection liquidity;
    std::string out_dir = "runs/default";

    void validate() const {
        if (version != kConfigVersion) throw ConfigError("version: expected " + std::to_string(kConfigVersion));
        const auto& s = data.source;
        if (s != "synth_gbm" && s != "synth_sine" && s != "file") {
            throw ConfigError("data.source: expected one of synth_gbm, synth_sine, file");
        }
        if (s == "file" && data.path.empty()) throw ConfigError("data.path: required when data.source is 'file'");
        if (s != "file" && !seed) throw ConfigError("seed: required for synthetic data");
        if (!(pool.c > 0.0)) throw ConfigError("pool.c: must be positive");
        if (!(pool.rebalance_threshold > 0.0)) throw ConfigError("pool.rebalance_threshold: must be positive");
        if (!(pool.fee_rate >= 0.0 && pool.fee_rate < 1.0)) throw ConfigError("pool.fee_rate: must lie in [0,1)");
        if (!(event.beta_v > 0.0)) throw ConfigError("event.beta_v: must be positive");
        if (!(reward.beta_c > 0.0)) throw ConfigError("reward.beta_c: must be positive");
        if (!(reward.gamma > 0.0 && reward.gamma < 1.0)) throw ConfigError("reward.gamma: must lie in (0,1)");
        try {
            predictor.model.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("predictor: ") + e.what());
        }
        if (!(predictor.learning_rate > 0.0)) throw ConfigError("predictor.learning_rate: must be positive");
        if (agent.environment != "market" && agent.environment != "controlled") {
            throw ConfigError("agent.environment: expected 'market' or 'controlled'");
        }
        if (agent.agent.batch == 0 || agent.agent.replay_capacity < agent.agent.batch) {
            throw ConfigError("agent: replay_capacity must be at least batch, batch positive");
        }
        if (liquidity.sigma && !(*liquidity.sigma > 0.0)) throw ConfigError("liquidity.sigma: must be positive");
        if (liquidity.horizon != 0 && liquidity.horizon != predictor.model.horizon) {
            throw ConfigError("liquidity.horizon: must be 0 or equal to predictor.horizon");
        }
        if (liquidity.positions.empty()) throw ConfigError("liquidity.positions: at least one position required");
        for (const auto& p : liquidity.positions) {
            try {
                p.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError("liquidity.positions[" + p.owner + "]: " + e.what());
            }
        }
    }
};

namespace detail {

inline void require_keys(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& item : j.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
        if (!known) {
            std::string list;
            for (const char* k : allowed) list += (list.empty() ? "" : ", ") + std::string(k);
            throw ConfigError("unknown key '" + (path.empty() ? "" : path + ".") + item.key() + "' (allowed: " + list + ")");
        }
    }
}

inline std::string key_path(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
}

template <class T>
void read(const Json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    const Json& v = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(key_path(path, key) + ": expected a boolean");
        out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(key_path(path, key) + ": expected a string");
        out = v.get<std::string>();
    } else if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_unsigned()) throw ConfigError(key_path(path, key) + ": expected a nonnegative integer");
        out = v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(key_path(path, key) + ": expected an integer");
        out = v.get<T>();
    } else {
        if (!v.is_number()) throw ConfigError(key_path(path, key) + ": expected a number");
        out = v.get<T>();
    }
}

inline const Json* section(const Json& j, const char* key) { return j.contains(key) ? &j.at(key) : nullptr; }

}  // namespace detail

/// Parses and validates a configuration document; unknown keys are errors.
inline SimConfig parse_config(const Json& j) {
    using detail::read;
    using detail::require_keys;
    using detail::section;
    SimConfig cfg;
    require_keys(j, "", {"version", "seed", "data", "pool", "event", "reward", "predictor", "agent", "liquidity", "output"});
    if (!j.contains("version")) throw ConfigError("version: required");
    read(j, "", "version", cfg.version);
    if (j.contains("seed")) {
        std::uint64_t s = 0;
        read(j, "", "seed", s);
        cfg.seed = s;
    }
    if (const Json* d = section(j, "data")) {
        require_keys(*d, "data", {"source", "path", "price_column", "n", "mu", "sigma", "p0", "period", "amplitude", "center"});
        read(*d, "data", "source", cfg.data.source);
        read(*d, "data", "path", cfg.data.path);
        read(*d, "data", "price_column", cfg.data.price_column);
        read(*d, "data", "n", cfg.data.n);
        read(*d, "data", "mu", cfg.data.mu);
        read(*d, "data", "sigma", cfg.data.sigma);
        read(*d, "data", "p0", cfg.data.p0);
        read(*d, "data", "period", cfg.data.period);
        read(*d, "data", "amplitude", cfg.data.amplitude);
        read(*d, "data", "center", cfg.data.center);
    }
    if (const Json* p = section(j, "pool")) {
        require_keys(*p, "pool", {"c", "rebalance_threshold", "fee_rate"});
        read(*p, "pool", "c", cfg.pool.c);
        read(*p, "pool", "rebalance_threshold", cfg.pool.rebalance_threshold);
        read(*p, "pool", "fee_rate", cfg.pool.fee_rate);
    }
    if (const Json* e = section(j, "event")) {
        require_keys(*e, "event", {"beta_v"});
        read(*e, "event", "beta_v", cfg.event.beta_v);
    }
    if (const Json* r = section(j, "reward")) {
        require_keys(*r, "reward", {"beta_c", "gamma"});
        read(*r, "reward", "beta_c", cfg.reward.beta_c);
        read(*r, "reward", "gamma", cfg.reward.gamma);
    }
    if (const Json* p = section(j, "predictor")) {
        require_keys(*p, "predictor", {"window", "hidden", "horizon", "epochs", "batch", "learning_rate", "lr_decay",
                                       "target_mae", "checkpoint", "resume"});
        read(*p, "predictor", "window", cfg.predictor.model.window);
        read(*p, "predictor", "hidden", cfg.predictor.model.hidden);
        read(*p, "predictor", "horizon", cfg.predictor.model.horizon);
        read(*p, "predictor", "epochs", cfg.predictor.model.epochs);
        read(*p, "predictor", "batch", cfg.predictor.model.batch);
        read(*p, "predictor", "learning_rate", cfg.predictor.learning_rate);
        read(*p, "predictor", "lr_decay", cfg.predictor.model.lr_decay);
        read(*p, "predictor", "target_mae", cfg.predictor.target_mae);
        read(*p, "predictor", "checkpoint", cfg.predictor.checkpoint);
        read(*p, "predictor", "resume", cfg.predictor.resume);
    }
    if (const Json* a = section(j, "agent")) {
        require_keys(*a, "agent", {"environment", "episodes", "max_events", "episode_length", "max_updates", "dueling",
                                   "filters", "trunk", "stream", "replay_capacity", "batch", "target_sync",
                                   "learning_rate", "exploration_start", "exploration_end", "exploration_steps",
                                   "epsilon_mu", "epsilon_sigma"});
        auto& ag = cfg.agent.agent;
        read(*a, "agent", "environment", cfg.agent.environment);
        read(*a, "agent", "episodes", cfg.agent.episodes);
        read(*a, "agent", "max_events", cfg.agent.max_events);
        read(*a, "agent", "episode_length", cfg.agent.episode_length);
        read(*a, "agent", "max_updates", cfg.agent.max_updates);
        read(*a, "agent", "dueling", ag.network.dueling);
        read(*a, "agent", "filters", ag.network.filters);
        read(*a, "agent", "trunk", ag.network.trunk);
        read(*a, "agent", "stream", ag.network.stream);
        read(*a, "agent", "replay_capacity", ag.replay_capacity);
        read(*a, "agent", "batch", ag.batch);
        read(*a, "agent", "target_sync", ag.target_sync);
        read(*a, "agent", "learning_rate", ag.adam.lr);
        read(*a, "agent", "exploration_start", ag.exploration.start);
        read(*a, "agent", "exploration_end", ag.exploration.end);
        read(*a, "agent", "exploration_steps", ag.exploration.decay_steps);
        read(*a, "agent", "epsilon_mu", ag.epsilon.mu);
        read(*a, "agent", "epsilon_sigma", ag.epsilon.sigma);
    }
    if (const Json* l = section(j, "liquidity")) {
        require_keys(*l, "liquidity", {"sigma", "sigma_window", "horizon", "positions"});
        if (l->contains("sigma") && !l->at("sigma").is_null()) {
            double s = 0.0;
            read(*l, "liquidity", "sigma", s);
            cfg.liquidity.sigma = s;
        }
        read(*l, "liquidity", "sigma_window", cfg.liquidity.sigma_window);
        read(*l, "liquidity", "horizon", cfg.liquidity.horizon);
        if (l->contains("positions")) {
            const Json& ps = l->at("positions");
            if (!ps.is_array()) throw ConfigError("liquidity.positions: expected an array");
            cfg.liquidity.positions.clear();
            for (std::size_t i = 0; i < ps.size(); ++i) {
                const std::string path = "liquidity.positions[" + std::to_string(i) + "]";
                require_keys(ps[i], path, {"owner", "lo", "hi", "liquidity"});
                LPPosition pos;
                pos.owner = "lp" + std::to_string(i);
                read(ps[i], path, "owner", pos.owner);
                read(ps[i], path, "lo", pos.lo);
                read(ps[i], path, "hi", pos.hi);
                read(ps[i], path, "liquidity", pos.liquidity);
                cfg.liquidity.positions.push_back(pos);
            }
        }
    }
    if (const Json* o = section(j, "output")) {
        require_keys(*o, "output", {"dir"});
        read(*o, "output", "dir", cfg.out_dir);
    }
    cfg.agent.agent.reward = cfg.reward;
    cfg.agent.agent.network.window = cfg.predictor.model.window;
    cfg.validate();
    return cfg;
}

inline SimConfig parse_config_text(const std::string& text, const std::string& name = "<config>") {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(name + ": " + e.what());
    }
    return parse_config(j);
}

inline SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

/// Full configuration with defaults filled in; parses back to the same configuration.
inline Json config_to_json(const SimConfig& cfg) {
    Json j;
    j["version"] = cfg.version;
    if (cfg.seed) j["seed"] = *cfg.seed;
    j["data"] = {{"source", cfg.data.source},       {"path", cfg.data.path},   {"price_column", cfg.data.price_column},
                 {"n", cfg.data.n},                 {"mu", cfg.data.mu},       {"sigma", cfg.data.sigma},
                 {"p0", cfg.data.p0},               {"period", cfg.data.period}, {"amplitude", cfg.data.amplitude},
                 {"center", cfg.data.center}};
    j["pool"] = {{"c", cfg.pool.c}, {"rebalance_threshold", cfg.pool.rebalance_threshold}, {"fee_rate", cfg.pool.fee_rate}};
    j["event"] = {{"beta_v", cfg.event.beta_v}};
    j["reward"] = {{"beta_c", cfg.reward.beta_c}, {"gamma", cfg.reward.gamma}};
    const auto& pm = cfg.predictor.model;
    j["predictor"] = {{"window", pm.window},       {"hidden", pm.hidden},
                      {"horizon", pm.horizon},     {"epochs", pm.epochs},
                      {"batch", pm.batch},         {"learning_rate", cfg.predictor.learning_rate}, {"lr_decay", pm.lr_decay},
                      {"target_mae", cfg.predictor.target_mae}, {"checkpoint", cfg.predictor.checkpoint},
                      {"resume", cfg.predictor.resume}};
    const auto& ag = cfg.agent.agent;
    j["agent"] = {{"environment", cfg.agent.environment},
                  {"episodes", cfg.agent.episodes},
                  {"max_events", cfg.agent.max_events},
                  {"episode_length", cfg.agent.episode_length},
                  {"max_updates", cfg.agent.max_updates},
                  {"dueling", ag.network.dueling},
                  {"filters", ag.network.filters},
                  {"trunk", ag.network.trunk},
                  {"stream", ag.network.stream},
                  {"replay_capacity", ag.replay_capacity},
                  {"batch", ag.batch},
                  {"target_sync", ag.target_sync},
                  {"learning_rate", ag.adam.lr},
                  {"exploration_start", ag.exploration.start},
                  {"exploration_end", ag.exploration.end},
                  {"exploration_steps", ag.exploration.decay_steps},
                  {"epsilon_mu", ag.epsilon.mu},
                  {"epsilon_sigma", ag.epsilon.sigma}};
    Json positions = Json::array();
    for (const auto& p : cfg.liquidity.positions) {
        positions.push_back({{"owner", p.owner}, {"lo", p.lo}, {"hi", p.hi}, {"liquidity", p.liquidity}});
    }
    j["liquidity"] = {{"sigma", cfg.liquidity.sigma ? Json(*cfg.liquidity.sigma) : Json(nullptr)},
                      {"sigma_window", cfg.liquidity.sigma_window},
                      {"horizon", cfg.liquidity.horizon},
                      {"positions", positions}};
    j["output"] = {{"dir", cfg.out_dir}};
    return j;
}

inline PriceSeries load_series(const SimConfig& cfg) {
    const auto& d = cfg.data;
    if (d.source == "file") return load_csv(d.path, d.price_column);
    if (d.source == "synth_sine") {
        auto s = synth_sine(d.n, d.period, d.amplitude, d.center);
        s.seed = cfg.seed.value_or(0);
        return s;
    }
    return synth_gbm(cfg.seed.value(), d.n, d.mu, d.sigma, d.p0);
}

// ---------------------------------------------------------------------------
// Replay

enum class Centering { Predictive, LookBack };

inline const char* to_string(Centering c) { return c == Centering::Predictive ? "predictive" : "look_back"; }

/// One replayed interval. Loss columns are per-interval increments.
struct TickRow {
    std::int64_t t = 0;
    double v = 0.0;
    int event = 0;
    int rebalance = 0;
    double div_off = 0.0;
    double div_on = 0.0;
    double slip_off = 0.0;
    double slip_on = 0.0;
    double fee = 0.0;
    double fee_center = 0.0;
    double fee_distributed = 0.0;
    double fee_carried = 0.0;
    /// Set when a prediction made `horizon` intervals earlier is scored at this tick.
    std::optional<double> pred_err;
    std::optional<double> center_err;
    double expected_load = 0.0;
    double capitalization = 0.0;
};

struct RunReport {
    std::size_t ticks = 0;
    std::size_t events = 0;
    std::size_t rebalances = 0;
    double divergence_loss_off = 0.0;
    double divergence_loss_on = 0.0;
    double slippage_off = 0.0;
    double slippage_on = 0.0;
    double mean_prediction_error = 0.0;
    double mean_center_error = 0.0;
    double mean_expected_load = 0.0;
    double fees_accrued = 0.0;
    double fees_distributed = 0.0;
    double fees_carried = 0.0;
    double mean_capitalization = 0.0;
    double capital_efficiency = 0.0;

    /// ON / OFF cumulative divergence loss; 1 when nothing was lost without pseudo-arbitrage.
    double divergence_ratio() const {
        return divergence_loss_off > 0.0 ? divergence_loss_on / divergence_loss_off : 1.0;
    }
};

/// Sums and means of the per-tick columns.
inline RunReport aggregate(const std::vector<TickRow>& rows) {
    RunReport r;
    r.ticks = rows.size();
    std::size_t scored = 0;
    std::size_t centered = 0;
    double pred_sum = 0.0;
    double center_sum = 0.0;
    double load_sum = 0.0;
    double cap_sum = 0.0;
    for (const auto& row : rows) {
        r.events += static_cast<std::size_t>(row.event);
        r.rebalances += static_cast<std::size_t>(row.rebalance);
        r.divergence_loss_off += row.div_off;
        r.divergence_loss_on += row.div_on;
        r.slippage_off += row.slip_off;
        r.slippage_on += row.slip_on;
        r.fees_accrued += row.fee;
        r.fees_distributed += row.fee_distributed;
        r.fees_carried += row.fee_carried;
        load_sum += row.expected_load;
        cap_sum += row.capitalization;
        if (row.pred_err) {
            pred_sum += *row.pred_err;
            ++scored;
        }
        if (row.center_err) {
            center_sum += *row.center_err;
            ++centered;
        }
    }
    if (scored) r.mean_prediction_error = pred_sum / static_cast<double>(scored);
    if (centered) r.mean_center_error = center_sum / static_cast<double>(centered);
    if (!rows.empty()) {
        r.mean_expected_load = load_sum / static_cast<double>(rows.size());
        r.mean_capitalization = cap_sum / static_cast<double>(rows.size());
    }
    if (r.mean_capitalization > 0.0) r.capital_efficiency = r.fees_distributed / r.mean_capitalization;
    return r;
}

inline Json report_to_json(const RunReport& r) {
    return Json{{"ticks", r.ticks},
                {"events", r.events},
                {"rebalances", r.rebalances},
                {"divergence_loss_off", r.divergence_loss_off},
                {"divergence_loss_on", r.divergence_loss_on},
                {"divergence_ratio", r.divergence_ratio()},
                {"slippage_off", r.slippage_off},
                {"slippage_on", r.slippage_on},
                {"mean_prediction_error", r.mean_prediction_error},
                {"mean_center_error", r.mean_center_error},
                {"mean_expected_load", r.mean_expected_load},
                {"fees_accrued", r.fees_accrued},
                {"fees_distributed", r.fees_distributed},
                {"fees_carried", r.fees_carried},
                {"mean_capitalization", r.mean_capitalization},
                {"capital_efficiency", r.capital_efficiency}};
}

inline constexpr const char* kTickHeader =
    "t,v,event,rebalance,div_off,div_on,slip_off,slip_on,fee,fee_center,fee_distributed,fee_carried,pred_err,"
    "center_err,expected_load,capitalization";

inline void write_ticks_csv(std::ostream& out, const std::vector<TickRow>& rows) {
    out << kTickHeader << '\n';
    char buf[64];
    const auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out << buf;
    };
    const auto opt = [&](const std::optional<double>& x) {
        if (x) num(*x);
    };
    for (const auto& r : rows) {
        out << r.t << ',';
        num(r.v);
        out << ',' << r.event << ',' << r.rebalance << ',';
        num(r.div_off);
        out << ',';
        num(r.div_on);
        out << ',';
        num(r.slip_off);
        out << ',';
        num(r.slip_on);
        out << ',';
        num(r.fee);
        out << ',';
        num(r.fee_center);
        out << ',';
        num(r.fee_distributed);
        out << ',';
        num(r.fee_carried);
        out << ',';
        opt(r.pred_err);
        out << ',';
        opt(r.center_err);
        out << ',';
        num(r.expected_load);
        out << ',';
        num(r.capitalization);
        out << '\n';
    }
}

inline std::vector<TickRow> read_ticks_csv(std::istream& in, const std::string& name = "<ticks>") {
    std::string line;
    if (!std::getline(in, line) || line != kTickHeader) throw DataError(name + ":1: unexpected tick CSV header");
    std::vector<TickRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(line_no);
        const auto f = detail::split_csv(line);
        if (f.size() != 16) throw DataError(where + ": expected 16 fields");
        const auto num = [&](std::size_t i) { return detail::parse_double(f[i], where); };
        const auto opt = [&](std::size_t i) -> std::optional<double> {
            if (f[i].empty()) return std::nullopt;
            return num(i);
        };
        TickRow r;
        r.t = static_cast<std::int64_t>(num(0));
        r.v = num(1);
        r.event = static_cast<int>(num(2));
        r.rebalance = static_cast<int>(num(3));
        r.div_off = num(4);
        r.div_on = num(5);
        r.slip_off = num(6);
        r.slip_on = num(7);
        r.fee = num(8);
        r.fee_center = num(9);
        r.fee_distributed = num(10);
        r.fee_carried = num(11);
        r.pred_err = opt(12);
        r.center_err = opt(13);
        r.expected_load = num(14);
        r.capitalization = num(15);
        rows.push_back(r);
    }
    return rows;
}

/// Predictions v'_p made at each tick for the equilibrium valuation `horizon` ticks ahead.
/// Ticks before the first full window fall back to the current equilibrium valuation.
inline std::vector<double> predict_series(const Predictor& model, const PriceSeries& series, double pool_c) {
    const BondingCurve curve(pool_c);
    const std::size_t w = model.config().window;
    std::vector<double> out(series.size());
    for (std::size_t t = 0; t < series.size() && t + 1 < w; ++t) {
        out[t] = equilibrium_valuation(curve, series.valuation(t)).value();
    }
    std::vector<FeatureWindow> windows;
    const std::size_t chunk = 256;
    for (std::size_t start = w - 1; start < series.size(); start += chunk) {
        const std::size_t end = std::min(series.size(), start + chunk);
        windows.clear();
        for (std::size_t t = start; t < end; ++t) windows.push_back(make_window(series, {}, t, w));
        const auto pred = model.predict_batch(windows);
        std::copy(pred.begin(), pred.end(), out.begin() + static_cast<std::ptrdiff_t>(start));
    }
    return out;
}

struct ReplayResult {
    RunReport report;
    std::vector<TickRow> rows;
    PredictionLog log;
};

/// Replays `series` through a reference pool (arbitraged on the primary curve every interval) and
/// a pseudo-arbitrage pool (curve shifted at every price event, arbitraged normally within the
/// band, returned to the primary curve by LP deposits once the ledger exceeds the threshold).
///
/// Trading fees are `fee_rate` times the value of the reference pool's arbitrage input and are
/// distributed every interval under the fee density effective at that interval. `predictions[t]`
/// is the centre scheduled at t for t + horizon; with `predictions` empty the schedule uses the
/// current equilibrium valuation (look-back centering).
inline ReplayResult simulate(const SimConfig& cfg, const PriceSeries& series, const std::vector<double>& predictions,
                             std::size_t horizon) {
    validate_series(series);
    if (!predictions.empty() && predictions.size() != series.size()) {
        throw std::invalid_argument("one prediction per tick expected");
    }
    const BondingCurve primary(cfg.pool.c);
    std::vector<double> values(series.size());
    std::vector<double> eq(series.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = series[i].v_obs;
        eq[i] = equilibrium_valuation(primary, series.valuation(i)).value();
    }
    const std::size_t lookback = cfg.predictor.model.window;
    const std::size_t first_scored = lookback - 1 + horizon;

    ReplayResult result;
    ConcentrationSchedule schedule(cfg.liquidity.sigma.value_or(kDefaultFeeSigma));
    Point off = equilibrium_state(primary, series.valuation(0));
    VirtualPool on{primary, off.x, off.y};
    InventoryLedger ledger;
    double anchor = values[0];

    result.rows.reserve(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        TickRow row;
        row.t = series[t].t;
        row.v = values[t];
        const Valuation v(values[t]);
        if (t > 0 && values[t] != values[t - 1]) {
            const Valuation prev(values[t - 1]);
            row.div_off = divergence_loss(primary, prev, v);
            row.slip_off = std::abs(slippage_loss(primary, prev, v));
            const Point next = equilibrium_state(primary, v);
            const double input = next.x > off.x ? v.value() * (next.x - off.x) : v.complement() * (next.y - off.y);
            row.fee = cfg.pool.fee_rate * input;
            off = next;

            const bool event = !(anchor * (1.0 - cfg.event.beta_v) <= values[t] && values[t] <= anchor * (1.0 + cfg.event.beta_v));
            if (event) {
                const ShiftResult shift = pseudo_arbitrage_shift(on.curve, prev, v);
                row.div_on = std::max(0.0, arbitrage_profit(shift.curve, on.holdings(), v));
                ledger = accrue_shortfall(ledger, shift);
                on.curve = shift.curve;
                row.event = 1;
                anchor = values[t];
            } else {
                row.div_on = divergence_loss(on.curve, prev, v);
                row.slip_on = std::abs(slippage_loss(on.curve, prev, v));
                const Point held = equilibrium_state(on.curve, v);
                on.x = held.x;
                on.y = held.y;
            }
            if (needs_rebalance(on, ledger, cfg.pool.rebalance_threshold)) {
                const RebalanceResult rb = rebalance_deposit(on, ledger);
                on = VirtualPool::from(rb.pool);
                ledger = rb.ledger;
                row.rebalance = 1;
            }
        }
        row.capitalization = dot(v, on.holdings());

        const double sigma = cfg.liquidity.sigma.value_or(default_fee_sigma(values, t, cfg.liquidity.sigma_window));
        const double center = predictions.empty() || horizon == 0 ? eq[t] : predictions[t];
        schedule.shift_concentration(row.t, center, static_cast<std::int64_t>(horizon), sigma);
        const FeeDistribution dist = schedule.effective(row.t, eq[t]);
        schedule.log().realize(row.t, eq[t]);
        row.fee_center = dist.mu();
        const FeeAllocation alloc = allocate_fees(cfg.liquidity.positions, row.fee, dist);
        row.fee_distributed = alloc.distributed;
        row.fee_carried = alloc.carried_over;
        if (t >= first_scored) {
            row.center_err = std::abs(row.fee_center - eq[t]);
            row.pred_err = std::abs((predictions.empty() ? eq[t - horizon] : predictions[t - horizon]) - eq[t]);
        }
        if (t > 0) {
            const auto density = forward_density(values, t, lookback, static_cast<double>(std::max<std::size_t>(horizon, 1)));
            row.expected_load = expected_load(primary, v, density);
        }
        result.rows.push_back(row);
    }
    result.report = aggregate(result.rows);
    result.log = schedule.log();
    return result;
}

inline Predictor load_predictor(const std::string& path) {
    if (path.empty() || !std::filesystem::exists(path)) throw ConfigError("missing predictor checkpoint: " + path);
    return Predictor::load(nn::load_checkpoint(path));
}

inline std::string predictor_checkpoint_path(const SimConfig& cfg) {
    return cfg.predictor.checkpoint.empty() ? (std::filesystem::path(cfg.out_dir) / "predictor.ckpt").string()
                                            : cfg.predictor.checkpoint;
}

/// Replay with predictive centering when a predictor is given, look-back centering otherwise.
inline ReplayResult run_replay(const SimConfig& cfg, const PriceSeries& series, const Predictor* model = nullptr) {
    if (model) return simulate(cfg, series, predict_series(*model, series, cfg.pool.c), cfg.liquidity.horizon);
    return simulate(cfg, series, {}, cfg.liquidity.horizon);
}

struct EvaluateResult {
    ReplayResult predictive;
    ReplayResult look_back;

    /// Predictive over look-back mean |fee centre - realised v'|.
    double center_error_ratio() const {
        const double lb = look_back.report.mean_center_error;
        return lb > 0.0 ? predictive.report.mean_center_error / lb : 1.0;
    }
};

/// Paired replays that differ only in how the fee density is centred.
inline EvaluateResult run_evaluate(const SimConfig& cfg, const PriceSeries& series, const Predictor& model) {
    EvaluateResult r;
    const std::size_t h = cfg.liquidity.horizon;
    r.predictive = simulate(cfg, series, h == 0 ? std::vector<double>{} : predict_series(model, series, cfg.pool.c), h);
    r.look_back = simulate(cfg, series, {}, h);
    return r;
}

inline Json evaluate_to_json(const EvaluateResult& r) {
    return Json{{"predictive", report_to_json(r.predictive.report)},
                {"look_back", report_to_json(r.look_back.report)},
                {"center_error_ratio", r.center_error_ratio()}};
}

// ---------------------------------------------------------------------------
// Training

struct PredictorTrainResult {
    std::vector<EpochStats> curve;
    std::size_t epochs_done = 0;
    double final_mae = 0.0;
    bool converged = false;
};

inline void write_curve_csv(std::ostream& out, const std::vector<EpochStats>& curve) {
    char buf[160];
    out << "epoch,mean_abs_err,mean_expected_load,loss\n";
    for (const auto& s : curve) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", s.epoch, s.mean_abs_err, s.mean_expected_load, s.objective);
        out << buf;
    }
}

/// Trains (or resumes) the predictor and writes predictor.ckpt and predictor_curve.csv into `out_dir`.
/// Converged means the held-out-free in-sample mean |v' - v'_p| is below `target_mae`.
inline PredictorTrainResult run_train_predictor(const SimConfig& cfg, const PriceSeries& series,
                                                const std::filesystem::path& out_dir) {
    const std::uint64_t seed = cfg.seed.value_or(0);
    std::optional<Predictor> model;
    nn::AdamState adam;
    adam.config.lr = cfg.predictor.learning_rate;
    std::size_t first_epoch = 0;
    if (!cfg.predictor.resume.empty()) {
        if (!std::filesystem::exists(cfg.predictor.resume)) {
            throw ConfigError("missing checkpoint to resume: " + cfg.predictor.resume);
        }
        const auto ck = nn::load_checkpoint(cfg.predictor.resume);
        model.emplace(Predictor::load(ck));
        ck.load_adam(adam, "predictor.adam.");
        first_epoch = std::stoul(ck.get("train.epochs_done"));
    } else {
        model.emplace(cfg.predictor.model, seed);
    }
    PredictorConfig mc = cfg.predictor.model;
    if (model->config().window != mc.window || model->config().hidden != mc.hidden ||
        model->config().horizon != mc.horizon || model->config().batch != mc.batch) {
        throw ConfigError("predictor: resumed checkpoint shape differs from the configuration");
    }
    const auto set = make_supervised_set(series, model->config(), cfg.pool.c);
    PredictorTrainResult r;
    const std::size_t remaining = mc.epochs > first_epoch ? mc.epochs - first_epoch : 0;
    r.curve = train_supervised(*model, adam, series, set, seed, first_epoch, remaining);
    r.epochs_done = first_epoch + remaining;
    r.final_mae = evaluate_mae(*model, series, set);
    r.converged = r.final_mae < cfg.predictor.target_mae;

    std::filesystem::create_directories(out_dir);
    nn::Checkpoint ck;
    model->save(ck);
    ck.add_adam(adam, "predictor.adam.");
    ck.meta["train.epochs_done"] = std::to_string(r.epochs_done);
    ck.meta["train.seed"] = std::to_string(seed);
    nn::save_checkpoint((out_dir / "predictor.ckpt").string(), ck);
    std::ofstream curve(out_dir / "predictor_curve.csv");
    write_curve_csv(curve, r.curve);
    return r;
}

struct AgentTrainResult {
    std::vector<EpisodeRow> rows;
    std::size_t updates = 0;
    /// Fraction of fresh probe states where the greedy action is InsertEpsilon (controlled runs).
    double dominant_fraction = 0.0;
    bool converged = true;
};

inline void write_episodes_csv(std::ostream& out, const std::vector<EpisodeRow>& rows) {
    char buf[256];
    out << "episode,event_k,ell,reward,cum_reward,action,epsilon_value\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%d,%.17g,%s,%.17g\n", r.episode, r.event_k, r.ell, r.reward,
                      r.cum_reward, to_string(r.action), r.epsilon_value);
        out << buf;
    }
}

/// Trains the agent in the configured environment and writes agent.ckpt and agent_episodes.csv.
inline AgentTrainResult run_train_agent(const SimConfig& cfg, const std::filesystem::path& out_dir) {
    const std::uint64_t seed = cfg.seed.value_or(0);
    AgentConfig ac = cfg.agent.agent;
    DqnAgent agent(ac, seed);
    AgentTrainResult r;
    if (cfg.agent.environment == "controlled") {
        ControlledEnvironment env(ac.network.window, cfg.agent.episode_length, seed + 1);
        r.rows = train_agent(env, agent, cfg.agent.episodes, seed, cfg.agent.max_updates);
        ControlledEnvironment probe(ac.network.window, 1, seed + 2);
        std::size_t hits = 0;
        const std::size_t probes = 100;
        for (std::size_t i = 0; i < probes; ++i) hits += agent.greedy(probe.draw()) == Action::InsertEpsilon;
        r.dominant_fraction = static_cast<double>(hits) / static_cast<double>(probes);
        r.converged = hits == probes;
    } else {
        const PriceSeries series = load_series(cfg);
        const Predictor model = load_predictor(predictor_checkpoint_path(cfg));
        MarketEnvConfig mc;
        mc.event = cfg.event;
        mc.reward = cfg.reward;
        mc.pool_c = cfg.pool.c;
        mc.max_events = cfg.agent.max_events;
        MarketEnvironment env(series, model, mc);
        r.rows = train_agent(env, agent, cfg.agent.episodes, seed, cfg.agent.max_updates);
    }
    r.updates = agent.updates();
    std::filesystem::create_directories(out_dir);
    nn::Checkpoint ck;
    agent.save(ck);
    nn::save_checkpoint((out_dir / "agent.ckpt").string(), ck);
    std::ofstream csv(out_dir / "agent_episodes.csv");
    write_episodes_csv(csv, r.rows);
    return r;
}

// ---------------------------------------------------------------------------
// Output

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline void write_replay_outputs(const std::filesystem::path& dir, const ReplayResult& r, const std::string& stem = "ticks") {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / (stem + ".csv"), std::ios::binary);
        write_ticks_csv(out, r.rows);
    }
    {
        std::ofstream out(dir / (stem + "_predictions.csv"), std::ios::binary);
        r.log.write_csv(out);
    }
}

}  // namespace pamm
