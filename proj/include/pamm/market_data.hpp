#pragma once

// Oracle price series: CSV ingestion, price-to-valuation normalisation and seeded
// synthetic generators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pamm/amm_core.hpp"

namespace pamm {

struct PriceTick {
    std::int64_t t;
    double v_obs;
    double tau;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PriceSeries {
    std::vector<PriceTick> ticks;
    std::string source;
    std::uint64_t seed = 0;

    std::size_t size() const { return ticks.size(); }
    const PriceTick& operator[](std::size_t i) const { return ticks[i]; }
    Valuation valuation(std::size_t i) const { return Valuation(ticks[i].v_obs); }
};

/// v = P / (1 + P) for the price P of X in units of Y, so v / (1 - v) = P.
inline Valuation normalize_price(double price) {
    if (!(price > 0.0) || !std::isfinite(price)) {
        throw std::domain_error("oracle price must be positive and finite");
    }
    return Valuation(price / (1.0 + price));
}

inline void validate_tick(const PriceTick& tick, const std::string& where) {
    if (!(tick.v_obs > 0.0 && tick.v_obs < 1.0)) {
        throw DataError(where + ": v_obs " + std::to_string(tick.v_obs) + " outside (0,1)");
    }
    if (!(tick.tau >= -1.0 && tick.tau <= 1.0)) {
        throw DataError(where + ": tau " + std::to_string(tick.tau) + " outside [-1,1]");
    }
    if (tick.t < 0) {
        throw DataError(where + ": negative interval index");
    }
}

/// Series invariants: non-empty, valid ticks, strictly increasing gap-free indices.
inline void validate_series(const PriceSeries& series) {
    if (series.ticks.empty()) throw DataError("price series is empty");
    for (std::size_t i = 0; i < series.size(); ++i) {
        validate_tick(series[i], "tick " + std::to_string(i));
        if (i > 0 && series[i].t != series[i - 1].t + 1) {
            throw DataError("tick " + std::to_string(i) + ": interval index " + std::to_string(series[i].t) +
                            " does not follow " + std::to_string(series[i - 1].t));
        }
    }
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(s, &used);
    } catch (const std::exception&) {
        throw DataError(where + ": cannot parse '" + s + "' as a number");
    }
    if (used != s.size()) throw DataError(where + ": trailing characters in '" + s + "'");
    return value;
}

}  // namespace detail

/// Reads `t,v_obs,tau` (or `t,price,tau` when `price_column` is set, normalised on load).
inline PriceSeries parse_csv(std::istream& in, bool price_column = false, const std::string& name = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw DataError(name + ": missing header");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
    const auto header = detail::split_csv(line);
    const std::string value_col = price_column ? "price" : "v_obs";
    if (header != std::vector<std::string>{"t", value_col, "tau"}) {
        throw DataError(name + ":1: expected header 't," + value_col + ",tau'");
    }
    PriceSeries series;
    series.source = name;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = name + ":" + std::to_string(line_no);
        const auto fields = detail::split_csv(line);
        if (fields.size() != 3) throw DataError(where + ": expected 3 fields, got " + std::to_string(fields.size()));
        const double t = detail::parse_double(fields[0], where);
        if (t != std::floor(t) || t < 0.0 || t > 9.0e15) throw DataError(where + ": t must be a nonnegative integer");
        PriceTick tick{static_cast<std::int64_t>(t), 0.0, detail::parse_double(fields[2], where)};
        const double value = detail::parse_double(fields[1], where);
        if (price_column) {
            if (!(value > 0.0)) throw DataError(where + ": price must be positive");
            tick.v_obs = value / (1.0 + value);
        } else {
            tick.v_obs = value;
        }
        validate_tick(tick, where);
        if (!series.ticks.empty()) {
            const auto prev = series.ticks.back().t;
            if (tick.t <= prev) throw DataError(where + ": t is not strictly increasing");
            if (tick.t != prev + 1) throw DataError(where + ": gap in interval indices");
        }
        series.ticks.push_back(tick);
    }
    if (series.ticks.empty()) throw DataError(name + ": no data rows");
    return series;
}

inline PriceSeries load_csv(const std::string& path, bool price_column = false) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return parse_csv(in, price_column, path);
}

inline void write_csv(std::ostream& out, const PriceSeries& series) {
    out.precision(17);
    out << "t,v_obs,tau\n";
    for (const auto& tick : series.ticks) out << tick.t << ',' << tick.v_obs << ',' << tick.tau << '\n';
}

/// Log-Euler GBM in the oracle price with unit time step; v_obs = P/(1+P).
/// tau_t = clamp(sign(r_{t-1}) + N(0, 0.25^2), -1, 1) with r the log-return, and r_{-1} = 0.
inline PriceSeries synth_gbm(std::uint64_t seed, std::size_t n, double mu, double sigma, double p0) {
    if (n < 2 || !(sigma >= 0.0) || !(p0 > 0.0) || !std::isfinite(mu)) {
        throw std::invalid_argument("synth_gbm needs n >= 2, sigma >= 0, p0 > 0");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> shock(0.0, 1.0);
    std::normal_distribution<double> tau_noise(0.0, 0.25);
    PriceSeries series;
    series.source = "synth_gbm";
    series.seed = seed;
    series.ticks.reserve(n);
    double log_price = std::log(p0);
    double last_return = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double sign = last_return > 0.0 ? 1.0 : (last_return < 0.0 ? -1.0 : 0.0);
        const double tau = std::clamp(sign + tau_noise(rng), -1.0, 1.0);
        const double price = std::exp(log_price);
        series.ticks.push_back({static_cast<std::int64_t>(t), price / (1.0 + price), tau});
        last_return = (mu - 0.5 * sigma * sigma) + sigma * shock(rng);
        log_price += last_return;
    }
    validate_series(series);
    return series;
}

/// v_obs = center + amplitude sin(2 pi t / period); tau = cos(2 pi t / period) leads v by a quarter period.
inline PriceSeries synth_sine(std::size_t n, double period, double amplitude, double center) {
    if (n < 1 || !(period > 0.0)) throw std::invalid_argument("synth_sine needs n >= 1 and period > 0");
    if (center - std::abs(amplitude) <= 0.01 || center + std::abs(amplitude) >= 0.99) {
        throw std::domain_error("sine series must stay inside (0.01, 0.99)");
    }
    PriceSeries series;
    series.source = "synth_sine";
    series.ticks.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / period;
        series.ticks.push_back({static_cast<std::int64_t>(t), center + amplitude * std::sin(phase), std::cos(phase)});
    }
    return series;
}

/// Sample standard deviation of the last `window` values ending at index t (inclusive).
inline double rolling_std(const std::vector<double>& values, std::size_t t, std::size_t window) {
    const std::size_t begin = t + 1 >= window ? t + 1 - window : 0;
    const std::size_t count = t + 1 - begin;
    if (count < 2) return 0.0;
    double mean = 0.0;
    for (std::size_t i = begin; i <= t; ++i) mean += values[i];
    mean /= static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t i = begin; i <= t; ++i) ss += (values[i] - mean) * (values[i] - mean);
    return std::sqrt(ss / static_cast<double>(count - 1));
}

}  // namespace pamm
