// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pamm/sim.hpp"

using namespace pamm;
using nn::Matrix;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

template <class Fwd, class Bwd>
nn::GradCheckReport mse_check(const nn::ParameterList& params, Fwd fwd, Bwd bwd, const Matrix& target, double tol) {
    const auto loss = [&] { return 0.5 * (fwd() - target).squaredNorm(); };
    const auto analytic = [&] { bwd(Matrix(fwd() - target)); };
    return nn::grad_check(params, loss, analytic, tol, 1e-5, 200);
}

/// Equal up to `ulps` units in the last place.
bool ulp_equal(double a, double b, int ulps = 4) {
    return std::abs(a - b) <= ulps * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b));
}

std::pair<double, double> phi(double c, double v) {
    const double x = std::sqrt(c * (1.0 - v) / v);
    return {x, c / x};
}

double div_def(double v, double w) { return oracle::value(w, phi(1.0, v)) - oracle::value(w, phi(1.0, w)); }

double slip_def(double v, double w) {
    return (1.0 - w) / (1.0 - v) * (oracle::value(v, phi(1.0, w)) - oracle::value(v, phi(1.0, v)));
}

double load_def(double v, double w) {
    if (w <= v) return div_def(v, w) * slip_def(v, w);
    return div_def(1.0 - v, 1.0 - w) * slip_def(1.0 - v, 1.0 - w);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pamm_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------

Outcome closed_forms() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> ux(0.05, 20.0);
    std::uniform_real_distribution<double> ud(-0.95, 20.0);
    double worst_div = 0.0, worst_slip = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double x = ux(rng);
        const double delta = ud(rng) * x;
        const double v = 1.0 / (1.0 + x * x);
        const double w = 1.0 / (1.0 + (x + delta) * (x + delta));
        worst_div = std::max(worst_div, std::abs(divergence_loss_closed(x, delta) - div_def(v, w)));
        worst_slip = std::max(worst_slip, std::abs(std::abs(slippage_loss_closed(x, delta)) - slip_def(v, w)));
    }
    return {worst_div < 1e-9 && worst_slip < 1e-9, fmt("max |div err| %.2e, max |slip err| %.2e", worst_div, worst_slip)};
}

Outcome equilibrium() {
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    const BondingCurve f(1.0);
    double worst_slope = 0.0, worst_grid = 0.0;
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
        const Valuation v(u(rng));
        const double x = equilibrium_x(f, v);
        const double slope_err = std::abs(f.slope(x) + v.relative_price());
        worst_slope = std::max(worst_slope, slope_err / (1.0 + v.relative_price()));
        const auto [gx, gcap] = oracle::grid_equilibrium(1.0, v.value(), 1e-3, 1e3, 200000);
        const double rel = std::abs(gx - x) / x;
        worst_grid = std::max(worst_grid, rel);
        ok = ok && slope_err < 1e-10 * (1.0 + v.relative_price()) && rel < 1e-4 &&
             equilibrium_capitalization(f, v) <= gcap + 1e-14;
    }
    return {ok, fmt("max slope residual %.2e, max grid |dx|/x %.2e (grid step 6.9e-5)", worst_slope, worst_grid)};
}

Outcome pseudo_arbitrage() {
    const BondingCurve f(1.0);
    const auto ex = pseudo_arbitrage_shift(f, Valuation(0.5), Valuation(0.8));
    const bool example = ulp_equal(ex.shift_x, 0.5) && ulp_equal(ex.shift_y, 1.0) && ulp_equal(ex.curve(1.0), 1.0) &&
                         ulp_equal(ex.curve.slope(1.0), -4.0);
    std::mt19937_64 rng(103);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Valuation v(u(rng));
        const Valuation w(u(rng));
        if (v == w) continue;
        const auto r = pseudo_arbitrage_shift(f, v, w);
        worst = std::max(worst, arbitrage_profit(r.curve, equilibrium_state(f, v), w));
    }
    return {example && worst < 1e-10,
            fmt("worked example %s (shift (%g, %g), slope %g at (1,1)); max post-shift profit %.2e",
                example ? "exact to 4 ulp" : "MISMATCH", ex.shift_x, ex.shift_y, ex.curve.slope(1.0), worst)};
}

Outcome quadrature() {
    const BondingCurve f(1.0);
    double worst = 0.0;
    const auto compare = [&](double v, const ValuationDensity& d) {
        const double ref =
            oracle::midpoint([&](double w) { return d.pdf(w) * load_def(v, w); }, 1e-4, 1.0 - 1e-4, 1000000);
        worst = std::max(worst, std::abs(expected_load(f, Valuation(v), d) - ref));
    };
    compare(0.5, ValuationDensity::uniform());
    compare(0.3, ValuationDensity::uniform());
    compare(0.5, ValuationDensity::truncated_gaussian(0.5, 0.15));
    compare(0.3, ValuationDensity::truncated_gaussian(0.35, 0.1));
    return {worst < 1e-6, fmt("max |simpson - midpoint(1e6)| %.2e over 4 cases", worst)};
}

Outcome gradients() {
    std::mt19937_64 rng(104);
    std::vector<std::string> failed;
    double worst = 0.0;
    const auto record = [&](const char* name, const nn::GradCheckReport& r) {
        worst = std::max(worst, r.max_rel_error);
        if (!r.pass) failed.push_back(name);
    };
    using nn::Activation;
    {
        nn::Dense a(4, 3, Activation::LeakyRelu), b(3, 2, Activation::LeakyRelu), c(2, 1, Activation::Linear);
        for (auto* l : {&a, &b, &c}) l->init(rng);
        nn::ParameterList ps;
        for (auto* l : {&a, &b, &c}) l->collect(ps);
        const Matrix x = random_matrix(4, 5, rng);
        const Matrix t = random_matrix(1, 5, rng);
        record("dense stack", mse_check(ps, [&] { return c.forward(b.forward(a.forward(x))); },
                                        [&](const Matrix& dy) { a.backward(b.backward(c.backward(dy))); }, t, 1e-4));
    }
    {
        nn::Dense a(4, 3, Activation::Linear), b(3, 2, Activation::Linear);
        a.init(rng);
        b.init(rng);
        nn::ParameterList ps;
        a.collect(ps);
        b.collect(ps);
        const Matrix x = random_matrix(4, 6, rng);
        const Matrix t = random_matrix(2, 6, rng);
        record("linear net (1e-6)", mse_check(ps, [&] { return b.forward(a.forward(x)); },
                                              [&](const Matrix& dy) { a.backward(b.backward(dy)); }, t, 1e-6));
    }
    {
        const Eigen::Index steps = 5, batch = 3;
        nn::Lstm cell(3, 4);
        cell.init(rng);
        nn::Dense head(4, 1, Activation::Linear);
        head.init(rng);
        nn::Parameter xs("xs", 3, steps * batch);
        xs.value = random_matrix(3, steps * batch, rng);
        nn::ParameterList ps;
        cell.collect(ps);
        head.collect(ps);
        ps.push_back(&xs);
        const Matrix t = random_matrix(1, batch, rng);
        record("lstm stack", mse_check(ps, [&] { return head.forward(cell.forward(xs.value, steps)); },
                                       [&](const Matrix& dy) { xs.grad = cell.backward(head.backward(dy)); }, t, 1e-4));
    }
    {
        const Eigen::Index steps = 6, batch = 2;
        nn::Conv1D conv(3, 4, 3);
        conv.init(rng);
        nn::Parameter xs("xs", 3, steps * batch);
        xs.value = random_matrix(3, steps * batch, rng);
        nn::ParameterList ps;
        conv.collect(ps);
        ps.push_back(&xs);
        const Matrix t = random_matrix(4, batch, rng);
        Matrix pre;
        record("conv1d + time mean",
               mse_check(
                   ps,
                   [&] {
                       pre = conv.forward(xs.value, steps);
                       return nn::time_mean(nn::activate(pre, Activation::LeakyRelu), steps);
                   },
                   [&](const Matrix& dy) {
                       xs.grad = conv.backward(
                           nn::activation_backward(pre, nn::time_mean_backward(dy, steps), Activation::LeakyRelu));
                   },
                   t, 1e-4));
    }
    {
        PredictorConfig cfg;
        cfg.window = 6;
        cfg.hidden = 5;
        cfg.horizon = 2;
        Predictor p(cfg, 5);
        const Matrix xs = random_matrix(3, 6 * 4, rng, 0.5);
        const std::vector<double> t{0.3, 0.6, 0.45, 0.52};
        const auto loss = [&] {
            const auto y = p.forward(xs, 6);
            double l = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) l += 0.5 * (y[i] - t[i]) * (y[i] - t[i]);
            return l;
        };
        const auto analytic = [&] {
            const auto y = p.forward(xs, 6);
            std::vector<double> d(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) d[i] = y[i] - t[i];
            p.backward(d);
        };
        record("predictor (lstm/dense/logistic)", nn::grad_check(p.parameters(), loss, analytic, 1e-4, 1e-5, 200));
    }
    for (bool dueling : {true, false}) {
        QNetworkConfig cfg;
        cfg.window = 6;
        cfg.filters = 4;
        cfg.trunk = 5;
        cfg.stream = 3;
        cfg.dueling = dueling;
        QNetwork net(cfg, 9);
        const Matrix xs = random_matrix(3, 6 * 3, rng);
        const Matrix sc = random_matrix(static_cast<Eigen::Index>(kStateScalars), 3, rng);
        const Matrix t = random_matrix(2, 3, rng);
        record(dueling ? "dueling q network" : "plain q network",
               mse_check(net.parameters(), [&] { return net.forward(xs, sc); }, [&](const Matrix& dy) { net.backward(dy); },
                         t, 1e-4));
    }
    bool control_caught = false;
    {
        nn::Dense layer(3, 2, Activation::Linear);
        layer.init(rng);
        nn::ParameterList ps;
        layer.collect(ps);
        const Matrix x = random_matrix(3, 4, rng);
        const Matrix t = random_matrix(2, 4, rng);
        const auto r = mse_check(
            ps, [&] { return layer.forward(x); },
            [&](const Matrix& dy) {
                layer.backward(dy);
                layer.weight.grad(0, 0) += 0.5;
            },
            t, 1e-4);
        control_caught = !r.pass;
    }
    std::string names;
    for (const auto& n : failed) names += " " + n;
    return {failed.empty() && control_caught,
            fmt("7 checks, max rel error %.2e%s; corrupted gradient %s", worst,
                failed.empty() ? "" : (" failed:" + names).c_str(), control_caught ? "rejected" : "NOT rejected")};
}

Outcome tabular_q() {
    std::mt19937_64 rng(106);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_ratio = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        TabularMdp m(4, 3, 0.8);
        for (std::size_t s = 0; s < 4; ++s) {
            for (std::size_t a = 0; a < 3; ++a) {
                const double p = u(rng);
                m.T(s, a, trial % 4) = p;
                m.T(s, a, (trial + 1) % 4) = 1.0 - p;
                for (std::size_t s2 = 0; s2 < 4; ++s2) m.R(s, a, s2) = 2.0 * u(rng) - 1.0;
            }
        }
        const Matrix k1 = random_matrix(4, 3, rng, 5.0);
        const Matrix k2 = random_matrix(4, 3, rng, 5.0);
        const double lhs = (bellman_apply(m, k1) - bellman_apply(m, k2)).cwiseAbs().maxCoeff();
        worst_ratio = std::max(worst_ratio, lhs / (k1 - k2).cwiseAbs().maxCoeff());
    }
    TabularMdp m(2, 2, 0.5);
    m.T(0, 0, 0) = 1.0;
    m.T(0, 1, 1) = 1.0;
    m.R(0, 1, 1) = 1.0;
    for (std::size_t a = 0; a < 2; ++a) {
        m.T(1, a, 1) = 1.0;
        m.R(1, a, 1) = 1.0;
    }
    std::vector<std::vector<std::vector<double>>> T(2, std::vector<std::vector<double>>(2, std::vector<double>(2)));
    auto R = T;
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t s2 = 0; s2 < 2; ++s2) {
                T[s][a][s2] = m.T(s, a, s2);
                R[s][a][s2] = m.R(s, a, s2);
            }
    const auto ref = oracle::value_iteration(T, R, 0.5, 1e-14);
    std::mt19937_64 qrng(107);
    const Matrix q = tabular_q_learning(m, 200, 0.5, qrng);
    double err = 0.0;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) err = std::max(err, std::abs(q(s, a) - ref[s][a]));
    return {worst_ratio <= 0.8 + 1e-12 && err < 1e-6,
            fmt("max ||BQ1-BQ2||/||Q1-Q2|| %.4f (gamma 0.8); 2-state fixed point error %.2e", worst_ratio, err)};
}

struct SineModel {
    std::optional<Predictor> model;
    SimConfig cfg;
    PriceSeries series;
};

SineModel& sine_model() {
    static SineModel s;
    return s;
}

Outcome predictor_benchmark() {
    SineModel& s = sine_model();
    s.cfg = load_config(std::string(PAMM_SOURCE_DIR) + "/configs/sine_predictor.json");
    s.series = load_series(s.cfg);
    const fs::path dir = scratch("predictor");
    const auto r = run_train_predictor(s.cfg, s.series, dir);
    s.model.emplace(load_predictor((dir / "predictor.ckpt").string()));
    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t e = 1; e < r.curve.size(); ++e) {
        const double ratio = r.curve[e].mean_abs_err / r.curve[e - 1].mean_abs_err;
        worst = std::max(worst, ratio);
        if (ratio > 1.05) ++violations;
    }
    return {r.final_mae < 0.005 && violations == 0 && r.epochs_done == 50,
            fmt("final MAE %.5f (target < 0.005); epoch-1 MAE %.5f; worst epoch ratio %.4f, %zu above 1.05",
                r.final_mae, r.curve.front().mean_abs_err, worst, violations)};
}

Outcome agent_sanity() {
    const SimConfig cfg = load_config(std::string(PAMM_SOURCE_DIR) + "/configs/controlled_agent.json");
    const auto r = run_train_agent(cfg, scratch("agent"));

    int online_calls = 0, target_calls = 0;
    const auto online = [&](int) {
        ++online_calls;
        return QValues{-1.0, 10.0};
    };
    const auto target = [&](int) {
        ++target_calls;
        return QValues{100.0, 2.0};
    };
    const double y = td_target(0.0, 1, online, target, 0.5, false);
    const bool wired = y == 1.0 && online_calls == 1 && target_calls == 1;
    return {r.converged && r.updates <= 500 && wired,
            fmt("greedy on dominant action for %.0f%% of probes after %zu updates; double-DQN target %s", 100.0 * r.dominant_fraction,
                r.updates, wired ? "uses online argmax with target evaluation" : "MISWIRED")};
}

Outcome end_to_end() {
    const SimConfig gbm = load_config(std::string(PAMM_SOURCE_DIR) + "/configs/gbm_replay.json");
    const auto replay = run_replay(gbm, load_series(gbm));
    const bool lower = replay.report.divergence_loss_on < replay.report.divergence_loss_off;

    SineModel& s = sine_model();
    if (!s.model) return {false, "no trained predictor from the benchmark criterion"};
    const auto ev = run_evaluate(s.cfg, s.series, *s.model);
    const bool centred = ev.predictive.report.mean_center_error < ev.look_back.report.mean_center_error;
    return {lower && centred,
            fmt("(i) divergence ON/OFF %.3e (%.4g vs %.4g, %zu events, %zu rebalances); "
                "(iii) centre error predictive/look-back %.4f (%.5f vs %.5f)",
                replay.report.divergence_ratio(), replay.report.divergence_loss_on, replay.report.divergence_loss_off,
                replay.report.events, replay.report.rebalances, ev.center_error_ratio(),
                ev.predictive.report.mean_center_error, ev.look_back.report.mean_center_error)};
}

Outcome conservation() {
    std::mt19937_64 rng(110);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_alloc = 0.0;
    for (int trial = 0; trial < 2000; ++trial) {
        const FeeDistribution d(0.05 + 0.9 * u(rng), 0.01 + 0.49 * u(rng));
        std::vector<LPPosition> ps;
        for (int i = 0; i < 1 + trial % 6; ++i) {
            const double a = u(rng), b = u(rng);
            if (a != b) ps.push_back({"lp" + std::to_string(i), std::min(a, b), std::max(a, b), 10.0 * u(rng)});
        }
        if (ps.empty()) continue;
        const double fee = 100.0 * u(rng);
        const auto r = allocate_fees(ps, fee, d);
        double sum = r.carried_over;
        for (double x : r.per_position) sum += x;
        worst_alloc = std::max(worst_alloc, std::abs(sum - fee));
    }
    double worst_norm = 0.0;
    for (double mu : {0.05, 0.25, 0.5, 0.75, 0.95}) {
        for (double sigma : {0.01, 0.05, 0.2, 0.5}) {
            const FeeDistribution d(mu, sigma);
            const double m = oracle::midpoint([&](double x) { return d.pdf(x); }, 0.0, 1.0, 1000000);
            worst_norm = std::max(worst_norm, std::abs(m - 1.0));
        }
    }
    SimConfig cfg = load_config(std::string(PAMM_SOURCE_DIR) + "/configs/gbm_replay.json");
    cfg.data.n = 3000;
    const auto a = run_replay(cfg, load_series(cfg));
    const auto b = run_replay(cfg, load_series(cfg));
    const fs::path da = scratch("det_a"), db = scratch("det_b");
    write_replay_outputs(da, a);
    write_replay_outputs(db, b);
    write_text(da / "summary.json", report_to_json(a.report).dump(2));
    write_text(db / "summary.json", report_to_json(b.report).dump(2));
    bool identical = true;
    for (const char* f : {"ticks.csv", "ticks_predictions.csv", "summary.json"}) {
        identical = identical && slurp(da / f) == slurp(db / f) && !slurp(da / f).empty();
    }
    const double replay_gap = std::abs(a.report.fees_distributed + a.report.fees_carried - a.report.fees_accrued);
    return {worst_alloc < 1e-9 && replay_gap < 1e-9 && worst_norm < 1e-6 && identical,
            fmt("max allocation gap %.2e, replay fee gap %.2e, max |mass - 1| %.2e, replay outputs %s", worst_alloc,
                replay_gap, worst_norm, identical ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "closed-form losses match definitions", 1.0, closed_forms},
        {2, "equilibrium slope law and grid oracle", 10.0, equilibrium},
        {3, "pseudo-arbitrage neutrality", 1.0, pseudo_arbitrage},
        {4, "expected-load quadrature", 30.0, quadrature},
        {5, "gradient integrity", 120.0, gradients},
        {6, "tabular Q convergence", 1.0, tabular_q},
        {7, "predictor sine benchmark", 300.0, predictor_benchmark},
        {8, "agent sanity", 120.0, agent_sanity},
        {9, "end-to-end contribution proxies", 600.0, end_to_end},
        {10, "conservation and determinism", 60.0, conservation},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        std::printf("[%s] %2d %s: %s; %.2f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    o.detail.c_str(), secs, c.limit_s, in_time ? "" : " TIMEOUT");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
