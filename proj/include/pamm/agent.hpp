#pragma once

// Event-driven market-making environment, the threshold reward, the two-action space and a
// dueling double deep Q-network, plus the tabular Bellman machinery it is checked against.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pamm/amm_core.hpp"
#include "pamm/loss_model.hpp"
#include "pamm/market_data.hpp"
#include "pamm/neural.hpp"
#include "pamm/predictor.hpp"

namespace pamm {

// ---------------------------------------------------------------------------
// Events and rewards

struct EventConfig {
    double beta_v = 1e-4;

    void validate() const {
        if (!(beta_v > 0.0)) throw std::invalid_argument("beta_v must be positive");
    }
};

struct EventResult {
    /// Steps from t0 to the event, or to the last tick when `end_of_series`.
    std::size_t k = 0;
    bool end_of_series = false;
};

/// Smallest k >= 1 with values[t0 + k] outside [values[t0](1 - beta_v), values[t0](1 + beta_v)].
inline EventResult detect_event(std::span<const double> values, std::size_t t0, const EventConfig& cfg) {
    cfg.validate();
    if (t0 >= values.size()) throw std::out_of_range("event origin beyond the series");
    const double upper = values[t0] * (1.0 + cfg.beta_v);
    const double lower = values[t0] * (1.0 - cfg.beta_v);
    std::size_t k = 1;
    while (t0 + k < values.size()) {
        const double v = values[t0 + k];
        if (!(lower <= v && v <= upper)) return {k, false};
        ++k;
    }
    return {k - 1, true};
}

struct RewardConfig {
    double beta_c = 0.005;
    double gamma = 0.98;

    void validate() const {
        if (!(beta_c > 0.0)) throw std::invalid_argument("beta_c must be positive");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
    }
};

/// Prediction slippage plus expected load.
inline double step_loss(double v_eq, double v_pred, double expected_load_value) {
    return std::abs(v_eq - v_pred) + expected_load_value;
}

inline constexpr double kRewardTieBand = 1e-12;

inline int reward(double ell, const RewardConfig& cfg) {
    if (std::abs(ell - cfg.beta_c) <= kRewardTieBand) return 0;
    return ell > cfg.beta_c ? -1 : 1;
}

/// R = sum_k gamma^k r_k.
inline double cumulative_reward(std::span<const double> rewards, double gamma) {
    double total = 0.0;
    double discount = 1.0;
    for (double r : rewards) {
        total += discount * r;
        discount *= gamma;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Actions

enum class Action : int { InsertEpsilon = 0, DoNothing = 1 };
inline constexpr std::size_t kActionCount = 2;
using QValues = std::array<double, kActionCount>;

inline const char* to_string(Action a) { return a == Action::InsertEpsilon ? "insert_epsilon" : "do_nothing"; }

struct ActionChoice {
    Action action = Action::DoNothing;
    double epsilon = 0.0;
};

/// epsilon ~ N(mu, sigma) truncated to (-1, 1) by rejection.
struct ActionEpsilonPolicy {
    double mu = 0.0;
    double sigma = 0.3;

    double sample(std::mt19937_64& rng) const {
        if (!(mu > -1.0 && mu < 1.0) || !(sigma >= 0.0)) {
            throw std::invalid_argument("epsilon policy needs mu in (-1,1) and sigma >= 0");
        }
        if (sigma == 0.0) return mu;
        std::normal_distribution<double> dist(mu, sigma);
        for (;;) {
            const double e = dist(rng);
            if (e > -1.0 && e < 1.0) return e;
        }
    }
};

/// Linear decay of the exploration rate from `start` to `end` over `decay_steps` actions.
struct ExplorationSchedule {
    double start = 1.0;
    double end = 0.05;
    std::size_t decay_steps = 5000;

    double at(std::size_t step) const {
        if (decay_steps == 0 || step >= decay_steps) return end;
        const double f = static_cast<double>(step) / static_cast<double>(decay_steps);
        return start + (end - start) * f;
    }
};

inline std::size_t argmax(const QValues& q) { return q[1] > q[0] ? 1 : 0; }

/// Epsilon-greedy over the two Q-values; InsertEpsilon draws its epsilon from `policy`.
inline ActionChoice select_action(const QValues& q, double exploration, const ActionEpsilonPolicy& policy,
                                  std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::size_t a = argmax(q);
    if (coin(rng) < exploration) a = std::uniform_int_distribution<std::size_t>(0, kActionCount - 1)(rng);
    ActionChoice choice{static_cast<Action>(a), 0.0};
    if (choice.action == Action::InsertEpsilon) choice.epsilon = policy.sample(rng);
    return choice;
}

// ---------------------------------------------------------------------------
// Q-learning targets and the tabular Bellman operator

/// Double-DQN target: r + gamma * Q_target(s', argmax_a Q_online(s', a)); r for terminal states.
template <class State, class OnlineQ, class TargetQ>
double td_target(double r, const State& next_state, OnlineQ&& q_online, TargetQ&& q_target, double gamma,
                 bool terminal) {
    if (terminal || gamma == 0.0) return r;
    const QValues online = q_online(next_state);
    const QValues target = q_target(next_state);
    return r + gamma * target[argmax(online)];
}

/// Finite MDP with transition probabilities T(s,a,s') and rewards R(s,a,s').
struct TabularMdp {
    std::size_t states = 0;
    std::size_t actions = 0;
    double gamma = 0.9;
    std::vector<double> transition;
    std::vector<double> rewards;

    TabularMdp(std::size_t s, std::size_t a, double g)
        : states(s), actions(a), gamma(g), transition(s * a * s, 0.0), rewards(s * a * s, 0.0) {}

    std::size_t index(std::size_t s, std::size_t a, std::size_t s2) const { return (s * actions + a) * states + s2; }
    double& T(std::size_t s, std::size_t a, std::size_t s2) { return transition[index(s, a, s2)]; }
    double& R(std::size_t s, std::size_t a, std::size_t s2) { return rewards[index(s, a, s2)]; }
    double T(std::size_t s, std::size_t a, std::size_t s2) const { return transition[index(s, a, s2)]; }
    double R(std::size_t s, std::size_t a, std::size_t s2) const { return rewards[index(s, a, s2)]; }

    void validate() const {
        if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0,1)");
        for (std::size_t s = 0; s < states; ++s) {
            for (std::size_t a = 0; a < actions; ++a) {
                double row = 0.0;
                for (std::size_t s2 = 0; s2 < states; ++s2) {
                    if (T(s, a, s2) < 0.0) throw std::invalid_argument("negative transition probability");
                    row += T(s, a, s2);
                }
                if (std::abs(row - 1.0) > 1e-12) {
                    throw std::invalid_argument("transition row (" + std::to_string(s) + "," + std::to_string(a) +
                                                ") is not stochastic");
                }
            }
        }
    }
};

/// (BK)(s,a) = sum_s' T(s,a,s') [R(s,a,s') + gamma max_a' K(s',a')], K stored as states x actions.
inline nn::Matrix bellman_apply(const TabularMdp& mdp, const nn::Matrix& q) {
    mdp.validate();
    nn::require_shape(q.rows() == static_cast<Eigen::Index>(mdp.states) &&
                          q.cols() == static_cast<Eigen::Index>(mdp.actions),
                      "q-table");
    const Eigen::VectorXd best = q.rowwise().maxCoeff();
    nn::Matrix out = nn::Matrix::Zero(q.rows(), q.cols());
    for (std::size_t s = 0; s < mdp.states; ++s) {
        for (std::size_t a = 0; a < mdp.actions; ++a) {
            double v = 0.0;
            for (std::size_t s2 = 0; s2 < mdp.states; ++s2) {
                const double p = mdp.T(s, a, s2);
                if (p != 0.0) v += p * (mdp.R(s, a, s2) + mdp.gamma * best(static_cast<Eigen::Index>(s2)));
            }
            out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = v;
        }
    }
    return out;
}

/// Sample-based Q-learning step toward r + gamma max_a' Q(s', a').
inline void q_learning_update(nn::Matrix& q, std::size_t s, std::size_t a, double r, std::size_t s_next, double gamma,
                              double alpha, bool terminal = false) {
    const auto si = static_cast<Eigen::Index>(s);
    const auto ai = static_cast<Eigen::Index>(a);
    const double target = terminal ? r : r + gamma * q.row(static_cast<Eigen::Index>(s_next)).maxCoeff();
    q(si, ai) += alpha * (target - q(si, ai));
}

/// Runs `sweeps` passes of Q-learning over every (s, a), sampling s' from T.
inline nn::Matrix tabular_q_learning(const TabularMdp& mdp, std::size_t sweeps, double alpha, std::mt19937_64& rng) {
    mdp.validate();
    nn::Matrix q = nn::Matrix::Zero(static_cast<Eigen::Index>(mdp.states), static_cast<Eigen::Index>(mdp.actions));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t s = 0; s < mdp.states; ++s) {
            for (std::size_t a = 0; a < mdp.actions; ++a) {
                double draw = u(rng);
                std::size_t s2 = mdp.states - 1;
                for (std::size_t j = 0; j < mdp.states; ++j) {
                    draw -= mdp.T(s, a, j);
                    if (draw < 0.0) {
                        s2 = j;
                        break;
                    }
                }
                q_learning_update(q, s, a, mdp.R(s, a, s2), s2, mdp.gamma, alpha);
            }
        }
    }
    return q;
}

// ---------------------------------------------------------------------------
// Dueling Q-network

/// Scalar state features: v'_p, v', expected load, last realised loss, x/x0, y/y0.
inline constexpr std::size_t kStateScalars = 6;

struct Observation {
    FeatureWindow window;
    nn::Vector scalars = nn::Vector::Zero(kStateScalars);
};

/// Q(s,a) = V(s) + A(s,a) - mean_a A(s,a), batched over columns.
inline nn::Matrix dueling_aggregate(const nn::Matrix& value, const nn::Matrix& advantage) {
    nn::require_shape(value.rows() == 1 && value.cols() == advantage.cols(), "dueling streams");
    nn::Matrix q = advantage.rowwise() - advantage.colwise().mean();
    q.rowwise() += value.row(0);
    return q;
}

struct QNetworkConfig {
    std::size_t window = 50;
    std::size_t filters = 100;
    std::size_t kernel = 3;
    std::size_t trunk = 100;
    std::size_t stream = 50;
    bool dueling = true;
};

/// Two same-padded convolutions over the feature window, time-mean pooling, a shared dense trunk
/// that also sees the scalar state, then value and advantage streams (or a single head).
class QNetwork {
public:
    explicit QNetwork(QNetworkConfig cfg = {}, std::uint64_t seed = 3)
        : cfg_(cfg),
          conv1_(static_cast<Eigen::Index>(kFeatureCount), idx(cfg.filters), idx(cfg.kernel), "conv1"),
          conv2_(idx(cfg.filters), idx(cfg.filters), idx(cfg.kernel), "conv2"),
          trunk_(idx(cfg.filters + kStateScalars), idx(cfg.trunk), nn::Activation::LeakyRelu, "trunk"),
          value1_(idx(cfg.trunk), idx(cfg.stream), nn::Activation::LeakyRelu, cfg.dueling ? "value1" : "head1"),
          value2_(idx(cfg.stream), cfg.dueling ? 1 : idx(kActionCount), nn::Activation::Linear,
                  cfg.dueling ? "value2" : "head2"),
          adv1_(idx(cfg.trunk), idx(cfg.stream), nn::Activation::LeakyRelu, "adv1"),
          adv2_(idx(cfg.stream), idx(kActionCount), nn::Activation::Linear, "adv2") {
        std::mt19937_64 rng(seed);
        conv1_.init(rng);
        conv2_.init(rng);
        trunk_.init(rng);
        value1_.init(rng);
        value2_.init(rng);
        adv1_.init(rng);
        adv2_.init(rng);
    }

    const QNetworkConfig& config() const { return cfg_; }

    nn::ParameterList parameters() {
        nn::ParameterList p;
        conv1_.collect(p);
        conv2_.collect(p);
        trunk_.collect(p);
        value1_.collect(p);
        value2_.collect(p);
        if (cfg_.dueling) {
            adv1_.collect(p);
            adv2_.collect(p);
        }
        return p;
    }

    /// Forward pass that caches activations for `backward`. Returns Q as (actions x batch).
    nn::Matrix forward(const nn::Matrix& xs, const nn::Matrix& scalars) {
        const Eigen::Index steps = idx(cfg_.window);
        pre1_ = conv1_.forward(xs, steps);
        pre2_ = conv2_.forward(nn::activate(pre1_, nn::Activation::LeakyRelu), steps);
        nn::Matrix pooled = nn::time_mean(nn::activate(pre2_, nn::Activation::LeakyRelu), steps);
        nn::Matrix joined(pooled.rows() + scalars.rows(), pooled.cols());
        joined << pooled, scalars;
        const nn::Matrix h = trunk_.forward(joined);
        if (!cfg_.dueling) return value2_.forward(value1_.forward(h));
        return dueling_aggregate(value2_.forward(value1_.forward(h)), adv2_.forward(adv1_.forward(h)));
    }

    nn::Matrix infer(const nn::Matrix& xs, const nn::Matrix& scalars) const {
        const Eigen::Index steps = idx(cfg_.window);
        nn::Matrix a1 = nn::activate(conv1_.infer(xs, steps), nn::Activation::LeakyRelu);
        nn::Matrix a2 = nn::activate(conv2_.infer(a1, steps), nn::Activation::LeakyRelu);
        nn::Matrix pooled = nn::time_mean(a2, steps);
        nn::Matrix joined(pooled.rows() + scalars.rows(), pooled.cols());
        joined << pooled, scalars;
        const nn::Matrix h = trunk_.infer(joined);
        if (!cfg_.dueling) return value2_.infer(value1_.infer(h));
        return dueling_aggregate(value2_.infer(value1_.infer(h)), adv2_.infer(adv1_.infer(h)));
    }

    /// Accumulates parameter gradients for dL/dQ.
    void backward(const nn::Matrix& dq) {
        nn::Matrix dh;
        if (cfg_.dueling) {
            const nn::Matrix dv = dq.colwise().sum();
            const nn::Matrix da = dq.rowwise() - dq.colwise().mean();
            dh = value1_.backward(value2_.backward(dv)) + adv1_.backward(adv2_.backward(da));
        } else {
            dh = value1_.backward(value2_.backward(dq));
        }
        const nn::Matrix djoined = trunk_.backward(dh);
        const Eigen::Index steps = idx(cfg_.window);
        const nn::Matrix dpooled = djoined.topRows(idx(cfg_.filters));
        const nn::Matrix da2 = nn::time_mean_backward(dpooled, steps);
        const nn::Matrix da1 = conv2_.backward(nn::activation_backward(pre2_, da2, nn::Activation::LeakyRelu));
        conv1_.backward(nn::activation_backward(pre1_, da1, nn::Activation::LeakyRelu));
    }

    QValues q_values(const Observation& obs) const {
        const nn::Matrix q = infer(pack_windows(std::span(&obs.window, 1)), obs.scalars);
        return {q(0, 0), q(1, 0)};
    }

    void copy_from(QNetwork& other) {
        auto dst = parameters();
        auto src = other.parameters();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
    }

private:
    static Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

    QNetworkConfig cfg_;
    nn::Conv1D conv1_;
    nn::Conv1D conv2_;
    nn::Dense trunk_;
    nn::Dense value1_;
    nn::Dense value2_;
    nn::Dense adv1_;
    nn::Dense adv2_;
    nn::Matrix pre1_;
    nn::Matrix pre2_;
};

inline void pack_observations(std::span<const Observation* const> obs, nn::Matrix& xs, nn::Matrix& scalars) {
    std::vector<FeatureWindow> windows;
    windows.reserve(obs.size());
    scalars.resize(static_cast<Eigen::Index>(kStateScalars), static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        windows.push_back(obs[i]->window);
        scalars.col(static_cast<Eigen::Index>(i)) = obs[i]->scalars;
    }
    xs = pack_windows(windows);
}

// ---------------------------------------------------------------------------
// Replay and the DQN learner

struct Transition {
    Observation state;
    Action action = Action::DoNothing;
    double reward = 0.0;
    Observation next_state;
    bool terminal = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    }

    void push(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[next_] = std::move(t);
        }
        next_ = (next_ + 1) % capacity_;
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    /// Uniform draws with replacement.
    std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const {
        if (items_.empty()) throw std::logic_error("cannot sample an empty replay buffer");
        std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
        std::vector<const Transition*> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[pick(rng)]);
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> items_;
};

struct AgentConfig {
    QNetworkConfig network;
    RewardConfig reward;
    ExplorationSchedule exploration;
    ActionEpsilonPolicy epsilon;
    nn::AdamConfig adam;
    std::size_t replay_capacity = 10000;
    std::size_t batch = 50;
    std::size_t target_sync = 100;
};

class DqnAgent {
public:
    explicit DqnAgent(AgentConfig cfg = {}, std::uint64_t seed = 5)
        : cfg_(cfg), online_(cfg.network, seed), target_(cfg.network, seed), replay_(cfg.replay_capacity) {
        cfg_.reward.validate();
        target_.copy_from(online_);
        adam_.config = cfg.adam;
    }

    const AgentConfig& config() const { return cfg_; }
    std::size_t updates() const { return updates_; }
    std::size_t actions_taken() const { return actions_; }
    double exploration() const { return cfg_.exploration.at(actions_); }
    QNetwork& online() { return online_; }
    QNetwork& target() { return target_; }
    const ReplayBuffer& replay() const { return replay_; }

    QValues q_values(const Observation& obs) const { return online_.q_values(obs); }

    ActionChoice act(const Observation& obs, std::mt19937_64& rng) {
        const double rate = exploration();
        ++actions_;
        return select_action(q_values(obs), rate, cfg_.epsilon, rng);
    }

    Action greedy(const Observation& obs) const { return static_cast<Action>(argmax(q_values(obs))); }

    void remember(Transition t) { replay_.push(std::move(t)); }

    /// One double-DQN minibatch step on the squared TD error; returns the mean loss, or
    /// nothing while the buffer holds fewer than one batch.
    std::optional<double> update(std::mt19937_64& rng) {
        if (replay_.size() < cfg_.batch) return std::nullopt;
        const auto batch = replay_.sample(cfg_.batch, rng);
        std::vector<const Observation*> states, nexts;
        for (const auto* t : batch) {
            states.push_back(&t->state);
            nexts.push_back(&t->next_state);
        }
        nn::Matrix xs, sc, nxs, nsc;
        pack_observations(nexts, nxs, nsc);
        const nn::Matrix q_next_online = online_.infer(nxs, nsc);
        const nn::Matrix q_next_target = target_.infer(nxs, nsc);
        pack_observations(states, xs, sc);
        const nn::Matrix q = online_.forward(xs, sc);

        nn::Matrix dq = nn::Matrix::Zero(q.rows(), q.cols());
        double loss = 0.0;
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            const auto column_q = [col](const nn::Matrix& m) { return QValues{m(0, col), m(1, col)}; };
            const double y = td_target(
                batch[i]->reward, col, [&](Eigen::Index) { return column_q(q_next_online); },
                [&](Eigen::Index) { return column_q(q_next_target); }, cfg_.reward.gamma, batch[i]->terminal);
            const auto a = static_cast<Eigen::Index>(batch[i]->action);
            const double diff = q(a, col) - y;
            loss += 0.5 * diff * diff * scale;
            dq(a, col) = diff * scale;
        }
        auto params = online_.parameters();
        nn::zero_grads(params);
        online_.backward(dq);
        nn::adam_update(adam_, params);
        ++updates_;
        if (cfg_.target_sync > 0 && updates_ % cfg_.target_sync == 0) target_.copy_from(online_);
        return loss;
    }

    void save(nn::Checkpoint& ck) {
        ck.meta["agent.dueling"] = cfg_.network.dueling ? "1" : "0";
        ck.meta["agent.window"] = std::to_string(cfg_.network.window);
        ck.meta["agent.filters"] = std::to_string(cfg_.network.filters);
        ck.meta["agent.trunk"] = std::to_string(cfg_.network.trunk);
        ck.meta["agent.stream"] = std::to_string(cfg_.network.stream);
        ck.meta["agent.updates"] = std::to_string(updates_);
        ck.meta["agent.actions"] = std::to_string(actions_);
        ck.add_parameters(online_.parameters(), "agent.online.");
        ck.add_parameters(target_.parameters(), "agent.target.");
        ck.add_adam(adam_, "agent.adam.");
    }

    static DqnAgent load(const nn::Checkpoint& ck, AgentConfig cfg = {}) {
        cfg.network.dueling = ck.get("agent.dueling") == "1";
        cfg.network.window = std::stoul(ck.get("agent.window"));
        cfg.network.filters = std::stoul(ck.get("agent.filters"));
        cfg.network.trunk = std::stoul(ck.get("agent.trunk"));
        cfg.network.stream = std::stoul(ck.get("agent.stream"));
        DqnAgent agent(cfg);
        ck.load_parameters(agent.online_.parameters(), "agent.online.");
        ck.load_parameters(agent.target_.parameters(), "agent.target.");
        ck.load_adam(agent.adam_, "agent.adam.");
        agent.updates_ = std::stoul(ck.get("agent.updates"));
        agent.actions_ = std::stoul(ck.get("agent.actions"));
        return agent;
    }

private:
    AgentConfig cfg_;
    QNetwork online_;
    QNetwork target_;
    ReplayBuffer replay_;
    nn::AdamState adam_;
    std::size_t updates_ = 0;
    std::size_t actions_ = 0;
};

// ---------------------------------------------------------------------------
// Environments

struct StepOutcome {
    double reward = 0.0;
    double ell = 0.0;
    std::size_t event_k = 0;
    bool terminal = false;
};

class Environment {
public:
    virtual ~Environment() = default;
    virtual Observation reset() = 0;
    virtual Observation observe() const = 0;
    virtual StepOutcome step(const ActionChoice& choice) = 0;
};

struct MarketEnvConfig {
    EventConfig event;
    RewardConfig reward;
    double pool_c = 1.0;
    /// Events per episode; 0 runs to the end of the series.
    std::size_t max_events = 0;
};

/// Replays a price series event by event. On each step the chosen epsilon (if any) is written
/// into the predictor's feature history at the current interval, the prediction v'_p is scored
/// against the equilibrium valuation `horizon` intervals later, and the environment advances to
/// the next price event.
class MarketEnvironment : public Environment {
public:
    MarketEnvironment(const PriceSeries& series, const Predictor& predictor, MarketEnvConfig cfg)
        : series_(series), predictor_(predictor), cfg_(cfg), curve_(cfg.pool_c) {
        cfg_.event.validate();
        cfg_.reward.validate();
        if (series.size() < predictor.config().window + 1) {
            throw std::invalid_argument("series too short for one window and one event");
        }
        values_.resize(series.size());
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = series[i].v_obs;
        loads_.assign(series.size(), std::numeric_limits<double>::quiet_NaN());
        const Point start = equilibrium_state(curve_, series.valuation(predictor.config().window - 1));
        x0_ = start.x;
        y0_ = start.y;
    }

    Observation reset() override {
        t_ = predictor_.config().window - 1;
        eps_.assign(series_.size(), 0.0);
        last_ell_ = 0.0;
        events_ = 0;
        return observe();
    }

    Observation observe() const override {
        Observation obs;
        obs.window = make_window(series_, eps_, t_, predictor_.config().window);
        const Point held = equilibrium_state(curve_, series_.valuation(t_));
        obs.scalars << predictor_.predict(obs.window), equilibrium_v(t_), expected_load_at(t_), last_ell_,
            held.x / x0_, held.y / y0_;
        return obs;
    }

    StepOutcome step(const ActionChoice& choice) override {
        if (choice.action == Action::InsertEpsilon) eps_[t_] = choice.epsilon;
        const double v_pred = predictor_.predict(make_window(series_, eps_, t_, predictor_.config().window));
        const std::size_t target = std::min(t_ + predictor_.config().horizon, series_.size() - 1);
        StepOutcome out;
        out.ell = step_loss(equilibrium_v(target), v_pred, expected_load_at(t_));
        out.reward = reward(out.ell, cfg_.reward);
        last_ell_ = out.ell;
        const EventResult ev = detect_event(values_, t_, cfg_.event);
        out.event_k = ev.k;
        t_ += ev.k;
        ++events_;
        out.terminal = ev.end_of_series || t_ + 1 >= series_.size() || (cfg_.max_events && events_ >= cfg_.max_events);
        return out;
    }

    std::size_t time() const { return t_; }
    std::span<const double> epsilon_history() const { return eps_; }

private:
    double equilibrium_v(std::size_t t) const {
        return equilibrium_valuation(curve_, series_.valuation(t)).value();
    }

    double expected_load_at(std::size_t t) const {
        if (std::isnan(loads_[t])) {
            const auto density = forward_density(values_, t, predictor_.config().window,
                                                 static_cast<double>(predictor_.config().horizon));
            loads_[t] = expected_load(curve_, series_.valuation(t), density);
        }
        return loads_[t];
    }

    const PriceSeries& series_;
    const Predictor& predictor_;
    MarketEnvConfig cfg_;
    BondingCurve curve_;
    std::vector<double> values_;
    mutable std::vector<double> loads_;
    std::vector<double> eps_;
    std::size_t t_ = 0;
    double last_ell_ = 0.0;
    std::size_t events_ = 0;
    double x0_ = 1.0;
    double y0_ = 1.0;
};

/// Environment where InsertEpsilon always earns +1 and DoNothing -1; observations are random.
class ControlledEnvironment : public Environment {
public:
    ControlledEnvironment(std::size_t window, std::size_t episode_length, std::uint64_t seed)
        : window_(window), length_(episode_length), rng_(seed) {}

    Observation reset() override {
        steps_ = 0;
        current_ = draw();
        return current_;
    }

    Observation observe() const override { return current_; }

    StepOutcome step(const ActionChoice& choice) override {
        StepOutcome out;
        out.reward = choice.action == Action::InsertEpsilon ? 1.0 : -1.0;
        out.ell = choice.action == Action::InsertEpsilon ? 0.0 : 1.0;
        out.event_k = 1;
        ++steps_;
        out.terminal = steps_ >= length_;
        current_ = draw();
        return out;
    }

    Observation draw() {
        std::uniform_real_distribution<double> v(0.3, 0.7);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Observation obs;
        obs.window.rows.resize(static_cast<Eigen::Index>(window_), static_cast<Eigen::Index>(kFeatureCount));
        for (Eigen::Index i = 0; i < obs.window.rows.rows(); ++i) {
            obs.window.rows(i, 0) = v(rng_);
            obs.window.rows(i, 1) = u(rng_);
            obs.window.rows(i, 2) = 0.0;
        }
        for (Eigen::Index i = 0; i < obs.scalars.size(); ++i) obs.scalars(i) = v(rng_);
        return obs;
    }

private:
    std::size_t window_;
    std::size_t length_;
    std::mt19937_64 rng_;
    std::size_t steps_ = 0;
    Observation current_;
};

struct EpisodeRow {
    std::size_t episode = 0;
    std::size_t event_k = 0;
    double ell = 0.0;
    int reward = 0;
    double cum_reward = 0.0;
    Action action = Action::DoNothing;
    double epsilon_value = 0.0;
};

/// Detect event, build state, act, advance, store the transition and take one minibatch
/// update per step. cum_reward is the discounted return accumulated from the episode start.
inline std::vector<EpisodeRow> train_agent(Environment& env, DqnAgent& agent, std::size_t episodes,
                                           std::uint64_t seed, std::size_t max_updates = 0) {
    std::mt19937_64 rng(seed);
    std::vector<EpisodeRow> rows;
    const double gamma = agent.config().reward.gamma;
    for (std::size_t e = 0; e < episodes; ++e) {
        Observation obs = env.reset();
        double cum = 0.0;
        double discount = 1.0;
        for (bool done = false; !done;) {
            const ActionChoice choice = agent.act(obs, rng);
            const StepOutcome out = env.step(choice);
            Observation next = env.observe();
            done = out.terminal;
            agent.remember({obs, choice.action, out.reward, next, out.terminal});
            agent.update(rng);
            cum += discount * out.reward;
            discount *= gamma;
            rows.push_back({e, out.event_k, out.ell, static_cast<int>(out.reward), cum, choice.action, choice.epsilon});
            obs = std::move(next);
            if (max_updates && agent.updates() >= max_updates) return rows;
        }
    }
    return rows;
}

}  // namespace pamm
