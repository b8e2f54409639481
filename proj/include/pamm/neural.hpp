#pragma once

// Dense, LSTM and 1-D convolution layers with hand-written backward passes, the Adam
// optimizer, finite-difference gradient checks and a text checkpoint format.
//
// Batched activations are column-major: one column per sample. Sequences of T steps
// for a batch of B samples are stored time-major as a (features x T*B) matrix whose
// column t*B + b holds step t of sample b.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pamm::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError("shape mismatch: " + what);
}

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
};

using ParameterList = std::vector<Parameter*>;

inline void zero_grads(const ParameterList& params) {
    for (auto* p : params) p->zero_grad();
}

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Matrix& m, double fan_in, double fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    }
}

inline constexpr double kLeakySlope = 0.01;

inline double leaky_relu(double x, double slope = kLeakySlope) { return x >= 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope = kLeakySlope) { return x >= 0.0 ? 1.0 : slope; }

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

enum class Activation { LeakyRelu, Linear };

inline Matrix activate(const Matrix& z, Activation a) {
    if (a == Activation::Linear) return z;
    return z.unaryExpr([](double v) { return leaky_relu(v); });
}

inline Matrix activation_backward(const Matrix& z, const Matrix& dy, Activation a) {
    if (a == Activation::Linear) return dy;
    return dy.cwiseProduct(z.unaryExpr([](double v) { return leaky_relu_grad(v); }));
}

class Dense {
public:
    Dense(Eigen::Index in, Eigen::Index out, Activation act, const std::string& name = "dense")
        : weight(name + ".W", out, in), bias(name + ".b", out, 1), act_(act) {}

    void init(std::mt19937_64& rng) {
        glorot_uniform(weight.value, static_cast<double>(in_dim()), static_cast<double>(out_dim()), rng);
        bias.value.setZero();
    }

    Eigen::Index in_dim() const { return weight.value.cols(); }
    Eigen::Index out_dim() const { return weight.value.rows(); }
    Activation activation() const { return act_; }

    /// Caches the input for the next backward call.
    Matrix forward(const Matrix& x) {
        require_shape(x.rows() == in_dim(), "dense input rows");
        input_ = x;
        pre_ = (weight.value * x).colwise() + bias.value.col(0);
        return activate(pre_, act_);
    }

    Matrix infer(const Matrix& x) const {
        require_shape(x.rows() == in_dim(), "dense input rows");
        Matrix z = (weight.value * x).colwise() + bias.value.col(0);
        return activate(z, act_);
    }

    /// Accumulates parameter gradients and returns dL/dx.
    Matrix backward(const Matrix& dy) {
        require_shape(dy.rows() == out_dim() && dy.cols() == input_.cols(), "dense output gradient");
        const Matrix dz = activation_backward(pre_, dy, act_);
        weight.grad.noalias() += dz * input_.transpose();
        bias.grad.col(0) += dz.rowwise().sum();
        return weight.value.transpose() * dz;
    }

    void collect(ParameterList& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

    Parameter weight;
    Parameter bias;

private:
    Activation act_;
    Matrix input_;
    Matrix pre_;
};

struct LstmState {
    Matrix h;
    Matrix c;
};

/// Single LSTM layer. Gate rows are stacked as [input; forget; output; candidate].
class Lstm {
public:
    Lstm(Eigen::Index in, Eigen::Index hidden, const std::string& name = "lstm")
        : w_input(name + ".W", 4 * hidden, in), w_hidden(name + ".U", 4 * hidden, hidden),
          bias(name + ".b", 4 * hidden, 1) {}

    void init(std::mt19937_64& rng) {
        const double h = static_cast<double>(hidden());
        glorot_uniform(w_input.value, static_cast<double>(in_dim()), 4.0 * h, rng);
        glorot_uniform(w_hidden.value, h, 4.0 * h, rng);
        bias.value.setZero();
    }

    Eigen::Index in_dim() const { return w_input.value.cols(); }
    Eigen::Index hidden() const { return w_hidden.value.cols(); }

    /// One step of the gated recursion for a batch (columns).
    LstmState step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev) const {
        require_shape(x.rows() == in_dim(), "lstm step input rows");
        require_shape(h_prev.rows() == hidden() && c_prev.rows() == hidden(), "lstm state rows");
        require_shape(h_prev.cols() == x.cols() && c_prev.cols() == x.cols(), "lstm batch size");
        Matrix z = (w_input.value * x + w_hidden.value * h_prev).colwise() + bias.value.col(0);
        Gates g = gates(z);
        LstmState s;
        s.c = g.f.cwiseProduct(c_prev) + g.i.cwiseProduct(g.g);
        s.h = g.o.cwiseProduct(s.c.array().tanh().matrix());
        return s;
    }

    /// Runs `steps` steps from a zero state over a time-major sequence; returns the last hidden state.
    Matrix forward(const Matrix& xs, Eigen::Index steps) {
        require_shape(xs.rows() == in_dim(), "lstm sequence rows");
        require_shape(steps > 0 && xs.cols() % steps == 0, "lstm sequence length");
        const Eigen::Index batch = xs.cols() / steps;
        const Eigen::Index hsz = hidden();
        xs_ = xs;
        steps_ = steps;
        Matrix zx = (w_input.value * xs).colwise() + bias.value.col(0);
        gates_.assign(static_cast<std::size_t>(steps), Gates{});
        cells_.assign(static_cast<std::size_t>(steps) + 1, Matrix::Zero(hsz, batch));
        hiddens_.assign(static_cast<std::size_t>(steps) + 1, Matrix::Zero(hsz, batch));
        for (Eigen::Index t = 0; t < steps; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            Matrix z = zx.middleCols(t * batch, batch);
            z.noalias() += w_hidden.value * hiddens_[ti];
            gates_[ti] = gates(z);
            const Gates& g = gates_[ti];
            cells_[ti + 1] = g.f.cwiseProduct(cells_[ti]) + g.i.cwiseProduct(g.g);
            hiddens_[ti + 1] = g.o.cwiseProduct(cells_[ti + 1].array().tanh().matrix());
        }
        return hiddens_.back();
    }

    Matrix infer(const Matrix& xs, Eigen::Index steps) const {
        require_shape(xs.rows() == in_dim(), "lstm sequence rows");
        require_shape(steps > 0 && xs.cols() % steps == 0, "lstm sequence length");
        const Eigen::Index batch = xs.cols() / steps;
        Matrix zx = (w_input.value * xs).colwise() + bias.value.col(0);
        Matrix h = Matrix::Zero(hidden(), batch);
        Matrix c = Matrix::Zero(hidden(), batch);
        for (Eigen::Index t = 0; t < steps; ++t) {
            Matrix z = zx.middleCols(t * batch, batch);
            z.noalias() += w_hidden.value * h;
            Gates g = gates(z);
            c = g.f.cwiseProduct(c) + g.i.cwiseProduct(g.g);
            h = g.o.cwiseProduct(c.array().tanh().matrix());
        }
        return h;
    }

    /// Backpropagation through time from dL/dh_T. Returns dL/dxs in the input layout.
    Matrix backward(const Matrix& dh_last) {
        const Eigen::Index hsz = hidden();
        const Eigen::Index batch = xs_.cols() / steps_;
        require_shape(dh_last.rows() == hsz && dh_last.cols() == batch, "lstm output gradient");
        Matrix dzs(4 * hsz, steps_ * batch);
        Matrix dh = dh_last;
        Matrix dc = Matrix::Zero(hsz, batch);
        for (Eigen::Index t = steps_ - 1; t >= 0; --t) {
            const auto ti = static_cast<std::size_t>(t);
            const Gates& g = gates_[ti];
            const Matrix tanh_c = cells_[ti + 1].array().tanh().matrix();
            const Matrix d_o = dh.cwiseProduct(tanh_c);
            dc += dh.cwiseProduct(g.o).cwiseProduct((1.0 - tanh_c.array().square()).matrix());
            const Matrix d_i = dc.cwiseProduct(g.g);
            const Matrix d_g = dc.cwiseProduct(g.i);
            const Matrix d_f = dc.cwiseProduct(cells_[ti]);
            auto dz = dzs.middleCols(t * batch, batch);
            dz.middleRows(0, hsz) = d_i.cwiseProduct((g.i.array() * (1.0 - g.i.array())).matrix());
            dz.middleRows(hsz, hsz) = d_f.cwiseProduct((g.f.array() * (1.0 - g.f.array())).matrix());
            dz.middleRows(2 * hsz, hsz) = d_o.cwiseProduct((g.o.array() * (1.0 - g.o.array())).matrix());
            dz.middleRows(3 * hsz, hsz) = d_g.cwiseProduct((1.0 - g.g.array().square()).matrix());
            w_hidden.grad.noalias() += dz * hiddens_[ti].transpose();
            dh.noalias() = w_hidden.value.transpose() * dz;
            dc = dc.cwiseProduct(g.f).eval();
        }
        w_input.grad.noalias() += dzs * xs_.transpose();
        bias.grad.col(0) += dzs.rowwise().sum();
        return w_input.value.transpose() * dzs;
    }

    void collect(ParameterList& out) {
        out.push_back(&w_input);
        out.push_back(&w_hidden);
        out.push_back(&bias);
    }

    Parameter w_input;
    Parameter w_hidden;
    Parameter bias;

private:
    struct Gates {
        Matrix i, f, o, g;
    };

    Gates gates(const Matrix& z) const {
        const Eigen::Index h = hidden();
        Gates g;
        g.i = z.middleRows(0, h).unaryExpr([](double v) { return sigmoid(v); });
        g.f = z.middleRows(h, h).unaryExpr([](double v) { return sigmoid(v); });
        g.o = z.middleRows(2 * h, h).unaryExpr([](double v) { return sigmoid(v); });
        g.g = z.middleRows(3 * h, h).array().tanh().matrix();
        return g;
    }

    Matrix xs_;
    Eigen::Index steps_ = 0;
    std::vector<Gates> gates_;
    std::vector<Matrix> cells_;
    std::vector<Matrix> hiddens_;
};

/// Stride-1 convolution over time with zero "same" padding; kernel size must be odd.
class Conv1D {
public:
    Conv1D(Eigen::Index in_channels, Eigen::Index filters, Eigen::Index kernel = 3, const std::string& name = "conv")
        : weight(name + ".W", filters, kernel * in_channels), bias(name + ".b", filters, 1), kernel_(kernel),
          in_channels_(in_channels) {
        if (kernel < 1 || kernel % 2 == 0) throw ShapeError("convolution kernel size must be odd");
    }

    void init(std::mt19937_64& rng) {
        glorot_uniform(weight.value, static_cast<double>(kernel_ * in_channels_),
                       static_cast<double>(kernel_ * filters()), rng);
        bias.value.setZero();
    }

    Eigen::Index filters() const { return weight.value.rows(); }
    Eigen::Index in_channels() const { return in_channels_; }
    Eigen::Index kernel() const { return kernel_; }

    Matrix forward(const Matrix& xs, Eigen::Index steps) {
        input_ = xs;
        steps_ = steps;
        return infer(xs, steps);
    }

    Matrix infer(const Matrix& xs, Eigen::Index steps) const {
        require_shape(xs.rows() == in_channels_, "convolution input channels");
        require_shape(steps > 0 && xs.cols() % steps == 0, "convolution sequence length");
        const Eigen::Index batch = xs.cols() / steps;
        Matrix y(filters(), xs.cols());
        y.colwise() = bias.value.col(0);
        for (Eigen::Index k = 0; k < kernel_; ++k) {
            const Span s = span(k, steps, batch);
            if (s.len <= 0) continue;
            y.middleCols(s.out, s.len).noalias() +=
                weight.value.middleCols(k * in_channels_, in_channels_) * xs.middleCols(s.in, s.len);
        }
        return y;
    }

    Matrix backward(const Matrix& dy) {
        require_shape(dy.rows() == filters() && dy.cols() == input_.cols(), "convolution output gradient");
        const Eigen::Index batch = input_.cols() / steps_;
        Matrix dx = Matrix::Zero(in_channels_, input_.cols());
        bias.grad.col(0) += dy.rowwise().sum();
        for (Eigen::Index k = 0; k < kernel_; ++k) {
            const Span s = span(k, steps_, batch);
            if (s.len <= 0) continue;
            auto wk = weight.value.middleCols(k * in_channels_, in_channels_);
            weight.grad.middleCols(k * in_channels_, in_channels_).noalias() +=
                dy.middleCols(s.out, s.len) * input_.middleCols(s.in, s.len).transpose();
            dx.middleCols(s.in, s.len).noalias() += wk.transpose() * dy.middleCols(s.out, s.len);
        }
        return dx;
    }

    void collect(ParameterList& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

    Parameter weight;
    Parameter bias;

private:
    struct Span {
        Eigen::Index out, in, len;
    };

    /// Output step t reads input step t + k - pad; returns the matching column ranges.
    Span span(Eigen::Index k, Eigen::Index steps, Eigen::Index batch) const {
        const Eigen::Index d = k - kernel_ / 2;
        const Eigen::Index t0 = std::max<Eigen::Index>(0, -d);
        const Eigen::Index t1 = std::min<Eigen::Index>(steps, steps - d);
        return {t0 * batch, (t0 + d) * batch, (t1 - t0) * batch};
    }

    Eigen::Index kernel_;
    Eigen::Index in_channels_;
    Matrix input_;
    Eigen::Index steps_ = 0;
};

/// Mean over the time axis of a time-major sequence: (C x T*B) -> (C x B).
inline Matrix time_mean(const Matrix& xs, Eigen::Index steps) {
    const Eigen::Index batch = xs.cols() / steps;
    Matrix out = Matrix::Zero(xs.rows(), batch);
    for (Eigen::Index t = 0; t < steps; ++t) out += xs.middleCols(t * batch, batch);
    return out / static_cast<double>(steps);
}

inline Matrix time_mean_backward(const Matrix& dy, Eigen::Index steps) {
    Matrix dx(dy.rows(), dy.cols() * steps);
    for (Eigen::Index t = 0; t < steps; ++t) dx.middleCols(t * dy.cols(), dy.cols()) = dy / static_cast<double>(steps);
    return dx;
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::int64_t step = 0;
};

/// One bias-corrected Adam step using the gradients stored in `params`.
inline void adam_update(AdamState& state, const ParameterList& params) {
    if (state.m.empty()) {
        for (const auto* p : params) {
            state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
    require_shape(state.m.size() == params.size(), "adam state parameter count");
    ++state.step;
    const auto& cfg = state.config;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        require_shape(p.grad.rows() == state.m[i].rows() && p.grad.cols() == state.m[i].cols(),
                      "adam state for " + p.name);
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * p.grad;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= cfg.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + cfg.eps);
    }
}

struct GradCheckBlock {
    std::string name;
    double max_rel_error = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_error = 0.0;
    bool pass = true;
};

/// Gradients below this magnitude are compared on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-6;

/// Compares analytic gradients with central finite differences.
///
/// `loss` evaluates the scalar loss at the current parameter values. `analytic` recomputes
/// the gradients into each Parameter::grad. At most `max_entries` randomly chosen entries are
/// probed per block. Relative error is |a - n| / max(|a|, |n|, 1e-6).
template <class LossFn, class GradFn>
GradCheckReport grad_check(const ParameterList& params, LossFn&& loss, GradFn&& analytic, double tolerance,
                           double step = 1e-5, std::size_t max_entries = 40, std::uint64_t seed = 7) {
    zero_grads(params);
    analytic();
    std::vector<Matrix> grads;
    for (const auto* p : params) grads.push_back(p->grad);
    std::mt19937_64 rng(seed);
    GradCheckReport report;
    for (std::size_t b = 0; b < params.size(); ++b) {
        Parameter& p = *params[b];
        GradCheckBlock block{p.name, 0.0, true};
        const Eigen::Index n = p.value.size();
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
        if (idx.size() > max_entries) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(max_entries);
        }
        for (Eigen::Index i : idx) {
            double& w = p.value.data()[i];
            const double saved = w;
            w = saved + step;
            const double up = loss();
            w = saved - step;
            const double down = loss();
            w = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = grads[b].data()[i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
            block.max_rel_error = std::max(block.max_rel_error, rel);
        }
        block.pass = block.max_rel_error < tolerance;
        report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
        report.pass = report.pass && block.pass;
        report.blocks.push_back(block);
    }
    return report;
}

/// Named tensors plus string metadata. Text layout:
///
///     pamm-checkpoint 1
///     meta <key> <value>
///     tensor <name> <rows> <cols>
///     <row 0 values, space separated, %.17g>
///     ...
///     end
struct Checkpoint {
    static constexpr int kVersion = 1;

    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Matrix>> tensors;

    void add(const std::string& name, const Matrix& m) { tensors.emplace_back(name, m); }

    const Matrix& tensor(const std::string& name) const {
        for (const auto& [n, m] : tensors) {
            if (n == name) return m;
        }
        throw std::runtime_error("checkpoint has no tensor '" + name + "'");
    }

    bool has(const std::string& name) const {
        return std::any_of(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first == name; });
    }

    const std::string& get(const std::string& key) const {
        const auto it = meta.find(key);
        if (it == meta.end()) throw std::runtime_error("checkpoint has no metadata '" + key + "'");
        return it->second;
    }

    void add_parameters(const ParameterList& params, const std::string& prefix = "") {
        for (const auto* p : params) add(prefix + p->name, p->value);
    }

    void load_parameters(const ParameterList& params, const std::string& prefix = "") const {
        for (auto* p : params) {
            const Matrix& m = tensor(prefix + p->name);
            require_shape(m.rows() == p->value.rows() && m.cols() == p->value.cols(), "checkpoint tensor " + p->name);
            p->value = m;
        }
    }

    void add_adam(const AdamState& s, const std::string& prefix) {
        meta[prefix + "step"] = std::to_string(s.step);
        for (std::size_t i = 0; i < s.m.size(); ++i) {
            add(prefix + "m." + std::to_string(i), s.m[i]);
            add(prefix + "v." + std::to_string(i), s.v[i]);
        }
    }

    void load_adam(AdamState& s, const std::string& prefix) const {
        s.step = std::stoll(get(prefix + "step"));
        s.m.clear();
        s.v.clear();
        for (std::size_t i = 0; has(prefix + "m." + std::to_string(i)); ++i) {
            s.m.push_back(tensor(prefix + "m." + std::to_string(i)));
            s.v.push_back(tensor(prefix + "v." + std::to_string(i)));
        }
    }
};

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out << "pamm-checkpoint " << Checkpoint::kVersion << '\n';
    for (const auto& [k, v] : ck.meta) {
        if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw std::invalid_argument("checkpoint metadata must be single-line with space-free keys");
        }
        out << "meta " << k << ' ' << v << '\n';
    }
    char buf[32];
    for (const auto& [name, m] : ck.tensors) {
        out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
                out << (j ? " " : "") << buf;
            }
            out << '\n';
        }
    }
    out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in) {
    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != "pamm-checkpoint") throw std::runtime_error("not a pamm checkpoint");
    if (version != Checkpoint::kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    while (in >> word) {
        if (word == "end") return ck;
        if (word == "meta") {
            std::string key, value;
            in >> key;
            std::getline(in, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ck.meta[key] = value;
        } else if (word == "tensor") {
            std::string name;
            Eigen::Index rows = 0, cols = 0;
            if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0) throw std::runtime_error("bad tensor header");
            Matrix m(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i) {
                for (Eigen::Index j = 0; j < cols; ++j) {
                    std::string tok;
                    if (!(in >> tok)) throw std::runtime_error("truncated tensor " + name);
                    char* end = nullptr;
                    m(i, j) = std::strtod(tok.c_str(), &end);
                    if (end != tok.c_str() + tok.size()) throw std::runtime_error("bad value '" + tok + "' in tensor " + name);
                }
            }
            if (ck.has(name)) throw std::runtime_error("duplicate tensor " + name);
            ck.tensors.emplace_back(std::move(name), std::move(m));
        } else {
            throw std::runtime_error("unexpected checkpoint record '" + word + "'");
        }
    }
    throw std::runtime_error("checkpoint is missing its end marker");
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    return read_checkpoint(in);
}

}  // namespace pamm::nn
