#pragma once

// Small fully connected actor/critic network with hand-written reverse mode
// and an Adam optimiser. Double precision everywhere.

#include <acd/common.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace acd::nn {

enum class Activation { Tanh };

struct NetSpec {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden{64, 64};
    Activation activation = Activation::Tanh;
    std::size_t policy_out = 1;
    std::size_t value_heads = 0;

    friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

/// One dense layer's place in the flat parameter vector: a row-major
/// [out][in] weight block followed by `out` biases.
struct DenseSlice {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t offset = 0;

    std::size_t weights() const { return offset; }
    std::size_t bias() const { return offset + in * out; }
    std::size_t size() const { return in * out + out; }
};

struct Layout {
    std::vector<DenseSlice> trunk;
    DenseSlice policy;
    DenseSlice value;  // out == 0 when the net has no value heads
    std::size_t total = 0;
};

inline Layout make_layout(const NetSpec& spec) {
    if (spec.input_dim < 1 || spec.policy_out < 1) throw ConfigError("network dimensions must be >= 1");
    Layout l;
    std::size_t prev = spec.input_dim;
    for (std::size_t h : spec.hidden) {
        if (h < 1) throw ConfigError("hidden layer width must be >= 1");
        l.trunk.push_back({prev, h, l.total});
        l.total += l.trunk.back().size();
        prev = h;
    }
    l.policy = {prev, spec.policy_out, l.total};
    l.total += l.policy.size();
    l.value = {prev, spec.value_heads, l.total};
    l.total += l.value.size();
    return l;
}

using Params = std::vector<double>;

struct Output {
    std::vector<double> logits;
    std::vector<double> values;
};

/// Scratch buffers reused across forward/backward calls.
struct Workspace {
    std::vector<std::vector<double>> act;  // act[0] = input, act[k] = hidden layer k output
    std::vector<double> logits;
    std::vector<double> values;
    std::vector<double> delta;
    std::vector<double> delta_prev;
};

inline void softmax(std::span<const double> logits, std::span<double> out) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (out[i] = std::exp(logits[i] - mx));
    for (double& p : out) p /= z;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    softmax(logits, p);
    return p;
}

inline double log_sum_exp(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    return mx + std::log(z);
}

/// Per-sample loss driven through Mlp::loss_and_grad. Implementations add
/// dLoss/dlogits and dLoss/dvalues into the provided spans and return the
/// sample's loss contribution.
template <class L>
concept SampleLoss = requires(L l, std::size_t i, std::span<const double> in, std::span<double> out) {
    { l.size() } -> std::convertible_to<std::size_t>;
    { l.input(i) } -> std::convertible_to<std::span<const double>>;
    { l.evaluate(i, in, in, out, out) } -> std::convertible_to<double>;
};

/// Optional: a loss that tracks named terms so non-finite values can be
/// attributed.
template <class L>
concept NamedTerms = requires(const L l) {
    { l.terms() } -> std::convertible_to<std::vector<std::pair<std::string, double>>>;
};

class Mlp {
  public:
    explicit Mlp(NetSpec spec) : spec_(std::move(spec)), layout_(make_layout(spec_)) {}

    const NetSpec& spec() const { return spec_; }
    const Layout& layout() const { return layout_; }
    std::size_t num_params() const { return layout_.total; }

    /// Orthogonal weights (gain sqrt 2 for hidden layers, 0.01 for the policy
    /// head, 1 for value heads), zero biases.
    Params init(std::uint64_t seed) const {
        Params p(layout_.total, 0.0);
        Rng rng = make_rng(seed, 0x1417);
        for (const auto& d : layout_.trunk) orthogonal(p, d, std::sqrt(2.0), rng);
        orthogonal(p, layout_.policy, 0.01, rng);
        if (layout_.value.out > 0) orthogonal(p, layout_.value, 1.0, rng);
        return p;
    }

    void forward(std::span<const double> p, std::span<const double> x, Workspace& ws) const {
        check_params(p);
        if (x.size() != spec_.input_dim) {
            throw DimensionError("input has " + std::to_string(x.size()) + " entries, network expects " +
                                 std::to_string(spec_.input_dim));
        }
        ws.act.resize(layout_.trunk.size() + 1);
        ws.act[0].assign(x.begin(), x.end());
        for (std::size_t k = 0; k < layout_.trunk.size(); ++k) {
            const DenseSlice& d = layout_.trunk[k];
            dense(p, d, ws.act[k], ws.act[k + 1]);
            for (double& a : ws.act[k + 1]) a = std::tanh(a);
        }
        dense(p, layout_.policy, ws.act.back(), ws.logits);
        dense(p, layout_.value, ws.act.back(), ws.values);
    }

    Output forward(std::span<const double> p, std::span<const double> x) const {
        Workspace ws;
        forward(p, x, ws);
        return {ws.logits, ws.values};
    }

    std::vector<Output> forward_batch(std::span<const double> p, std::span<const std::vector<double>> xs) const {
        std::vector<Output> out;
        out.reserve(xs.size());
        Workspace ws;
        for (const auto& x : xs) {
            forward(p, x, ws);
            out.push_back({ws.logits, ws.values});
        }
        return out;
    }

    /// Accumulates dLoss/dparams into `grad` for the sample held in `ws`.
    void backward(std::span<const double> p, Workspace& ws, std::span<const double> dlogits,
                  std::span<const double> dvalues, std::span<double> grad) const {
        const std::vector<double>& top = ws.act.back();
        ws.delta.assign(top.size(), 0.0);
        head_backward(p, layout_.policy, top, dlogits, grad, ws.delta);
        if (layout_.value.out > 0) head_backward(p, layout_.value, top, dvalues, grad, ws.delta);
        for (std::size_t k = layout_.trunk.size(); k-- > 0;) {
            const DenseSlice& d = layout_.trunk[k];
            const std::vector<double>& a = ws.act[k + 1];
            for (std::size_t o = 0; o < d.out; ++o) ws.delta[o] *= 1.0 - a[o] * a[o];
            const std::vector<double>& below = ws.act[k];
            const bool need_input_grad = k > 0;
            if (need_input_grad) ws.delta_prev.assign(d.in, 0.0);
            for (std::size_t o = 0; o < d.out; ++o) {
                const double g = ws.delta[o];
                if (g == 0.0) continue;
                double* gw = grad.data() + d.weights() + o * d.in;
                const double* w = p.data() + d.weights() + o * d.in;
                for (std::size_t i = 0; i < d.in; ++i) gw[i] += g * below[i];
                grad[d.bias() + o] += g;
                if (need_input_grad) {
                    for (std::size_t i = 0; i < d.in; ++i) ws.delta_prev[i] += w[i] * g;
                }
            }
            if (need_input_grad) std::swap(ws.delta, ws.delta_prev);
        }
    }

    /// Sum of per-sample losses and its exact gradient.
    template <SampleLoss L>
    double loss_and_grad(std::span<const double> p, L& loss, std::span<double> grad) const {
        if (grad.size() != layout_.total) throw DimensionError("gradient buffer has the wrong length");
        if (loss.size() == 0) throw UsageError("loss batch is empty");
        std::fill(grad.begin(), grad.end(), 0.0);
        Workspace ws;
        std::vector<double> dl(spec_.policy_out), dv(spec_.value_heads);
        double total = 0.0;
        for (std::size_t i = 0; i < loss.size(); ++i) {
            forward(p, loss.input(i), ws);
            std::fill(dl.begin(), dl.end(), 0.0);
            std::fill(dv.begin(), dv.end(), 0.0);
            total += loss.evaluate(i, ws.logits, ws.values, dl, dv);
            backward(p, ws, dl, dv, grad);
        }
        check_finite(total, loss);
        return total;
    }

    template <SampleLoss L>
    double loss_value(std::span<const double> p, L& loss) const {
        Workspace ws;
        std::vector<double> dl(spec_.policy_out), dv(spec_.value_heads);
        double total = 0.0;
        for (std::size_t i = 0; i < loss.size(); ++i) {
            forward(p, loss.input(i), ws);
            total += loss.evaluate(i, ws.logits, ws.values, dl, dv);
        }
        return total;
    }

  private:
    void check_params(std::span<const double> p) const {
        if (p.size() != layout_.total) {
            throw DimensionError("parameter vector has " + std::to_string(p.size()) + " entries, network expects " +
                                 std::to_string(layout_.total));
        }
    }

    template <class L>
    static void check_finite(double total, const L& loss) {
        if (std::isfinite(total)) return;
        std::string detail = "non-finite loss";
        if constexpr (NamedTerms<L>) {
            for (const auto& [name, v] : loss.terms()) {
                if (!std::isfinite(v)) {
                    detail += " (term '" + name + "' = " + std::to_string(v) + ")";
                    break;
                }
            }
        }
        throw NumericError(detail);
    }

    static void dense(std::span<const double> p, const DenseSlice& d, const std::vector<double>& in,
                      std::vector<double>& out) {
        out.resize(d.out);
        for (std::size_t o = 0; o < d.out; ++o) {
            const double* w = p.data() + d.weights() + o * d.in;
            double s = p[d.bias() + o];
            for (std::size_t i = 0; i < d.in; ++i) s += w[i] * in[i];
            out[o] = s;
        }
    }

    static void head_backward(std::span<const double> p, const DenseSlice& d, const std::vector<double>& below,
                              std::span<const double> dout, std::span<double> grad, std::vector<double>& dbelow) {
        for (std::size_t o = 0; o < d.out; ++o) {
            const double g = dout[o];
            if (g == 0.0) continue;
            double* gw = grad.data() + d.weights() + o * d.in;
            const double* w = p.data() + d.weights() + o * d.in;
            for (std::size_t i = 0; i < d.in; ++i) {
                gw[i] += g * below[i];
                dbelow[i] += w[i] * g;
            }
            grad[d.bias() + o] += g;
        }
    }

    // Gram-Schmidt on a Gaussian matrix: rows are orthonormal when out <= in,
    // columns otherwise.
    static void orthogonal(Params& p, const DenseSlice& d, double gain, Rng& rng) {
        std::normal_distribution<double> normal(0.0, 1.0);
        const bool by_rows = d.out <= d.in;
        const std::size_t count = by_rows ? d.out : d.in;
        const std::size_t len = by_rows ? d.in : d.out;
        std::vector<std::vector<double>> vecs(count, std::vector<double>(len));
        for (auto& v : vecs) {
            for (double& x : v) x = normal(rng);
        }
        for (std::size_t a = 0; a < count; ++a) {
            for (std::size_t b = 0; b < a; ++b) {
                const double dot = std::inner_product(vecs[a].begin(), vecs[a].end(), vecs[b].begin(), 0.0);
                for (std::size_t i = 0; i < len; ++i) vecs[a][i] -= dot * vecs[b][i];
            }
            const double norm = std::sqrt(std::inner_product(vecs[a].begin(), vecs[a].end(), vecs[a].begin(), 0.0));
            for (double& x : vecs[a]) x /= norm;
        }
        for (std::size_t o = 0; o < d.out; ++o) {
            for (std::size_t i = 0; i < d.in; ++i) {
                p[d.weights() + o * d.in + i] = gain * (by_rows ? vecs[o][i] : vecs[i][o]);
            }
        }
    }

    NetSpec spec_;
    Layout layout_;
};

struct OptState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;
    double learning_rate = 2.5e-4;
    double max_grad_norm = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptState for_params(std::size_t n, double lr, double max_grad_norm) {
        OptState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        s.learning_rate = lr;
        s.max_grad_norm = max_grad_norm;
        return s;
    }
};

inline double global_norm(std::span<const double> g) {
    double s = 0.0;
    for (double x : g) s += x * x;
    return std::sqrt(s);
}

/// Rescales g in place so its norm is at most max_norm; returns the norm
/// before clipping.
inline double clip_by_global_norm(std::span<double> g, double max_norm) {
    const double norm = global_norm(g);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (double& x : g) x *= scale;
    }
    return norm;
}

/// Global-norm clip then one bias-corrected Adam update. Returns the
/// pre-clip gradient norm.
inline double opt_step(Params& p, std::span<double> g, OptState& s) {
    if (g.size() != p.size() || s.m.size() != p.size() || s.v.size() != p.size()) {
        throw DimensionError("opt_step: parameter, gradient and moment lengths differ");
    }
    const double norm = clip_by_global_norm(g, s.max_grad_norm);
    ++s.step;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < p.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        p[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.eps);
    }
    return norm;
}

/// Draws an action from softmax(logits).
inline std::size_t sample_categorical(std::span<const double> logits, Rng& rng) {
    const auto probs = softmax(logits);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

inline std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace acd::nn
