// model.hpp - binary classifiers with flat parameters
//
// Two models: logistic regression (the workhorse) and a one-hidden-layer
// tanh MLP. Parameters live in a flat vector with a named layout so the
// aggregation side can average them without knowing the architecture.
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedul/common.hpp"
#include "fedul/rng.hpp"

namespace fedul::model {

// Predicted probabilities are clamped to [kProbEps, 1 - kProbEps].
inline constexpr double kProbEps = 1e-7;

enum class ModelKind { logistic, mlp };

struct ModelSpec {
    ModelKind kind = ModelKind::logistic;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 16; // mlp only
    std::uint64_t init_seed = 0;
    double init_scale = 0.1;

    bool operator==(const ModelSpec&) const = default;

    void validate() const {
        if (input_dim < 1) throw std::runtime_error("model: input_dim must be >= 1");
        if (kind == ModelKind::mlp && hidden_dim < 1)
            throw std::runtime_error("model: hidden_dim must be >= 1");
    }

    std::size_t param_count() const {
        return kind == ModelKind::logistic ? input_dim + 1
                                           : hidden_dim * input_dim + hidden_dim + hidden_dim + 1;
    }
};

struct TensorShape {
    std::string name;
    std::vector<std::size_t> dims;

    bool operator==(const TensorShape&) const = default;

    std::size_t size() const {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return n;
    }
};

struct ParamVector {
    std::vector<double> values;
    std::vector<TensorShape> layout;

    std::size_t size() const { return values.size(); }

    bool same_layout(const ParamVector& o) const { return layout == o.layout; }

    std::size_t layout_size() const {
        std::size_t n = 0;
        for (const auto& t : layout) n += t.size();
        return n;
    }

    void validate() const {
        if (layout_size() != values.size())
            throw std::runtime_error("param vector: layout does not match value count");
        for (double v : values)
            if (!std::isfinite(v)) throw std::runtime_error("param vector: non-finite value");
    }

    ParamVector& add_scaled(const ParamVector& o, double s) {
        if (!same_layout(o)) throw std::runtime_error("param vector: layout mismatch");
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += s * o.values[i];
        return *this;
    }
    ParamVector& scale(double s) {
        for (double& v : values) v *= s;
        return *this;
    }
};

inline ParamVector operator-(const ParamVector& a, const ParamVector& b) {
    ParamVector r = a;
    r.add_scaled(b, -1.0);
    return r;
}

inline double max_abs_diff(const ParamVector& a, const ParamVector& b) {
    if (!a.same_layout(b)) throw std::runtime_error("param vector: layout mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

struct Batch {
    Matrix x;
    std::vector<int> y;

    std::size_t size() const { return x.rows(); }
};

inline ParamVector zero_params_like(const ModelSpec& spec) {
    ParamVector p;
    if (spec.kind == ModelKind::logistic) {
        p.layout = {{"w", {spec.input_dim}}, {"b", {1}}};
    } else {
        p.layout = {{"w1", {spec.hidden_dim, spec.input_dim}},
                    {"b1", {spec.hidden_dim}},
                    {"w2", {spec.hidden_dim}},
                    {"b2", {1}}};
    }
    p.values.assign(spec.param_count(), 0.0);
    return p;
}

/// Logistic starts at zero (convex; any start works and zero keeps retrain
/// baselines comparable). The MLP breaks symmetry with uniform noise.
inline ParamVector init_params(const ModelSpec& spec) {
    spec.validate();
    ParamVector p = zero_params_like(spec);
    if (spec.kind == ModelKind::mlp) {
        Rng rng(derive_seed(spec.init_seed, "init_params"));
        for (double& v : p.values) v = rng.uniform(-spec.init_scale, spec.init_scale);
    }
    return p;
}

namespace detail {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double clamp_prob(double q) {
    return std::min(1.0 - kProbEps, std::max(kProbEps, q));
}

} // namespace detail

/// Forward pass with enough intermediates cached to backpropagate any
/// per-sample d(loss)/d(logit) afterwards.
struct Forward {
    std::vector<double> logits;
    std::vector<double> probs;  // clamped
    Matrix hidden;              // mlp tanh activations, empty for logistic
};

inline Forward forward(const ParamVector& p, const ModelSpec& spec, const Matrix& x) {
    spec.validate();
    if (x.cols() != spec.input_dim) throw std::runtime_error("model: input width mismatch");
    if (p.size() != spec.param_count()) throw std::runtime_error("model: param size mismatch");

    Forward f;
    const std::size_t n = x.rows();
    f.logits.resize(n);
    f.probs.resize(n);

    if (spec.kind == ModelKind::logistic) {
        const double* w = p.values.data();
        const double b = p.values[spec.input_dim];
        for (std::size_t i = 0; i < n; ++i) {
            double z = b;
            const auto row = x.row(i);
            for (std::size_t j = 0; j < spec.input_dim; ++j) z += w[j] * row[j];
            f.logits[i] = z;
            f.probs[i] = detail::clamp_prob(detail::sigmoid(z));
        }
    } else {
        const std::size_t d = spec.input_dim, h = spec.hidden_dim;
        const double* w1 = p.values.data();
        const double* b1 = w1 + h * d;
        const double* w2 = b1 + h;
        const double bias2 = p.values[h * d + h + h];
        f.hidden = Matrix(n, h);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(i);
            double z2 = bias2;
            for (std::size_t j = 0; j < h; ++j) {
                double a = b1[j];
                const double* wj = w1 + j * d;
                for (std::size_t k = 0; k < d; ++k) a += wj[k] * row[k];
                const double t = std::tanh(a);
                f.hidden(i, j) = t;
                z2 += w2[j] * t;
            }
            f.logits[i] = z2;
            f.probs[i] = detail::clamp_prob(detail::sigmoid(z2));
        }
    }
    return f;
}

/// Gradient of sum_i dlogit[i] * logit_i(p) in the model's layout. Callers
/// bake loss derivatives (including any 1/n) into dlogit.
inline ParamVector backward_from_dlogit(const ParamVector& p, const ModelSpec& spec,
                                        const Matrix& x, const Forward& f,
                                        std::span<const double> dlogit) {
    ParamVector g = zero_params_like(spec);
    const std::size_t n = x.rows();
    if (spec.kind == ModelKind::logistic) {
        double* gw = g.values.data();
        double& gb = g.values[spec.input_dim];
        for (std::size_t i = 0; i < n; ++i) {
            const double dz = dlogit[i];
            if (dz == 0.0) continue;
            const auto row = x.row(i);
            for (std::size_t j = 0; j < spec.input_dim; ++j) gw[j] += dz * row[j];
            gb += dz;
        }
    } else {
        const std::size_t d = spec.input_dim, h = spec.hidden_dim;
        const double* w2 = p.values.data() + h * d + h;
        double* gw1 = g.values.data();
        double* gb1 = gw1 + h * d;
        double* gw2 = gb1 + h;
        double& gb2 = g.values[h * d + h + h];
        for (std::size_t i = 0; i < n; ++i) {
            const double dz = dlogit[i];
            if (dz == 0.0) continue;
            const auto row = x.row(i);
            gb2 += dz;
            for (std::size_t j = 0; j < h; ++j) {
                const double t = f.hidden(i, j);
                gw2[j] += dz * t;
                const double da = dz * w2[j] * (1.0 - t * t);
                gb1[j] += da;
                double* gw1j = gw1 + j * d;
                for (std::size_t k = 0; k < d; ++k) gw1j[k] += da * row[k];
            }
        }
    }
    return g;
}

/// Per-sample d(mean BCE)/d(logit): (q - y) / n, the usual sigmoid+CE
/// composite. The probability clamp only guards the loss value; the gradient
/// stays live at saturation so optimization does not silently freeze.
inline std::vector<double> bce_dlogit(const Forward& f, std::span<const int> y) {
    const std::size_t n = y.size();
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = (f.probs[i] - static_cast<double>(y[i])) / static_cast<double>(n);
    return d;
}

/// Per-sample d(mean KL(ref || cur))/d(logit): (q - r) / n.
inline std::vector<double> kl_dlogit(const Forward& f, std::span<const double> ref_probs) {
    const std::size_t n = ref_probs.size();
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = (f.probs[i] - ref_probs[i]) / static_cast<double>(n);
    return d;
}

inline std::vector<double> predict_proba(const ParamVector& p, const ModelSpec& spec,
                                         const Matrix& x) {
    return forward(p, spec, x).probs;
}

inline double bce_loss(const ParamVector& p, const ModelSpec& spec, const Batch& batch) {
    if (batch.size() == 0) throw std::runtime_error("bce_loss: empty batch");
    const Forward f = forward(p, spec, batch.x);
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double q = f.probs[i];
        sum -= batch.y[i] == 1 ? std::log(q) : std::log(1.0 - q);
    }
    return sum / static_cast<double>(batch.size());
}

inline ParamVector bce_grad(const ParamVector& p, const ModelSpec& spec, const Batch& batch) {
    if (batch.size() == 0) throw std::runtime_error("bce_grad: empty batch");
    const Forward f = forward(p, spec, batch.x);
    return backward_from_dlogit(p, spec, batch.x, f, bce_dlogit(f, batch.y));
}

/// Mean KL(Bernoulli(ref) || Bernoulli(cur)) over a batch.
inline double mean_kl_bernoulli(std::span<const double> ref, std::span<const double> cur) {
    if (ref.size() != cur.size() || ref.empty())
        throw std::runtime_error("mean_kl_bernoulli: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double r = ref[i], q = cur[i];
        sum += r * std::log(r / q) + (1.0 - r) * std::log((1.0 - r) / (1.0 - q));
    }
    return sum / static_cast<double>(ref.size());
}

inline std::vector<int> classify(const ParamVector& p, const ModelSpec& spec, const Matrix& x,
                                 double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::runtime_error("classify: threshold must be in (0,1)");
    const auto probs = predict_proba(p, spec, x);
    std::vector<int> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= threshold ? 1 : 0;
    return out;
}

// ---- checkpoint blob: "FUPV" | version | layout | little-endian f64 values

inline std::vector<std::uint8_t> to_bytes(const ParamVector& p) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'F', 'U', 'P', 'V'});
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(p.layout.size()));
    for (const auto& t : p.layout) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.insert(out.end(), t.name.begin(), t.name.end());
        put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (std::size_t d : t.dims) put_u64(out, d);
    }
    put_u64(out, p.values.size());
    for (double v : p.values) put_f64(out, v);
    return out;
}

inline ParamVector from_bytes(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.str(4) != "FUPV") throw std::runtime_error("checkpoint: bad magic");
    if (r.u32() != 1) throw std::runtime_error("checkpoint: unsupported version");
    ParamVector p;
    const std::uint32_t n_tensors = r.u32();
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        TensorShape t;
        t.name = r.str(r.u32());
        const std::uint32_t rank = r.u32();
        for (std::uint32_t k = 0; k < rank; ++k) t.dims.push_back(r.u64());
        p.layout.push_back(std::move(t));
    }
    const std::uint64_t n_values = r.u64();
    p.values.reserve(n_values);
    for (std::uint64_t i = 0; i < n_values; ++i) p.values.push_back(r.f64());
    if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
    p.validate();
    return p;
}

inline void save_params(const ParamVector& p, const std::string& path) {
    const auto bytes = to_bytes(p);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

inline ParamVector load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

inline std::uint64_t digest(const ParamVector& p) {
    const auto bytes = to_bytes(p);
    return fnv1a64(bytes.data(), bytes.size());
}

} // namespace fedul::model
