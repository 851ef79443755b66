#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kanlab/activations.hpp"
#include "kanlab/init.hpp"
#include "kanlab/spline.hpp"
#include "kanlab/tape.hpp"
#include "kanlab/tensor.hpp"

namespace kanlab {

enum class ModelFamily { kan, mlp, mlp_wide };
enum class SizeClass { small, medium, large };

inline const char* to_string(ModelFamily f) {
    switch (f) {
        case ModelFamily::kan: return "kan";
        case ModelFamily::mlp: return "mlp";
        case ModelFamily::mlp_wide: return "mlp-wide";
    }
    return "?";
}

inline ModelFamily family_from_string(const std::string& s) {
    if (s == "kan") return ModelFamily::kan;
    if (s == "mlp") return ModelFamily::mlp;
    if (s == "mlp-wide" || s == "mlp_wide" || s == "mlpwide") return ModelFamily::mlp_wide;
    throw std::invalid_argument("unknown model family '" + s + "'");
}

inline const char* to_string(SizeClass s) {
    switch (s) {
        case SizeClass::small: return "small";
        case SizeClass::medium: return "medium";
        case SizeClass::large: return "large";
    }
    return "?";
}

inline SizeClass size_class_from_string(const std::string& s) {
    if (s == "small") return SizeClass::small;
    if (s == "medium") return SizeClass::medium;
    if (s == "large") return SizeClass::large;
    throw std::invalid_argument("unknown size class '" + s + "'");
}

/// Architecture description. `widths` lists hidden-layer widths and must be
/// non-empty when the model is built; preset() fills it from the size class
/// (doubling every width for the wide MLP family).
struct ModelConfig {
    ModelFamily family = ModelFamily::mlp;
    SizeClass size_class = SizeClass::small;
    int in_dim = 0;
    int out_dim = 0;
    std::vector<int> widths;
    int grid = 5;
    int degree = 3;
    std::optional<Activation> activation;  // default: gelu for KAN, relu for MLP
    double dropout = 0.2;
    double domain_lo = -1.0;
    double domain_hi = 1.0;

    Activation resolved_activation() const {
        if (activation) return *activation;
        return family == ModelFamily::kan ? Activation::gelu : Activation::relu;
    }

    static std::vector<int> default_widths(ModelFamily family, SizeClass size) {
        std::vector<int> w;
        switch (size) {
            case SizeClass::small: w = {128}; break;
            case SizeClass::medium: w = {256, 128}; break;
            case SizeClass::large: w = {512, 256, 128}; break;
        }
        if (family == ModelFamily::mlp_wide) {
            for (int& x : w) x *= 2;
        }
        return w;
    }

    static ModelConfig preset(ModelFamily family, SizeClass size, int in_dim, int out_dim) {
        ModelConfig cfg;
        cfg.family = family;
        cfg.size_class = size;
        cfg.in_dim = in_dim;
        cfg.out_dim = out_dim;
        cfg.widths = default_widths(family, size);
        return cfg;
    }
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

/// Fully connected Perceptron layer: activation(x W^T + b), inverted dropout
/// after the activation while training.
struct DenseLayer {
    Param weight;  // [out, in]
    Param bias;    // [out]
    Activation act = Activation::relu;
    double dropout_p = 0.0;

    std::size_t in_width() const { return weight.value.cols(); }
    std::size_t out_width() const { return weight.value.rows(); }
    long param_count() const { return static_cast<long>(weight.size() + bias.size()); }

    NodeId forward(Tape& tape, NodeId x, bool training, Rng* rng) {
        NodeId w = tape.param(weight);
        NodeId b = tape.param(bias);
        NodeId z = tape.bias_add(tape.matmul(x, w, false, true), b);
        NodeId a = tape.apply(z, act);
        if (training && dropout_p > 0.0) {
            if (rng == nullptr) throw std::invalid_argument("dense forward: dropout needs an RNG");
            a = tape.dropout(a, dropout_p, *rng);
        }
        return a;
    }

    Tensor forward_plain(const Tensor& x) const {
        Tensor z = matmul_plain(x, false, weight.value, true);
        Tensor zb;
        bias_add_into(z, bias.value, zb);
        for (double& v : zb.data()) v = activation_value(act, v);
        return zb;
    }
};

/// Layer of Kolmogorov-Arnold units. Each edge (j, i) carries its own scalar
/// function phi(x) = w_base * act(x) + w_spline * sum_t c_t B_t(x); output j
/// sums the edge functions over the input coordinates.
struct KanLayer {
    SplineSpec spec;       // shared by every edge of the layer
    Param w_base;          // [out, in]
    Param w_spline;        // [out, in]
    Param coeffs;          // [out, in * basis_count], edge (j,i) in cols [i*nb, (i+1)*nb)
    Activation base_act = Activation::gelu;

    std::size_t in_width() const { return w_base.value.cols(); }
    std::size_t out_width() const { return w_base.value.rows(); }
    long param_count() const {
        return static_cast<long>(w_base.size() + w_spline.size() + coeffs.size());
    }

    std::vector<std::size_t> spline_repeat_index() const {
        const std::size_t nb = spec.basis_count();
        std::vector<std::size_t> idx(in_width() * nb);
        for (std::size_t i = 0; i < in_width(); ++i) {
            for (std::size_t t = 0; t < nb; ++t) idx[i * nb + t] = i;
        }
        return idx;
    }

    NodeId forward(Tape& tape, NodeId x) {
        if (tape.value(x).cols() != in_width()) {
            throw std::invalid_argument("kan layer: input width " +
                                        std::to_string(tape.value(x).cols()) + " != " +
                                        std::to_string(in_width()));
        }
        NodeId wb = tape.param(w_base);
        NodeId ws = tape.param(w_spline);
        NodeId c = tape.param(coeffs);
        NodeId act = tape.apply(x, base_act);
        NodeId base = tape.matmul(act, wb, false, true);
        NodeId bas = tape.basis_expand(x, spec);
        NodeId ws_rep = tape.gather_cols(ws, spline_repeat_index());
        NodeId edge_w = tape.mul(ws_rep, c);
        NodeId spl = tape.matmul(bas, edge_w, false, true);
        return tape.add(base, spl);
    }

    Tensor forward_plain(const Tensor& x) const {
        if (x.cols() != in_width()) {
            throw std::invalid_argument("kan layer: input width mismatch");
        }
        Tensor act = x;
        for (double& v : act.data()) v = activation_value(base_act, v);
        Tensor base = matmul_plain(act, false, w_base.value, true);
        Tensor bas = basis_expand_plain(x, spec);
        Tensor ws_rep;
        gather_cols_into(w_spline.value, spline_repeat_index(), ws_rep);
        Tensor edge_w;
        mul_into(ws_rep, coeffs.value, edge_w);
        Tensor spl = matmul_plain(bas, false, edge_w, true);
        Tensor out;
        add_into(base, spl, out);
        return out;
    }
};

using Layer = std::variant<DenseLayer, KanLayer>;

/// Scalar KA-unit evaluation, mainly for tests and inspection.
inline double ka_unit_forward(double x, double w_base, double w_spline,
                              std::span<const double> coeffs, Activation base_act,
                              const SplineSpec& spec) {
    return w_base * activation_value(base_act, x) + w_spline * spline_eval(x, spec, coeffs);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class Model {
public:
    ModelConfig config;
    std::vector<Layer> layers;

    std::size_t layer_count() const { return layers.size(); }

    /// Traced forward pass; dropout after every hidden layer when training.
    NodeId forward(Tape& tape, NodeId x, bool training = false, Rng* rng = nullptr) {
        NodeId h = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const bool hidden = i + 1 < layers.size();
            if (auto* dense = std::get_if<DenseLayer>(&layers[i])) {
                h = dense->forward(tape, h, training, rng);
            } else {
                auto& kan = std::get<KanLayer>(layers[i]);
                h = kan.forward(tape, h);
                if (hidden && training && config.dropout > 0.0) {
                    if (rng == nullptr) throw std::invalid_argument("model forward: dropout needs an RNG");
                    h = tape.dropout(h, config.dropout, *rng);
                }
            }
        }
        return h;
    }

    /// Untraced eval-mode forward (no dropout); bitwise identical to the
    /// traced eval-mode pass because both run the same kernels.
    Tensor predict(const Tensor& x) const {
        Tensor h = x;
        for (const Layer& layer : layers) {
            h = std::visit([&](const auto& l) { return l.forward_plain(h); }, layer);
        }
        return h;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (Layer& layer : layers) {
            append_params(layer, out);
        }
        return out;
    }

    std::vector<Param*> layer_params(std::size_t i) {
        std::vector<Param*> out;
        append_params(layers.at(i), out);
        return out;
    }

    long param_count() const {
        long total = 0;
        for (const Layer& layer : layers) {
            total += std::visit([](const auto& l) { return l.param_count(); }, layer);
        }
        return total;
    }

private:
    static void append_params(Layer& layer, std::vector<Param*>& out) {
        if (auto* dense = std::get_if<DenseLayer>(&layer)) {
            out.push_back(&dense->weight);
            out.push_back(&dense->bias);
        } else {
            auto& kan = std::get<KanLayer>(layer);
            out.push_back(&kan.w_base);
            out.push_back(&kan.w_spline);
            out.push_back(&kan.coeffs);
        }
    }
};

inline long dense_param_count(int in, int out) { return static_cast<long>(out) * (in + 1); }

inline long kan_param_count(int in, int out, int grid, int degree) {
    return static_cast<long>(out) * in * (grid + degree + 2);
}

namespace detail {

inline DenseLayer make_dense(int in, int out, Activation act, double dropout, InitScheme scheme,
                             Rng& rng) {
    DenseLayer layer;
    layer.weight = Param(draw_weight(scheme, static_cast<std::size_t>(out),
                                     static_cast<std::size_t>(in), rng));
    layer.bias = Param(Tensor({static_cast<std::size_t>(out)}));
    layer.act = act;
    layer.dropout_p = dropout;
    return layer;
}

/// KA-unit initialization: the scheme draws the base weights, w_spline starts
/// at 1, and the spline coefficients get small noise scaled by the scheme's
/// gain so every spline starts close to zero.
inline KanLayer make_kan(int in, int out, const ModelConfig& cfg, Activation act, InitScheme scheme,
                         Rng& rng) {
    KanLayer layer;
    layer.spec = make_uniform_knots(cfg.domain_lo, cfg.domain_hi, cfg.grid, cfg.degree);
    layer.base_act = act;
    layer.w_base = Param(draw_weight(scheme, static_cast<std::size_t>(out),
                                     static_cast<std::size_t>(in), rng));
    layer.w_spline = Param(Tensor::full({static_cast<std::size_t>(out),
                                         static_cast<std::size_t>(in)}, 1.0));
    const std::size_t nb = layer.spec.basis_count();
    Tensor c({static_cast<std::size_t>(out), static_cast<std::size_t>(in) * nb});
    const double sd = 0.1 * init_gain(scheme, static_cast<std::size_t>(in));
    std::normal_distribution<double> noise(0.0, sd);
    for (double& v : c.data()) v = noise(rng);
    layer.coeffs = Param(std::move(c));
    return layer;
}

}  // namespace detail

/// Build a model from its config. MLP families stack dense hidden layers and
/// finish with a plain linear layer; the KAN family uses KA layers on every
/// transition including the output (per-edge splines, no bias). Logits are
/// never passed through an activation.
inline Model build_model(const ModelConfig& cfg, InitScheme scheme, Rng& rng) {
    if (cfg.in_dim < 1 || cfg.out_dim < 1) {
        throw std::invalid_argument("build_model: in_dim and out_dim must be positive");
    }
    if (cfg.widths.empty()) {
        throw std::invalid_argument("build_model: widths must not be empty (use ModelConfig::preset)");
    }
    for (int w : cfg.widths) {
        if (w < 1) throw std::invalid_argument("build_model: widths must be positive");
    }
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
        throw std::invalid_argument("build_model: dropout must be in [0,1)");
    }

    Model model;
    model.config = cfg;
    std::vector<int> dims;
    dims.push_back(cfg.in_dim);
    dims.insert(dims.end(), cfg.widths.begin(), cfg.widths.end());
    dims.push_back(cfg.out_dim);

    const Activation act = cfg.resolved_activation();
    if (cfg.family == ModelFamily::kan) {
        for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
            model.layers.emplace_back(detail::make_kan(dims[i], dims[i + 1], cfg, act, scheme, rng));
        }
    } else {
        for (std::size_t i = 0; i + 2 < dims.size(); ++i) {
            model.layers.emplace_back(
                detail::make_dense(dims[i], dims[i + 1], act, cfg.dropout, scheme, rng));
        }
        model.layers.emplace_back(detail::make_dense(dims[dims.size() - 2], dims.back(),
                                                     Activation::identity, 0.0, scheme, rng));
    }
    return model;
}

inline Model build_model(const ModelConfig& cfg, InitScheme scheme = InitScheme::kaiming_normal,
                         std::uint64_t seed = 0) {
    Rng rng(seed);
    return build_model(cfg, scheme, rng);
}

}  // namespace kanlab
