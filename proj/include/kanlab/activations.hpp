#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace kanlab {

enum class Activation { identity, relu, gelu, silu, elu, cosine };

/// Exact (erf-based) GELU, not the tanh approximation.
inline double activation_value(Activation f, double x) {
    switch (f) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476));
        case Activation::silu: return x / (1.0 + std::exp(-x));
        case Activation::elu: return x > 0.0 ? x : std::expm1(x);
        case Activation::cosine: return std::cos(x);
    }
    throw std::logic_error("activation_value: unknown activation");
}

inline double activation_grad(Activation f, double x) {
    switch (f) {
        case Activation::identity: return 1.0;
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::gelu: {
            const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865476));
            const double pdf = 0.3989422804014327 * std::exp(-0.5 * x * x);
            return cdf + x * pdf;
        }
        case Activation::silu: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        }
        case Activation::elu: return x > 0.0 ? 1.0 : std::exp(x);
        case Activation::cosine: return -std::sin(x);
    }
    throw std::logic_error("activation_grad: unknown activation");
}

inline const char* to_string(Activation f) {
    switch (f) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::gelu: return "gelu";
        case Activation::silu: return "silu";
        case Activation::elu: return "elu";
        case Activation::cosine: return "cosine";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "gelu") return Activation::gelu;
    if (s == "silu") return Activation::silu;
    if (s == "elu") return Activation::elu;
    if (s == "cosine") return Activation::cosine;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

}  // namespace kanlab
