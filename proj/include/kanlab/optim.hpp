#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kanlab/tape.hpp"
#include "kanlab/tensor.hpp"

namespace kanlab {

enum class OptimizerKind { sgd, sgd_momentum, adam };

inline const char* to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::sgd: return "sgd";
        case OptimizerKind::sgd_momentum: return "sgd-m";
        case OptimizerKind::adam: return "adam";
    }
    return "?";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "sgd-m" || s == "sgd_m" || s == "sgdm") return OptimizerKind::sgd_momentum;
    if (s == "adam") return OptimizerKind::adam;
    throw std::invalid_argument("unknown optimizer '" + s + "'");
}

/// SGD / SGD with momentum / Adam behind one step() interface. State buffers
/// bind to the parameter list on first use and must keep matching shapes.
class Optimizer {
public:
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.01;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    Optimizer() = default;
    Optimizer(OptimizerKind kind, double lr) : kind(kind), lr(lr) {}

    std::int64_t step_count() const { return t_; }

    void step(const std::vector<Param*>& params) {
        bind(params);
        ++t_;
        switch (kind) {
            case OptimizerKind::sgd: {
                for (std::size_t p = 0; p < params.size(); ++p) {
                    double* v = params[p]->value.raw();
                    const double* g = params[p]->grad.raw();
                    for (std::size_t i = 0; i < params[p]->size(); ++i) v[i] -= lr * g[i];
                }
                break;
            }
            case OptimizerKind::sgd_momentum: {
                for (std::size_t p = 0; p < params.size(); ++p) {
                    double* v = params[p]->value.raw();
                    const double* g = params[p]->grad.raw();
                    double* buf = m_[p].raw();
                    for (std::size_t i = 0; i < params[p]->size(); ++i) {
                        buf[i] = momentum * buf[i] + g[i];
                        v[i] -= lr * buf[i];
                    }
                }
                break;
            }
            case OptimizerKind::adam: {
                const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
                const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
                for (std::size_t p = 0; p < params.size(); ++p) {
                    double* v = params[p]->value.raw();
                    const double* g = params[p]->grad.raw();
                    double* m = m_[p].raw();
                    double* s = v_[p].raw();
                    for (std::size_t i = 0; i < params[p]->size(); ++i) {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        s[i] = beta2 * s[i] + (1.0 - beta2) * g[i] * g[i];
                        const double mhat = m[i] / bc1;
                        const double shat = s[i] / bc2;
                        v[i] -= lr * mhat / (std::sqrt(shat) + eps);
                    }
                }
                break;
            }
        }
    }

    static void zero_grads(const std::vector<Param*>& params) {
        for (Param* p : params) p->zero_grad();
    }

private:
    void bind(const std::vector<Param*>& params) {
        if (!bound_) {
            shapes_.reserve(params.size());
            for (Param* p : params) shapes_.push_back(p->value.shape());
            if (kind != OptimizerKind::sgd) {
                m_.reserve(params.size());
                for (Param* p : params) m_.emplace_back(p->value.shape());
            }
            if (kind == OptimizerKind::adam) {
                v_.reserve(params.size());
                for (Param* p : params) v_.emplace_back(p->value.shape());
            }
            bound_ = true;
            return;
        }
        if (params.size() != shapes_.size()) {
            throw std::invalid_argument("Optimizer::step: parameter count changed");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i]->value.shape() != shapes_[i] ||
                !params[i]->grad.same_shape(params[i]->value)) {
                throw std::invalid_argument("Optimizer::step: buffer shape mismatch at parameter " +
                                            std::to_string(i));
            }
        }
    }

    bool bound_ = false;
    std::int64_t t_ = 0;
    std::vector<std::vector<std::size_t>> shapes_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

}  // namespace kanlab
