#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "kanlab/activations.hpp"
#include "kanlab/spline.hpp"
#include "kanlab/tensor.hpp"

namespace kanlab {

using Rng = std::mt19937_64;
using NodeId = std::uint32_t;

/// Learnable tensor with a persistent gradient buffer. Gradients accumulate
/// across backward passes until zero_grad() is called.
struct Param {
    Tensor value;
    Tensor grad;

    Param() = default;
    explicit Param(Tensor v) : value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
    std::size_t size() const { return value.size(); }
};

namespace op {

struct Leaf {};
struct Matmul { NodeId a, b; bool trans_a, trans_b; };
struct Add { NodeId a, b; };
struct BiasAdd { NodeId mat, row; };
struct Mul { NodeId a, b; };
struct Scale { NodeId x; double c; };
struct Map { NodeId x; Activation f; };
struct Sum { NodeId x; };
struct Mean { NodeId x; };
struct GatherCols { NodeId x; std::shared_ptr<const std::vector<std::size_t>> idx; };
struct BasisExpand { NodeId x; std::shared_ptr<const SplineSpec> spec; };
struct Dropout { NodeId x; Tensor scaled_mask; };  // entries in {0, 1/keep}
struct SoftmaxCrossEntropy { NodeId logits; std::shared_ptr<const std::vector<int>> labels; Tensor probs; };
struct PairwiseSqdist { NodeId x; };
struct GaussFromSqdist { NodeId d; double sigma; };
struct DoubleCenter { NodeId x; };

using Record = std::variant<Leaf, Matmul, Add, BiasAdd, Mul, Scale, Map, Sum, Mean, GatherCols,
                            BasisExpand, Dropout, SoftmaxCrossEntropy, PairwiseSqdist,
                            GaussFromSqdist, DoubleCenter>;

}  // namespace op

/// Evaluate the B-spline basis of every element of a [rows x d] matrix,
/// producing [rows x d*basis_count] with the expansion of element (r, i)
/// in columns [i*basis_count, (i+1)*basis_count).
inline Tensor basis_expand_plain(const Tensor& x, const SplineSpec& spec) {
    check_rank2(x, "basis_expand");
    const std::size_t nb = spec.basis_count();
    Tensor out({x.rows(), x.cols() * nb});
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double* dst = out.raw() + r * x.cols() * nb;
        const double* src = x.raw() + r * x.cols();
        for (std::size_t i = 0; i < x.cols(); ++i) {
            bspline_basis_into(spec, src[i], std::span<double>(dst + i * nb, nb));
        }
    }
    return out;
}

inline Tensor pairwise_sqdist_plain(const Tensor& x) {
    check_rank2(x, "pairwise_sqdist");
    const std::size_t m = x.rows();
    const std::size_t d = x.cols();
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        const double* xi = x.raw() + i * d;
        for (std::size_t j = i + 1; j < m; ++j) {
            const double* xj = x.raw() + j * d;
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = xi[t] - xj[t];
                acc += diff * diff;
            }
            out.at(i, j) = acc;
            out.at(j, i) = acc;
        }
    }
    return out;
}

/// H X H with H = I - (1/m) 11^T, computed as X - row means - col means + grand mean.
inline Tensor double_center_plain(const Tensor& x) {
    check_rank2(x, "double_center");
    if (x.rows() != x.cols()) throw std::invalid_argument("double_center: matrix must be square");
    const std::size_t m = x.rows();
    std::vector<double> row_mean(m, 0.0), col_mean(m, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double v = x.at(i, j);
            row_mean[i] += v;
            col_mean[j] += v;
            grand += v;
        }
    }
    for (std::size_t i = 0; i < m; ++i) row_mean[i] /= static_cast<double>(m);
    for (std::size_t j = 0; j < m; ++j) col_mean[j] /= static_cast<double>(m);
    grand /= static_cast<double>(m) * static_cast<double>(m);
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            out.at(i, j) = x.at(i, j) - row_mean[i] - col_mean[j] + grand;
        }
    }
    return out;
}

/// Reverse-mode differentiation tape. Operations execute eagerly and record
/// enough to replay gradients; nodes are appended in topological order, so a
/// single reverse sweep visits every node exactly once.
class Tape {
public:
    NodeId constant(Tensor v) { return push(std::move(v), op::Leaf{}, nullptr); }

    /// Leaf bound to an external parameter: backward() adds into p.grad.
    NodeId param(Param& p) { return push(p.value, op::Leaf{}, &p); }

    NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false) {
        Tensor out = matmul_plain(value(a), trans_a, value(b), trans_b);
        return push(std::move(out), op::Matmul{a, b, trans_a, trans_b});
    }

    NodeId add(NodeId a, NodeId b) {
        Tensor out;
        add_into(value(a), value(b), out);
        return push(std::move(out), op::Add{a, b});
    }

    NodeId bias_add(NodeId mat, NodeId row) {
        Tensor out;
        bias_add_into(value(mat), value(row), out);
        return push(std::move(out), op::BiasAdd{mat, row});
    }

    NodeId mul(NodeId a, NodeId b) {
        Tensor out;
        mul_into(value(a), value(b), out);
        return push(std::move(out), op::Mul{a, b});
    }

    NodeId scale(NodeId x, double c) {
        Tensor out = value(x);
        for (double& v : out.data()) v *= c;
        return push(std::move(out), op::Scale{x, c});
    }

    NodeId apply(NodeId x, Activation f) {
        Tensor out = value(x);
        for (double& v : out.data()) v = activation_value(f, v);
        return push(std::move(out), op::Map{x, f});
    }

    NodeId sum(NodeId x) {
        double acc = 0.0;
        for (double v : value(x).data()) acc += v;
        return push(Tensor::scalar(acc), op::Sum{x});
    }

    NodeId mean(NodeId x) {
        double acc = 0.0;
        for (double v : value(x).data()) acc += v;
        return push(Tensor::scalar(acc / static_cast<double>(value(x).size())), op::Mean{x});
    }

    NodeId gather_cols(NodeId x, std::vector<std::size_t> idx) {
        auto shared = std::make_shared<const std::vector<std::size_t>>(std::move(idx));
        Tensor out;
        gather_cols_into(value(x), *shared, out);
        return push(std::move(out), op::GatherCols{x, std::move(shared)});
    }

    NodeId basis_expand(NodeId x, const SplineSpec& spec) {
        auto shared = std::make_shared<const SplineSpec>(spec);
        Tensor out = basis_expand_plain(value(x), *shared);
        return push(std::move(out), op::BasisExpand{x, std::move(shared)});
    }

    /// Inverted dropout with a caller-supplied RNG (training mode only).
    NodeId dropout(NodeId x, double p, Rng& rng) {
        if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
        const double keep = 1.0 - p;
        Tensor mask(value(x).shape());
        std::bernoulli_distribution coin(keep);
        for (double& v : mask.data()) v = coin(rng) ? 1.0 / keep : 0.0;
        return dropout_mask(x, std::move(mask));
    }

    /// Dropout with an explicit {0, 1/keep} mask; deterministic, used by tests.
    NodeId dropout_mask(NodeId x, Tensor scaled_mask) {
        if (!scaled_mask.same_shape(value(x))) throw std::invalid_argument("dropout: mask shape mismatch");
        Tensor out;
        mul_into(value(x), scaled_mask, out);
        return push(std::move(out), op::Dropout{x, std::move(scaled_mask)});
    }

    /// Mean softmax cross-entropy over the batch, fused for stability.
    NodeId softmax_cross_entropy(NodeId logits, std::vector<int> labels) {
        const Tensor& z = value(logits);
        check_rank2(z, "softmax_cross_entropy");
        const std::size_t m = z.rows();
        const std::size_t c = z.cols();
        if (labels.size() != m) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
        Tensor probs({m, c});
        double loss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const int y = labels[i];
            if (y < 0 || static_cast<std::size_t>(y) >= c)
                throw std::invalid_argument("softmax_cross_entropy: label out of range");
            const double* row = z.raw() + i * c;
            double zmax = row[0];
            for (std::size_t j = 1; j < c; ++j) zmax = std::max(zmax, row[j]);
            double denom = 0.0;
            for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - zmax);
            const double log_denom = std::log(denom) + zmax;
            for (std::size_t j = 0; j < c; ++j) probs.at(i, j) = std::exp(row[j] - log_denom);
            loss += log_denom - row[static_cast<std::size_t>(y)];
        }
        loss /= static_cast<double>(m);
        auto shared = std::make_shared<const std::vector<int>>(std::move(labels));
        return push(Tensor::scalar(loss),
                    op::SoftmaxCrossEntropy{logits, std::move(shared), std::move(probs)});
    }

    NodeId pairwise_sqdist(NodeId x) {
        return push(pairwise_sqdist_plain(value(x)), op::PairwiseSqdist{x});
    }

    NodeId gaussian_from_sqdist(NodeId d, double sigma) {
        if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_from_sqdist: sigma must be positive");
        Tensor out = value(d);
        const double inv = -1.0 / (2.0 * sigma * sigma);
        for (double& v : out.data()) v = std::exp(v * inv);
        return push(std::move(out), op::GaussFromSqdist{d, sigma});
    }

    NodeId double_center(NodeId x) {
        return push(double_center_plain(value(x)), op::DoubleCenter{x});
    }

    const Tensor& value(NodeId id) const { return nodes_[id].value; }

    /// Gradient of the last backward() loss w.r.t. node `id`.
    const Tensor& grad(NodeId id) const {
        if (!ran_backward_) throw std::logic_error("Tape::grad: backward() has not run");
        return nodes_[id].grad;
    }

    std::size_t size() const { return nodes_.size(); }

    /// Reverse sweep from a scalar loss. Gradients of fan-out nodes accumulate;
    /// leaves bound to a Param add into the param's persistent buffer.
    void backward(NodeId loss) {
        if (value(loss).size() != 1) {
            throw std::invalid_argument("backward: loss must be scalar, got " +
                                        Tensor::shape_string(value(loss).shape()));
        }
        for (Node& n : nodes_) {
            n.grad = Tensor(n.value.shape());
        }
        nodes_[loss].grad[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            propagate(static_cast<NodeId>(i));
        }
        for (Node& n : nodes_) {
            if (n.bound != nullptr) {
                double* dst = n.bound->grad.raw();
                const double* src = n.grad.raw();
                for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
            }
        }
        ran_backward_ = true;
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        op::Record record;
        Param* bound = nullptr;
    };

    NodeId push(Tensor v, op::Record r, Param* bound = nullptr) {
        nodes_.push_back(Node{std::move(v), Tensor(), std::move(r), bound});
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    Tensor& grad_buf(NodeId id) { return nodes_[id].grad; }

    void propagate(NodeId id) {
        const Tensor& g = nodes_[id].grad;
        std::visit(
            [&](const auto& rec) { backward_op(rec, g, nodes_[id].value); },
            nodes_[id].record);
    }

    void backward_op(const op::Leaf&, const Tensor&, const Tensor&) {}

    void backward_op(const op::Matmul& r, const Tensor& g, const Tensor&) {
        const Tensor& a = value(r.a);
        const Tensor& b = value(r.b);
        if (!r.trans_a && !r.trans_b) {
            matmul_acc(g, false, b, true, grad_buf(r.a), true);
            matmul_acc(a, true, g, false, grad_buf(r.b), true);
        } else if (!r.trans_a && r.trans_b) {
            matmul_acc(g, false, b, false, grad_buf(r.a), true);
            matmul_acc(g, true, a, false, grad_buf(r.b), true);
        } else if (r.trans_a && !r.trans_b) {
            matmul_acc(b, false, g, true, grad_buf(r.a), true);
            matmul_acc(a, false, g, false, grad_buf(r.b), true);
        } else {
            matmul_acc(b, true, g, true, grad_buf(r.a), true);
            matmul_acc(g, true, a, true, grad_buf(r.b), true);
        }
    }

    void backward_op(const op::Add& r, const Tensor& g, const Tensor&) {
        axpy(1.0, g, grad_buf(r.a));
        axpy(1.0, g, grad_buf(r.b));
    }

    void backward_op(const op::BiasAdd& r, const Tensor& g, const Tensor&) {
        axpy(1.0, g, grad_buf(r.mat));
        Tensor& gr = grad_buf(r.row);
        const std::size_t cols = g.cols();
        for (std::size_t i = 0; i < g.rows(); ++i) {
            for (std::size_t j = 0; j < cols; ++j) gr[j] += g.at(i, j);
        }
    }

    void backward_op(const op::Mul& r, const Tensor& g, const Tensor&) {
        mul_acc(value(r.b), g, grad_buf(r.a));
        mul_acc(value(r.a), g, grad_buf(r.b));
    }

    void backward_op(const op::Scale& r, const Tensor& g, const Tensor&) {
        axpy(r.c, g, grad_buf(r.x));
    }

    void backward_op(const op::Map& r, const Tensor& g, const Tensor&) {
        const Tensor& x = value(r.x);
        Tensor& gx = grad_buf(r.x);
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += activation_grad(r.f, x[i]) * g[i];
    }

    void backward_op(const op::Sum& r, const Tensor& g, const Tensor&) {
        Tensor& gx = grad_buf(r.x);
        const double gv = g[0];
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
    }

    void backward_op(const op::Mean& r, const Tensor& g, const Tensor&) {
        Tensor& gx = grad_buf(r.x);
        const double gv = g[0] / static_cast<double>(gx.size());
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gv;
    }

    void backward_op(const op::GatherCols& r, const Tensor& g, const Tensor&) {
        Tensor& gx = grad_buf(r.x);
        const auto& idx = *r.idx;
        const std::size_t n = idx.size();
        for (std::size_t i = 0; i < g.rows(); ++i) {
            double* dst = gx.raw() + i * gx.cols();
            const double* src = g.raw() + i * n;
            for (std::size_t j = 0; j < n; ++j) dst[idx[j]] += src[j];
        }
    }

    void backward_op(const op::BasisExpand& r, const Tensor& g, const Tensor&) {
        const Tensor& x = value(r.x);
        Tensor& gx = grad_buf(r.x);
        const SplineSpec& spec = *r.spec;
        const std::size_t nb = spec.basis_count();
        std::vector<double> deriv(nb);
        for (std::size_t row = 0; row < x.rows(); ++row) {
            const double* xp = x.raw() + row * x.cols();
            const double* gp = g.raw() + row * x.cols() * nb;
            double* dst = gx.raw() + row * x.cols();
            for (std::size_t i = 0; i < x.cols(); ++i) {
                bspline_basis_derivative_into(spec, xp[i], deriv);
                double acc = 0.0;
                for (std::size_t t = 0; t < nb; ++t) acc += gp[i * nb + t] * deriv[t];
                dst[i] += acc;
            }
        }
    }

    void backward_op(const op::Dropout& r, const Tensor& g, const Tensor&) {
        mul_acc(r.scaled_mask, g, grad_buf(r.x));
    }

    void backward_op(const op::SoftmaxCrossEntropy& r, const Tensor& g, const Tensor&) {
        Tensor& gz = grad_buf(r.logits);
        const std::size_t m = r.probs.rows();
        const std::size_t c = r.probs.cols();
        const double scale = g[0] / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            const int y = (*r.labels)[i];
            for (std::size_t j = 0; j < c; ++j) {
                const double onehot = (static_cast<std::size_t>(y) == j) ? 1.0 : 0.0;
                gz.at(i, j) += scale * (r.probs.at(i, j) - onehot);
            }
        }
    }

    void backward_op(const op::PairwiseSqdist& r, const Tensor& g, const Tensor&) {
        const Tensor& x = value(r.x);
        Tensor& gx = grad_buf(r.x);
        const std::size_t m = x.rows();
        const std::size_t d = x.cols();
        for (std::size_t i = 0; i < m; ++i) {
            const double* xi = x.raw() + i * d;
            double* gi = gx.raw() + i * d;
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                const double w = 2.0 * (g.at(i, j) + g.at(j, i));
                if (w == 0.0) continue;
                const double* xj = x.raw() + j * d;
                for (std::size_t t = 0; t < d; ++t) gi[t] += w * (xi[t] - xj[t]);
            }
        }
    }

    void backward_op(const op::GaussFromSqdist& r, const Tensor& g, const Tensor& out) {
        Tensor& gd = grad_buf(r.d);
        const double inv = -1.0 / (2.0 * r.sigma * r.sigma);
        for (std::size_t i = 0; i < out.size(); ++i) gd[i] += g[i] * out[i] * inv;
    }

    void backward_op(const op::DoubleCenter& r, const Tensor& g, const Tensor&) {
        // H is symmetric, so the adjoint is double-centering again.
        Tensor centered = double_center_plain(g);
        axpy(1.0, centered, grad_buf(r.x));
    }

    static void axpy(double a, const Tensor& x, Tensor& y) {
        const double* px = x.raw();
        double* py = y.raw();
        for (std::size_t i = 0; i < x.size(); ++i) py[i] += a * px[i];
    }

    static void mul_acc(const Tensor& a, const Tensor& b, Tensor& out) {
        const double* pa = a.raw();
        const double* pb = b.raw();
        double* po = out.raw();
        for (std::size_t i = 0; i < a.size(); ++i) po[i] += pa[i] * pb[i];
    }

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

/// Max relative error between the analytic gradient of f w.r.t. its input
/// tensor and central finite differences, |analytic - fd| / max(1, |analytic|).
/// F has signature NodeId(Tape&, NodeId input).
template <class F>
double grad_check(F&& f, const Tensor& point, double h = 1e-5) {
    if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");
    Tape tape;
    Param p(point);
    NodeId in = tape.param(p);
    NodeId out = f(tape, in);
    tape.backward(out);
    const Tensor analytic = [&] {
        Tensor g(point.shape());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = p.grad[i];
        return g;
    }();

    auto eval = [&](const Tensor& at) {
        Tape t;
        NodeId node = t.constant(at);
        return t.value(f(t, node))[0];
    };

    double worst = 0.0;
    Tensor perturbed = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const double orig = perturbed[i];
        perturbed[i] = orig + h;
        const double up = eval(perturbed);
        perturbed[i] = orig - h;
        const double down = eval(perturbed);
        perturbed[i] = orig;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace kanlab
