#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kanlab/dataset.hpp"
#include "kanlab/hsic.hpp"
#include "kanlab/layers.hpp"
#include "kanlab/metrics.hpp"
#include "kanlab/optim.hpp"

namespace kanlab {

enum class TrainerKind { backprop, hsic };

inline const char* to_string(TrainerKind t) { return t == TrainerKind::backprop ? "backprop" : "hsic"; }

inline TrainerKind trainer_from_string(const std::string& s) {
    if (s == "backprop") return TrainerKind::backprop;
    if (s == "hsic") return TrainerKind::hsic;
    throw std::invalid_argument("unknown trainer '" + s + "'");
}

struct StoppingCriterion {
    int max_epochs = 30;
};

/// One point of the training-scheme grid.
struct TrainingScheme {
    InitScheme init = InitScheme::kaiming_normal;
    OptimizerKind optimizer = OptimizerKind::adam;
    double lr = 5e-4;
    std::size_t batch_size = 128;
    StoppingCriterion stopping;
    TrainerKind trainer = TrainerKind::backprop;
};

/// Everything a single run produces.
struct RunRecord {
    std::string dataset;
    std::string model_label;  // e.g. "kan-small"
    ModelFamily family = ModelFamily::mlp;
    SizeClass size_class = SizeClass::small;
    TrainingScheme scheme;
    std::string swept_axis;   // "", "degree", "width", "activation"
    double swept_value = 0.0;
    std::string activation;
    std::uint64_t seed = 0;

    std::vector<double> train_acc;  // one entry per epoch
    std::vector<double> test_acc;
    double best_test_acc = 0.0;  // A*
    int best_epoch = -1;         // E*, first argmax of test_acc
    double gap_at_best = 0.0;
    long param_count = 0;
    double wall_seconds = 0.0;
    double id_estimate = 0.0;
    std::optional<double> ef;

    bool diverged = false;
    std::string error;
};

/// Chunked eval-mode accuracy over a dataset (keeps KAN basis buffers small).
inline double evaluate_accuracy(const Model& model, const Dataset& ds, std::size_t chunk = 512) {
    const std::size_t n = ds.size();
    std::size_t hits = 0;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t end = std::min(n, start + chunk);
        const std::size_t b = end - start;
        Tensor x({b, ds.dim()});
        std::copy(ds.features.raw() + start * ds.dim(), ds.features.raw() + end * ds.dim(), x.raw());
        Tensor logits = model.predict(x);
        for (std::size_t i = 0; i < b; ++i) {
            const double* row = logits.raw() + i * logits.cols();
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols(); ++j) {
                if (row[j] > row[best]) best = j;
            }
            if (static_cast<int>(best) == ds.labels[start + i]) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

/// Recompute A*, E* and the gap at the best epoch from the stored history.
inline void finalize_history(RunRecord& rec) {
    rec.best_test_acc = 0.0;
    rec.best_epoch = -1;
    rec.gap_at_best = 0.0;
    for (std::size_t e = 0; e < rec.test_acc.size(); ++e) {
        if (rec.test_acc[e] > rec.best_test_acc) {
            rec.best_test_acc = rec.test_acc[e];
            rec.best_epoch = static_cast<int>(e);
        }
    }
    if (rec.best_epoch >= 0) {
        rec.gap_at_best = generalization_gap(rec.train_acc[static_cast<std::size_t>(rec.best_epoch)],
                                             rec.best_test_acc);
    }
}

namespace detail {

inline void record_epoch(RunRecord& rec, const Model& model, const Dataset& train,
                         const Dataset& test) {
    rec.train_acc.push_back(evaluate_accuracy(model, train));
    rec.test_acc.push_back(evaluate_accuracy(model, test));
}

/// Eval-mode forward through layers [0, upto); used to freeze a prefix.
inline Tensor prefix_forward(const Model& model, const Tensor& x, std::size_t upto) {
    Tensor h = x;
    for (std::size_t i = 0; i < upto; ++i) {
        h = std::visit([&](const auto& l) { return l.forward_plain(h); }, model.layers[i]);
    }
    return h;
}

inline NodeId traced_layer_forward(Model& model, Tape& tape, NodeId x, std::size_t layer) {
    if (auto* dense = std::get_if<DenseLayer>(&model.layers[layer])) {
        return dense->forward(tape, x, /*training=*/false, nullptr);
    }
    return std::get<KanLayer>(model.layers[layer]).forward(tape, x);
}

}  // namespace detail

/// Standard backprop loop: shuffle, forward with dropout, softmax
/// cross-entropy, reverse sweep, optimizer step; per-epoch train/test
/// accuracy. A non-finite loss marks the run diverged and keeps the partial
/// history.
inline RunRecord train_backprop(Model& model, const Dataset& train, const Dataset& test,
                                const TrainingScheme& scheme, std::uint64_t seed) {
    if (train.dim() != static_cast<std::size_t>(model.config.in_dim)) {
        throw std::invalid_argument("train_backprop: dataset dimension does not match model");
    }
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.scheme = scheme;
    rec.seed = seed;
    rec.param_count = model.param_count();
    rec.dataset = train.name;

    Rng rng(mix_seed(seed, 0x7EA1ULL));
    Optimizer opt(scheme.optimizer, scheme.lr);
    std::vector<Param*> params = model.params();
    BatchPlan plan{scheme.batch_size, mix_seed(seed, 0xB47C4ULL), false};

    for (int epoch = 0; epoch < scheme.stopping.max_epochs && !rec.diverged; ++epoch) {
        for (const auto& idx : batch_indices(train.size(), plan, static_cast<std::uint64_t>(epoch))) {
            Batch batch = make_batch(train, idx);
            try {
                Tape tape;
                NodeId x = tape.constant(std::move(batch.x));
                NodeId logits = model.forward(tape, x, /*training=*/true, &rng);
                NodeId loss = tape.softmax_cross_entropy(logits, std::move(batch.labels));
                if (!std::isfinite(tape.value(loss)[0])) {
                    rec.diverged = true;
                    rec.error = "non-finite loss at epoch " + std::to_string(epoch);
                    break;
                }
                Optimizer::zero_grads(params);
                tape.backward(loss);
                opt.step(params);
            } catch (const std::exception& ex) {
                rec.diverged = true;
                rec.error = std::string("diverged at epoch ") + std::to_string(epoch) + ": " + ex.what();
                break;
            }
        }
        if (!rec.diverged) detail::record_epoch(rec, model, train, test);
    }

    finalize_history(rec);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

/// Backpropagation-free training: each hidden layer in turn minimizes the
/// HSIC bottleneck objective of its own activations (gradients confined to
/// that layer, earlier layers frozen), then the output layer is trained as a
/// cross-entropy head on the frozen features. The head gets whatever remains
/// of the scheme's epoch budget so E* stays comparable with backprop runs.
inline RunRecord train_hsic(Model& model, const Dataset& train, const Dataset& test,
                            const TrainingScheme& scheme, const HsicConfig& cfg,
                            std::uint64_t seed) {
    cfg.validate();
    if (scheme.batch_size < 4) {
        throw std::invalid_argument("train_hsic: batch too small for kernel estimates (need >= 4)");
    }
    if (model.layers.empty()) throw std::invalid_argument("train_hsic: model has no layers");
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.scheme = scheme;
    rec.seed = seed;
    rec.param_count = model.param_count();
    rec.dataset = train.name;

    BatchPlan plan{scheme.batch_size, mix_seed(seed, 0xB47C4ULL), false};
    const std::size_t hidden = model.layers.size() - 1;
    const int head_epochs = std::max(
        1, scheme.stopping.max_epochs - static_cast<int>(hidden) * cfg.layer_epochs);

    std::uint64_t epoch_counter = 0;
    auto run_phase = [&](std::size_t layer, int epochs, bool is_head) {
        Optimizer opt(scheme.optimizer, scheme.lr);
        std::vector<Param*> params = model.layer_params(layer);
        for (int e = 0; e < epochs && !rec.diverged; ++e) {
            for (const auto& idx : batch_indices(train.size(), plan, epoch_counter)) {
                Batch batch = make_batch(train, idx);
                try {
                    Tensor feats = detail::prefix_forward(model, batch.x, layer);
                    Tape tape;
                    NodeId x = tape.constant(std::move(feats));
                    NodeId z = detail::traced_layer_forward(model, tape, x, layer);
                    NodeId loss = is_head
                                      ? tape.softmax_cross_entropy(z, batch.labels)
                                      : hsic_bottleneck_loss(tape, z, batch.x, batch.y_onehot, cfg);
                    if (!std::isfinite(tape.value(loss)[0])) {
                        rec.diverged = true;
                        rec.error = "non-finite loss in layer " + std::to_string(layer);
                        break;
                    }
                    Optimizer::zero_grads(params);
                    tape.backward(loss);
                    opt.step(params);
                } catch (const std::exception& ex) {
                    rec.diverged = true;
                    rec.error = std::string("diverged in layer ") + std::to_string(layer) + ": " +
                                ex.what();
                    break;
                }
            }
            ++epoch_counter;
            if (!rec.diverged) detail::record_epoch(rec, model, train, test);
        }
    };

    for (std::size_t layer = 0; layer < hidden && !rec.diverged; ++layer) {
        run_phase(layer, cfg.layer_epochs, /*is_head=*/false);
    }
    if (!rec.diverged) run_phase(model.layers.size() - 1, head_epochs, /*is_head=*/true);

    finalize_history(rec);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

}  // namespace kanlab
