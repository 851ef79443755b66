#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "kanlab/dataset.hpp"
#include "kanlab/tensor.hpp"

namespace kanlab {

/// Fraction of rows whose argmax matches the label; ties break toward the
/// lowest class index.
inline double accuracy(const Tensor& logits, std::span<const int> labels) {
    check_rank2(logits, "accuracy");
    if (logits.rows() != labels.size()) throw std::invalid_argument("accuracy: row/label mismatch");
    std::size_t hits = 0;
    const std::size_t c = logits.cols();
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double* row = logits.raw() + i * c;
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j) {
            if (row[j] > row[best]) best = j;
        }
        if (static_cast<int>(best) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(logits.rows());
}

/// Train accuracy minus test accuracy; negative values are meaningful.
inline double generalization_gap(double train_acc, double test_acc) {
    if (train_acc < 0.0 || train_acc > 1.0 || test_acc < 0.0 || test_acc > 1.0) {
        throw std::invalid_argument("generalization_gap: accuracies must lie in [0,1]");
    }
    return train_acc - test_acc;
}

/// TwoNN maximum-likelihood intrinsic dimension: with r1, r2 the first and
/// second nearest-neighbor distances of each point, ID = N / sum(ln(r2/r1)).
/// Exact duplicates get a deterministic 1e-12 jitter before the distance
/// computation; a dataset of identical points cannot be estimated.
inline double twonn_intrinsic_dimension(const Tensor& points) {
    check_rank2(points, "twonn");
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (n < 10) throw std::invalid_argument("twonn: need at least 10 points");

    bool all_identical = true;
    for (std::size_t i = 1; i < n && all_identical; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            if (points.at(i, j) != points.at(0, j)) {
                all_identical = false;
                break;
            }
        }
    }
    if (all_identical) throw std::runtime_error("twonn: all points identical, cannot estimate");

    auto nn2 = [&](const Tensor& x, std::vector<double>& r1, std::vector<double>& r2) {
        r1.assign(n, std::numeric_limits<double>::infinity());
        r2.assign(n, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x.raw() + i * d;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double* xj = x.raw() + j * d;
                double acc = 0.0;
                for (std::size_t t = 0; t < d; ++t) {
                    const double diff = xi[t] - xj[t];
                    acc += diff * diff;
                }
                if (acc < r2[i]) {
                    if (acc < r1[i]) {
                        r2[i] = r1[i];
                        r1[i] = acc;
                    } else {
                        r2[i] = acc;
                    }
                }
                if (acc < r2[j]) {
                    if (acc < r1[j]) {
                        r2[j] = r1[j];
                        r1[j] = acc;
                    } else {
                        r2[j] = acc;
                    }
                }
            }
        }
    };

    std::vector<double> r1, r2;
    nn2(points, r1, r2);
    Tensor jittered;
    if (std::any_of(r1.begin(), r1.end(), [](double v) { return v == 0.0; })) {
        jittered = points;
        Rng rng(0x2D0117ULL);
        std::uniform_real_distribution<double> eps(-1e-12, 1e-12);
        for (double& v : jittered.data()) v += eps(rng);
        nn2(jittered, r1, r2);
        if (std::any_of(r1.begin(), r1.end(), [](double v) { return v == 0.0; })) {
            throw std::runtime_error("twonn: duplicate points persist after jitter");
        }
    }

    double log_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        log_sum += 0.5 * std::log(r2[i] / r1[i]);  // sqrt of the squared-distance ratio
    }
    if (!(log_sum > 0.0)) throw std::runtime_error("twonn: degenerate distance ratios");
    return static_cast<double>(n) / log_sum;
}

/// Inputs of the efficiency measure.
struct EfficiencyInputs {
    double best_test_accuracy = 0.0;  // A* in [0,1]
    int epochs_to_best = 0;           // E* >= 0
    double param_count = 0.0;         // P
    double intrinsic_dimension = 0.0; // ID
};

/// EF = [A* / (E*+1)] * [1 / (ln(P - ID + 1) + 1)], defined for P >= ID.
/// Equals A* when the model has exactly ID parameters and peaks at epoch 0,
/// so the global maximum EF = 1 needs no training and no parameter excess.
inline double efficiency(const EfficiencyInputs& e) {
    if (e.best_test_accuracy < 0.0 || e.best_test_accuracy > 1.0) {
        throw std::invalid_argument("efficiency: A* must lie in [0,1]");
    }
    if (e.epochs_to_best < 0) throw std::invalid_argument("efficiency: E* must be >= 0");
    if (e.param_count < e.intrinsic_dimension) {
        throw std::domain_error("efficiency: undefined for P < ID");
    }
    const double speed = e.best_test_accuracy / (e.epochs_to_best + 1.0);
    const double excess = std::log(e.param_count - e.intrinsic_dimension + 1.0) + 1.0;
    return speed / excess;
}

}  // namespace kanlab
