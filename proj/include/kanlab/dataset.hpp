#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kanlab/tape.hpp"
#include "kanlab/tensor.hpp"

namespace kanlab {

/// Labelled feature matrix. Immutable after construction by convention.
struct Dataset {
    Tensor features;          // [N, d]
    std::vector<int> labels;  // size N, values in [0, class_count)
    int class_count = 0;
    std::string name;
    std::string split;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }

    void validate() const {
        check_rank2(features, "Dataset");
        if (features.rows() != labels.size() || labels.empty()) {
            throw std::invalid_argument("Dataset: feature/label count mismatch");
        }
        for (int y : labels) {
            if (y < 0 || y >= class_count) {
                throw std::invalid_argument("Dataset '" + name + "': label " + std::to_string(y) +
                                            " outside [0, " + std::to_string(class_count) + ")");
            }
        }
        for (double v : features.data()) {
            if (!std::isfinite(v)) throw std::invalid_argument("Dataset '" + name + "': non-finite feature");
        }
    }
};

enum class NormMode { minmax, zscore };

inline const char* to_string(NormMode m) { return m == NormMode::minmax ? "minmax" : "zscore"; }

inline NormMode norm_mode_from_string(const std::string& s) {
    if (s == "minmax") return NormMode::minmax;
    if (s == "zscore") return NormMode::zscore;
    throw std::invalid_argument("unknown normalization mode '" + s + "'");
}

/// Per-feature affine transform fitted on the training split and applied to
/// every split: minmax maps onto [-1, 1] (the spline domain), zscore
/// standardizes. Constant features map to zero in both modes.
class Normalizer {
public:
    static Normalizer fit(const Dataset& train, NormMode mode) {
        const std::size_t d = train.dim();
        const std::size_t n = train.size();
        Normalizer nz;
        nz.mode_ = mode;
        nz.scale_.assign(d, 1.0);
        nz.offset_.assign(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            if (mode == NormMode::minmax) {
                double lo = train.features.at(0, j), hi = lo;
                for (std::size_t i = 1; i < n; ++i) {
                    lo = std::min(lo, train.features.at(i, j));
                    hi = std::max(hi, train.features.at(i, j));
                }
                if (hi > lo) {
                    nz.scale_[j] = 2.0 / (hi - lo);
                    nz.offset_[j] = -(hi + lo) / (hi - lo);
                } else {
                    nz.scale_[j] = 0.0;  // constant feature -> 0
                    nz.offset_[j] = 0.0;
                }
            } else {
                double mean = 0.0;
                for (std::size_t i = 0; i < n; ++i) mean += train.features.at(i, j);
                mean /= static_cast<double>(n);
                double var = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double c = train.features.at(i, j) - mean;
                    var += c * c;
                }
                var /= static_cast<double>(n);
                const double sd = std::sqrt(var);
                if (sd > 0.0) {
                    nz.scale_[j] = 1.0 / sd;
                    nz.offset_[j] = -mean / sd;
                } else {
                    nz.scale_[j] = 0.0;
                    nz.offset_[j] = 0.0;
                }
            }
        }
        return nz;
    }

    Dataset apply(const Dataset& ds) const {
        if (ds.dim() != scale_.size()) throw std::invalid_argument("Normalizer: dimension mismatch");
        Dataset out = ds;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            for (std::size_t j = 0; j < scale_.size(); ++j) {
                out.features.at(i, j) = ds.features.at(i, j) * scale_[j] + offset_[j];
            }
        }
        return out;
    }

    Tensor invert(const Tensor& x) const {
        check_rank2(x, "Normalizer::invert");
        if (x.cols() != scale_.size()) throw std::invalid_argument("Normalizer: dimension mismatch");
        Tensor out = x;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < scale_.size(); ++j) {
                out.at(i, j) = scale_[j] != 0.0 ? (x.at(i, j) - offset_[j]) / scale_[j] : 0.0;
            }
        }
        return out;
    }

    NormMode mode() const { return mode_; }

private:
    NormMode mode_ = NormMode::minmax;
    std::vector<double> scale_;
    std::vector<double> offset_;
};

/// Fit on `train`, apply to train and every dataset in `others` in place.
inline Normalizer normalize(Dataset& train, std::vector<Dataset*> others, NormMode mode) {
    Normalizer nz = Normalizer::fit(train, mode);
    train = nz.apply(train);
    for (Dataset* ds : others) *ds = nz.apply(*ds);
    return nz;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct BatchPlan {
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    bool drop_last = false;
};

struct Batch {
    Tensor x;                 // [b, d]
    std::vector<int> labels;  // size b
    Tensor y_onehot;          // [b, c]
};

inline Tensor one_hot(std::span<const int> labels, int class_count) {
    Tensor y({labels.size(), static_cast<std::size_t>(class_count)});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count) {
            throw std::invalid_argument("one_hot: label out of range");
        }
        y.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return y;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer over seed ^ salt
    std::uint64_t z = seed ^ (salt + 0x9E3779B97F4A7C15ULL + (seed << 6) + (seed >> 2));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Index batches for one epoch: a permutation determined solely by the plan
/// seed and the epoch number, cut into batch_size chunks.
inline std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, const BatchPlan& plan,
                                                           std::uint64_t epoch) {
    if (plan.batch_size == 0) throw std::invalid_argument("batch_indices: batch size must be positive");
    if (plan.batch_size > n) throw std::invalid_argument("batch_indices: batch size exceeds dataset");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(mix_seed(plan.seed, epoch));
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += plan.batch_size) {
        const std::size_t end = std::min(n, start + plan.batch_size);
        if (plan.drop_last && end - start < plan.batch_size) break;
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

inline Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
    Batch b;
    b.x = Tensor({indices.size(), ds.dim()});
    b.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* src = ds.features.raw() + indices[i] * ds.dim();
        double* dst = b.x.raw() + i * ds.dim();
        std::copy(src, src + ds.dim(), dst);
        b.labels.push_back(ds.labels[indices[i]]);
    }
    b.y_onehot = one_hot(b.labels, ds.class_count);
    return b;
}

/// Copy rows [start, start+count) into a new dataset.
inline Dataset take_range(const Dataset& ds, std::size_t start, std::size_t count) {
    if (start + count > ds.size()) throw std::invalid_argument("take_range: out of bounds");
    Dataset out;
    out.features = Tensor({count, ds.dim()});
    std::copy(ds.features.raw() + start * ds.dim(), ds.features.raw() + (start + count) * ds.dim(),
              out.features.raw());
    out.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(start),
                      ds.labels.begin() + static_cast<std::ptrdiff_t>(start + count));
    out.class_count = ds.class_count;
    out.name = ds.name;
    out.split = ds.split;
    return out;
}

/// Keep the first n examples; handy for desk-scale subsets.
inline Dataset take_prefix(const Dataset& ds, std::size_t n) {
    if (n >= ds.size()) return ds;
    return take_range(ds, 0, n);
}

/// Prefix/suffix split of one sample into train and test. Rows are assumed
/// exchangeable (synthetic generators draw them i.i.d.), so the cut keeps the
/// two splits identically distributed.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, std::size_t n_train) {
    if (n_train == 0 || n_train >= ds.size()) {
        throw std::invalid_argument("split_train_test: n_train must be in (0, N)");
    }
    std::pair<Dataset, Dataset> out{take_range(ds, 0, n_train),
                                    take_range(ds, n_train, ds.size() - n_train)};
    out.first.split = "train";
    out.second.split = "test";
    return out;
}

}  // namespace kanlab
