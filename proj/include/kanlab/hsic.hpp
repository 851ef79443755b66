#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "kanlab/tape.hpp"
#include "kanlab/tensor.hpp"

namespace kanlab {

/// Symmetric kernel Gram matrix with the bandwidth it was built from
/// (sigma = 0 marks a non-Gaussian kernel, e.g. the linear label kernel).
struct KernelMatrix {
    Tensor values;  // [m, m]
    double sigma = 0.0;

    std::size_t size() const { return values.rows(); }
};

inline KernelMatrix gaussian_kernel_matrix(const Tensor& x, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel_matrix: sigma must be positive");
    Tensor d = pairwise_sqdist_plain(x);
    const double inv = -1.0 / (2.0 * sigma * sigma);
    for (double& v : d.data()) v = std::exp(v * inv);
    return KernelMatrix{std::move(d), sigma};
}

/// K_Y = Y Y^T on one-hot labels: 1 when labels match, 0 otherwise.
inline KernelMatrix linear_label_kernel(const Tensor& onehot) {
    check_rank2(onehot, "linear_label_kernel");
    Tensor k = matmul_plain(onehot, false, onehot, true);
    return KernelMatrix{std::move(k), 0.0};
}

/// Median of the positive pairwise Euclidean distances; 1 when every point
/// coincides (no positive distance to take a median of).
inline double median_heuristic(const Tensor& x) {
    check_rank2(x, "median_heuristic");
    if (x.rows() < 2) throw std::invalid_argument("median_heuristic: need at least two rows");
    Tensor d2 = pairwise_sqdist_plain(x);
    std::vector<double> dists;
    dists.reserve(x.rows() * (x.rows() - 1) / 2);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = i + 1; j < x.rows(); ++j) {
            if (d2.at(i, j) > 0.0) dists.push_back(std::sqrt(d2.at(i, j)));
        }
    }
    if (dists.empty()) return 1.0;
    std::sort(dists.begin(), dists.end());
    const std::size_t n = dists.size();
    if (n % 2 == 1) return dists[n / 2];
    return 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
}

/// Biased empirical HSIC: tr(K H L H) / (m-1)^2 with H = I - (1/m)11^T.
inline double hsic_estimate(const Tensor& k, const Tensor& l) {
    check_rank2(k, "hsic_estimate");
    check_rank2(l, "hsic_estimate");
    if (k.rows() != k.cols() || l.rows() != l.cols() || k.rows() != l.rows()) {
        throw std::invalid_argument("hsic_estimate: kernel size mismatch, " +
                                    Tensor::shape_string(k.shape()) + " vs " +
                                    Tensor::shape_string(l.shape()));
    }
    const std::size_t m = k.rows();
    if (m < 2) throw std::invalid_argument("hsic_estimate: need m >= 2");
    // Centering both factors keeps the estimator exactly symmetric in (K, L).
    Tensor kc = double_center_plain(k);
    Tensor lc = double_center_plain(l);
    double acc = 0.0;
    for (std::size_t i = 0; i < kc.size(); ++i) acc += kc[i] * lc[i];
    const double denom = static_cast<double>(m - 1) * static_cast<double>(m - 1);
    return acc / denom;
}

inline double hsic_estimate(const KernelMatrix& k, const KernelMatrix& l) {
    return hsic_estimate(k.values, l.values);
}

enum class SigmaStrategy { median, fixed };

/// Settings of the layer-wise information objective.
struct HsicConfig {
    double beta = 100.0;
    SigmaStrategy sigma_strategy = SigmaStrategy::median;
    double fixed_sigma = 1.0;
    int layer_epochs = 10;

    void validate() const {
        // beta = 0 degenerates to the input term alone; allowed for diagnostics
        if (!(beta >= 0.0)) throw std::invalid_argument("hsic: beta must be non-negative");
        if (sigma_strategy == SigmaStrategy::fixed && !(fixed_sigma > 0.0)) {
            throw std::invalid_argument("hsic: fixed sigma must be positive");
        }
        if (layer_epochs < 1) throw std::invalid_argument("hsic: layer_epochs must be >= 1");
    }
};

inline double resolve_sigma(const HsicConfig& cfg, const Tensor& x) {
    return cfg.sigma_strategy == SigmaStrategy::fixed ? cfg.fixed_sigma : median_heuristic(x);
}

/// Differentiable bottleneck objective HSIC(K_Z, K_X) - beta * HSIC(K_Z, K_Y)
/// on the tape. Bandwidths are treated as constants of the current batch; the
/// label kernel is linear on the one-hot matrix.
inline NodeId hsic_bottleneck_loss(Tape& tape, NodeId z, const Tensor& x_batch,
                                   const Tensor& y_onehot, const HsicConfig& cfg) {
    cfg.validate();
    const std::size_t m = tape.value(z).rows();
    if (x_batch.rows() != m || y_onehot.rows() != m) {
        throw std::invalid_argument("hsic_bottleneck_loss: batch size mismatch");
    }
    if (m < 4) throw std::invalid_argument("hsic_bottleneck_loss: batch too small (m < 4)");

    const double sigma_x = resolve_sigma(cfg, x_batch);
    KernelMatrix kx = gaussian_kernel_matrix(x_batch, sigma_x);
    KernelMatrix ky = linear_label_kernel(y_onehot);

    const double sigma_z = resolve_sigma(cfg, tape.value(z));
    NodeId dz = tape.pairwise_sqdist(z);
    NodeId kz = tape.gaussian_from_sqdist(dz, sigma_z);
    NodeId kz_centered = tape.double_center(kz);

    const double denom = static_cast<double>(m - 1) * static_cast<double>(m - 1);
    NodeId kxc = tape.constant(double_center_plain(kx.values));
    NodeId kyc = tape.constant(double_center_plain(ky.values));
    NodeId hzx = tape.scale(tape.sum(tape.mul(kz_centered, kxc)), 1.0 / denom);
    NodeId hzy = tape.scale(tape.sum(tape.mul(kz_centered, kyc)), 1.0 / denom);
    return tape.add(hzx, tape.scale(hzy, -cfg.beta));
}

}  // namespace kanlab
