#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kanlab/dataset.hpp"

namespace kanlab {

enum class SyntheticKind { gaussian_blobs, two_spirals, uniform_cube };

inline const char* to_string(SyntheticKind k) {
    switch (k) {
        case SyntheticKind::gaussian_blobs: return "blobs";
        case SyntheticKind::two_spirals: return "spirals";
        case SyntheticKind::uniform_cube: return "cube";
    }
    return "?";
}

inline SyntheticKind synthetic_kind_from_string(const std::string& s) {
    if (s == "blobs" || s == "gaussian-blobs") return SyntheticKind::gaussian_blobs;
    if (s == "spirals" || s == "two-spirals") return SyntheticKind::two_spirals;
    if (s == "cube" || s == "uniform-cube") return SyntheticKind::uniform_cube;
    throw std::invalid_argument("unknown synthetic dataset kind '" + s + "'");
}

/// Isotropic unit-variance Gaussian clusters around centers whose minimum
/// pairwise distance equals `separation` (in cluster-sigma units). Points are
/// assigned to classes round-robin, so class counts differ by at most one.
inline Dataset make_blobs(std::size_t n, std::size_t dim, int classes, double separation,
                          std::uint64_t seed) {
    if (classes < 2 || n < static_cast<std::size_t>(classes) || dim == 0) {
        throw std::invalid_argument("make_blobs: need classes >= 2, n >= classes, dim >= 1");
    }
    Rng rng(mix_seed(seed, 0xB70B5ULL));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Random unit directions, rescaled so the closest pair sits `separation` apart.
    std::vector<std::vector<double>> centers(static_cast<std::size_t>(classes),
                                             std::vector<double>(dim, 0.0));
    for (auto& c : centers) {
        double norm = 0.0;
        for (double& v : c) {
            v = gauss(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : c) v /= norm;
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < centers.size(); ++a) {
        for (std::size_t b = a + 1; b < centers.size(); ++b) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                const double diff = centers[a][j] - centers[b][j];
                d2 += diff * diff;
            }
            min_dist = std::min(min_dist, std::sqrt(d2));
        }
    }
    if (!(min_dist > 1e-9)) {
        throw std::runtime_error("make_blobs: degenerate center configuration");
    }
    const double scale = separation / min_dist;
    for (auto& c : centers) {
        for (double& v : c) v *= scale;
    }

    Dataset ds;
    ds.features = Tensor({n, dim});
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % static_cast<std::size_t>(classes));
        ds.labels.push_back(y);
        double* row = ds.features.raw() + i * dim;
        for (std::size_t j = 0; j < dim; ++j) {
            row[j] = centers[static_cast<std::size_t>(y)][j] + gauss(rng);
        }
    }
    ds.class_count = classes;
    ds.name = "blobs";
    return ds;
}

/// Two interleaved planar spirals with additive noise; not linearly separable.
inline Dataset make_two_spirals(std::size_t n, double noise, std::uint64_t seed) {
    if (n < 4) throw std::invalid_argument("make_two_spirals: n too small");
    Rng rng(mix_seed(seed, 0x59194A15ULL));
    std::normal_distribution<double> gauss(0.0, noise);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Dataset ds;
    ds.features = Tensor({n, 2});
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        const double t = unit(rng);
        const double r = 0.2 + 2.0 * t;
        const double theta = 3.0 * 3.14159265358979323846 * t + (y == 0 ? 0.0 : 3.14159265358979323846);
        ds.features.at(i, 0) = r * std::cos(theta) + gauss(rng);
        ds.features.at(i, 1) = r * std::sin(theta) + gauss(rng);
        ds.labels.push_back(y);
    }
    ds.class_count = 2;
    ds.name = "spirals";
    return ds;
}

/// Uniform samples in [0,1]^dim with two dummy classes; fixture for the
/// intrinsic-dimension estimator.
inline Dataset make_uniform_cube(std::size_t n, std::size_t dim, std::uint64_t seed) {
    if (n < 2 || dim == 0) throw std::invalid_argument("make_uniform_cube: bad shape");
    Rng rng(mix_seed(seed, 0xC0BEULL));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Dataset ds;
    ds.features = Tensor({n, dim});
    for (double& v : ds.features.data()) v = unit(rng);
    ds.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(i % 2));
    ds.class_count = 2;
    ds.name = "cube";
    return ds;
}

}  // namespace kanlab
