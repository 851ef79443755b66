#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kanlab/tape.hpp"
#include "kanlab/tensor.hpp"

namespace kanlab {

enum class InitScheme { kaiming_normal, kaiming_uniform, orthogonal };

inline const char* to_string(InitScheme s) {
    switch (s) {
        case InitScheme::kaiming_normal: return "kaiming-normal";
        case InitScheme::kaiming_uniform: return "kaiming-uniform";
        case InitScheme::orthogonal: return "orthogonal";
    }
    return "?";
}

inline InitScheme init_scheme_from_string(const std::string& s) {
    if (s == "kaiming-normal") return InitScheme::kaiming_normal;
    if (s == "kaiming-uniform") return InitScheme::kaiming_uniform;
    if (s == "orthogonal") return InitScheme::orthogonal;
    throw std::invalid_argument("unknown initialization scheme '" + s + "'");
}

inline Tensor kaiming_normal(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw std::invalid_argument("kaiming_normal: fan_in must be >= 1");
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& v : t.data()) v = dist(rng);
    return t;
}

inline Tensor kaiming_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw std::invalid_argument("kaiming_uniform: fan_in must be >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.data()) v = dist(rng);
    return t;
}

namespace detail {

/// Thin Householder QR of a [rows x cols] matrix with rows >= cols:
/// overwrites `q` with the orthonormal factor, returns the diagonal of R.
inline std::vector<double> householder_qr_thin(Tensor& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    std::vector<std::vector<double>> vs;
    vs.reserve(n);
    std::vector<double> rdiag(n, 0.0);

    for (std::size_t j = 0; j < n; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < m; ++i) norm += a.at(i, j) * a.at(i, j);
        norm = std::sqrt(norm);
        const double x0 = a.at(j, j);
        const double alpha = x0 >= 0.0 ? -norm : norm;
        std::vector<double> v(m - j, 0.0);
        v[0] = x0 - alpha;
        for (std::size_t i = j + 1; i < m; ++i) v[i - j] = a.at(i, j);
        double vnorm = 0.0;
        for (double vv : v) vnorm += vv * vv;
        vnorm = std::sqrt(vnorm);
        if (vnorm > 0.0) {
            for (double& vv : v) vv /= vnorm;
            for (std::size_t c = j; c < n; ++c) {
                double dot = 0.0;
                for (std::size_t i = j; i < m; ++i) dot += v[i - j] * a.at(i, c);
                for (std::size_t i = j; i < m; ++i) a.at(i, c) -= 2.0 * dot * v[i - j];
            }
        }
        rdiag[j] = a.at(j, j);
        vs.push_back(std::move(v));
    }

    // Form the thin Q by applying the reflectors to the first n columns of I.
    Tensor q({m, n});
    for (std::size_t j = 0; j < n; ++j) q.at(j, j) = 1.0;
    for (std::size_t j = n; j-- > 0;) {
        const std::vector<double>& v = vs[j];
        if (v.empty()) continue;
        for (std::size_t c = 0; c < n; ++c) {
            double dot = 0.0;
            for (std::size_t i = j; i < m; ++i) dot += v[i - j] * q.at(i, c);
            for (std::size_t i = j; i < m; ++i) q.at(i, c) -= 2.0 * dot * v[i - j];
        }
    }
    a = std::move(q);
    return rdiag;
}

}  // namespace detail

/// Orthogonal initialization: QR of a Gaussian matrix with the sign of R's
/// diagonal folded into Q so the distribution is Haar-uniform. When rows <
/// cols the transpose is orthogonalized, giving orthonormal rows.
inline Tensor orthogonal(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("orthogonal: empty shape");
    const bool wide = rows < cols;
    const std::size_t m = wide ? cols : rows;
    const std::size_t n = wide ? rows : cols;
    Tensor g({m, n});
    std::normal_distribution<double> dist(0.0, 1.0);
    for (double& v : g.data()) v = dist(rng);
    std::vector<double> rdiag = detail::householder_qr_thin(g);
    for (std::size_t c = 0; c < n; ++c) {
        if (rdiag[c] < 0.0) {
            for (std::size_t r = 0; r < m; ++r) g.at(r, c) = -g.at(r, c);
        }
    }
    if (!wide) return g;
    Tensor out({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = g.at(c, r);
    }
    return out;
}

/// Draw a [rows x cols] weight matrix under the given scheme (fan_in = cols).
inline Tensor draw_weight(InitScheme scheme, std::size_t rows, std::size_t cols, Rng& rng) {
    switch (scheme) {
        case InitScheme::kaiming_normal: return kaiming_normal({rows, cols}, cols, rng);
        case InitScheme::kaiming_uniform: return kaiming_uniform({rows, cols}, cols, rng);
        case InitScheme::orthogonal: return orthogonal(rows, cols, rng);
    }
    throw std::logic_error("draw_weight: unknown scheme");
}

/// Scale factor each scheme implies for auxiliary noise (spline coefficients):
/// the Kaiming schemes' standard deviation, 1 for orthogonal.
inline double init_gain(InitScheme scheme, std::size_t fan_in) {
    switch (scheme) {
        case InitScheme::kaiming_normal:
        case InitScheme::kaiming_uniform:
            return std::sqrt(2.0 / static_cast<double>(fan_in));
        case InitScheme::orthogonal:
            return 1.0;
    }
    throw std::logic_error("init_gain: unknown scheme");
}

}  // namespace kanlab
