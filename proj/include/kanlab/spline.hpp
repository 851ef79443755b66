#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kanlab {

/// Uniform B-spline basis on a closed domain [lo, hi].
///
/// `grid` interior intervals plus `degree` extension knots continuing the
/// uniform spacing on each side, so the knot vector has grid + 2*degree + 1
/// entries and the basis has grid + degree members.
struct SplineSpec {
    double lo = -1.0;
    double hi = 1.0;
    int degree = 3;
    int grid = 5;
    std::vector<double> knots;

    std::size_t basis_count() const { return static_cast<std::size_t>(grid + degree); }
    double spacing() const { return (hi - lo) / grid; }
};

inline SplineSpec make_uniform_knots(double lo, double hi, int grid, int degree) {
    if (!(lo < hi)) throw std::invalid_argument("make_uniform_knots: degenerate interval");
    if (grid < 1) throw std::invalid_argument("make_uniform_knots: grid must be >= 1");
    if (degree < 0) throw std::invalid_argument("make_uniform_knots: degree must be >= 0");
    SplineSpec spec;
    spec.lo = lo;
    spec.hi = hi;
    spec.degree = degree;
    spec.grid = grid;
    const double h = (hi - lo) / grid;
    const int n_knots = grid + 2 * degree + 1;
    spec.knots.resize(static_cast<std::size_t>(n_knots));
    for (int i = 0; i < n_knots; ++i) spec.knots[static_cast<std::size_t>(i)] = lo + (i - degree) * h;
    return spec;
}

namespace detail {

/// Index j of the knot span containing x, i.e. t[j] <= x < t[j+1], with
/// x == hi folded into the last interior span (left limit).
inline int find_span(const SplineSpec& spec, double x) {
    const int k = spec.degree;
    const double h = spec.spacing();
    int j = k + static_cast<int>(std::floor((x - spec.lo) / h));
    const int j_max = spec.grid + k - 1;
    if (j < k) j = k;
    if (j > j_max) j = j_max;
    return j;
}

/// Triangular Cox-de Boor scheme: writes B_{span-d+r, d}(x) into n[0..d].
/// Uniform knots keep every denominator positive, so the 0/0 -> 0 convention
/// of the textbook recursion is never exercised in range.
inline void basis_triangle(const SplineSpec& spec, int span, double x, int d, double* n) {
    const double* t = spec.knots.data();
    n[0] = 1.0;
    double left[64];
    double right[64];
    for (int dd = 1; dd <= d; ++dd) {
        left[dd] = x - t[span + 1 - dd];
        right[dd] = t[span + dd] - x;
        double saved = 0.0;
        for (int r = 0; r < dd; ++r) {
            const double tmp = n[r] / (right[r + 1] + left[dd - r]);
            n[r] = saved + right[r + 1] * tmp;
            saved = left[dd - r] * tmp;
        }
        n[dd] = saved;
    }
}

inline void basis_interior(const SplineSpec& spec, double x, std::span<double> out) {
    const int k = spec.degree;
    const int span = find_span(spec, x);
    double window[64];
    basis_triangle(spec, span, x, k, window);
    for (double& v : out) v = 0.0;
    for (int r = 0; r <= k; ++r) out[static_cast<std::size_t>(span - k + r)] = window[r];
}

inline void basis_derivative_interior(const SplineSpec& spec, double x, std::span<double> out) {
    const int k = spec.degree;
    for (double& v : out) v = 0.0;
    if (k == 0) return;  // piecewise constant: derivative zero a.e.
    const int span = find_span(spec, x);
    double lower[64];  // degree k-1 values B_{span-k+1 .. span, k-1}
    basis_triangle(spec, span, x, k - 1, lower);
    const double* t = spec.knots.data();
    // dB_{i,k} = k * (B_{i,k-1}/(t[i+k]-t[i]) - B_{i+1,k-1}/(t[i+k+1]-t[i+1]))
    for (int r = 0; r <= k; ++r) {
        const int i = span - k + r;
        const double bl = (r >= 1) ? lower[r - 1] : 0.0;   // B_{i,k-1}
        const double br = (r <= k - 1) ? lower[r] : 0.0;   // B_{i+1,k-1}
        out[static_cast<std::size_t>(i)] =
            k * (bl / (t[i + k] - t[i]) - br / (t[i + k + 1] - t[i + 1]));
    }
}

}  // namespace detail

/// Evaluate all grid+degree basis functions at x.
///
/// x outside [lo, hi] is handled by linear extrapolation of each basis
/// function from the nearest boundary, which makes any spline built on this
/// basis extend linearly and keeps gradients alive for out-of-range inputs.
inline void bspline_basis_into(const SplineSpec& spec, double x, std::span<double> out) {
    if (!std::isfinite(x)) throw std::invalid_argument("bspline_basis: non-finite input");
    if (out.size() != spec.basis_count()) throw std::invalid_argument("bspline_basis: bad output size");
    if (spec.degree >= 60) throw std::invalid_argument("bspline_basis: degree too large");
    if (x >= spec.lo && x <= spec.hi) {
        detail::basis_interior(spec, x, out);
        return;
    }
    const double x0 = x < spec.lo ? spec.lo : spec.hi;
    std::vector<double> slope(out.size());
    detail::basis_interior(spec, x0, out);
    detail::basis_derivative_interior(spec, x0, slope);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (x - x0) * slope[i];
}

inline std::vector<double> bspline_basis(double x, const SplineSpec& spec) {
    std::vector<double> out(spec.basis_count());
    bspline_basis_into(spec, x, out);
    return out;
}

/// First derivative of every basis function at x; constant outside [lo, hi]
/// to match the linear extrapolation of the values.
inline void bspline_basis_derivative_into(const SplineSpec& spec, double x, std::span<double> out) {
    if (!std::isfinite(x)) throw std::invalid_argument("bspline_basis_derivative: non-finite input");
    if (out.size() != spec.basis_count())
        throw std::invalid_argument("bspline_basis_derivative: bad output size");
    const double x0 = x < spec.lo ? spec.lo : (x > spec.hi ? spec.hi : x);
    detail::basis_derivative_interior(spec, x0, out);
}

inline std::vector<double> bspline_basis_derivative(double x, const SplineSpec& spec) {
    std::vector<double> out(spec.basis_count());
    bspline_basis_derivative_into(spec, x, out);
    return out;
}

/// S(x) = sum_i c_i B_i(x)
inline double spline_eval(double x, const SplineSpec& spec, std::span<const double> coeffs) {
    if (coeffs.size() != spec.basis_count()) {
        throw std::invalid_argument("spline_eval: " + std::to_string(coeffs.size()) +
                                    " coefficients for " + std::to_string(spec.basis_count()) +
                                    " basis functions");
    }
    std::vector<double> basis(spec.basis_count());
    bspline_basis_into(spec, x, basis);
    double acc = 0.0;
    for (std::size_t i = 0; i < basis.size(); ++i) acc += coeffs[i] * basis[i];
    return acc;
}

inline double spline_eval_derivative(double x, const SplineSpec& spec, std::span<const double> coeffs) {
    if (coeffs.size() != spec.basis_count())
        throw std::invalid_argument("spline_eval_derivative: coefficient count mismatch");
    std::vector<double> deriv(spec.basis_count());
    bspline_basis_derivative_into(spec, x, deriv);
    double acc = 0.0;
    for (std::size_t i = 0; i < deriv.size(); ++i) acc += coeffs[i] * deriv[i];
    return acc;
}

}  // namespace kanlab
