#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kanlab {

/// Dense row-major tensor of 64-bit floats.
///
/// All arithmetic in the workbench runs in double precision; the gradient
/// checks in the test suite depend on the extra headroom.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> values)
        : shape_(std::move(shape)), data_(std::move(values)) {
        if (count(shape_) != data_.size()) {
            throw std::invalid_argument("Tensor: value count " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_string(shape_));
        }
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor vector(std::vector<double> values) {
        std::size_t n = values.size();
        return Tensor({n}, std::move(values));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
        return Tensor({rows, cols}, std::move(values));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    /// Rows/cols of a rank-2 tensor (rank-1 counts as a single row).
    std::size_t rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? 1 : invalid_2d()); }
    std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : invalid_2d()); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    double* raw() { return data_.data(); }
    const double* raw() const { return data_.data(); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape");
            n *= e;
        }
        return shape.empty() ? 0 : n;
    }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
        os << "]";
        return os.str();
    }

private:
    [[noreturn]] std::size_t invalid_2d() const {
        throw std::logic_error("Tensor: rows()/cols() on tensor of rank " + std::to_string(rank()));
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Dense kernels. The autograd tape and the plain (untraced) forward paths
// both call these, which keeps traced and untraced results bitwise identical.
// ---------------------------------------------------------------------------

inline void check_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(who) + ": expected rank-2 tensor, got " +
                                    Tensor::shape_string(t.shape()));
    }
}

/// out (+)= op(a) * op(b) where op is optional transposition.
/// Loop orders are chosen so the inner loop walks contiguous memory.
inline void matmul_acc(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b,
                       Tensor& out, bool accumulate) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const std::size_t m = trans_a ? a.cols() : a.rows();
    const std::size_t k = trans_a ? a.rows() : a.cols();
    const std::size_t kb = trans_b ? b.cols() : b.rows();
    const std::size_t n = trans_b ? b.rows() : b.cols();
    if (k != kb) {
        throw std::invalid_argument("matmul: inner extents differ, " + Tensor::shape_string(a.shape()) +
                                    (trans_a ? "^T" : "") + " x " + Tensor::shape_string(b.shape()) +
                                    (trans_b ? "^T" : ""));
    }
    if (out.rank() != 2 || out.rows() != m || out.cols() != n) {
        out = Tensor({m, n});
    } else if (!accumulate) {
        out.fill(0.0);
    }

    const double* pa = a.raw();
    const double* pb = b.raw();
    double* pc = out.raw();
    const std::size_t lda = a.cols();
    const std::size_t ldb = b.cols();

    if (!trans_a && !trans_b) {
        // C[i,:] += A[i,k] * B[k,:]
        for (std::size_t i = 0; i < m; ++i) {
            double* c = pc + i * n;
            const double* arow = pa + i * lda;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = arow[kk];
                if (av == 0.0) continue;
                const double* brow = pb + kk * ldb;
                for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
        // C[i,j] += dot(A[i,:], B[j,:])
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = pa + i * lda;
            double* c = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = pb + j * ldb;
                double acc = 0.0;
                for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                c[j] += acc;
            }
        }
    } else if (trans_a && !trans_b) {
        // C[i,:] += A[k,i] * B[k,:]
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double* arow = pa + kk * lda;
            const double* brow = pb + kk * ldb;
            for (std::size_t i = 0; i < m; ++i) {
                const double av = arow[i];
                if (av == 0.0) continue;
                double* c = pc + i * n;
                for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
            }
        }
    } else {
        // C[i,j] += dot(A[:,i], B[j,:]) -- rare, keep the simple form
        for (std::size_t i = 0; i < m; ++i) {
            double* c = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = pb + j * ldb;
                double acc = 0.0;
                for (std::size_t kk = 0; kk < k; ++kk) acc += pa[kk * lda + i] * brow[kk];
                c[j] += acc;
            }
        }
    }
}

inline Tensor matmul_plain(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b) {
    Tensor out;
    matmul_acc(a, trans_a, b, trans_b, out, false);
    return out;
}

inline void add_into(const Tensor& a, const Tensor& b, Tensor& out) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("add: shape mismatch " + Tensor::shape_string(a.shape()) + " vs " +
                                    Tensor::shape_string(b.shape()));
    }
    if (!out.same_shape(a)) out = Tensor(a.shape());
    const double* pa = a.raw();
    const double* pb = b.raw();
    double* po = out.raw();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
}

/// matrix + row vector, the only broadcast the workbench supports.
inline void bias_add_into(const Tensor& m, const Tensor& row, Tensor& out) {
    check_rank2(m, "bias_add");
    if (row.rank() != 1 || row.size() != m.cols()) {
        throw std::invalid_argument("bias_add: bias " + Tensor::shape_string(row.shape()) +
                                    " does not match matrix " + Tensor::shape_string(m.shape()));
    }
    if (!out.same_shape(m)) out = Tensor(m.shape());
    const double* pm = m.raw();
    const double* pr = row.raw();
    double* po = out.raw();
    const std::size_t cols = m.cols();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) po[i * cols + j] = pm[i * cols + j] + pr[j];
    }
}

inline void mul_into(const Tensor& a, const Tensor& b, Tensor& out) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument("mul: shape mismatch " + Tensor::shape_string(a.shape()) + " vs " +
                                    Tensor::shape_string(b.shape()));
    }
    if (!out.same_shape(a)) out = Tensor(a.shape());
    const double* pa = a.raw();
    const double* pb = b.raw();
    double* po = out.raw();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
}

inline void gather_cols_into(const Tensor& x, std::span<const std::size_t> idx, Tensor& out) {
    check_rank2(x, "gather_cols");
    for (std::size_t j : idx) {
        if (j >= x.cols()) throw std::invalid_argument("gather_cols: index out of range");
    }
    if (out.rank() != 2 || out.rows() != x.rows() || out.cols() != idx.size()) {
        out = Tensor({x.rows(), idx.size()});
    }
    const std::size_t n = idx.size();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* src = x.raw() + i * x.cols();
        double* dst = out.raw() + i * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] = src[idx[j]];
    }
}

}  // namespace kanlab
