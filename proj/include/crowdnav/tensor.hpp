#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdnav {

/// Dense row-major matrix of doubles. Vectors are 1xN.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    static Tensor zeros(int r, int c) { return Tensor(r, c); }

    int size() const { return rows * cols; }
    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline double stable_softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Reverse-mode autodiff tape over Tensors. Ops evaluate eagerly; backward()
/// walks the tape in reverse. Parameters are leaves bound to external
/// value/grad storage so several graphs can accumulate into one gradient set.
/// reset() keeps node capacity, making per-sample graph rebuilds cheap.
class Graph {
public:
    using Id = int;

    enum class Op : std::uint8_t {
        Input, Param,
        MatMul, MatMulNT, Add, AddRowVec, Sub, Mul, MulColVec,
        Scale, AddScalar, Relu, Tanh, Sigmoid, Softplus, Log, Exp, Square,
        SoftmaxRowsMasked, ZeroRows, MeanRowsMasked,
        ConcatCols, SumAll, Clamp, Min2,
    };

    void reset() { size_ = 0; }
    int size() const { return size_; }

    const Tensor& val(Id id) const {
        const Node& n = nodes_[id];
        return n.ext_val ? *n.ext_val : n.val;
    }
    double scalar(Id id) const { return val(id).v[0]; }
    const Tensor& grad(Id id) const {
        const Node& n = nodes_[id];
        return n.ext_grad ? *n.ext_grad : n.grad;
    }

    Id input(const Tensor& t) {
        Node& n = alloc(Op::Input, t.rows, t.cols);
        n.val.v = t.v;
        return last_;
    }

    Id input_scalar(double x) {
        Node& n = alloc(Op::Input, 1, 1);
        n.val.v[0] = x;
        return last_;
    }

    /// Leaf bound to external storage (no copy); backward accumulates into
    /// *grad directly.
    Id param(Tensor* value, Tensor* grad) {
        Node& n = alloc(Op::Param, 0, 0);
        n.ext_val = value;
        n.ext_grad = grad;
        return last_;
    }

    Id matmul(Id a, Id b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        check(A.cols == B.rows, "matmul shape");
        Node& n = alloc(Op::MatMul, A.rows, B.cols, a, b);
        mat_mul(A, B, n.val);
        return last_;
    }

    /// C = A * B^T
    Id matmul_nt(Id a, Id b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        check(A.cols == B.cols, "matmul_nt shape");
        Node& n = alloc(Op::MatMulNT, A.rows, B.rows, a, b);
        for (int i = 0; i < A.rows; ++i)
            for (int j = 0; j < B.rows; ++j) {
                double s = 0.0;
                const double* pa = &A.v[static_cast<std::size_t>(i) * A.cols];
                const double* pb = &B.v[static_cast<std::size_t>(j) * B.cols];
                for (int k = 0; k < A.cols; ++k) s += pa[k] * pb[k];
                n.val.at(i, j) = s;
            }
        return last_;
    }

    Id add(Id a, Id b) { return binary_same_shape(Op::Add, a, b); }
    Id sub(Id a, Id b) { return binary_same_shape(Op::Sub, a, b); }
    Id mul(Id a, Id b) { return binary_same_shape(Op::Mul, a, b); }

    /// A (n x m) + row vector b (1 x m), broadcast over rows.
    Id add_rowvec(Id a, Id b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        check(B.rows == 1 && B.cols == A.cols, "add_rowvec shape");
        Node& n = alloc(Op::AddRowVec, A.rows, A.cols, a, b);
        for (int i = 0; i < A.rows; ++i)
            for (int j = 0; j < A.cols; ++j) n.val.at(i, j) = A.at(i, j) + B.at(0, j);
        return last_;
    }

    /// Row i of A scaled by column vector b[i] (b is n x 1).
    Id mul_colvec(Id a, Id b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        check(B.cols == 1 && B.rows == A.rows, "mul_colvec shape");
        Node& n = alloc(Op::MulColVec, A.rows, A.cols, a, b);
        for (int i = 0; i < A.rows; ++i)
            for (int j = 0; j < A.cols; ++j) n.val.at(i, j) = A.at(i, j) * B.at(i, 0);
        return last_;
    }

    Id scale(Id a, double s) { return unary_scalar(Op::Scale, a, s); }
    Id add_scalar(Id a, double s) { return unary_scalar(Op::AddScalar, a, s); }

    Id relu(Id a) { return unary(Op::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }
    Id tanh_(Id a) { return unary(Op::Tanh, a, [](double x) { return std::tanh(x); }); }
    Id sigmoid_(Id a) { return unary(Op::Sigmoid, a, [](double x) { return sigmoid(x); }); }
    Id softplus_(Id a) { return unary(Op::Softplus, a, [](double x) { return stable_softplus(x); }); }
    Id log_(Id a) { return unary(Op::Log, a, [](double x) { return std::log(x); }); }
    Id exp_(Id a) { return unary(Op::Exp, a, [](double x) { return std::exp(x); }); }
    Id square(Id a) { return unary(Op::Square, a, [](double x) { return x * x; }); }

    /// Per-row softmax over columns; masked key columns get an additive -1e9
    /// before normalization (exactly zero weight after underflow).
    Id softmax_rows_masked(Id a, const std::vector<std::uint8_t>& key_mask) {
        const Tensor& A = val(a);
        check(static_cast<int>(key_mask.size()) == A.cols, "softmax mask size");
        Node& n = alloc(Op::SoftmaxRowsMasked, A.rows, A.cols, a);
        n.mask = key_mask;
        for (int i = 0; i < A.rows; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < A.cols; ++j) {
                double z = A.at(i, j) + (key_mask[j] ? 0.0 : -1e9);
                if (z > mx) mx = z;
            }
            double sum = 0.0;
            for (int j = 0; j < A.cols; ++j) {
                double z = A.at(i, j) + (key_mask[j] ? 0.0 : -1e9);
                double e = std::exp(z - mx);
                n.val.at(i, j) = e;
                sum += e;
            }
            double inv = sum > 0.0 ? 1.0 / sum : 0.0;
            for (int j = 0; j < A.cols; ++j) n.val.at(i, j) *= inv;
        }
        return last_;
    }

    /// Zeroes rows whose mask is 0 (both in the value and in the gradient).
    Id zero_rows(Id a, const std::vector<std::uint8_t>& row_mask) {
        const Tensor& A = val(a);
        check(static_cast<int>(row_mask.size()) == A.rows, "zero_rows mask size");
        Node& n = alloc(Op::ZeroRows, A.rows, A.cols, a);
        n.mask = row_mask;
        for (int i = 0; i < A.rows; ++i)
            for (int j = 0; j < A.cols; ++j) n.val.at(i, j) = row_mask[i] ? A.at(i, j) : 0.0;
        return last_;
    }

    /// Mean over unmasked rows -> 1 x cols. All-masked input -> zero vector.
    Id mean_rows_masked(Id a, const std::vector<std::uint8_t>& row_mask) {
        const Tensor& A = val(a);
        check(static_cast<int>(row_mask.size()) == A.rows, "mean_rows mask size");
        Node& n = alloc(Op::MeanRowsMasked, 1, A.cols, a);
        n.mask = row_mask;
        int count = 0;
        for (std::uint8_t m : row_mask) count += m ? 1 : 0;
        n.s0 = count > 0 ? 1.0 / count : 0.0;
        for (int j = 0; j < A.cols; ++j) {
            double s = 0.0;
            for (int i = 0; i < A.rows; ++i)
                if (row_mask[i]) s += A.at(i, j);
            n.val.at(0, j) = s * n.s0;
        }
        return last_;
    }

    /// Concatenates same-row-count inputs along columns.
    Id concat_cols(Id a, Id b) { return concat2(a, b); }
    Id concat_cols(Id a, Id b, Id c) { return concat2(concat2(a, b), c); }

    Id sum_all(Id a) {
        const Tensor& A = val(a);
        Node& n = alloc(Op::SumAll, 1, 1, a);
        double s = 0.0;
        for (double x : A.v) s += x;
        n.val.v[0] = s;
        return last_;
    }

    Id mean_all(Id a) {
        int sz = val(a).size();
        return scale(sum_all(a), 1.0 / sz);
    }

    Id clamp(Id a, double lo, double hi) {
        const Tensor& A = val(a);
        Node& n = alloc(Op::Clamp, A.rows, A.cols, a);
        n.s0 = lo;
        n.s1 = hi;
        for (int i = 0; i < A.size(); ++i)
            n.val.v[i] = std::min(std::max(A.v[i], lo), hi);
        return last_;
    }

    /// Elementwise min; ties route the gradient to the first argument.
    Id min2(Id a, Id b) { return binary_same_shape(Op::Min2, a, b); }

    /// Seeds d(loss)/d(loss) = seed and accumulates gradients down the tape.
    /// Bound parameter gradients are ADDED to (callers zero them per batch).
    void backward(Id loss, double seed = 1.0) {
        check(val(loss).size() == 1, "backward: loss must be scalar");
        for (int i = 0; i <= loss; ++i) {
            Node& n = nodes_[i];
            if (n.ext_grad) continue;  // external grads zeroed by the caller
            n.grad.rows = n.val.rows;
            n.grad.cols = n.val.cols;
            n.grad.v.assign(n.val.v.size(), 0.0);
        }
        check(!nodes_[loss].ext_grad, "backward: loss cannot be a parameter leaf");
        gref(loss).v[0] = seed;

        for (int id = loss; id >= 0; --id) {
            Node& n = nodes_[id];
            const Tensor& g = gref(id);
            switch (n.op) {
                case Op::Input:
                case Op::Param:
                    break;
                case Op::MatMul: {
                    // C = A*B: dA += dC*B^T, dB += A^T*dC
                    Tensor& dA = gref(n.a);
                    Tensor& dB = gref(n.b);
                    const Tensor& A = val(n.a);
                    const Tensor& B = val(n.b);
                    const int cols = B.cols;
                    for (int i = 0; i < A.rows; ++i) {
                        const double* gi = &g.v[static_cast<std::size_t>(i) * cols];
                        double* dai = &dA.v[static_cast<std::size_t>(i) * A.cols];
                        for (int k = 0; k < A.cols; ++k) {
                            const double* bk = &B.v[static_cast<std::size_t>(k) * cols];
                            double s = 0.0;
                            for (int j = 0; j < cols; ++j) s += gi[j] * bk[j];
                            dai[k] += s;
                        }
                        const double* ai = &A.v[static_cast<std::size_t>(i) * A.cols];
                        for (int k = 0; k < A.cols; ++k) {
                            double a = ai[k];
                            if (a == 0.0) continue;
                            double* dbk = &dB.v[static_cast<std::size_t>(k) * cols];
                            for (int j = 0; j < cols; ++j) dbk[j] += a * gi[j];
                        }
                    }
                    break;
                }
                case Op::MatMulNT: {
                    // C = A*B^T: dA += dC*B, dB += dC^T*A
                    Tensor& dA = gref(n.a);
                    Tensor& dB = gref(n.b);
                    const Tensor& A = val(n.a);
                    const Tensor& B = val(n.b);
                    for (int i = 0; i < A.rows; ++i) {
                        const double* gi = &g.v[static_cast<std::size_t>(i) * g.cols];
                        const double* ai = &A.v[static_cast<std::size_t>(i) * A.cols];
                        double* dai = &dA.v[static_cast<std::size_t>(i) * A.cols];
                        for (int j = 0; j < B.rows; ++j) {
                            double gij = gi[j];
                            if (gij == 0.0) continue;
                            const double* bj = &B.v[static_cast<std::size_t>(j) * B.cols];
                            double* dbj = &dB.v[static_cast<std::size_t>(j) * B.cols];
                            for (int k = 0; k < A.cols; ++k) {
                                dai[k] += gij * bj[k];
                                dbj[k] += gij * ai[k];
                            }
                        }
                    }
                    break;
                }
                case Op::Add: {
                    accum(n.a, g);
                    accum(n.b, g);
                    break;
                }
                case Op::Sub: {
                    accum(n.a, g);
                    Tensor& dB = gref(n.b);
                    for (int i = 0; i < g.size(); ++i) dB.v[i] -= g.v[i];
                    break;
                }
                case Op::AddRowVec: {
                    accum(n.a, g);
                    Tensor& dB = gref(n.b);
                    for (int i = 0; i < g.rows; ++i)
                        for (int j = 0; j < g.cols; ++j) dB.at(0, j) += g.at(i, j);
                    break;
                }
                case Op::Mul: {
                    Tensor& dA = gref(n.a);
                    Tensor& dB = gref(n.b);
                    const Tensor& A = val(n.a);
                    const Tensor& B = val(n.b);
                    for (int i = 0; i < g.size(); ++i) {
                        dA.v[i] += g.v[i] * B.v[i];
                        dB.v[i] += g.v[i] * A.v[i];
                    }
                    break;
                }
                case Op::MulColVec: {
                    Tensor& dA = gref(n.a);
                    Tensor& dB = gref(n.b);
                    const Tensor& A = val(n.a);
                    const Tensor& B = val(n.b);
                    for (int i = 0; i < g.rows; ++i) {
                        double s = 0.0;
                        for (int j = 0; j < g.cols; ++j) {
                            dA.at(i, j) += g.at(i, j) * B.at(i, 0);
                            s += g.at(i, j) * A.at(i, j);
                        }
                        dB.at(i, 0) += s;
                    }
                    break;
                }
                case Op::Scale: {
                    Tensor& dA = gref(n.a);
                    for (int i = 0; i < g.size(); ++i) dA.v[i] += g.v[i] * n.s0;
                    break;
                }
                case Op::AddScalar:
                    accum(n.a, g);
                    break;
                case Op::Relu: {
                    Tensor& dA = gref(n.a);
                    const Tensor& A = val(n.a);
                    for (int i = 0; i < g.size(); ++i)
                        if (A.v[i] > 0.0) dA.v[i] += g.v[i];
                    break;
                }
                case Op::Tanh: {
                    Tensor& dA = gref(n.a);
                    for (int i = 0; i < g.size(); ++i)
                        dA.v[i] += g.v[i] * (1.0 - n.val.v[i] * n.val.v[i]);
                    break;
                }
                case Op::Sigmoid: {
                    Tensor& dA = gref(n.a);
                    for (int i = 0; i < g.size(); ++i)
                        dA.v[i] += g.v[i] * n.val.v[i] * (1.0 - n.val.v[i]);
                    break;
                }
                case Op::Softplus: {
                    Tensor& dA = gref(n.a);
                    const Tensor& A = val(n.a);
                    for (int i = 0; i < g.size(); ++i) dA.v[i] += g.v[i] * sigmoid(A.v[i]);
                    break;
                }
                case Op::Log: {
                    Tensor& dA = gref(n.a);
                    const Tensor& A = val(n.a);
                    for (int i = 0; i < g.size(); ++i) dA.v[i] += g.v[i] / A.v[i];
                    break;
                }
                case Op::Exp: {
                    Tensor& dA = gref(n.a);
                    for (int i = 0; i < g.size(); ++i) dA.v[i] += g.v[i] * n.val.v[i];
                    break;
                }
                case Op::Square: {
                    Tensor& dA = gref(n.a);
                    const Tensor& A = val(n.a);
                    for (int i = 0; i < g.size(); ++i) dA.v[i] += g.v[i] * 2.0 * A.v[i];
                    break;
                }
                case Op::SoftmaxRowsMasked: {
                    Tensor& dA = gref(n.a);
                    for (int i = 0; i < g.rows; ++i) {
                        double dot = 0.0;
                        for (int j = 0; j < g.cols; ++j) dot += g.at(i, j) * n.val.at(i, j);
                        for (int j = 0; j < g.cols; ++j)
                            dA.at(i, j) += n.val.at(i, j) * (g.at(i, j) - dot);
                    }
                    break;
                }
                case Op::ZeroRows: {
                    Tensor& dA = gref(n.a);
                    for (int i = 0; i < g.rows; ++i)
                        if (n.mask[i])
                            for (int j = 0; j < g.cols; ++j) dA.at(i, j) += g.at(i, j);
                    break;
                }
                case Op::MeanRowsMasked: {
                    Tensor& dA = gref(n.a);
                    for (int i = 0; i < dA.rows; ++i)
                        if (n.mask[i])
                            for (int j = 0; j < g.cols; ++j)
                                dA.at(i, j) += g.at(0, j) * n.s0;
                    break;
                }
                case Op::ConcatCols: {
                    Tensor& dA = gref(n.a);
                    Tensor& dB = gref(n.b);
                    for (int i = 0; i < g.rows; ++i) {
                        for (int j = 0; j < dA.cols; ++j) dA.at(i, j) += g.at(i, j);
                        for (int j = 0; j < dB.cols; ++j) dB.at(i, j) += g.at(i, dA.cols + j);
                    }
                    break;
                }
                case Op::SumAll: {
                    Tensor& dA = gref(n.a);
                    for (int i = 0; i < dA.size(); ++i) dA.v[i] += g.v[0];
                    break;
                }
                case Op::Clamp: {
                    Tensor& dA = gref(n.a);
                    const Tensor& A = val(n.a);
                    for (int i = 0; i < g.size(); ++i)
                        if (A.v[i] >= n.s0 && A.v[i] <= n.s1) dA.v[i] += g.v[i];
                    break;
                }
                case Op::Min2: {
                    Tensor& dA = gref(n.a);
                    Tensor& dB = gref(n.b);
                    const Tensor& A = val(n.a);
                    const Tensor& B = val(n.b);
                    for (int i = 0; i < g.size(); ++i) {
                        if (A.v[i] <= B.v[i])
                            dA.v[i] += g.v[i];
                        else
                            dB.v[i] += g.v[i];
                    }
                    break;
                }
            }
        }
    }

private:
    struct Node {
        Op op = Op::Input;
        int a = -1, b = -1;
        double s0 = 0.0, s1 = 0.0;
        std::vector<std::uint8_t> mask;
        Tensor* ext_val = nullptr;
        Tensor* ext_grad = nullptr;
        Tensor val, grad;
    };

    static void check(bool ok, const char* what) {
        if (!ok) throw std::runtime_error(std::string("Graph: ") + what);
    }

    Node& alloc(Op op, int rows, int cols, int a = -1, int b = -1) {
        if (size_ == static_cast<int>(nodes_.size())) nodes_.emplace_back();
        Node& n = nodes_[size_];
        last_ = size_;
        ++size_;
        n.op = op;
        n.a = a;
        n.b = b;
        n.s0 = n.s1 = 0.0;
        n.mask.clear();
        n.ext_val = nullptr;
        n.ext_grad = nullptr;
        n.val.rows = rows;
        n.val.cols = cols;
        n.val.v.resize(static_cast<std::size_t>(rows) * cols);
        return n;
    }

    template <typename F>
    Id unary(Op op, Id a, F f) {
        const Tensor& A = val(a);
        Node& n = alloc(op, A.rows, A.cols, a);
        for (int i = 0; i < A.size(); ++i) n.val.v[i] = f(A.v[i]);
        return last_;
    }

    Id unary_scalar(Op op, Id a, double s) {
        const Tensor& A = val(a);
        Node& n = alloc(op, A.rows, A.cols, a);
        n.s0 = s;
        if (op == Op::Scale)
            for (int i = 0; i < A.size(); ++i) n.val.v[i] = A.v[i] * s;
        else
            for (int i = 0; i < A.size(); ++i) n.val.v[i] = A.v[i] + s;
        return last_;
    }

    Id binary_same_shape(Op op, Id a, Id b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        check(A.rows == B.rows && A.cols == B.cols, "binary op shape");
        Node& n = alloc(op, A.rows, A.cols, a, b);
        switch (op) {
            case Op::Add:
                for (int i = 0; i < A.size(); ++i) n.val.v[i] = A.v[i] + B.v[i];
                break;
            case Op::Sub:
                for (int i = 0; i < A.size(); ++i) n.val.v[i] = A.v[i] - B.v[i];
                break;
            case Op::Mul:
                for (int i = 0; i < A.size(); ++i) n.val.v[i] = A.v[i] * B.v[i];
                break;
            case Op::Min2:
                for (int i = 0; i < A.size(); ++i) n.val.v[i] = std::min(A.v[i], B.v[i]);
                break;
            default:
                check(false, "binary op kind");
        }
        return last_;
    }

    Id concat2(Id a, Id b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        check(A.rows == B.rows, "concat rows");
        Node& n = alloc(Op::ConcatCols, A.rows, A.cols + B.cols, a, b);
        for (int i = 0; i < A.rows; ++i) {
            for (int j = 0; j < A.cols; ++j) n.val.at(i, j) = A.at(i, j);
            for (int j = 0; j < B.cols; ++j) n.val.at(i, A.cols + j) = B.at(i, j);
        }
        return last_;
    }

    static void mat_mul(const Tensor& A, const Tensor& B, Tensor& C) {
        for (int i = 0; i < A.rows; ++i) {
            double* pc = &C.v[static_cast<std::size_t>(i) * C.cols];
            for (int j = 0; j < C.cols; ++j) pc[j] = 0.0;
            for (int k = 0; k < A.cols; ++k) {
                double a = A.at(i, k);
                if (a == 0.0) continue;
                const double* pb = &B.v[static_cast<std::size_t>(k) * B.cols];
                for (int j = 0; j < B.cols; ++j) pc[j] += a * pb[j];
            }
        }
    }

    void accum(Id id, const Tensor& g) {
        Tensor& d = gref(id);
        for (int i = 0; i < g.size(); ++i) d.v[i] += g.v[i];
    }

    Tensor& gref(Id id) {
        Node& n = nodes_[id];
        return n.ext_grad ? *n.ext_grad : n.grad;
    }

    std::deque<Node> nodes_;
    int size_ = 0;
    Id last_ = -1;
};

}  // namespace crowdnav
