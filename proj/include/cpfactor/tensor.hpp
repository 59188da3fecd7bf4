#pragma once

// Dense K-way arrays stored first-index-fastest, plus the handful of
// multilinear operations the estimators need (matricization, mode
// products, outer products).

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cpfactor/errors.hpp"

namespace cpfactor {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t k = 0; k < shape.size(); ++k) {
        if (k) s += ",";
        s += std::to_string(shape[k]);
    }
    return s + ")";
}

/// A K-way real array. Entry (i_1,...,i_K) lives at offset
/// i_1 + d_1*(i_2 + d_2*(i_3 + ...)), so the data vector is vec(t).
/// An empty shape denotes a scalar (the result of contracting every mode).
class DenseTensor {
public:
    DenseTensor() : data_(Eigen::VectorXd::Zero(1)) {}

    explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
        validate_shape();
        data_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(numel(shape_)));
    }

    DenseTensor(Shape shape, Eigen::VectorXd data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (static_cast<std::size_t>(data_.size()) != numel(shape_))
            throw InputError("tensor-core/size-mismatch",
                             "data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
    }

    static DenseTensor scalar(double v) {
        DenseTensor t;
        t.data_(0) = v;
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t order() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t k) const { return shape_.at(k); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(data_.size()); }

    const Eigen::VectorXd& vec() const noexcept { return data_; }
    Eigen::VectorXd& vec() noexcept { return data_; }

    std::size_t offset(std::span<const std::size_t> idx) const {
        if (idx.size() != shape_.size())
            throw InputError("tensor-core/index", "index order does not match tensor order");
        std::size_t off = 0;
        for (std::size_t k = idx.size(); k-- > 0;) {
            if (idx[k] >= shape_[k]) throw InputError("tensor-core/index", "index out of range");
            off = off * shape_[k] + idx[k];
        }
        return off;
    }

    double operator()(std::initializer_list<std::size_t> idx) const {
        return data_(static_cast<Eigen::Index>(offset({idx.begin(), idx.size()})));
    }
    double& operator()(std::initializer_list<std::size_t> idx) {
        return data_(static_cast<Eigen::Index>(offset({idx.begin(), idx.size()})));
    }
    double at(std::span<const std::size_t> idx) const {
        return data_(static_cast<Eigen::Index>(offset(idx)));
    }

    double frobenius_norm() const { return data_.norm(); }

    DenseTensor& operator+=(const DenseTensor& o) {
        require_same_shape(o);
        data_ += o.data_;
        return *this;
    }
    DenseTensor& operator-=(const DenseTensor& o) {
        require_same_shape(o);
        data_ -= o.data_;
        return *this;
    }
    DenseTensor& operator*=(double s) {
        data_ *= s;
        return *this;
    }

    friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
    friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
    friend DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

private:
    void validate_shape() const {
        for (auto d : shape_)
            if (d == 0) throw InputError("tensor-core/shape", "shape entries must be >= 1");
    }
    void require_same_shape(const DenseTensor& o) const {
        if (o.shape_ != shape_)
            throw InputError("tensor-core/shape-mismatch",
                             shape_string(shape_) + " vs " + shape_string(o.shape_));
    }

    Shape shape_;
    Eigen::VectorXd data_;
};

namespace detail {

inline void check_mode(const Shape& shape, std::size_t k) {
    if (k >= shape.size())
        throw InputError("tensor-core/mode", "mode " + std::to_string(k + 1) +
                                                 " out of range for order " +
                                                 std::to_string(shape.size()));
}

inline std::size_t prod_range(const Shape& s, std::size_t b, std::size_t e) {
    std::size_t p = 1;
    for (std::size_t i = b; i < e; ++i) p *= s[i];
    return p;
}

// Contract the middle index of a (left, n, right) block with v.
// out has left*right entries laid out (left, right).
inline void contract_middle(const double* in, std::size_t left, std::size_t n, std::size_t right,
                            const double* v, double* out) {
    using Map = Eigen::Map<const Eigen::MatrixXd>;
    Eigen::Map<const Eigen::VectorXd> vv(v, static_cast<Eigen::Index>(n));
    if (left == 1) {
        Eigen::Map<Eigen::VectorXd> o(out, static_cast<Eigen::Index>(right));
        o.noalias() = Map(in, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(right)).transpose() * vv;
        return;
    }
    for (std::size_t r = 0; r < right; ++r) {
        Eigen::Map<Eigen::VectorXd> o(out + r * left, static_cast<Eigen::Index>(left));
        o.noalias() = Map(in + r * left * n, static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(n)) * vv;
    }
}

}  // namespace detail

/// Mode-k matricization (k is 0-based): d_k rows, remaining modes in
/// ascending order as columns with the earliest of them varying fastest.
inline Eigen::MatrixXd matricize(const DenseTensor& t, std::size_t k) {
    const auto& s = t.shape();
    detail::check_mode(s, k);
    const std::size_t left = detail::prod_range(s, 0, k);
    const std::size_t n = s[k];
    const std::size_t right = detail::prod_range(s, k + 1, s.size());
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(left * right));
    const double* p = t.vec().data();
    for (std::size_t r = 0; r < right; ++r)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < left; ++l)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l + left * r)) =
                    p[l + left * (i + n * r)];
    return m;
}

/// Inverse of matricize for the given target shape.
inline DenseTensor dematricize(const Eigen::MatrixXd& m, const Shape& shape, std::size_t k) {
    detail::check_mode(shape, k);
    const std::size_t left = detail::prod_range(shape, 0, k);
    const std::size_t n = shape[k];
    const std::size_t right = detail::prod_range(shape, k + 1, shape.size());
    if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != left * right)
        throw InputError("tensor-core/dimension-mismatch", "matrix does not fit shape " + shape_string(shape));
    DenseTensor t(shape);
    double* p = t.vec().data();
    for (std::size_t r = 0; r < right; ++r)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < left; ++l)
                p[l + left * (i + n * r)] =
                    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l + left * r));
    return t;
}

/// View an order-2K tensor with shape (d_1..d_K, d_1..d_K) as a d x d matrix
/// (first half indexes rows).
inline Eigen::MatrixXd unfold_square(const DenseTensor& s) {
    const auto& sh = s.shape();
    if (sh.empty() || sh.size() % 2 != 0)
        throw InputError("tensor-core/not-square", "unfold_square needs an even-order tensor");
    const std::size_t K = sh.size() / 2;
    for (std::size_t k = 0; k < K; ++k)
        if (sh[k] != sh[K + k])
            throw InputError("tensor-core/not-square", "half-shapes differ: " + shape_string(sh));
    const auto d = static_cast<Eigen::Index>(detail::prod_range(sh, 0, K));
    return Eigen::Map<const Eigen::MatrixXd>(s.vec().data(), d, d);
}

/// Inverse of unfold_square: reshape a d x d matrix into an order-2K tensor.
inline DenseTensor fold_square(const Eigen::MatrixXd& m, const Shape& half) {
    const auto d = static_cast<Eigen::Index>(numel(half));
    if (m.rows() != d || m.cols() != d)
        throw InputError("tensor-core/dimension-mismatch", "matrix is not d x d for shape " + shape_string(half));
    Shape full = half;
    full.insert(full.end(), half.begin(), half.end());
    return DenseTensor(std::move(full), Eigen::Map<const Eigen::VectorXd>(m.data(), d * d));
}

/// t x_k U for U of size m x d_k: mode k is replaced by a mode of length m.
inline DenseTensor mode_product(const DenseTensor& t, const Eigen::MatrixXd& u, std::size_t k) {
    const auto& s = t.shape();
    detail::check_mode(s, k);
    if (static_cast<std::size_t>(u.cols()) != s[k])
        throw InputError("tensor-core/dimension-mismatch",
                         "mode_product: matrix has " + std::to_string(u.cols()) + " columns, mode " +
                             std::to_string(k + 1) + " has length " + std::to_string(s[k]));
    Shape out_shape = s;
    out_shape[k] = static_cast<std::size_t>(u.rows());
    return dematricize(u * matricize(t, k), out_shape, k);
}

/// t x_k v for a vector v of length d_k: mode k is removed.
inline DenseTensor mode_vector_product(const DenseTensor& t, const Eigen::VectorXd& v, std::size_t k) {
    const auto& s = t.shape();
    detail::check_mode(s, k);
    if (static_cast<std::size_t>(v.size()) != s[k])
        throw InputError("tensor-core/dimension-mismatch",
                         "mode_vector_product: vector length " + std::to_string(v.size()) +
                             " vs mode length " + std::to_string(s[k]));
    Shape out_shape = s;
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(k));
    DenseTensor out(out_shape);
    detail::contract_middle(t.vec().data(), detail::prod_range(s, 0, k), s[k],
                            detail::prod_range(s, k + 1, s.size()), v.data(), out.vec().data());
    return out;
}

/// Double contraction t x_h x_{K+h} m of an order-2K tensor: entry
/// sum_{i,j} t(.., i, .., j, ..) m(i, j) with i in mode h and j in mode K+h.
inline DenseTensor dual_mode_product(const DenseTensor& t, const Eigen::MatrixXd& m, std::size_t h) {
    const auto& s = t.shape();
    if (s.empty() || s.size() % 2 != 0)
        throw InputError("tensor-core/not-square", "dual_mode_product needs an even-order tensor");
    const std::size_t K = s.size() / 2;
    detail::check_mode(s, h);
    if (h >= K) throw InputError("tensor-core/mode", "dual mode must lie in the first half");
    const std::size_t p = h, q = K + h;
    if (s[p] != s[q] || static_cast<std::size_t>(m.rows()) != s[p] || static_cast<std::size_t>(m.cols()) != s[q])
        throw InputError("tensor-core/dimension-mismatch", "dual_mode_product: modes and matrix disagree");

    const std::size_t a = detail::prod_range(s, 0, p);
    const std::size_t n = s[p];
    const std::size_t b = detail::prod_range(s, p + 1, q);
    const std::size_t c = detail::prod_range(s, q + 1, s.size());
    Shape out_shape;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (k != p && k != q) out_shape.push_back(s[k]);
    DenseTensor out = out_shape.empty() ? DenseTensor::scalar(0.0) : DenseTensor(out_shape);
    double* o = out.vec().data();
    const double* in = t.vec().data();
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t bi = 0; bi < b; ++bi)
                for (std::size_t i = 0; i < n; ++i) {
                    const double w = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    if (w == 0.0) continue;
                    const double* src = in + a * (i + n * (bi + b * (j + n * ci)));
                    double* dst = o + a * (bi + b * ci);
                    for (std::size_t ai = 0; ai < a; ++ai) dst[ai] += w * src[ai];
                }
    return out;
}

/// vec(v_1 o v_2 o ... o v_K), i.e. the Kronecker product v_K (x) ... (x) v_1.
inline Eigen::VectorXd outer_vec(std::span<const Eigen::VectorXd> vs) {
    if (vs.empty()) throw InputError("tensor-core/empty", "outer product of an empty list");
    Eigen::VectorXd acc = vs[0];
    for (std::size_t k = 1; k < vs.size(); ++k) {
        const auto& v = vs[k];
        Eigen::VectorXd next(acc.size() * v.size());
        for (Eigen::Index j = 0; j < v.size(); ++j) next.segment(j * acc.size(), acc.size()) = v(j) * acc;
        acc.swap(next);
    }
    return acc;
}

inline DenseTensor outer(std::span<const Eigen::VectorXd> vs) {
    Shape shape;
    for (const auto& v : vs) shape.push_back(static_cast<std::size_t>(v.size()));
    return DenseTensor(std::move(shape), outer_vec(vs));
}

inline DenseTensor outer(std::initializer_list<Eigen::VectorXd> vs) {
    return outer(std::span<const Eigen::VectorXd>(vs.begin(), vs.size()));
}

}  // namespace cpfactor
