#pragma once

// Tensor time series and the second-moment operators built from it.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cpfactor/errors.hpp"
#include "cpfactor/linalg.hpp"
#include "cpfactor/tensor.hpp"

namespace cpfactor {

/// T observations of a common shape, stored as the d x T matrix whose
/// column t is vec(Y_t).
class TensorSeries {
public:
    TensorSeries() = default;

    TensorSeries(Shape shape, Eigen::MatrixXd data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_.empty()) throw InputError("covariance/shape", "series shape must have order >= 1");
        for (auto d : shape_)
            if (d == 0) throw InputError("covariance/shape", "shape entries must be >= 1");
        if (static_cast<std::size_t>(data_.rows()) != numel(shape_))
            throw InputError("covariance/shape", "data rows " + std::to_string(data_.rows()) +
                                                     " do not match shape " + shape_string(shape_));
    }

    static TensorSeries from_observations(std::span<const DenseTensor> obs) {
        if (obs.empty()) throw InputError("covariance/empty", "no observations");
        const Shape shape = obs[0].shape();
        Eigen::MatrixXd data(static_cast<Eigen::Index>(numel(shape)), static_cast<Eigen::Index>(obs.size()));
        for (std::size_t t = 0; t < obs.size(); ++t) {
            if (obs[t].shape() != shape)
                throw InputError("covariance/shape", "observation " + std::to_string(t + 1) + " has shape " +
                                                         shape_string(obs[t].shape()) + ", expected " +
                                                         shape_string(shape));
            data.col(static_cast<Eigen::Index>(t)) = obs[t].vec();
        }
        return TensorSeries(shape, std::move(data));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t order() const noexcept { return shape_.size(); }
    Eigen::Index dim() const noexcept { return data_.rows(); }
    Eigen::Index length() const noexcept { return data_.cols(); }

    const Eigen::MatrixXd& data() const noexcept { return data_; }
    Eigen::MatrixXd& data() noexcept { return data_; }

    DenseTensor obs(Eigen::Index t) const { return DenseTensor(shape_, data_.col(t)); }

private:
    Shape shape_;
    Eigen::MatrixXd data_;
};

/// Subtract the sample mean tensor from every observation.
inline TensorSeries center(const TensorSeries& s) {
    Eigen::MatrixXd x = s.data();
    x.colwise() -= x.rowwise().mean();
    return TensorSeries(s.shape(), std::move(x));
}

enum class CovKind { contemporary, lag };

struct CovarianceBundle {
    CovKind kind = CovKind::contemporary;
    std::size_t lag = 0;
    Shape shape;
    Eigen::MatrixXd unfolded;  // d x d
};

namespace detail {

inline void require_length(const TensorSeries& s, Eigen::Index min_t, const char* what) {
    if (s.length() < min_t)
        throw InputError("covariance/too-short", std::string(what) + ": series has " +
                                                     std::to_string(s.length()) + " observations");
}

}  // namespace detail

/// (1/T) sum_t vec(Y_t) vec(Y_t)'.
inline CovarianceBundle contemporary_cov(const TensorSeries& s) {
    detail::require_length(s, 2, "contemporary_cov");
    const Eigen::Index d = s.dim();
    CovarianceBundle b;
    b.kind = CovKind::contemporary;
    b.shape = s.shape();
    b.unfolded = Eigen::MatrixXd::Zero(d, d);
    b.unfolded.selfadjointView<Eigen::Lower>().rankUpdate(s.data(), 1.0 / static_cast<double>(s.length()));
    b.unfolded.triangularView<Eigen::StrictlyUpper>() = b.unfolded.transpose();
    return b;
}

/// (1/(T-h)) sum_{t>h} vec(Y_{t-h}) vec(Y_t)', not symmetrized.
inline CovarianceBundle lag_cov(const TensorSeries& s, std::size_t h) {
    const auto T = s.length();
    if (h < 1 || static_cast<Eigen::Index>(h) >= T)
        throw InputError("covariance/lag", "lag " + std::to_string(h) + " needs 1 <= h < T = " + std::to_string(T));
    const auto n = T - static_cast<Eigen::Index>(h);
    CovarianceBundle b;
    b.kind = CovKind::lag;
    b.lag = h;
    b.shape = s.shape();
    b.unfolded = s.data().leftCols(n) * s.data().rightCols(n).transpose() / static_cast<double>(n);
    return b;
}

/// (1/T) sum_t mat_k(Y_t) mat_k(Y_t)'.
inline Eigen::MatrixXd mode_cov(const TensorSeries& s, std::size_t k) {
    const auto& sh = s.shape();
    detail::check_mode(sh, k);
    const auto left = static_cast<Eigen::Index>(detail::prod_range(sh, 0, k));
    const auto n = static_cast<Eigen::Index>(sh[k]);
    const auto blocks = s.data().size() / (left * n);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    const double* p = s.data().data();
    if (left == 1) {
        Eigen::Map<const Eigen::MatrixXd> m(p, n, blocks);
        out.selfadjointView<Eigen::Lower>().rankUpdate(m);
    } else {
        for (Eigen::Index r = 0; r < blocks; ++r) {
            Eigen::Map<const Eigen::MatrixXd> x(p + r * left * n, left, n);
            out.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
        }
    }
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out / static_cast<double>(s.length());
}

/// The symmetric operator whose leading eigenvectors seed the estimators:
/// Sigma for the contemporary case, (Sigma_h + Sigma_h')/2 for lag h.
/// Applied matrix-free so that d x d matrices are never formed.
struct SeriesOperator {
    const TensorSeries* series = nullptr;
    CovKind kind = CovKind::contemporary;
    std::size_t lag = 0;

    Eigen::Index dim() const { return series->dim(); }

    Eigen::MatrixXd operator()(const Eigen::MatrixXd& x) const {
        const auto& y = series->data();
        const auto T = y.cols();
        if (kind == CovKind::contemporary) {
            Eigen::MatrixXd z = y.transpose() * x;
            return y * z / static_cast<double>(T);
        }
        const auto n = T - static_cast<Eigen::Index>(lag);
        Eigen::MatrixXd z0 = y.leftCols(n).transpose() * x;
        Eigen::MatrixXd z1 = y.rightCols(n).transpose() * x;
        return (y.leftCols(n) * z1 + y.rightCols(n) * z0) / (2.0 * static_cast<double>(n));
    }

    /// Dense form of the operator.
    Eigen::MatrixXd dense() const {
        if (kind == CovKind::contemporary) return contemporary_cov(*series).unfolded;
        Eigen::MatrixXd m = lag_cov(*series, lag).unfolded;
        return 0.5 * (m + m.transpose());
    }
};

/// Symmetric matrix used for eigen steps: unfolded itself for the
/// contemporary kind, its symmetric part for lag bundles.
inline Eigen::MatrixXd symmetric_part(const CovarianceBundle& b) {
    if (b.kind == CovKind::contemporary) return b.unfolded;
    return 0.5 * (b.unfolded + b.unfolded.transpose());
}

/// Leading eigenpairs of the series operator; dense for small d, block
/// Krylov otherwise.
inline EigenPairs series_top_eigs(const SeriesOperator& op, Eigen::Index k, std::uint64_t seed = 0x5eedULL) {
    const Eigen::Index d = op.dim();
    if (d <= 400) return top_eigs(op.dense(), k);
    KrylovOptions opt;
    opt.seed = seed;
    return top_eigs_krylov(op, d, k, opt);
}

/// The top `count` eigenvalues of the unfolded contemporary covariance, in
/// non-increasing order. Uses the T x T Gram matrix when T < d (the nonzero
/// spectra coincide); missing eigenvalues are exact zeros.
inline Eigen::VectorXd contemporary_eigenvalues(const TensorSeries& s, Eigen::Index count) {
    detail::require_length(s, 2, "contemporary_eigenvalues");
    const auto& y = s.data();
    const Eigen::Index d = y.rows(), T = y.cols();
    Eigen::MatrixXd g;
    if (T < d) {
        g = Eigen::MatrixXd::Zero(T, T);
        g.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose(), 1.0 / static_cast<double>(T));
    } else {
        g = Eigen::MatrixXd::Zero(d, d);
        g.selfadjointView<Eigen::Lower>().rankUpdate(y, 1.0 / static_cast<double>(T));
    }
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    Eigen::VectorXd all = eigenvalues_desc(g);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
    const Eigen::Index n = std::min(count, all.size());
    out.head(n) = all.head(n);
    return out;
}

}  // namespace cpfactor
