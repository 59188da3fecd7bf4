#pragma once

// Iterative simultaneous orthogonalization: each loading is re-estimated as
// the top eigenvector of the series projected onto the other factors' duals.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "cpfactor/covariance.hpp"
#include "cpfactor/errors.hpp"
#include "cpfactor/init.hpp"
#include "cpfactor/linalg.hpp"
#include "cpfactor/tensor.hpp"

namespace cpfactor {

struct IsoConfig {
    double epsilon = 1e-5;
    std::size_t max_iter = 100;
    CovKind cov_kind = CovKind::contemporary;
    std::size_t lag = 1;

    void validate() const {
        if (!(epsilon > 0.0)) throw InputError("cp-iso/config", "epsilon must be positive");
        if (max_iter < 1) throw InputError("cp-iso/config", "max_iter must be >= 1");
        if (cov_kind == CovKind::lag && lag < 1) throw InputError("cp-iso/config", "lag must be >= 1");
    }
};

struct CpModel {
    Shape shape;
    std::vector<Eigen::MatrixXd> A;  // d_k x r, unit columns
    std::vector<Eigen::MatrixXd> B;  // duals, B_k' A_k = I
    Eigen::VectorXd w;               // non-increasing
    Eigen::MatrixXd F;               // T x r, (1/T) sum_t f_it^2 = 1
    std::vector<bool> degenerate;    // weight below 1e-12, factor zeroed
    std::size_t n_iter = 0;
    bool converged = false;
    std::vector<double> history;     // convergence criterion per iteration
    IsoConfig config;

    std::size_t rank() const { return static_cast<std::size_t>(w.size()); }
    std::size_t order() const { return shape.size(); }
    Eigen::Index length() const { return F.rows(); }
};

namespace detail {

// Contract the modes of a d x T data matrix (shape `shape`, time last) with
// the given vectors; a null entry leaves that mode in place. Returns the
// remaining entries x T.
inline Eigen::MatrixXd contract_series(const Eigen::MatrixXd& data, const Shape& shape,
                                       const std::vector<const Eigen::VectorXd*>& vs) {
    Shape cur = shape;
    cur.push_back(static_cast<std::size_t>(data.cols()));
    std::vector<double> buf(data.data(), data.data() + data.size());
    std::vector<double> next;
    for (std::size_t m = shape.size(); m-- > 0;) {
        if (!vs[m]) continue;
        if (static_cast<std::size_t>(vs[m]->size()) != cur[m])
            throw InputError("cp-iso/dimension-mismatch", "projection vector does not match mode " + std::to_string(m + 1));
        const std::size_t left = prod_range(cur, 0, m), n = cur[m], right = prod_range(cur, m + 1, cur.size());
        next.assign(left * right, 0.0);
        contract_middle(buf.data(), left, n, right, vs[m]->data(), next.data());
        buf.swap(next);
        cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(m));
    }
    const auto T = data.cols();
    return Eigen::Map<const Eigen::MatrixXd>(buf.data(), static_cast<Eigen::Index>(buf.size()) / T, T);
}

inline Eigen::MatrixXd projected_cov(const Eigen::MatrixXd& z, const IsoConfig& cfg) {
    const auto T = z.cols();
    const auto n = z.rows();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    if (cfg.cov_kind == CovKind::contemporary) {
        s.selfadjointView<Eigen::Lower>().rankUpdate(z, 1.0 / static_cast<double>(T));
        s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
        return s;
    }
    const auto m = T - static_cast<Eigen::Index>(cfg.lag);
    s = z.leftCols(m) * z.rightCols(m).transpose() / static_cast<double>(m);
    return 0.5 * (s + s.transpose());
}

}  // namespace detail

/// Z_{t,ik}: Y_t contracted with b_il for every l != k, as a d_k x T matrix.
inline Eigen::MatrixXd project_z(const TensorSeries& s, const std::vector<Eigen::MatrixXd>& B, std::size_t i,
                                 std::size_t k) {
    const std::size_t K = s.order();
    if (B.size() != K) throw InputError("cp-iso/dimension-mismatch", "need one dual matrix per mode");
    detail::check_mode(s.shape(), k);
    std::vector<Eigen::VectorXd> cols(K);
    std::vector<const Eigen::VectorXd*> vs(K, nullptr);
    for (std::size_t l = 0; l < K; ++l) {
        if (l == k) continue;
        if (static_cast<Eigen::Index>(i) >= B[l].cols()) throw InputError("cp-iso/factor-index", "factor index out of range");
        cols[l] = B[l].col(static_cast<Eigen::Index>(i));
        vs[l] = &cols[l];
    }
    return detail::contract_series(s.data(), s.shape(), vs);
}

/// Y_t contracted with b_ik in every mode: a T-vector.
inline Eigen::VectorXd project_all(const TensorSeries& s, const std::vector<Eigen::MatrixXd>& B, std::size_t i) {
    const std::size_t K = s.order();
    std::vector<Eigen::VectorXd> cols(K);
    std::vector<const Eigen::VectorXd*> vs(K);
    for (std::size_t l = 0; l < K; ++l) {
        cols[l] = B[l].col(static_cast<Eigen::Index>(i));
        vs[l] = &cols[l];
    }
    return detail::contract_series(s.data(), s.shape(), vs).transpose();
}

/// Weights and unit-second-moment factors from the current duals.
inline void extract_factors(const TensorSeries& s, CpModel& model) {
    const std::size_t r = model.B.empty() ? 0 : static_cast<std::size_t>(model.B[0].cols());
    const auto T = s.length();
    model.w.resize(static_cast<Eigen::Index>(r));
    model.F.resize(T, static_cast<Eigen::Index>(r));
    model.degenerate.assign(r, false);
    for (std::size_t i = 0; i < r; ++i) {
        const Eigen::VectorXd g = project_all(s, model.B, i);
        const double w = std::sqrt(g.squaredNorm() / static_cast<double>(T));
        const auto ii = static_cast<Eigen::Index>(i);
        model.w(ii) = w;
        if (w < 1e-12) {
            model.degenerate[i] = true;
            model.F.col(ii).setZero();
        } else {
            model.F.col(ii) = g / w;
        }
    }
}

/// Refine a warm start. Non-convergence within max_iter is reported through
/// `converged`, not thrown.
inline CpModel iso_fit(const TensorSeries& s, const LoadingSet& init, const IsoConfig& cfg = {}) {
    cfg.validate();
    const std::size_t K = s.order();
    if (init.A.size() != K) throw InputError("cp-iso/dimension-mismatch", "init has wrong number of modes");
    const std::size_t r = init.rank();
    for (std::size_t k = 0; k < K; ++k) {
        if (static_cast<std::size_t>(init.A[k].rows()) != s.shape()[k] ||
            static_cast<std::size_t>(init.A[k].cols()) != r)
            throw InputError("cp-iso/dimension-mismatch", "init loading matrix for mode " + std::to_string(k + 1) +
                                                              " has the wrong size");
        for (Eigen::Index i = 0; i < init.A[k].cols(); ++i)
            if (std::abs(init.A[k].col(i).norm() - 1.0) > 1e-8)
                throw InputError("cp-iso/init-norm", "init columns must have unit norm");
    }
    if (cfg.cov_kind == CovKind::lag && static_cast<Eigen::Index>(cfg.lag) >= s.length())
        throw InputError("covariance/lag", "lag must be smaller than T");
    if (s.length() < 2) throw InputError("covariance/too-short", "series needs at least 2 observations");

    CpModel model;
    model.shape = s.shape();
    model.config = cfg;
    model.A = init.A;
    model.B.resize(K);
    auto dual = [&](std::size_t k, std::size_t iter) {
        try {
            model.B[k] = gram_inverse_dual(model.A[k]);
        } catch (const RankDeficient& e) {
            throw RankDeficient("cp-iso/singular-gram", e.smallest_singular_value(),
                                "iso_fit iteration " + std::to_string(iter) + ", mode " + std::to_string(k + 1));
        }
    };
    for (std::size_t k = 0; k < K; ++k) dual(k, 0);

    if (r > 0) {
        std::vector<Eigen::MatrixXd> prev = model.A;
        for (std::size_t m = 1; m <= cfg.max_iter; ++m) {
            for (std::size_t k = 0; k < K; ++k) {
                Eigen::MatrixXd next(model.A[k].rows(), static_cast<Eigen::Index>(r));
                for (std::size_t i = 0; i < r; ++i) {
                    const Eigen::MatrixXd z = project_z(s, model.B, i, k);
                    next.col(static_cast<Eigen::Index>(i)) = top_eigs(detail::projected_cov(z, cfg), 1).vectors.col(0);
                }
                model.A[k] = std::move(next);
                dual(k, m);
            }
            double crit = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(r); ++i)
                    crit = std::max(crit, sin_angle(model.A[k].col(i), prev[k].col(i)));
            model.history.push_back(crit);
            model.n_iter = m;
            prev = model.A;
            if (crit <= cfg.epsilon) {
                model.converged = true;
                break;
            }
        }
    } else {
        model.converged = true;
    }

    extract_factors(s, model);

    // order factors by weight, largest first
    std::vector<std::size_t> perm(r);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(),
                     [&](std::size_t a, std::size_t b) { return model.w(static_cast<Eigen::Index>(a)) > model.w(static_cast<Eigen::Index>(b)); });
    auto permute_cols = [&](Eigen::MatrixXd& m) {
        Eigen::MatrixXd out(m.rows(), m.cols());
        for (std::size_t j = 0; j < r; ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(perm[j]));
        m = std::move(out);
    };
    for (auto& a : model.A) permute_cols(a);
    for (auto& b : model.B) permute_cols(b);
    permute_cols(model.F);
    Eigen::VectorXd w(static_cast<Eigen::Index>(r));
    std::vector<bool> deg(r);
    for (std::size_t j = 0; j < r; ++j) {
        w(static_cast<Eigen::Index>(j)) = model.w(static_cast<Eigen::Index>(perm[j]));
        deg[j] = model.degenerate[perm[j]];
    }
    model.w = w;
    model.degenerate = deg;
    return model;
}

/// The d x r matrix whose column i is vec(a_i1 o ... o a_iK).
inline Eigen::MatrixXd khatri_rao(const std::vector<Eigen::MatrixXd>& A) {
    if (A.empty()) return {};
    const auto r = A[0].cols();
    Eigen::Index d = 1;
    for (const auto& a : A) d *= a.rows();
    Eigen::MatrixXd out(d, r);
    std::vector<Eigen::VectorXd> vs(A.size());
    for (Eigen::Index i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < A.size(); ++k) vs[k] = A[k].col(i);
        out.col(i) = outer_vec(vs);
    }
    return out;
}

/// Fitted series sum_i w_i f_it a_i1 o ... o a_iK.
inline TensorSeries reconstruct(const CpModel& model) {
    const auto d = static_cast<Eigen::Index>(numel(model.shape));
    if (model.rank() == 0) return TensorSeries(model.shape, Eigen::MatrixXd::Zero(d, model.F.rows()));
    Eigen::MatrixXd y = khatri_rao(model.A) * model.w.asDiagonal() * model.F.transpose();
    return TensorSeries(model.shape, std::move(y));
}

/// 1 - ||Y - Yhat||^2 / ||Y - mean(Y)||^2.
inline double r_squared(const TensorSeries& s, const TensorSeries& fitted) {
    if (s.shape() != fitted.shape() || s.length() != fitted.length())
        throw InputError("cp-iso/shape-mismatch", "series and fitted values differ in shape or length");
    Eigen::MatrixXd centered = s.data();
    centered.colwise() -= centered.rowwise().mean();
    const double denom = centered.squaredNorm();
    if (denom == 0.0) throw InputError("cp-iso/constant-series", "R^2 undefined for a constant series");
    return 1.0 - (s.data() - fitted.data()).squaredNorm() / denom;
}

}  // namespace cpfactor
