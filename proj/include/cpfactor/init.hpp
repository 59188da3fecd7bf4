#pragma once

// Warm start for the CP loadings: composite PCA on the leading eigenvectors
// of the unfolded covariance, with randomized projection for groups of
// eigenvalues that are too close to separate.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cpfactor/covariance.hpp"
#include "cpfactor/errors.hpp"
#include "cpfactor/linalg.hpp"
#include "cpfactor/rng.hpp"
#include "cpfactor/tensor.hpp"

namespace cpfactor {

/// One unit vector per mode.
using LoadingTuple = std::vector<Eigen::VectorXd>;

enum class InitBranch { automatic, composite_only, projection_only };

struct InitConfig {
    std::size_t r = 1;
    double c0 = 0.1;
    double nu = 0.8;
    std::size_t L = 0;                // 0 means 2 r^2
    std::optional<std::size_t> h;     // projection mode; default argmax d_k
    std::uint64_t seed = 0;
    InitBranch branch = InitBranch::automatic;

    std::size_t projections() const { return L > 0 ? L : 2 * r * r; }

    void validate() const {
        if (r < 1) throw InputError("cp-init/config", "rank must be >= 1");
        if (!(c0 > 0.0 && c0 < 1.0)) throw InputError("cp-init/config", "c0 must lie in (0,1)");
        if (!(nu > 0.0 && nu < 1.0)) throw InputError("cp-init/config", "nu must lie in (0,1)");
    }
};

/// Per-mode d_k x r loading matrices with unit columns.
struct LoadingSet {
    std::vector<Eigen::MatrixXd> A;
    std::vector<bool> projected;   // factor came from the randomized branch
    Eigen::VectorXd eigenvalues;   // leading eigenvalues that drove the branch choice

    std::size_t rank() const { return A.empty() ? 0 : static_cast<std::size_t>(A[0].cols()); }
    std::size_t order() const { return A.size(); }

    LoadingTuple tuple(std::size_t i) const {
        LoadingTuple t;
        for (const auto& a : A) t.push_back(a.col(static_cast<Eigen::Index>(i)));
        return t;
    }
};

/// Eigengap test for index i (0-based) among the leading r values, with
/// lambda_0 = +inf and lambda_{r+1} = 0.
inline bool eigengap_regime(const Eigen::VectorXd& values, std::size_t i, std::size_t r, double c0) {
    if (r == 0 || i >= r || static_cast<Eigen::Index>(r) > values.size())
        throw InputError("cp-init/eigengap", "index or rank out of range");
    const auto at = [&](std::size_t j) { return values(static_cast<Eigen::Index>(j)); };
    const double below = i == 0 ? std::numeric_limits<double>::infinity() : std::abs(at(i) - at(i - 1));
    const double above = std::abs(at(i) - (i + 1 < r ? at(i + 1) : 0.0));
    return std::min(below, above) > c0 * at(r - 1);
}

/// Top left singular vector of every mode-k matricization of u.
inline LoadingTuple composite_pca_one(const Eigen::VectorXd& u, const Shape& shape) {
    if (static_cast<std::size_t>(u.size()) != numel(shape))
        throw InputError("cp-init/dimension-mismatch", "vector length does not match shape " + shape_string(shape));
    if (u.norm() == 0.0) throw InputError("cp-init/zero-vector", "composite PCA of a zero vector");
    const DenseTensor t(shape, u);
    LoadingTuple out;
    for (std::size_t k = 0; k < shape.size(); ++k) out.push_back(top_left_singular(matricize(t, k)).vector);
    return out;
}

/// Xi held as an explicit order-2K tensor.
class DenseXi {
public:
    explicit DenseXi(DenseTensor t) : t_(std::move(t)) {
        const auto& s = t_.shape();
        if (s.empty() || s.size() % 2 != 0) throw InputError("cp-init/xi", "Xi must have even order");
        half_.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(s.size() / 2));
    }

    const Shape& shape() const { return half_; }

    Eigen::MatrixXd theta_contract(const Eigen::MatrixXd& theta, std::size_t h) const {
        DenseTensor c = dual_mode_product(t_, theta, h);
        if (c.order() == 0) return Eigen::MatrixXd::Constant(1, 1, c.vec()(0));
        return unfold_square(c);
    }

    Eigen::MatrixXd mode_matrix(const LoadingTuple& a, std::size_t h) const {
        const std::size_t K = half_.size();
        DenseTensor c = t_;
        for (std::size_t m = 2 * K; m-- > 0;)
            if (m % K != h) c = mode_vector_product(c, a[m % K], m);
        const auto n = static_cast<Eigen::Index>(half_[h]);
        return Eigen::Map<const Eigen::MatrixXd>(c.vec().data(), n, n);
    }

    double score(const LoadingTuple& a) const {
        const Eigen::VectorXd v = outer_vec(a);
        return std::abs(v.dot(unfold_square(t_) * v));
    }

private:
    DenseTensor t_;
    Shape half_;
};

/// Xi = sum_l lambda_l u_l u_l' held by its eigenpairs, so d x d storage is
/// never needed.
class SpectralXi {
public:
    SpectralXi(Shape shape, Eigen::VectorXd values, Eigen::MatrixXd vectors)
        : shape_(std::move(shape)), values_(std::move(values)), vectors_(std::move(vectors)) {
        if (static_cast<std::size_t>(vectors_.rows()) != numel(shape_) || vectors_.cols() != values_.size())
            throw InputError("cp-init/xi", "eigenpairs do not match shape " + shape_string(shape_));
    }

    const Shape& shape() const { return shape_; }

    Eigen::MatrixXd theta_contract(const Eigen::MatrixXd& theta, std::size_t h) const {
        const auto rest = static_cast<Eigen::Index>(numel(shape_) / shape_[h]);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rest, rest);
        for (Eigen::Index l = 0; l < values_.size(); ++l) {
            const Eigen::MatrixXd m = mode_view(l, h);
            out.noalias() += values_(l) * (m.transpose() * (theta * m));
        }
        return out;
    }

    Eigen::MatrixXd mode_matrix(const LoadingTuple& a, std::size_t h) const {
        LoadingTuple others;
        for (std::size_t k = 0; k < shape_.size(); ++k)
            if (k != h) others.push_back(a[k]);
        const auto n = static_cast<Eigen::Index>(shape_[h]);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
        const Eigen::VectorXd x = others.empty() ? Eigen::VectorXd::Ones(1) : outer_vec(others);
        for (Eigen::Index l = 0; l < values_.size(); ++l) {
            const Eigen::VectorXd y = mode_view(l, h) * x;
            out.noalias() += values_(l) * y * y.transpose();
        }
        return out;
    }

    double score(const LoadingTuple& a) const {
        const Eigen::VectorXd v = outer_vec(a);
        const Eigen::VectorXd c = vectors_.transpose() * v;
        return std::abs((values_.array() * c.array().square()).sum());
    }

private:
    Eigen::MatrixXd mode_view(Eigen::Index l, std::size_t h) const {
        return matricize(DenseTensor(shape_, vectors_.col(l)), h);
    }

    Shape shape_;
    Eigen::VectorXd values_;
    Eigen::MatrixXd vectors_;
};

inline std::size_t default_projection_mode(const Shape& shape) {
    std::size_t h = 0;
    for (std::size_t k = 1; k < shape.size(); ++k)
        if (shape[k] > shape[h]) h = k;
    return h;
}

/// Greedy selection over candidate tuples: take the best-scoring remaining
/// tuple, then drop every tuple that shares a mode direction with it beyond nu.
template <class Xi>
std::vector<LoadingTuple> select_tuples(const Xi& xi, const std::vector<LoadingTuple>& candidates, std::size_t s,
                                        double nu) {
    std::vector<double> score(candidates.size());
    for (std::size_t l = 0; l < candidates.size(); ++l) score[l] = xi.score(candidates[l]);
    std::vector<bool> alive(candidates.size(), true);
    std::vector<LoadingTuple> chosen;
    for (std::size_t i = 0; i < s; ++i) {
        std::size_t best = candidates.size();
        for (std::size_t l = 0; l < candidates.size(); ++l)
            if (alive[l] && (best == candidates.size() || score[l] > score[best])) best = l;
        if (best == candidates.size()) throw InsufficientSurvivors(s, chosen.size());
        const LoadingTuple pick = candidates[best];
        chosen.push_back(pick);
        for (std::size_t l = 0; l < candidates.size(); ++l) {
            if (!alive[l]) continue;
            double worst = 0.0;
            for (std::size_t k = 0; k < pick.size(); ++k)
                worst = std::max(worst, std::abs(candidates[l][k].dot(pick[k])));
            if (worst > nu) alive[l] = false;
        }
    }
    return chosen;
}

/// Candidate tuple from one Gaussian slice of Xi along modes (h, K+h).
template <class Xi>
LoadingTuple projection_candidate(const Xi& xi, const Eigen::MatrixXd& theta, std::size_t h) {
    const Shape& shape = xi.shape();
    const std::size_t K = shape.size();
    LoadingTuple a(K);
    if (K > 1) {
        const Eigen::VectorXd u = top_left_singular(xi.theta_contract(theta, h)).vector;
        Shape reduced;
        for (std::size_t k = 0; k < K; ++k)
            if (k != h) reduced.push_back(shape[k]);
        const DenseTensor ut(reduced, u);
        for (std::size_t k = 0, kr = 0; k < K; ++k) {
            if (k == h) continue;
            a[k] = top_left_singular(matricize(ut, kr++)).vector;
        }
    }
    a[h] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape[h]));
    a[h] = top_left_singular(xi.mode_matrix(a, h)).vector;
    return a;
}

/// Randomized projection: L random slices, then greedy redundancy-filtered
/// selection of s tuples. Throws InsufficientSurvivors on shortfall.
template <class Xi>
std::vector<LoadingTuple> randomized_projection(const Xi& xi, std::size_t s, std::size_t L,
                                                std::optional<std::size_t> h, double nu, std::uint64_t seed) {
    if (s < 1 || L < s)
        throw InputError("cp-init/projection-count", "randomized projection needs 1 <= s <= L");
    const Shape& shape = xi.shape();
    const std::size_t hh = h ? *h : default_projection_mode(shape);
    detail::check_mode(shape, hh);
    const auto dh = static_cast<Eigen::Index>(shape[hh]);
    std::vector<LoadingTuple> candidates;
    candidates.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
        Rng rng = make_rng(seed, {l});
        candidates.push_back(projection_candidate(xi, normal_matrix(rng, dh, dh), hh));
    }
    return select_tuples(xi, candidates, s, nu);
}

namespace detail {

inline LoadingSet rc_pca_from_eigs(const EigenPairs& eig, const Shape& shape, const InitConfig& cfg) {
    const std::size_t r = cfg.r;
    const std::size_t K = shape.size();
    LoadingSet out;
    out.eigenvalues = eig.values;
    out.projected.assign(r, false);
    for (std::size_t k = 0; k < K; ++k) out.A.emplace_back(static_cast<Eigen::Index>(shape[k]), static_cast<Eigen::Index>(r));
    auto place = [&](std::size_t i, const LoadingTuple& t) {
        for (std::size_t k = 0; k < K; ++k) out.A[k].col(static_cast<Eigen::Index>(i)) = t[k];
    };

    std::vector<bool> gap(r);
    for (std::size_t i = 0; i < r; ++i) {
        switch (cfg.branch) {
        case InitBranch::automatic: gap[i] = eigengap_regime(eig.values, i, r, cfg.c0); break;
        case InitBranch::composite_only: gap[i] = true; break;
        case InitBranch::projection_only: gap[i] = false; break;
        }
    }
    std::size_t group = 0;
    for (std::size_t i = 0; i < r;) {
        if (gap[i]) {
            place(i, composite_pca_one(eig.vectors.col(static_cast<Eigen::Index>(i)), shape));
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < r && !gap[j]) ++j;
        const auto n = static_cast<Eigen::Index>(j - i);
        SpectralXi xi(shape, eig.values.segment(static_cast<Eigen::Index>(i), n),
                      eig.vectors.middleCols(static_cast<Eigen::Index>(i), n));
        const auto tuples = randomized_projection(xi, j - i, std::max(cfg.projections(), j - i), cfg.h, cfg.nu,
                                                  derive_seed(cfg.seed, {group++}));
        for (std::size_t q = 0; q < tuples.size(); ++q) {
            place(i + q, tuples[q]);
            out.projected[i + q] = true;
        }
        i = j;
    }
    return out;
}

}  // namespace detail

/// Warm start from a covariance bundle. Lag bundles are symmetrized first.
inline LoadingSet rc_pca(const CovarianceBundle& cov, const InitConfig& cfg) {
    cfg.validate();
    const auto d = static_cast<std::size_t>(cov.unfolded.rows());
    if (cfg.r > d) throw InputError("cp-init/rank", "rank " + std::to_string(cfg.r) + " exceeds d = " + std::to_string(d));
    return detail::rc_pca_from_eigs(top_eigs(symmetric_part(cov), static_cast<Eigen::Index>(cfg.r)), cov.shape, cfg);
}

/// Warm start straight from the series, without forming d x d matrices when
/// d is large.
inline LoadingSet rc_pca(const TensorSeries& s, const InitConfig& cfg, CovKind kind = CovKind::contemporary,
                         std::size_t lag = 1) {
    cfg.validate();
    if (cfg.r > static_cast<std::size_t>(s.dim()))
        throw InputError("cp-init/rank", "rank " + std::to_string(cfg.r) + " exceeds d = " + std::to_string(s.dim()));
    if (kind == CovKind::lag && (lag < 1 || static_cast<Eigen::Index>(lag) >= s.length()))
        throw InputError("covariance/lag", "lag must satisfy 1 <= h < T");
    if (kind == CovKind::contemporary && s.length() < 2)
        throw InputError("covariance/too-short", "series needs at least 2 observations");
    SeriesOperator op{&s, kind, lag};
    return detail::rc_pca_from_eigs(series_top_eigs(op, static_cast<Eigen::Index>(cfg.r), derive_seed(cfg.seed, {0xe16ULL})),
                                    s.shape(), cfg);
}

}  // namespace cpfactor
