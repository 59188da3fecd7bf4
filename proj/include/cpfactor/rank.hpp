#pragma once

// Eigenvalue-ratio estimators of the number of factors.

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "cpfactor/covariance.hpp"
#include "cpfactor/errors.hpp"
#include "cpfactor/linalg.hpp"

namespace cpfactor {

enum class RankMethod { uer, ip };

struct RankEstimate {
    std::size_t r_hat = 0;
    RankMethod method = RankMethod::uer;
    std::vector<Eigen::VectorXd> ratios;   // one sequence for uer, one per mode for ip
    std::vector<std::size_t> per_mode;     // ip only
};

/// argmax_{1<=i<=r_max} lambda_i / lambda_{i+1} over the leading r_max+1
/// values; denominators below 1e-12 lambda_1 count as +inf and the smallest
/// such index wins, as do ties. Returns (1-based index, ratios).
inline std::pair<std::size_t, Eigen::VectorXd> eigen_ratio_argmax(const Eigen::VectorXd& values, std::size_t r_max) {
    if (r_max < 1 || static_cast<Eigen::Index>(r_max + 1) > values.size())
        throw InputError("rank-select/r-max", "need r_max + 1 <= number of eigenvalues");
    const double floor = 1e-12 * std::abs(values(0));
    Eigen::VectorXd ratios(static_cast<Eigen::Index>(r_max));
    std::size_t best = 0;
    for (std::size_t i = 0; i < r_max; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double den = values(ii + 1);
        ratios(ii) = den < floor || den <= 0.0 ? std::numeric_limits<double>::infinity() : values(ii) / den;
        if (ratios(ii) > ratios(static_cast<Eigen::Index>(best))) best = i;
    }
    return {best + 1, ratios};
}

inline std::size_t default_r_max(const Shape& shape) {
    const std::size_t dmin = *std::min_element(shape.begin(), shape.end());
    return std::max<std::size_t>(1, std::min<std::size_t>(20, dmin / 2));
}

/// Ratio estimator on the unfolded contemporary covariance.
inline RankEstimate rank_uer(const TensorSeries& s, std::size_t r_max) {
    if (r_max < 1 || static_cast<Eigen::Index>(r_max + 1) > s.dim())
        throw InputError("rank-select/r-max", "r_max + 1 = " + std::to_string(r_max + 1) + " exceeds d = " +
                                                  std::to_string(s.dim()));
    const Eigen::VectorXd lam = contemporary_eigenvalues(s, static_cast<Eigen::Index>(r_max + 1));
    auto [r_hat, ratios] = eigen_ratio_argmax(lam, r_max);
    RankEstimate out;
    out.method = RankMethod::uer;
    out.r_hat = r_hat;
    out.ratios.push_back(std::move(ratios));
    return out;
}

/// Mode-wise ratio estimator; the overall estimate is the largest mode estimate.
inline RankEstimate rank_ip(const TensorSeries& s, std::size_t r_max) {
    const Shape& sh = s.shape();
    for (std::size_t k = 0; k < sh.size(); ++k)
        if (r_max < 1 || r_max + 1 > sh[k])
            throw InputError("rank-select/r-max", "r_max + 1 = " + std::to_string(r_max + 1) + " exceeds d_" +
                                                      std::to_string(k + 1) + " = " + std::to_string(sh[k]));
    RankEstimate out;
    out.method = RankMethod::ip;
    for (std::size_t k = 0; k < sh.size(); ++k) {
        const Eigen::VectorXd lam = eigenvalues_desc(mode_cov(s, k));
        auto [rk, ratios] = eigen_ratio_argmax(lam.head(static_cast<Eigen::Index>(r_max + 1)), r_max);
        out.per_mode.push_back(rk);
        out.ratios.push_back(std::move(ratios));
    }
    out.r_hat = *std::max_element(out.per_mode.begin(), out.per_mode.end());
    return out;
}

}  // namespace cpfactor
