#pragma once

// Error metrics against a known truth and a few summary statistics.

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cpfactor/errors.hpp"
#include "cpfactor/iso.hpp"
#include "cpfactor/linalg.hpp"

namespace cpfactor::sim {

/// Minimum-cost perfect assignment for a square cost matrix (Hungarian
/// method, O(n^3)). Returns col[i], the column assigned to row i.
inline std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    if (cost.cols() != cost.rows()) throw InputError("sim-lab/assignment", "cost matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<bool> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> col(n);
    for (std::size_t j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
    return col;
}

/// For each true factor, the index of the matched estimated factor, chosen
/// to maximize the product of |cos| over modes (summed over factors in log
/// space).
inline std::vector<std::size_t> match_factors(const std::vector<Eigen::MatrixXd>& est,
                                              const std::vector<Eigen::MatrixXd>& truth) {
    if (est.size() != truth.size() || est.empty() || est[0].cols() != truth[0].cols())
        throw InputError("sim-lab/rank-mismatch", "estimate and truth differ in rank or order");
    const auto r = truth[0].cols();
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(r, r);
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const Eigen::MatrixXd c = (truth[k].transpose() * est[k]).cwiseAbs();
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < r; ++j) cost(i, j) -= std::log(std::max(c(i, j), 1e-300));
    }
    return hungarian(cost);
}

/// max_{i,k} sqrt(1 - (a_hat' a)^2) after matching.
inline double sin_angle_error(const std::vector<Eigen::MatrixXd>& est, const std::vector<Eigen::MatrixXd>& truth) {
    const auto match = match_factors(est, truth);
    double worst = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k)
        for (Eigen::Index i = 0; i < truth[k].cols(); ++i)
            worst = std::max(worst, sin_angle(est[k].col(static_cast<Eigen::Index>(match[static_cast<std::size_t>(i)])),
                                              truth[k].col(i)));
    return worst;
}

/// Per-mode max_i sin-angle error after matching.
inline std::vector<double> mode_errors(const std::vector<Eigen::MatrixXd>& est, const std::vector<Eigen::MatrixXd>& truth) {
    const auto match = match_factors(est, truth);
    std::vector<double> out(truth.size(), 0.0);
    for (std::size_t k = 0; k < truth.size(); ++k)
        for (Eigen::Index i = 0; i < truth[k].cols(); ++i)
            out[k] = std::max(out[k], sin_angle(est[k].col(static_cast<Eigen::Index>(match[static_cast<std::size_t>(i)])),
                                                truth[k].col(i)));
    return out;
}

/// (1/(rT)) sum_{t,i} (f_hat_it - h_i f_it)^2 with h_i = s_i w_i / w_hat_i,
/// s_i the sign of sum_t f_hat_it f_it.
inline double factor_mse(const CpModel& model, const std::vector<Eigen::MatrixXd>& A, const Eigen::VectorXd& w,
                         const Eigen::MatrixXd& F) {
    if (model.rank() != static_cast<std::size_t>(w.size()) || model.F.rows() != F.rows())
        throw InputError("sim-lab/rank-mismatch", "model and truth differ in rank or length");
    const auto match = match_factors(model.A, A);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(match[static_cast<std::size_t>(i)]);
        const Eigen::VectorXd fh = model.F.col(j);
        const double s = fh.dot(F.col(i)) < 0.0 ? -1.0 : 1.0;
        const double h = model.w(j) > 0.0 ? s * w(i) / model.w(j) : 0.0;
        acc += (fh - h * F.col(i)).squaredNorm();
    }
    return acc / static_cast<double>(w.size() * F.rows());
}

/// sup_x |F_n(x) - Phi(x)|.
inline double ks_distance_normal(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const boost::math::normal_distribution<double> nd;
    const double n = static_cast<double>(xs.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double c = boost::math::cdf(nd, xs[i]);
        worst = std::max({worst, static_cast<double>(i + 1) / n - c, c - static_cast<double>(i) / n});
    }
    return worst;
}

/// Linear-interpolated sample quantile (type 7).
inline double quantile(std::vector<double> xs, double p) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    const double h = p * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

}  // namespace cpfactor::sim
