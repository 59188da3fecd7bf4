#pragma once

// Multi-start alternating least squares CP fit of a single small tensor.
// Only meant as an independent reference for tiny problems.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "cpfactor/errors.hpp"
#include "cpfactor/iso.hpp"
#include "cpfactor/rng.hpp"
#include "cpfactor/tensor.hpp"

namespace cpfactor::sim {

struct CpFit {
    std::vector<Eigen::MatrixXd> A;  // unit columns
    Eigen::VectorXd weights;
    double residual = std::numeric_limits<double>::infinity();  // Frobenius norm of the misfit
};

namespace detail {

inline Eigen::MatrixXd khatri_rao_except(const std::vector<Eigen::MatrixXd>& A, std::size_t skip) {
    std::vector<Eigen::MatrixXd> others;
    for (std::size_t k = 0; k < A.size(); ++k)
        if (k != skip) others.push_back(A[k]);
    if (others.empty()) return Eigen::MatrixXd::Ones(1, A[0].cols());
    return khatri_rao(others);
}

inline double cp_residual(const DenseTensor& t, const std::vector<Eigen::MatrixXd>& A, const Eigen::VectorXd& w) {
    return (t.vec() - khatri_rao(A) * w).norm();
}

}  // namespace detail

inline CpFit brute_force_cp(const DenseTensor& t, std::size_t r, std::size_t restarts = 20, std::uint64_t seed = 1,
                            std::size_t max_iter = 5000) {
    if (t.size() > 64 || r > 2 || r < 1)
        throw InputError("sim-lab/oracle-size", "brute_force_cp handles at most 64 entries and rank 2");
    const std::size_t K = t.order();
    const auto rr = static_cast<Eigen::Index>(r);
    CpFit best;
    for (std::size_t s = 0; s < std::max<std::size_t>(restarts, 1); ++s) {
        Rng rng = make_rng(seed, {s});
        std::vector<Eigen::MatrixXd> A;
        for (std::size_t k = 0; k < K; ++k) A.push_back(normal_matrix(rng, static_cast<Eigen::Index>(t.dim(k)), rr));
        for (auto& a : A) a.colwise().normalize();
        double prev = std::numeric_limits<double>::infinity();
        Eigen::VectorXd w = Eigen::VectorXd::Ones(rr);
        for (std::size_t it = 0; it < max_iter; ++it) {
            for (std::size_t k = 0; k < K; ++k) {
                const Eigen::MatrixXd kr = detail::khatri_rao_except(A, k);
                Eigen::MatrixXd gram = Eigen::MatrixXd::Ones(rr, rr);
                for (std::size_t l = 0; l < K; ++l)
                    if (l != k) gram = gram.cwiseProduct(A[l].transpose() * A[l]);
                const Eigen::MatrixXd rhs = matricize(t, k) * kr;
                A[k] = gram.completeOrthogonalDecomposition().solve(rhs.transpose()).transpose();
                for (Eigen::Index i = 0; i < rr; ++i) {
                    w(i) = A[k].col(i).norm();
                    if (w(i) > 0) A[k].col(i) /= w(i);
                }
            }
            const double res = detail::cp_residual(t, A, w);
            const bool done = std::abs(prev - res) <= 1e-15 * std::max(1.0, t.frobenius_norm());
            prev = res;
            if (done) break;
        }
        const double res = detail::cp_residual(t, A, w);
        if (res < best.residual) {
            best.A = A;
            best.weights = w;
            best.residual = res;
        }
    }
    // absorb negative weights into the last mode and sort by weight
    for (Eigen::Index i = 0; i < rr; ++i)
        if (best.weights(i) < 0) {
            best.weights(i) = -best.weights(i);
            best.A[K - 1].col(i) *= -1.0;
        }
    if (rr == 2 && best.weights(1) > best.weights(0)) {
        std::swap(best.weights(0), best.weights(1));
        for (auto& a : best.A) a.col(0).swap(a.col(1));
    }
    return best;
}

}  // namespace cpfactor::sim
