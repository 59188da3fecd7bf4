#pragma once

// Standard errors and confidence intervals for loading entries, the
// thresholded noise covariance behind them, the angle-distribution weights,
// and VAR(1) factor forecasts.

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "cpfactor/covariance.hpp"
#include "cpfactor/errors.hpp"
#include "cpfactor/iso.hpp"
#include "cpfactor/linalg.hpp"
#include "cpfactor/tensor.hpp"

namespace cpfactor {

/// W (F'F / T) W; the diagonal is w_i^2 because factors have unit second moment.
inline Eigen::MatrixXd estimate_theta(const CpModel& model) {
    const auto T = static_cast<double>(model.F.rows());
    Eigen::MatrixXd m = model.F.transpose() * model.F / T;
    Eigen::MatrixXd theta = model.w.asDiagonal() * m * model.w.asDiagonal();
    theta = 0.5 * (theta + theta.transpose()).eval();
    for (Eigen::Index i = 0; i < theta.rows(); ++i)
        if (model.degenerate.empty() || !model.degenerate[static_cast<std::size_t>(i)])
            theta(i, i) = model.w(i) * model.w(i);
    return theta;
}

inline TensorSeries residuals(const TensorSeries& s, const CpModel& model) {
    if (s.shape() != model.shape || s.length() != model.F.rows())
        throw InputError("inference/shape-mismatch", "series does not match the fitted model");
    return TensorSeries(s.shape(), s.data() - reconstruct(model).data());
}

struct NoiseCov {
    Eigen::MatrixXd sigma;      // d x d
    double c_thr = 2.0;
    double rate = 0.0;          // sqrt(log d / T)
    std::size_t zeroed = 0;     // off-diagonal entries set to zero
};

/// Hard-threshold the residual covariance: off-diagonal (j,l) survives iff
/// |s_jl| > c_thr sqrt(s_jj s_ll) sqrt(log d / T).
inline NoiseCov threshold_cov(const TensorSeries& res, double c_thr = 2.0) {
    const auto T = res.length();
    if (T < 2) throw InputError("covariance/too-short", "threshold_cov needs T >= 2");
    if (c_thr < 0.0) throw InputError("inference/threshold", "threshold constant must be non-negative");
    const auto d = res.dim();
    NoiseCov out;
    out.c_thr = c_thr;
    out.rate = std::sqrt(std::log(static_cast<double>(d)) / static_cast<double>(T));
    out.sigma = Eigen::MatrixXd::Zero(d, d);
    out.sigma.selfadjointView<Eigen::Lower>().rankUpdate(res.data(), 1.0 / static_cast<double>(T));
    const Eigen::VectorXd sd = out.sigma.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index l = 0; l < d; ++l)
        for (Eigen::Index j = l + 1; j < d; ++j) {
            double& v = out.sigma(j, l);
            if (!(std::abs(v) > c_thr * sd(j) * sd(l) * out.rate)) {
                v = 0.0;
                out.zeroed += 2;
            }
        }
    out.sigma.triangularView<Eigen::StrictlyUpper>() = out.sigma.transpose();
    return out;
}

/// Kronecker vector b_iK (x) ... (x) x (slot k) (x) ... (x) b_i1 built from the
/// columns of `B` (duals or any per-mode matrices).
inline Eigen::VectorXd kron_direction(const std::vector<Eigen::MatrixXd>& B, std::size_t i, std::size_t k,
                                      const Eigen::VectorXd& x) {
    std::vector<Eigen::VectorXd> vs;
    for (std::size_t l = 0; l < B.size(); ++l)
        vs.push_back(l == k ? x : Eigen::VectorXd(B[l].col(static_cast<Eigen::Index>(i))));
    return outer_vec(vs);
}

struct SigmaU {
    double value = 0.0;
    bool aligned = false;  // P_perp u nearly zero: the normal limit does not apply
};

/// h' Sigma_e h with h = b_iK (x) ... (x) (I - a a') u (x) ... (x) b_i1.
inline SigmaU sigma_u_sq(const std::vector<Eigen::MatrixXd>& A, const std::vector<Eigen::MatrixXd>& B,
                         const Eigen::MatrixXd& sigma_e, std::size_t i, std::size_t k, const Eigen::VectorXd& u) {
    if (u.norm() == 0.0) throw InputError("inference/zero-direction", "direction u must be nonzero");
    const Eigen::VectorXd a = A[k].col(static_cast<Eigen::Index>(i));
    if (u.size() != a.size()) throw InputError("inference/dimension-mismatch", "u does not match d_k");
    const Eigen::VectorXd pu = u - a * a.dot(u);
    SigmaU out;
    out.aligned = pu.norm() < 1e-6;
    const Eigen::VectorXd h = kron_direction(B, i, k, pu);
    if (h.size() != sigma_e.rows()) throw InputError("inference/dimension-mismatch", "noise covariance is not d x d");
    out.value = h.dot(sigma_e * h);
    return out;
}

inline SigmaU sigma_u_sq(const CpModel& model, const NoiseCov& ncov, std::size_t i, std::size_t k,
                         const Eigen::VectorXd& u) {
    return sigma_u_sq(model.A, model.B, ncov.sigma, i, k, u);
}

/// sqrt(T Theta_ii) / sigma * u'(s a_hat - a), s = sign(a_hat'a), so the
/// value does not depend on the sign of the estimate.
inline double clt_pivot(const Eigen::VectorXd& a_hat, const Eigen::VectorXd& a_true, const Eigen::VectorXd& u,
                        double sigma, double theta_ii, double T) {
    if (!(sigma > 0.0)) throw NumericalError("inference/zero-sigma", "standard deviation is zero");
    const double sgn = a_hat.dot(a_true) < 0.0 ? -1.0 : 1.0;
    return std::sqrt(T * theta_ii) / sigma * u.dot(sgn * a_hat - a_true);
}

/// The standardized loading error with sigma and Theta estimated from the fit.
inline double clt_statistic(const CpModel& model, const NoiseCov& ncov, std::size_t i, std::size_t k,
                            const Eigen::VectorXd& u, const Eigen::VectorXd& a_true) {
    const SigmaU s = sigma_u_sq(model, ncov, i, k, u);
    const double theta = estimate_theta(model)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    return clt_pivot(model.A[k].col(static_cast<Eigen::Index>(i)), a_true, u, std::sqrt(std::max(0.0, s.value)), theta,
                     static_cast<double>(model.F.rows()));
}

enum class CiRegime { normal, slow_rate };

struct CiReport {
    std::size_t i = 0, k = 0, j = 0;
    double level = 0.95;
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    CiRegime regime = CiRegime::normal;
    bool aligned = false;
};

inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Interval for entry j of a_ik: estimate +- q_{1-alpha/2} sigma / sqrt(T Theta_ii).
inline CiReport loading_ci(const CpModel& model, const NoiseCov& ncov, std::size_t i, std::size_t k, std::size_t j,
                           double level = 0.95) {
    if (!(level > 0.0 && level < 1.0)) throw InputError("inference/level", "level must lie in (0,1)");
    if (i >= model.rank() || k >= model.order() || j >= model.shape[k])
        throw InputError("inference/index", "(i,k,j) out of range");
    const auto dk = static_cast<Eigen::Index>(model.shape[k]);
    const Eigen::VectorXd u = Eigen::VectorXd::Unit(dk, static_cast<Eigen::Index>(j));
    const SigmaU s = sigma_u_sq(model, ncov, i, k, u);
    const double theta = model.w(static_cast<Eigen::Index>(i)) * model.w(static_cast<Eigen::Index>(i));
    const double T = static_cast<double>(model.F.rows());
    CiReport rep;
    rep.i = i;
    rep.k = k;
    rep.j = j;
    rep.level = level;
    rep.estimate = model.A[k](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    rep.se = theta > 0.0 ? std::sqrt(std::max(0.0, s.value) / (T * theta)) : 0.0;
    const double q = normal_quantile(0.5 + level / 2.0);
    rep.lower = rep.estimate - q * rep.se;
    rep.upper = rep.estimate + q * rep.se;
    rep.regime = static_cast<double>(dk) * theta <= T ? CiRegime::slow_rate : CiRegime::normal;
    rep.aligned = s.aligned;
    return rep;
}

/// Weights of the chi-square mixture for the squared angle: eigenvalues of
/// S^{1/2} P_perp S^{1/2}, S = d_k^{-1} P' Sigma_e P, P the d x d_k map with
/// columns b_iK (x) ... (x) e_j (x) ... (x) b_i1. Non-increasing.
inline Eigen::VectorXd angle_mixture_weights(const std::vector<Eigen::MatrixXd>& A,
                                             const std::vector<Eigen::MatrixXd>& B, const Eigen::MatrixXd& sigma_e,
                                             std::size_t i, std::size_t k) {
    const auto dk = A[k].rows();
    Eigen::MatrixXd P(sigma_e.rows(), dk);
    for (Eigen::Index j = 0; j < dk; ++j) P.col(j) = kron_direction(B, i, k, Eigen::VectorXd::Unit(dk, j));
    Eigen::MatrixXd S = P.transpose() * (sigma_e * P) / static_cast<double>(dk);
    S = 0.5 * (S + S.transpose()).eval();
    const Eigen::MatrixXd root = sym_sqrt(S);
    const Eigen::VectorXd a = A[k].col(static_cast<Eigen::Index>(i));
    const Eigen::MatrixXd perp = Eigen::MatrixXd::Identity(dk, dk) - a * a.transpose();
    Eigen::MatrixXd M = root * perp * root;
    return eigenvalues_desc(0.5 * (M + M.transpose()));
}

inline Eigen::VectorXd angle_mixture_weights(const CpModel& model, const NoiseCov& ncov, std::size_t i, std::size_t k) {
    return angle_mixture_weights(model.A, model.B, ncov.sigma, i, k);
}

struct Var1Fit {
    Eigen::VectorXd intercept;   // c
    Eigen::MatrixXd phi;         // r x r
    Eigen::MatrixXd forecasts;   // steps x r
};

/// Least-squares VAR(1) with intercept, F_{t+1} = c + Phi F_t + u, and
/// iterated point forecasts. Rank-deficient designs get the minimum-norm
/// solution.
inline Var1Fit var1_forecast(const Eigen::MatrixXd& F, std::size_t steps) {
    const auto T = F.rows(), r = F.cols();
    if (T < r + 2) throw InputError("inference/too-short", "VAR(1) needs T >= r + 2");
    if (!F.allFinite()) throw NumericalError("inference/non-finite", "factor series contains non-finite values");
    Eigen::MatrixXd X(T - 1, r + 1);
    X.col(0).setOnes();
    X.rightCols(r) = F.topRows(T - 1);
    const Eigen::MatrixXd Y = F.bottomRows(T - 1);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    const Eigen::MatrixXd coef = cod.solve(Y);  // (r+1) x r
    Var1Fit fit;
    fit.intercept = coef.row(0).transpose();
    fit.phi = coef.bottomRows(r).transpose();
    fit.forecasts.resize(static_cast<Eigen::Index>(steps), r);
    Eigen::VectorXd f = F.row(T - 1).transpose();
    for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(steps); ++h) {
        f = fit.intercept + fit.phi * f;
        fit.forecasts.row(h) = f.transpose();
    }
    return fit;
}

/// sum_i w_i f_i a_i1 o ... o a_iK for a factor vector f.
inline DenseTensor forecast_y(const CpModel& model, const Eigen::VectorXd& f_next) {
    if (f_next.size() != static_cast<Eigen::Index>(model.rank()))
        throw InputError("inference/dimension-mismatch", "factor vector length differs from the rank");
    if (model.rank() == 0) return DenseTensor(model.shape);
    return DenseTensor(model.shape, khatri_rao(model.A) * (model.w.cwiseProduct(f_next)));
}

/// Mean over periods of ||Y_t - Yhat_t||_F^2.
inline double mean_squared_error(const TensorSeries& actual, const TensorSeries& predicted) {
    if (actual.shape() != predicted.shape() || actual.length() != predicted.length())
        throw InputError("inference/shape-mismatch", "series differ in shape or length");
    return (actual.data() - predicted.data()).colwise().squaredNorm().mean();
}

}  // namespace cpfactor
