#pragma once

// Data-generating processes for the Monte-Carlo configurations.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cpfactor/covariance.hpp"
#include "cpfactor/errors.hpp"
#include "cpfactor/iso.hpp"
#include "cpfactor/linalg.hpp"
#include "cpfactor/rng.hpp"
#include "cpfactor/tensor.hpp"

namespace cpfactor::sim {

enum class WeightRule { strong, weak, equal, custom };
enum class ErrorRule { iid_normal, toeplitz_cs, var1, pareto };

struct DgpSpec {
    Shape dims{40, 40};
    std::size_t T = 100;
    std::size_t r = 3;
    double eta = 0.0;
    double phi = 0.1;

    WeightRule weight_rule = WeightRule::strong;
    double weight_scale = 0.2;      // strong: (r-i+1) sqrt(d) * scale
    double weight_alpha = 4.0;      // weak: (r-i+1) d^{1/alpha}
    double weight_value = 10.0;     // equal
    std::vector<double> custom_weights;

    ErrorRule error_rule = ErrorRule::iid_normal;
    double toeplitz_b = 0.5;
    double rho = 0.0;               // var1
    double pareto_shape = 2.5;

    std::optional<double> misspec_alpha;  // Tucker core with off-diagonal entries
    double zeta = 0.0;                    // factor cross-correlation
    bool orthonormal_factors = false;
    bool noise_free = false;
    std::uint64_t seed = 0;

    double d() const { return static_cast<double>(numel(dims)); }
};

struct GroundTruth {
    std::vector<Eigen::MatrixXd> A;
    Eigen::VectorXd w;
    Eigen::MatrixXd F;                 // T x r
    TensorSeries series;
    std::vector<Eigen::MatrixXd> psi;  // per-mode error covariance factors; empty = identity
    std::vector<Eigen::MatrixXd> duals() const {
        std::vector<Eigen::MatrixXd> B;
        for (const auto& a : A) B.push_back(gram_inverse_dual(a));
        return B;
    }
};

inline Eigen::MatrixXd toeplitz(Eigen::Index n, double b) {
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = std::pow(b, static_cast<double>(std::abs(i - j)));
    return m;
}

/// theta = (eta^{-2/K} - 1)^{1/2}, the mixing weight that makes the
/// Kronecker coherence between factor 1 and any other factor equal eta.
inline double coherence_theta(double eta, std::size_t K) {
    return std::sqrt(std::pow(eta, -2.0 / static_cast<double>(K)) - 1.0);
}

inline std::vector<Eigen::MatrixXd> gen_loadings(const Shape& dims, std::size_t r, double eta, Rng& rng) {
    if (!(eta >= 0.0 && eta < 1.0)) throw InputError("sim-lab/eta", "eta must lie in [0,1)");
    std::vector<Eigen::MatrixXd> A;
    const auto rr = static_cast<Eigen::Index>(r);
    for (auto dk : dims) {
        if (r > dk) throw InputError("sim-lab/rank", "r exceeds a mode dimension");
        const auto n = static_cast<Eigen::Index>(dk);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(normal_matrix(rng, n, rr));
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, rr);
        if (eta > 0.0) {
            const double theta = coherence_theta(eta, dims.size());
            for (Eigen::Index i = 1; i < rr; ++i) {
                Eigen::VectorXd v = q.col(0) + theta * q.col(i);
                q.col(i) = v / v.norm();
            }
        }
        A.push_back(std::move(q));
    }
    return A;
}

inline std::vector<Eigen::MatrixXd> gen_loadings(const Shape& dims, std::size_t r, double eta, std::uint64_t seed) {
    Rng rng(seed);
    return gen_loadings(dims, r, eta, rng);
}

/// Independent stationary AR(1) columns with unit variance; rows are then
/// multiplied by the Toeplitz matrix zeta^{|i-j|} when zeta > 0.
inline Eigen::MatrixXd gen_factors(std::size_t T, std::size_t r, double phi, double zeta, Rng& rng) {
    if (!(std::abs(phi) < 1.0)) throw InputError("sim-lab/phi", "|phi| must be < 1");
    if (!(zeta >= 0.0 && zeta < 1.0)) throw InputError("sim-lab/zeta", "zeta must lie in [0,1)");
    std::normal_distribution<double> n;
    const double sd = std::sqrt(1.0 - phi * phi);
    Eigen::MatrixXd F(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(r));
    for (Eigen::Index i = 0; i < F.cols(); ++i) {
        double f = n(rng);
        for (Eigen::Index t = 0; t < F.rows(); ++t) {
            if (t > 0) f = phi * f + sd * n(rng);
            F(t, i) = f;
        }
    }
    if (zeta > 0.0) F = F * toeplitz(F.cols(), zeta);  // f_t <- Sigma_f f_t, Sigma_f symmetric
    return F;
}

inline Eigen::MatrixXd gen_factors(std::size_t T, std::size_t r, double phi, double zeta, std::uint64_t seed) {
    Rng rng(seed);
    return gen_factors(T, r, phi, zeta, rng);
}

namespace detail {

// Apply a symmetric matrix to every mode of each column of a d x T matrix.
inline void apply_mode_factors(Eigen::MatrixXd& x, const Shape& dims, const std::vector<Eigen::MatrixXd>& roots) {
    if (dims.size() == 2) {
        const auto d1 = static_cast<Eigen::Index>(dims[0]), d2 = static_cast<Eigen::Index>(dims[1]);
        for (Eigen::Index t = 0; t < x.cols(); ++t) {
            Eigen::Map<Eigen::MatrixXd> z(x.col(t).data(), d1, d2);
            z = roots[0] * z * roots[1].transpose();
        }
        return;
    }
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
        DenseTensor e(dims, x.col(t));
        for (std::size_t k = 0; k < dims.size(); ++k) e = mode_product(e, roots[k], k);
        x.col(t) = e.vec();
    }
}

}  // namespace detail

struct ErrorDraw {
    Eigen::MatrixXd data;              // d x T
    std::vector<Eigen::MatrixXd> psi;  // per-mode covariance factors, empty = identity
};

/// Noise series under the given rule. The sandwich rules use the symmetric
/// square roots of Toeplitz(b) matrices on every mode.
inline ErrorDraw gen_errors(const Shape& dims, std::size_t T, const DgpSpec& spec, Rng& rng) {
    const auto d = static_cast<Eigen::Index>(numel(dims));
    const auto TT = static_cast<Eigen::Index>(T);
    ErrorDraw out;
    switch (spec.error_rule) {
    case ErrorRule::iid_normal:
        out.data = normal_matrix(rng, d, TT);
        return out;
    case ErrorRule::pareto: {
        const double a = spec.pareto_shape;
        if (!(a > 2.0)) throw InputError("sim-lab/pareto", "Pareto shape must exceed 2 for finite variance");
        const double mean = a / (a - 1.0);
        const double sd = std::sqrt(a / ((a - 1.0) * (a - 1.0) * (a - 2.0)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        out.data.resize(d, TT);
        for (Eigen::Index t = 0; t < TT; ++t)
            for (Eigen::Index j = 0; j < d; ++j) out.data(j, t) = (std::pow(1.0 - u(rng), -1.0 / a) - mean) / sd;
        return out;
    }
    case ErrorRule::toeplitz_cs:
    case ErrorRule::var1: {
        Eigen::MatrixXd z;
        if (spec.error_rule == ErrorRule::var1) {
            const double rho = spec.rho;
            if (!(std::abs(rho) < 1.0)) throw InputError("sim-lab/rho", "|rho| must be < 1");
            z = normal_matrix(rng, d, TT);
            const double sd = std::sqrt(1.0 - rho * rho);
            for (Eigen::Index t = 1; t < TT; ++t) z.col(t) = rho * z.col(t - 1) + sd * z.col(t);
        } else {
            z = normal_matrix(rng, d, TT);
        }
        std::vector<Eigen::MatrixXd> roots;
        for (auto dk : dims) {
            out.psi.push_back(toeplitz(static_cast<Eigen::Index>(dk), spec.toeplitz_b));
            roots.push_back(sym_sqrt(out.psi.back()));
        }
        detail::apply_mode_factors(z, dims, roots);
        out.data = std::move(z);
        return out;
    }
    }
    return out;
}

inline Eigen::VectorXd dgp_weights(const DgpSpec& spec) {
    const auto r = static_cast<Eigen::Index>(spec.r);
    Eigen::VectorXd w(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        const double m = static_cast<double>(r - i);
        switch (spec.weight_rule) {
        case WeightRule::strong: w(i) = m * std::sqrt(spec.d()) * spec.weight_scale; break;
        case WeightRule::weak: w(i) = m * std::pow(spec.d(), 1.0 / spec.weight_alpha); break;
        case WeightRule::equal: w(i) = spec.weight_value; break;
        case WeightRule::custom:
            if (spec.custom_weights.size() != spec.r)
                throw InputError("sim-lab/weights", "custom weights must have r entries");
            w(i) = spec.custom_weights[static_cast<std::size_t>(i)];
            break;
        }
    }
    return w;
}

inline GroundTruth gen_dataset(const DgpSpec& spec) {
    if (spec.dims.empty() || spec.r < 1 || spec.T < 2) throw InputError("sim-lab/spec", "inconsistent DGP spec");
    if (spec.misspec_alpha && spec.dims.size() != 2)
        throw InputError("sim-lab/spec", "the Tucker mis-specification needs matrix-valued data");
    Rng rng_load = make_rng(spec.seed, {1});
    Rng rng_fac = make_rng(spec.seed, {2});
    Rng rng_err = make_rng(spec.seed, {3});

    GroundTruth g;
    g.A = gen_loadings(spec.dims, spec.r, spec.eta, rng_load);
    g.w = dgp_weights(spec);
    const auto T = static_cast<Eigen::Index>(spec.T);
    const auto d = static_cast<Eigen::Index>(numel(spec.dims));
    Eigen::MatrixXd signal;

    if (spec.misspec_alpha) {
        // Tucker core: diagonal w_i f_iit, off-diagonal (d1 d2)^{1/alpha}/5 f_ijt.
        const auto r = static_cast<Eigen::Index>(spec.r);
        const double off = std::pow(spec.d(), 1.0 / *spec.misspec_alpha) / 5.0;
        Eigen::MatrixXd all = gen_factors(spec.T, spec.r * spec.r, spec.phi, 0.0, rng_fac);
        g.F.resize(T, r);
        signal = Eigen::MatrixXd::Zero(d, T);
        const auto& A1 = g.A[0];
        const auto& A2 = g.A[1];
        for (Eigen::Index t = 0; t < T; ++t) {
            Eigen::MatrixXd core(r, r);
            for (Eigen::Index j = 0; j < r; ++j)
                for (Eigen::Index i = 0; i < r; ++i) {
                    const double f = all(t, i + r * j);
                    core(i, j) = (i == j ? g.w(i) : off) * f;
                    if (i == j) g.F(t, i) = f;
                }
            Eigen::MatrixXd y = A1 * core * A2.transpose();
            signal.col(t) = Eigen::Map<const Eigen::VectorXd>(y.data(), d);
        }
    } else {
        g.F = gen_factors(spec.T, spec.r, spec.phi, spec.zeta, rng_fac);
        if (spec.orthonormal_factors) {
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(g.F);
            Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(T, g.F.cols());
            // keep the AR draw's column signs
            for (Eigen::Index i = 0; i < q.cols(); ++i)
                if (q.col(i).dot(g.F.col(i)) < 0) q.col(i) = -q.col(i);
            g.F = q * std::sqrt(static_cast<double>(T));
        }
        signal = khatri_rao(g.A) * g.w.asDiagonal() * g.F.transpose();
    }

    if (spec.noise_free) {
        g.series = TensorSeries(spec.dims, std::move(signal));
        return g;
    }
    ErrorDraw e = gen_errors(spec.dims, spec.T, spec, rng_err);
    g.psi = std::move(e.psi);
    g.series = TensorSeries(spec.dims, signal + e.data);
    return g;
}

/// Noise covariance Psi_K (x) ... (x) Psi_1 as a dense d x d matrix.
inline Eigen::MatrixXd noise_covariance(const GroundTruth& g) {
    const Shape& dims = g.series.shape();
    const auto d = static_cast<Eigen::Index>(numel(dims));
    if (g.psi.empty()) return Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd acc = g.psi[0];
    for (std::size_t k = 1; k < g.psi.size(); ++k) {
        const Eigen::MatrixXd& p = g.psi[k];
        Eigen::MatrixXd next(acc.rows() * p.rows(), acc.cols() * p.cols());
        for (Eigen::Index i = 0; i < p.rows(); ++i)
            for (Eigen::Index j = 0; j < p.cols(); ++j)
                next.block(i * acc.rows(), j * acc.cols(), acc.rows(), acc.cols()) = p(i, j) * acc;
        acc = std::move(next);
    }
    return acc;
}

/// h' Sigma_e h for h = v_K (x) ... (x) v_1 under the Kronecker noise
/// covariance, evaluated mode by mode.
inline double kron_quadratic_form(const GroundTruth& g, const std::vector<Eigen::VectorXd>& vs) {
    double q = 1.0;
    for (std::size_t k = 0; k < vs.size(); ++k)
        q *= g.psi.empty() ? vs[k].squaredNorm() : vs[k].dot(g.psi[k] * vs[k]);
    return q;
}

// ---- configuration presets -------------------------------------------------

inline DgpSpec config_I(Shape dims, std::size_t T) {
    DgpSpec s;
    s.dims = std::move(dims);
    s.T = T;
    return s;
}

inline DgpSpec config_II(Shape dims, std::size_t T, double eta) {
    DgpSpec s = config_I(std::move(dims), T);
    s.eta = eta;
    return s;
}

inline DgpSpec config_III(Shape dims, std::size_t T, double rho) {
    DgpSpec s = config_II(std::move(dims), T, 0.1);
    s.error_rule = ErrorRule::var1;
    s.rho = rho;
    return s;
}

inline DgpSpec config_IV(Shape dims, std::size_t T, double alpha) {
    DgpSpec s = config_II(std::move(dims), T, 0.1);
    s.error_rule = ErrorRule::toeplitz_cs;
    s.weight_rule = WeightRule::weak;
    s.weight_alpha = alpha;
    return s;
}

inline DgpSpec config_V(std::size_t dbar, std::size_t T) {
    DgpSpec s = config_I({dbar, dbar}, T);
    s.r = 5;
    s.weight_rule = WeightRule::equal;
    s.weight_value = 10.0;
    s.orthonormal_factors = true;
    return s;
}

inline DgpSpec config_VI(Shape dims, std::size_t T, double alpha) {
    DgpSpec s = config_II(std::move(dims), T, 0.1);
    s.error_rule = ErrorRule::toeplitz_cs;
    s.weight_scale = 0.2;
    s.misspec_alpha = alpha;
    return s;
}

inline DgpSpec config_VII(std::size_t dbar, std::size_t T = 200) {
    DgpSpec s = config_II({dbar, dbar}, T, 0.1);
    s.error_rule = ErrorRule::toeplitz_cs;
    s.weight_scale = 1.0;
    return s;
}

inline DgpSpec config_VIII(std::size_t dbar, std::size_t T, double phi) {
    DgpSpec s = config_VII(dbar, T);
    s.phi = phi;
    return s;
}

inline DgpSpec config_IX(Shape dims, std::size_t T) {
    DgpSpec s = config_II(std::move(dims), T, 0.1);
    s.error_rule = ErrorRule::toeplitz_cs;
    return s;
}

inline DgpSpec config_pareto(std::size_t dbar, std::size_t T) {
    DgpSpec s = config_I({dbar, dbar}, T);
    s.weight_scale = 1.0;
    s.error_rule = ErrorRule::pareto;
    return s;
}

inline DgpSpec config_corr_factors(Shape dims, std::size_t T, double zeta) {
    DgpSpec s = config_II(std::move(dims), T, 0.1);
    s.zeta = zeta;
    return s;
}

inline DgpSpec config_unbalanced(std::size_t d1, std::size_t T, std::size_t d2 = 40) {
    return config_II({d1, d2}, T, 0.1);
}

}  // namespace cpfactor::sim
