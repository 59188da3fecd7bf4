#pragma once

// Small dense linear-algebra kernel: extreme eigenpairs of symmetric
// matrices (dense and matrix-free), leading singular vectors, dual bases.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "cpfactor/errors.hpp"

namespace cpfactor {

/// Leading eigenpairs, values non-increasing, vectors as orthonormal columns.
struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

struct SingularPair {
    double value = 0.0;
    Eigen::VectorXd vector;
};

/// Flip v so its largest-magnitude entry is positive (lowest index wins ties).
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    if (v.size() == 0) return;
    Eigen::Index best = 0;
    double mag = std::abs(v(0));
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (std::abs(v(i)) > mag) {
            mag = std::abs(v(i));
            best = i;
        }
    }
    if (v(best) < 0) v = -v;
}

/// Sin of the angle between two unit vectors: sqrt(1 - (a'b)^2), which equals
/// the spectral norm of a a' - b b'.
inline double sin_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    // residual of a after projection on b; 1 - cos^2 loses everything below 1e-8
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 1.0;
    const Eigen::VectorXd ua = a / na, ub = b / nb;
    return std::min(1.0, (ua - ua.dot(ub) * ub).norm());
}

inline double max_asymmetry(const Eigen::MatrixXd& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// The k algebraically largest eigenpairs of a symmetric matrix.
inline EigenPairs top_eigs(const Eigen::MatrixXd& m, Eigen::Index k) {
    if (m.rows() != m.cols())
        throw InputError("tensor-core/not-square", "top_eigs: matrix is not square");
    if (k < 1 || k > m.rows())
        throw InputError("tensor-core/eig-count",
                         "top_eigs: requested " + std::to_string(k) + " of " + std::to_string(m.rows()));
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (max_asymmetry(m) > 1e-8 * scale)
        throw InputError("tensor-core/asymmetric", "top_eigs: matrix is not symmetric within 1e-8");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericalError("tensor-core/eig-failed", "symmetric eigensolver did not converge");
    const Eigen::Index n = m.rows();
    EigenPairs out;
    out.values.resize(k);
    out.vectors.resize(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        out.values(j) = es.eigenvalues()(n - 1 - j);
        out.vectors.col(j) = es.eigenvectors().col(n - 1 - j);
        fix_sign(out.vectors.col(j));
    }
    return out;
}

/// All eigenvalues of a symmetric matrix, non-increasing.
inline Eigen::VectorXd eigenvalues_desc(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("tensor-core/eig-failed", "symmetric eigensolver did not converge");
    return es.eigenvalues().reverse();
}

struct KrylovOptions {
    double tol = 1e-10;          // residual bound relative to max |Ritz value|
    Eigen::Index block = 0;      // 0: k + 4
    Eigen::Index max_basis = 0;  // 0: chosen from n and k
    int max_restarts = 30;
    std::uint64_t seed = 0x5eedULL;
};

/// Matrix-free top-k eigenpairs of a symmetric operator via restarted block
/// Krylov iteration with full reorthogonalization and Rayleigh-Ritz.
/// `apply(X)` must return A*X for an n x p block X.
template <class Apply>
EigenPairs top_eigs_krylov(Apply&& apply, Eigen::Index n, Eigen::Index k, KrylovOptions opt = {}) {
    if (k < 1 || k > n)
        throw InputError("tensor-core/eig-count",
                         "top_eigs: requested " + std::to_string(k) + " of " + std::to_string(n));
    const Eigen::Index p = std::min<Eigen::Index>(n, opt.block > 0 ? opt.block : k + 4);
    const Eigen::Index max_basis =
        std::min<Eigen::Index>(n, opt.max_basis > 0 ? opt.max_basis : std::max<Eigen::Index>(6 * p, 120));

    auto dense_fallback = [&]() {
        Eigen::MatrixXd full(n, n);
        const Eigen::Index chunk = 256;
        for (Eigen::Index c = 0; c < n; c += chunk) {
            const Eigen::Index w = std::min(chunk, n - c);
            full.middleCols(c, w) = apply(Eigen::MatrixXd::Identity(n, n).middleCols(c, w));
        }
        Eigen::MatrixXd sym = 0.5 * (full + full.transpose());
        return top_eigs(sym, k);
    };
    if (max_basis >= n || n <= 2 * p) return dense_fallback();

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal;
    auto random_block = [&](Eigen::Index cols) {
        Eigen::MatrixXd r(n, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < n; ++i) r(i, j) = normal(rng);
        return r;
    };

    Eigen::MatrixXd Q(n, max_basis), AQ(n, max_basis);
    Eigen::Index m = 0;

    // Orthonormalize `cand` against Q[:, :m] and append; rejected columns are
    // replaced by fresh random directions so the basis keeps growing.
    auto append = [&](Eigen::MatrixXd cand) {
        Eigen::Index added = 0;
        for (Eigen::Index j = 0; j < cand.cols() && m < max_basis; ++j) {
            Eigen::VectorXd v = cand.col(j);
            for (int attempt = 0; attempt < 4; ++attempt) {
                const double before = v.norm();
                for (int pass = 0; pass < 2; ++pass) {
                    if (m > 0) v -= Q.leftCols(m) * (Q.leftCols(m).transpose() * v);
                }
                const double after = v.norm();
                if (after > 1e-10 * std::max(before, 1e-300) && after > 1e-300) {
                    Q.col(m) = v / after;
                    ++m;
                    ++added;
                    break;
                }
                v = random_block(1).col(0);
            }
        }
        return added;
    };

    append(random_block(p));
    Eigen::Index done = 0;  // columns of Q whose images are in AQ
    EigenPairs best;
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        while (true) {
            if (done < m) {
                AQ.middleCols(done, m - done) = apply(Q.middleCols(done, m - done));
            }
            const Eigen::Index block_start = done;
            done = m;

            Eigen::MatrixXd H = Q.leftCols(m).transpose() * AQ.leftCols(m);
            H = 0.5 * (H + H.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
            const Eigen::Index kk = std::min(k, m);
            Eigen::MatrixXd S(m, kk);
            Eigen::VectorXd theta(kk);
            for (Eigen::Index j = 0; j < kk; ++j) {
                theta(j) = es.eigenvalues()(m - 1 - j);
                S.col(j) = es.eigenvectors().col(m - 1 - j);
            }
            const double scale = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
            Eigen::MatrixXd R = AQ.leftCols(m) * S - Q.leftCols(m) * S * theta.asDiagonal();
            bool converged = kk == k;
            for (Eigen::Index j = 0; j < kk && converged; ++j)
                if (R.col(j).norm() > opt.tol * scale) converged = false;
            if (converged) {
                best.values = theta;
                best.vectors = Q.leftCols(m) * S;
                for (Eigen::Index j = 0; j < k; ++j) fix_sign(best.vectors.col(j));
                return best;
            }
            if (m + p > max_basis) {
                // Thick restart: keep the leading Ritz vectors.
                const Eigen::Index keep = std::min<Eigen::Index>(m, std::max<Eigen::Index>(k + p, max_basis / 3));
                Eigen::MatrixXd Sk(m, keep);
                for (Eigen::Index j = 0; j < keep; ++j) Sk.col(j) = es.eigenvectors().col(m - 1 - j);
                Eigen::MatrixXd newQ = Q.leftCols(m) * Sk;
                Eigen::MatrixXd newAQ = AQ.leftCols(m) * Sk;
                Eigen::MatrixXd next = AQ.middleCols(block_start, m - block_start);
                Q.leftCols(keep) = newQ;
                AQ.leftCols(keep) = newAQ;
                m = keep;
                done = keep;
                // continue the Krylov sequence from the residual directions
                append(R.leftCols(std::min<Eigen::Index>(p, R.cols())));
                (void)next;
                break;
            }
            Eigen::MatrixXd next = AQ.middleCols(block_start, m - block_start);
            if (append(next) == 0) append(random_block(p));
        }
    }
    if (n <= 4000) return dense_fallback();
    throw NumericalError("tensor-core/eig-not-converged",
                         "block Krylov eigensolver did not reach the residual tolerance");
}

/// Leading singular value and left singular vector, sign-fixed.
inline SingularPair top_left_singular(const Eigen::MatrixXd& m) {
    if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0)
        throw InputError("tensor-core/zero-matrix", "top_left_singular of a zero matrix");
    SingularPair out;
    if (m.cols() == 1) {
        out.value = m.col(0).norm();
        out.vector = m.col(0) / out.value;
    } else {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
        out.value = svd.singularValues()(0);
        out.vector = svd.matrixU().col(0);
    }
    fix_sign(out.vector);
    return out;
}

/// B = A (A'A)^{-1}, so that B'A = I. Throws RankDeficient when the smallest
/// singular value of A is at or below 1e-10.
inline Eigen::MatrixXd gram_inverse_dual(const Eigen::MatrixXd& a, const std::string& context = "gram_inverse_dual") {
    if (a.cols() == 0) return Eigen::MatrixXd(a.rows(), 0);
    if (a.cols() > a.rows())
        throw RankDeficient("tensor-core/rank-deficient", 0.0, context + ": more columns than rows");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (!(smin > 1e-10)) throw RankDeficient("tensor-core/rank-deficient", smin, context);
    Eigen::MatrixXd b = svd.matrixU() * sv.cwiseInverse().asDiagonal() * svd.matrixV().transpose();
    // one step of refinement: B <- B (2I - (B'A)')  drives B'A - I to second order
    const Eigen::Index r = a.cols();
    Eigen::MatrixXd e = b.transpose() * a - Eigen::MatrixXd::Identity(r, r);
    b -= b * e.transpose();
    return b;
}

/// Symmetric square root of a PSD matrix; eigenvalues in [-neg_tol*scale, 0)
/// are clipped to zero, anything more negative is an error.
inline Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m, double neg_tol = 1e-8) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -neg_tol * scale)
            throw NumericalError("tensor-core/not-psd",
                                 "sym_sqrt: eigenvalue " + std::to_string(ev(i)) + " below tolerance");
        ev(i) = std::sqrt(std::max(0.0, ev(i)));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace cpfactor
