// Acceptance runs. Each criterion prints one PASS/FAIL line; the process exit
// status is nonzero if any selected criterion fails.
//
//   cpfactor_acceptance [--criterion N] [--check table1|ci-coverage] [--reps-scale S]

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "cpfactor/io/cli.hpp"
#include "cpfactor/sim/oracle.hpp"
#include "cpfactor/sim/runner.hpp"
#include "oracles.hpp"

using namespace cpfactor;
using namespace cpfactor::sim;

namespace {

double reps_scale = 1.0;

std::size_t reps(std::size_t n) { return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * reps_scale))); }

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(double v, int p = 4) {
    std::ostringstream os;
    os << std::setprecision(p) << v;
    return os.str();
}

double frac(const McSummary* s) {
    if (!s || s->count == 0) return 0.0;
    double hits = 0;
    for (double v : s->values) hits += v;
    return hits / static_cast<double>(s->count);
}

double med(const RunResult& r, const Cell& c, const char* est, const char* metric) {
    const McSummary* s = find_summary(r, c.label, est, metric);
    return s ? s->median : std::numeric_limits<double>::quiet_NaN();
}

std::size_t failures_of(const RunResult& r, const char* est) {
    std::size_t n = 0;
    const std::string tag = std::string(" ") + est + ": ";
    for (const auto& f : r.failures)
        if (f.find(tag) != std::string::npos) ++n;
    return n;
}

void report_failures(const RunResult& r) {
    const std::size_t show = std::min<std::size_t>(r.failures.size(), 5);
    for (std::size_t j = 0; j < show; ++j) std::cout << "    failure: " << r.failures[j] << '\n';
    if (r.failures.size() > show) std::cout << "    (" << r.failures.size() - show << " more failures)\n";
}

// Rank frequencies on the small Config VIII grid.
Outcome criterion1() {
    std::vector<Cell> cells;
    for (std::size_t db : {20u, 40u})
        for (std::size_t T : {100u, 300u})
            for (double phi : {0.1, 0.5}) cells.push_back(make_cell(config_VIII(db, T, phi), "phi=" + fmt_num(phi)));
    RunOptions opt;
    opt.estimators = {Estimator::uer, Estimator::ip};
    opt.n_rep = reps(500);
    opt.seed = 101;
    const RunResult res = run_config("VIII", cells, opt);
    report_failures(res);
    bool ok = res.failures.empty();
    for (const auto& c : cells) {
        const double u = frac(find_summary(res, c.label, "uer", "correct"));
        const double ip = frac(find_summary(res, c.label, "ip", "correct"));
        const bool small = c.spec.dims[0] == 20 && c.spec.T == 100;
        ok = ok && u >= 0.98 && ip >= (small ? 0.96 : 0.98);
        std::cout << "    " << std::left << std::setw(34) << c.label << " uer " << fmt(u, 3) << "  ip " << fmt(ip, 3) << '\n';
    }
    return {ok, "uer >= 0.98 everywhere, ip >= 0.96 at (20,20,T=100) and >= 0.98 elsewhere"};
}

// CC-ISO over AC-ISO error ratio under coherence 0.15.
Outcome criterion2() {
    const Cell cell = make_cell(config_II({40, 40}, 300, 0.15), "eta=0.15");
    RunOptions opt;
    opt.estimators = {Estimator::cc_iso, Estimator::ac_iso};
    opt.n_rep = reps(200);
    opt.seed = 202;
    const RunResult res = run_config("II", {cell}, opt);
    report_failures(res);
    const double cc = med(res, cell, "cc_iso", "sin_error"), ac = med(res, cell, "ac_iso", "sin_error");
    const double ratio = cc / ac;
    // AC-ISO may stop on a singular Gram matrix; its median is over the
    // replications that finished and the count is reported
    return {failures_of(res, "cc_iso") == 0 && ratio >= 0.05 && ratio <= 0.40,
            "median CC-ISO " + fmt(cc) + ", median AC-ISO " + fmt(ac) + ", ratio " + fmt(ratio) +
                " in [0.05, 0.40]; AC-ISO failures " + std::to_string(failures_of(res, "ac_iso"))};
}

// CC-ISO dominance and monotonicity in T.
Outcome criterion3() {
    std::vector<Cell> cells;
    for (std::size_t T : {100u, 300u, 500u}) cells.push_back(make_cell(config_I({40, 40}, T)));
    RunOptions opt;
    opt.estimators = {Estimator::rcpca, Estimator::cc_iso, Estimator::ac_iso};
    opt.n_rep = reps(200);
    opt.seed = 303;
    const RunResult res = run_config("I", cells, opt);
    report_failures(res);
    bool ok = failures_of(res, "cc_iso") == 0 && failures_of(res, "rcpca") == 0;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& c : cells) {
        const double cc = med(res, c, "cc_iso", "sin_error"), init = med(res, c, "rcpca", "sin_error"),
                     ac = med(res, c, "ac_iso", "sin_error");
        std::cout << "    T=" << std::left << std::setw(4) << c.spec.T << " rcpca " << fmt(init) << "  cc_iso " << fmt(cc)
                  << "  ac_iso " << fmt(ac) << '\n';
        ok = ok && cc < prev && cc < init && cc < ac;
        prev = cc;
    }
    return {ok, "CC-ISO median strictly decreasing in T and below RC-PCA and AC-ISO at every T; AC-ISO failures " +
                    std::to_string(failures_of(res, "ac_iso"))};
}

// Randomized projection against forced composite PCA under equal weights.
Outcome criterion4() {
    const Cell cell = make_cell(config_V(20, 500));
    RunOptions opt;
    opt.estimators = {Estimator::rcpca, Estimator::cpca};
    opt.n_rep = reps(200);
    opt.seed = 404;
    const RunResult res = run_config("V", {cell}, opt);
    report_failures(res);
    const double rc = med(res, cell, "rcpca", "sin_error"), cp = med(res, cell, "cpca", "sin_error");
    const McSummary* proj = find_summary(res, cell.label, "rcpca", "projected");
    return {res.failures.empty() && rc < cp,
            "median RC-PCA " + fmt(rc) + " < composite PCA " + fmt(cp) + " (mean projected factors " +
                fmt(proj ? proj->mean : 0.0, 3) + " of 5)"};
}

bool clt_bands(const RunResult& res, const Cell& cell, const char* est, std::string& detail) {
    const McSummary* s = find_summary(res, cell.label, est, "z");
    if (!s) {
        detail += std::string(est) + ": no statistics; ";
        return false;
    }
    const double ks = ks_distance_normal(s->values), var = sample_variance(s->values);
    detail += std::string(est) + " n=" + std::to_string(s->values.size()) + " KS " + fmt(ks, 3) + " var " + fmt(var, 3) + "; ";
    return res.failures.empty() && ks <= 0.08 && var >= 0.8 && var <= 1.25;
}

// Asymptotic normality of the loading statistic, known and estimated sigma.
Outcome criterion5() {
    RunOptions opt;
    opt.n_rep = reps(500);
    opt.seed = 505;
    opt.estimators = {Estimator::clt_known};
    const Cell known = make_cell(config_VII(60, 200));
    const RunResult r1 = run_config("VII", {known}, opt);
    report_failures(r1);
    std::string detail;
    const bool ok1 = clt_bands(r1, known, "clt_known", detail);

    const double d = 3600.0;
    const Cell est = make_cell(config_VII(60, static_cast<std::size_t>(std::ceil(800.0 + std::pow(d, 0.75)))));
    opt.estimators = {Estimator::clt_est};
    opt.seed = 506;
    const RunResult r2 = run_config("VII-est", {est}, opt);
    report_failures(r2);
    const bool ok2 = clt_bands(r2, est, "clt_est", detail);
    const McSummary* cover = find_summary(r2, est.label, "clt_est", "ci_cover");
    detail += "95% CI coverage " + fmt(frac(cover), 3) + "; bands KS <= 0.08, var in [0.8, 1.25]";
    return {ok1 && ok2, detail};
}

// Noiseless series against the brute-force CP oracle.
Outcome criterion6() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> dim(2, 4);
    double worst = 0.0, worst_truth = 0.0;
    int passed = 0;
    const int n = 20;
    for (int rep = 0; rep < n; ++rep) {
        const std::size_t r = 1 + static_cast<std::size_t>(rep % 2);
        Shape dims{static_cast<std::size_t>(dim(rng)), static_cast<std::size_t>(dim(rng)), static_cast<std::size_t>(dim(rng))};
        std::vector<Eigen::MatrixXd> A;
        for (auto dk : dims) {
            Eigen::MatrixXd a = oracle::random_matrix(rng, static_cast<int>(dk), static_cast<int>(r));
            a.colwise().normalize();
            A.push_back(a);
        }
        Eigen::VectorXd w(static_cast<Eigen::Index>(r));
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = 6.0 / static_cast<double>(i + 1);
        const Eigen::MatrixXd F = oracle::random_matrix(rng, 50, static_cast<int>(r));
        const TensorSeries s(dims, khatri_rao(A) * w.asDiagonal() * F.transpose());

        InitConfig ic;
        ic.r = r;
        ic.seed = static_cast<std::uint64_t>(rep);
        IsoConfig iso;
        iso.epsilon = 1e-12;
        iso.max_iter = 1000;
        const CpModel m = iso_fit(s, rc_pca(s, ic), iso);
        const CpFit bf = brute_force_cp(DenseTensor(dims, s.data().col(0)), r);

        const auto match = match_factors(m.A, bf.A);
        const auto match_truth = match_factors(m.A, A);
        double e = 0.0, et = 0.0;
        for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t i = 0; i < r; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                e = std::max(e, sin_angle(m.A[k].col(static_cast<Eigen::Index>(match[i])), bf.A[k].col(ii)));
                et = std::max(et, sin_angle(m.A[k].col(static_cast<Eigen::Index>(match_truth[i])), A[k].col(ii)));
            }
        worst = std::max(worst, e);
        worst_truth = std::max(worst_truth, et);
        if (e <= 1e-6) ++passed;
    }
    return {passed == n, std::to_string(passed) + "/" + std::to_string(n) + " tensors, worst sin-angle to oracle " +
                             fmt(worst, 3) + " (to planted components " + fmt(worst_truth, 3) + "), tolerance 1e-6"};
}

// Structural invariants on random inputs.
Outcome criterion7() {
    std::mt19937_64 rng(707);
    int checks = 0, failed = 0;
    auto check = [&](bool ok, const std::string& what) {
        ++checks;
        if (!ok) {
            ++failed;
            std::cout << "    violated: " << what << '\n';
        }
    };

    for (int rep = 0; rep < 10; ++rep) {
        DgpSpec spec = config_II({10 + static_cast<std::size_t>(rep), 8}, 80, 0.2);
        spec.seed = 7000 + static_cast<std::uint64_t>(rep);
        const GroundTruth g = gen_dataset(spec);
        InitConfig ic;
        ic.r = 3;
        for (CovKind kind : {CovKind::contemporary, CovKind::lag}) {
            IsoConfig iso;
            iso.cov_kind = kind;
            const CpModel m = iso_fit(g.series, rc_pca(g.series, ic, kind), iso);
            for (std::size_t k = 0; k < m.order(); ++k) {
                const double dev = (m.B[k].transpose() * m.A[k] - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff();
                check(dev <= 1e-8, "B'A = I, deviation " + fmt(dev, 3));
            }
            for (Eigen::Index i = 0; i < 3; ++i) {
                if (m.degenerate[static_cast<std::size_t>(i)]) continue;
                const double ms = m.F.col(i).squaredNorm() / static_cast<double>(m.F.rows());
                check(std::abs(ms - 1.0) <= 1e-8, "factor second moment " + fmt(ms, 12));
            }
        }
    }

    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t K = 1 + static_cast<std::size_t>(rep % 4);
        Shape shape;
        for (std::size_t k = 0; k < K; ++k) shape.push_back(1 + rng() % 4);
        DenseTensor t(shape, oracle::random_matrix(rng, static_cast<int>(numel(shape)), 1).col(0));
        for (std::size_t k = 0; k < K; ++k) {
            const Eigen::MatrixXd m = matricize(t, k);
            check(dematricize(m, shape, k).vec() == t.vec(), "matricize round trip");
            // entry-level check of the layout against the definition
            std::vector<std::size_t> idx(K, 0);
            bool ok = true;
            for (std::size_t lin = 0; lin < numel(shape); ++lin) {
                std::size_t off = lin, col = 0, stride = 1;
                for (std::size_t l = 0; l < K; ++l) {
                    idx[l] = off % shape[l];
                    off /= shape[l];
                }
                for (std::size_t l = 0; l < K; ++l) {
                    if (l == k) continue;
                    col += idx[l] * stride;
                    stride *= shape[l];
                }
                ok = ok && m(static_cast<Eigen::Index>(idx[k]), static_cast<Eigen::Index>(col)) == t.vec()(static_cast<Eigen::Index>(lin));
            }
            check(ok, "matricization layout");
        }
    }

    for (int rep = 0; rep < 50; ++rep) {
        const int n = 2 + rep % 9;
        const Eigen::VectorXd a = oracle::random_unit(rng, n);
        Eigen::VectorXd b = a + std::pow(10.0, -(rep % 8)) * oracle::random_matrix(rng, n, 1).col(0);
        b.normalize();
        const Eigen::MatrixXd diff = b * b.transpose() - a * a.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
        const double spectral = es.eigenvalues().cwiseAbs().maxCoeff();
        check(std::abs(sin_angle(b, a) - spectral) <= 1e-10,
              "sin-angle identity " + fmt(sin_angle(b, a), 17) + " vs " + fmt(spectral, 17));
    }

    for (int rep = 0; rep < 10; ++rep) {
        DgpSpec spec = config_VIII(8, 60, 0.1);
        spec.seed = 7100 + static_cast<std::uint64_t>(rep);
        const TensorSeries s = gen_dataset(spec).series;
        const auto u = rank_uer(s, 4).r_hat, ip = rank_ip(s, 4).r_hat;
        for (double c : {1e-6, 0.37, 1e5}) {
            const TensorSeries sc(s.shape(), c * s.data());
            check(rank_uer(sc, 4).r_hat == u && rank_ip(sc, 4).r_hat == ip, "rank scale invariance at c = " + fmt(c));
        }
    }

    for (int rep = 0; rep < 10; ++rep) {
        std::vector<Eigen::MatrixXd> truth{oracle::random_orthonormal(rng, 7, 3), oracle::random_orthonormal(rng, 6, 3)};
        std::vector<Eigen::MatrixXd> est = truth;
        for (auto& a : est) {
            a += 0.2 * oracle::random_matrix(rng, static_cast<int>(a.rows()), 3);
            a.colwise().normalize();
        }
        const double base = sin_angle_error(est, truth);
        for (const auto& p : oracle::permutations(3)) {
            std::vector<Eigen::MatrixXd> q = est;
            for (auto& a : q) {
                const Eigen::MatrixXd orig = a;
                for (int i = 0; i < 3; ++i) a.col(i) = ((rng() & 1) ? -1.0 : 1.0) * orig.col(static_cast<Eigen::Index>(p[static_cast<std::size_t>(i)]));
            }
            check(std::abs(sin_angle_error(q, truth) - base) <= 1e-14, "sin_angle_error permutation/sign invariance");
        }
    }
    return {failed == 0, std::to_string(checks - failed) + "/" + std::to_string(checks) + " invariant checks hold"};
}

// The empirical study is not reproduced; the CLI path runs end to end on
// synthetic data and the holdout error is recomputed independently.
Outcome criterion8() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("cpfactor_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    auto file = [&](const char* n) { return (dir / n).string(); };

    DgpSpec spec = config_I({10, 6}, 150);
    spec.phi = 0.6;
    spec.weight_scale = 1.0;
    spec.seed = 808;
    const GroundTruth g = gen_dataset(spec);
    io::write_series(file("y.csv"), g.series);

    auto run = [&](std::vector<std::string> args, std::string& out, std::string& err) {
        args.insert(args.begin(), "cpfactor");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream o, e;
        const int code = io::run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
        out = o.str();
        err = e.str();
        return code;
    };
    std::string out, err;
    std::ostringstream detail;
    bool ok = true;

    ok = ok && run({"rank", "--input", file("y.csv"), "--shape", "10,6", "--r-max", "4"}, out, err) == 0;
    const bool rank_ok = out.find("r_hat_uer = 3") != std::string::npos && out.find("r_hat_ip = 3") != std::string::npos;
    detail << "rank " << (rank_ok ? "3/3" : "wrong") << "; ";

    ok = ok && run({"fit", "--rank", "auto", "--r-max", "4", "--input", file("y.csv"), "--shape", "10,6", "--out",
                    file("m.json"), "--fitted", file("fit.csv")},
                   out, err) == 0;
    const CpModel m = io::load_model(file("m.json"));
    const double r2 = r_squared(g.series, reconstruct(m));
    detail << "fit r=" << m.rank() << " converged=" << m.converged << " R^2 " << fmt(r2, 4) << "; ";

    ok = ok && run({"infer", "--model", file("m.json"), "--input", file("y.csv"), "--out", file("ci.csv")}, out, err) == 0;
    std::size_t ci_rows = 0;
    {
        std::ifstream f(file("ci.csv"));
        for (std::string line; std::getline(f, line);) ++ci_rows;
    }
    detail << "CI rows " << (ci_rows - 1) << "; ";

    const std::size_t H = 12;
    ok = ok && run({"forecast", "--rank", "3", "--input", file("y.csv"), "--shape", "10,6", "--horizon", "1", "--holdout",
                    std::to_string(H), "--out", file("pred.csv")},
                   out, err) == 0;
    double cli_mse = std::numeric_limits<double>::quiet_NaN();
    if (const auto pos = err.find("holdout_mse = "); pos != std::string::npos) cli_mse = std::stod(err.substr(pos + 14));

    // independent recomputation: refit on the expanding window, OLS VAR(1)
    // through the normal equations, loadings times predicted factors
    double acc = 0.0;
    const auto T = g.series.length();
    for (std::size_t s = 0; s < H; ++s) {
        const auto n = T - static_cast<Eigen::Index>(H) + static_cast<Eigen::Index>(s);
        const TensorSeries train(g.series.shape(), g.series.data().leftCols(n));
        InitConfig ic;
        ic.r = 3;
        const CpModel fm = iso_fit(train, rc_pca(train, ic));
        Eigen::MatrixXd X(n - 1, 4);
        X.col(0).setOnes();
        X.rightCols(3) = fm.F.topRows(n - 1);
        const Eigen::MatrixXd coef = (X.transpose() * X).ldlt().solve(X.transpose() * fm.F.bottomRows(n - 1));
        Eigen::VectorXd x(4);
        x << 1.0, fm.F.row(n - 1).transpose();
        const Eigen::VectorXd f = coef.transpose() * x;
        Eigen::VectorXd yhat = Eigen::VectorXd::Zero(g.series.dim());
        for (Eigen::Index i = 0; i < 3; ++i)
            for (Eigen::Index a = 0; a < 10; ++a)
                for (Eigen::Index b = 0; b < 6; ++b) yhat(a + 10 * b) += fm.w(i) * f(i) * fm.A[0](a, i) * fm.A[1](b, i);
        acc += (g.series.data().col(n) - yhat).squaredNorm();
    }
    const double ref_mse = acc / static_cast<double>(H);
    const double rel = std::abs(cli_mse - ref_mse) / ref_mse;
    detail << "holdout MSE " << fmt(cli_mse, 6) << " vs recomputed " << fmt(ref_mse, 6) << " (rel diff " << fmt(rel, 2)
           << "); empirical portfolio tables not reproduced (proprietary data, external baselines)";
    fs::remove_all(dir);
    ok = ok && rank_ok && m.rank() == 3 && m.converged && ci_rows == 1 + 3 * 16 && rel <= 1e-8;
    return {ok, detail.str()};
}

// Full rank-selection grid against the published frequencies, +-0.02.
Outcome check_table1() {
    struct Row {
        std::size_t db, T;
        double uer01, ip01, uer05, ip05;
    };
    const std::vector<Row> table{{20, 100, 1, 0.98, 1, 0.95}, {20, 300, 1, 1, 1, 1}, {20, 500, 1, 1, 1, 1},
                                 {40, 100, 1, 1, 1, 1},       {40, 300, 1, 1, 1, 1}, {40, 500, 1, 1, 1, 1},
                                 {60, 100, 1, 1, 1, 1},       {60, 300, 1, 1, 1, 1}, {60, 500, 1, 1, 1, 1},
                                 {80, 100, 1, 1, 1, 1},       {80, 300, 1, 1, 1, 1}, {80, 500, 1, 1, 1, 1}};
    std::vector<Cell> cells;
    for (const auto& row : table)
        for (double phi : {0.1, 0.5}) cells.push_back(make_cell(config_VIII(row.db, row.T, phi), "phi=" + fmt_num(phi)));
    RunOptions opt;
    opt.estimators = {Estimator::uer, Estimator::ip};
    opt.n_rep = reps(500);
    opt.seed = 901;
    const RunResult res = run_config("VIII", cells, opt);
    report_failures(res);
    bool ok = res.failures.empty();
    double worst = 0.0;
    std::size_t c = 0;
    std::cout << "    cell            uer(0.1)     ip(0.1)      uer(0.5)     ip(0.5)   (published in brackets)\n";
    for (const auto& row : table) {
        const double pub[4] = {row.uer01, row.ip01, row.uer05, row.ip05};
        double got[4];
        for (int p = 0; p < 2; ++p, ++c) {
            got[2 * p] = frac(find_summary(res, cells[c].label, "uer", "correct"));
            got[2 * p + 1] = frac(find_summary(res, cells[c].label, "ip", "correct"));
        }
        std::cout << "    (" << row.db << "," << row.db << ") T=" << std::left << std::setw(4) << row.T;
        for (int q = 0; q < 4; ++q) {
            std::cout << "  " << std::setw(5) << fmt(got[q], 3) << " [" << std::setw(4) << fmt(pub[q], 2) << "]";
            worst = std::max(worst, std::abs(got[q] - pub[q]));
        }
        std::cout << '\n';
    }
    ok = ok && worst <= 0.02 + 1e-12;
    return {ok, "largest deviation from the published frequencies " + fmt(worst, 3) + ", tolerance 0.02"};
}

// Coverage of the 95% interval for a_11[1] with the thresholded noise
// covariance, Config VII at d = 60 x 60 and T = ceil(800 + d^{3/4}).
Outcome check_ci_coverage() {
    const Cell cell = make_cell(config_VII(60, static_cast<std::size_t>(std::ceil(800.0 + std::pow(3600.0, 0.75)))));
    RunOptions opt;
    opt.estimators = {Estimator::clt_est};
    opt.n_rep = reps(500);
    opt.seed = 902;
    const RunResult res = run_config("VII-est", {cell}, opt);
    report_failures(res);
    const double cover = frac(find_summary(res, cell.label, "clt_est", "ci_cover"));
    return {res.failures.empty() && cover >= 0.92 && cover <= 0.98,
            "empirical coverage " + fmt(cover, 3) + " at nominal 0.95, band [0.92, 0.98]"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance runs"};
    std::vector<int> which;
    std::string check;
    app.add_option("--criterion", which, "criteria to run (default all)")->check(CLI::Range(1, 8));
    app.add_option("--check", check, "additional check: table1 or ci-coverage")->check(CLI::IsMember({"table1", "ci-coverage"}));
    app.add_option("--reps-scale", reps_scale, "multiply replication counts (diagnostics only)");
    CLI11_PARSE(app, argc, argv);
    if (which.empty() && check.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8};

    const std::vector<std::function<Outcome()>> runs{criterion1, criterion2, criterion3, criterion4,
                                                     criterion5, criterion6, criterion7, criterion8};
    const char* names[] = {"rank frequency (Config VIII)",   "CC/AC error ratio (Config II)",
                           "CC-ISO dominance (Config I)",    "initialization (Config V)",
                           "loading CLT (Config VII)",       "noiseless oracle equivalence",
                           "invariant suite",                "end-to-end CLI on synthetic data"};
    if (reps_scale != 1.0) std::cout << "note: replication counts scaled by " << reps_scale << '\n';
    bool all = true;
    auto run_one = [&](const std::string& label, const std::function<Outcome()>& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << label << ": " << o.detail << " [" << fmt(sec, 3) << " s]" << std::endl;
        all = all && o.pass;
    };
    for (int c : which)
        run_one("criterion " + std::to_string(c) + " " + names[c - 1], runs[static_cast<std::size_t>(c - 1)]);
    if (check == "table1") run_one("check table1 full rank grid (Config VIII)", check_table1);
    if (check == "ci-coverage") run_one("check ci-coverage (Config VII)", check_ci_coverage);
    return all ? 0 : 1;
}
