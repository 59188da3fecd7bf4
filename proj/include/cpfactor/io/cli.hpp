#pragma once

// Command-line driver: fit, rank, infer, forecast, simulate. Kept in a header
// so tests can run commands in-process.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cpfactor/cpfactor.hpp"
#include "cpfactor/io/csv.hpp"
#include "cpfactor/io/model_json.hpp"
#include "cpfactor/sim/runner.hpp"

namespace cpfactor::io {

namespace detail {

struct FitArgs {
    std::string input, shape, rank = "auto", cov = "contemporary";
    std::size_t lag = 1, r_max = 0, L = 0, max_iter = 100;
    std::optional<std::size_t> h;
    double c0 = 0.1, nu = 0.8, epsilon = 1e-5;
    std::uint64_t seed = 0;
};

inline void add_fit_options(CLI::App* cmd, FitArgs& a) {
    cmd->add_option("--input", a.input, "long-format CSV (t,i1,...,iK,value)")->required();
    cmd->add_option("--shape", a.shape, "tensor shape, e.g. 40,10")->required();
    cmd->add_option("--rank", a.rank, "number of factors, or 'auto' for the eigenvalue-ratio estimate");
    cmd->add_option("--r-max", a.r_max, "upper bound for --rank auto (default min(20, min d_k / 2))");
    cmd->add_option("--cov", a.cov, "contemporary or lag")->check(CLI::IsMember({"contemporary", "lag"}));
    cmd->add_option("--lag", a.lag, "lag for --cov lag");
    cmd->add_option("--c0", a.c0, "eigengap constant");
    cmd->add_option("--nu", a.nu, "projection survival threshold");
    cmd->add_option("--projections", a.L, "number of random projections (default 2 r^2)");
    cmd->add_option("--projection-mode", a.h, "1-based mode used for the random projection");
    cmd->add_option("--epsilon", a.epsilon, "ISO stopping tolerance");
    cmd->add_option("--max-iter", a.max_iter, "ISO iteration cap");
    cmd->add_option("--seed", a.seed, "random seed");
}

inline nlohmann::json echo(const FitArgs& a) {
    nlohmann::json j{{"input", a.input}, {"shape", a.shape}, {"rank", a.rank}, {"cov", a.cov},
                     {"lag", a.lag},     {"c0", a.c0},       {"nu", a.nu},     {"epsilon", a.epsilon},
                     {"max_iter", a.max_iter}, {"seed", a.seed}};
    j["projections"] = a.L;
    j["r_max"] = a.r_max;
    if (a.h) j["projection_mode"] = *a.h;
    return j;
}

inline std::size_t parse_rank(const std::string& s) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos == s.size() && v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw InputError("cli-io/rank", "--rank must be a positive integer or 'auto', got '" + s + "'");
}

/// Fit with the given options. `chosen` receives the rank actually used.
inline CpModel fit_series(const TensorSeries& s, const FitArgs& a, std::size_t& chosen, std::ostream& log) {
    if (a.rank == "auto") {
        const std::size_t rmax = a.r_max > 0 ? a.r_max : default_r_max(s.shape());
        chosen = rank_uer(s, rmax).r_hat;
        log << "rank auto: r_hat_uer = " << chosen << " (r_max = " << rmax << ")\n";
    } else {
        chosen = parse_rank(a.rank);
    }
    InitConfig ic;
    ic.r = chosen;
    ic.c0 = a.c0;
    ic.nu = a.nu;
    ic.L = a.L;
    if (a.h) {
        if (*a.h < 1) throw InputError("cli-io/projection-mode", "--projection-mode is 1-based");
        ic.h = *a.h - 1;
    }
    ic.seed = a.seed;
    IsoConfig iso;
    iso.epsilon = a.epsilon;
    iso.max_iter = a.max_iter;
    iso.cov_kind = a.cov == "lag" ? CovKind::lag : CovKind::contemporary;
    iso.lag = a.lag;
    const LoadingSet init = rc_pca(s, ic, iso.cov_kind, iso.lag);
    return iso_fit(s, init, iso);
}

/// Expanding-window one-step forecasts of the last `holdout` periods: for each
/// target period refit on everything before it, fit a VAR(1) to the factors
/// and map the predicted factors through the loadings.
inline TensorSeries rolling_one_step(const TensorSeries& full, std::size_t holdout, const FitArgs& a, std::ostream& log) {
    const auto T = full.length(), H = static_cast<Eigen::Index>(holdout);
    Eigen::MatrixXd pred(full.dim(), H);
    for (Eigen::Index s = 0; s < H; ++s) {
        const TensorSeries train(full.shape(), full.data().leftCols(T - H + s));
        std::size_t r = 0;
        const CpModel m = fit_series(train, a, r, log);
        pred.col(s) = forecast_y(m, var1_forecast(m.F, 1).forecasts.row(0).transpose()).vec();
    }
    return TensorSeries(full.shape(), std::move(pred));
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw InputError("cli-io/open", "cannot write '" + path + "'");
    f << std::setprecision(17);
    return f;
}

inline const char* regime_name(CiRegime r) { return r == CiRegime::normal ? "normal" : "slow_rate"; }

// Correct-rank frequency laid out as rows (dims, T) and columns (phi, method).
inline void print_rank_table(std::ostream& os, const sim::RunResult& res, const std::vector<sim::Cell>& cells) {
    std::vector<std::string> rows;
    std::vector<double> phis;
    std::map<std::pair<std::string, double>, std::pair<double, double>> freq;
    for (const auto& c : cells) {
        const std::string row = sim::dims_label(c.spec.dims) + "T=" + std::to_string(c.spec.T);
        if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
        if (std::find(phis.begin(), phis.end(), c.spec.phi) == phis.end()) phis.push_back(c.spec.phi);
        auto get = [&](const char* est) {
            const auto* s = sim::find_summary(res, c.label, est, "correct");
            return s ? std::accumulate(s->values.begin(), s->values.end(), 0.0) / static_cast<double>(s->count)
                     : std::numeric_limits<double>::quiet_NaN();
        };
        freq[{row, c.spec.phi}] = {get("uer"), get("ip")};
    }
    os << "correct-rank frequency\n" << std::left << std::setw(24) << "cell";
    for (double p : phis) os << std::setw(14) << ("uer phi=" + sim::fmt_num(p)) << std::setw(14) << ("ip phi=" + sim::fmt_num(p));
    os << '\n' << std::fixed << std::setprecision(3);
    for (const auto& row : rows) {
        os << std::setw(24) << row;
        for (double p : phis) {
            const auto& [u, ip] = freq[{row, p}];
            os << std::setw(14) << u << std::setw(14) << ip;
        }
        os << '\n';
    }
    os << std::defaultfloat << std::right;
}

}  // namespace detail

/// Run the command line. Returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"CP tensor factor models for tensor-valued time series"};
    app.name("cpfactor");
    app.require_subcommand(1);

    // fit
    detail::FitArgs fa;
    std::string fit_out, fit_fitted;
    auto* fit = app.add_subcommand("fit", "estimate a CP factor model");
    detail::add_fit_options(fit, fa);
    fit->add_option("--out", fit_out, "model JSON")->required();
    fit->add_option("--fitted", fit_fitted, "fitted-values CSV");

    // rank
    std::string rk_input, rk_shape, rk_out;
    std::size_t rk_rmax = 0;
    auto* rank = app.add_subcommand("rank", "estimate the number of factors");
    rank->add_option("--input", rk_input, "long-format CSV")->required();
    rank->add_option("--shape", rk_shape, "tensor shape")->required();
    rank->add_option("--r-max", rk_rmax, "largest rank considered");
    rank->add_option("--out", rk_out, "ratio table CSV");

    // infer
    std::string in_model, in_input, in_out;
    double in_level = 0.95, in_cthr = 2.0;
    auto* infer = app.add_subcommand("infer", "confidence intervals for loading entries");
    infer->add_option("--model", in_model, "model JSON from fit")->required();
    infer->add_option("--input", in_input, "the series the model was fitted on")->required();
    infer->add_option("--level", in_level, "confidence level");
    infer->add_option("--threshold", in_cthr, "noise covariance threshold constant");
    infer->add_option("--out", in_out, "CI CSV (default stdout)");

    // forecast
    detail::FitArgs fc;
    std::size_t fc_horizon = 1, fc_holdout = 0;
    std::string fc_out;
    auto* fcst = app.add_subcommand("forecast", "VAR(1) forecasts of the tensor series");
    detail::add_fit_options(fcst, fc);
    fcst->add_option("--horizon", fc_horizon, "periods ahead")->check(CLI::PositiveNumber);
    fcst->add_option("--holdout", fc_holdout, "final periods held out for one-step-ahead evaluation");
    fcst->add_option("--out", fc_out, "predictions CSV (default stdout)");

    // simulate
    std::string sm_config, sm_grid = "paper", sm_out, sm_summary, sm_est;
    std::size_t sm_reps = 100, sm_workers = 0, sm_rmax = 0;
    std::uint64_t sm_seed = 0;
    double sm_phi = 0.1;
    auto* simc = app.add_subcommand("simulate", "Monte-Carlo experiments");
    simc->add_option("--config", sm_config, "I..IX, VII-est, pareto, corr-factors, unbalanced")->required();
    simc->add_option("--reps", sm_reps, "replications per cell")->check(CLI::PositiveNumber);
    simc->add_option("--grid", sm_grid, "paper or quick")->check(CLI::IsMember({"paper", "quick"}));
    simc->add_option("--seed", sm_seed, "master seed")->required();
    simc->add_option("--workers", sm_workers, "worker threads (default CPFACTOR_WORKERS or all cores)");
    simc->add_option("--phi", sm_phi, "factor AR coefficient for configurations that do not vary it");
    simc->add_option("--estimators", sm_est, "comma list: rcpca,cpca,cc_iso,ac_iso,uer,ip,clt_known,clt_est");
    simc->add_option("--r-max", sm_rmax, "r_max for the rank estimators");
    simc->add_option("--out", sm_out, "long CSV of every replication");
    simc->add_option("--summary", sm_summary, "per-cell summary CSV");

    try {
        std::vector<std::string> args;
        for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*fit) {
            const TensorSeries s = read_series(fa.input, parse_shape(fa.shape));
            std::size_t r = 0;
            const CpModel m = detail::fit_series(s, fa, r, out);
            nlohmann::json e = detail::echo(fa);
            e["command"] = "fit";
            e["rank_used"] = r;
            save_model(fit_out, m, e);
            const TensorSeries fitted = reconstruct(m);
            if (!fit_fitted.empty()) write_series(fit_fitted, fitted);
            out << "r = " << m.rank() << ", converged = " << (m.converged ? "true" : "false") << ", iterations = " << m.n_iter;
            try {
                out << ", R^2 = " << r_squared(s, fitted);
            } catch (const InputError&) {
            }
            out << '\n';
        } else if (*rank) {
            const TensorSeries s = read_series(rk_input, parse_shape(rk_shape));
            const std::size_t rmax = rk_rmax > 0 ? rk_rmax : default_r_max(s.shape());
            const RankEstimate uer = rank_uer(s, rmax);
            const RankEstimate ip = rank_ip(s, rmax);
            out << "r_hat_uer = " << uer.r_hat << "\nr_hat_ip = " << ip.r_hat << " (per mode:";
            for (auto v : ip.per_mode) out << ' ' << v;
            out << ")\n";
            auto write_ratios = [&](std::ostream& os) {
                os << "method,mode,i,ratio\n";
                for (Eigen::Index i = 0; i < uer.ratios[0].size(); ++i) os << "uer,0," << (i + 1) << ',' << uer.ratios[0](i) << '\n';
                for (std::size_t k = 0; k < ip.ratios.size(); ++k)
                    for (Eigen::Index i = 0; i < ip.ratios[k].size(); ++i)
                        os << "ip," << (k + 1) << ',' << (i + 1) << ',' << ip.ratios[k](i) << '\n';
            };
            if (rk_out.empty()) {
                write_ratios(out);
            } else {
                auto f = detail::open_out(rk_out);
                write_ratios(f);
            }
        } else if (*infer) {
            const CpModel m = load_model(in_model);
            const TensorSeries s = read_series(in_input, m.shape);
            const NoiseCov nc = threshold_cov(residuals(s, m), in_cthr);
            auto write_ci = [&](std::ostream& os) {
                os << std::setprecision(12) << "i,k,j,estimate,se,lower,upper,regime\n";
                for (std::size_t i = 0; i < m.rank(); ++i)
                    for (std::size_t k = 0; k < m.order(); ++k)
                        for (std::size_t j = 0; j < m.shape[k]; ++j) {
                            const CiReport c = loading_ci(m, nc, i, k, j, in_level);
                            os << (i + 1) << ',' << (k + 1) << ',' << (j + 1) << ',' << c.estimate << ',' << c.se << ','
                               << c.lower << ',' << c.upper << ',' << detail::regime_name(c.regime) << '\n';
                        }
            };
            if (in_out.empty()) {
                write_ci(out);
            } else {
                auto f = detail::open_out(in_out);
                write_ci(f);
            }
        } else if (*fcst) {
            const TensorSeries full = read_series(fc.input, parse_shape(fc.shape));
            const auto T = full.length();
            if (static_cast<Eigen::Index>(fc_holdout) + 3 > T)
                throw InputError("cli-io/holdout", "holdout leaves too few periods for fitting");
            const auto Ttrain = T - static_cast<Eigen::Index>(fc_holdout);
            const TensorSeries train(full.shape(), full.data().leftCols(Ttrain));
            std::size_t r = 0;
            const CpModel m = detail::fit_series(train, fc, r, err);
            const Var1Fit v = var1_forecast(m.F, fc_horizon);
            Eigen::MatrixXd pred(full.dim(), static_cast<Eigen::Index>(fc_horizon));
            for (Eigen::Index h = 0; h < pred.cols(); ++h) pred.col(h) = forecast_y(m, v.forecasts.row(h).transpose()).vec();
            const TensorSeries ps(full.shape(), pred);
            if (fc_out.empty()) {
                write_series(out, ps, static_cast<std::size_t>(Ttrain) + 1);
            } else {
                write_series(fc_out, ps, static_cast<std::size_t>(Ttrain) + 1);
            }
            if (fc_holdout > 0) {
                std::ostringstream quiet;
                const TensorSeries pred1 = detail::rolling_one_step(full, fc_holdout, fc, quiet);
                const TensorSeries actual(full.shape(), full.data().rightCols(static_cast<Eigen::Index>(fc_holdout)));
                err << "holdout_mse = " << std::setprecision(10) << mean_squared_error(actual, pred1) << '\n';
            }
        } else if (*simc) {
            std::vector<sim::Cell> cells = sim::paper_grid(sm_config, sm_phi);
            if (sm_grid == "quick") {
                const auto first = cells.front().spec;
                std::vector<sim::Cell> keep;
                for (auto& c : cells)
                    if (c.spec.dims == first.dims && c.spec.T == first.T) keep.push_back(c);
                cells = std::move(keep);
            }
            sim::RunOptions opt;
            opt.estimators = sim::default_estimators(sm_config);
            if (!sm_est.empty()) {
                opt.estimators.clear();
                std::stringstream ss(sm_est);
                for (std::string e; std::getline(ss, e, ',');) opt.estimators.push_back(sim::parse_estimator(e));
            }
            opt.n_rep = sm_reps;
            opt.seed = sm_seed;
            opt.workers = sm_workers;
            opt.r_max = sm_rmax;
            const sim::RunResult res = sim::run_config(sm_config, cells, opt);
            if (!sm_out.empty()) {
                auto f = detail::open_out(sm_out);
                sim::write_long_csv(f, res.records);
            }
            auto write_summary = [&](std::ostream& os) {
                os << std::setprecision(6) << "config,cell,estimator,metric,median,q25,q75,mean,reps,failures,seconds\n";
                for (const auto& s : res.summaries)
                    os << s.config << ",\"" << s.cell << "\"," << s.estimator << ',' << s.metric << ',' << s.median << ','
                       << s.q25 << ',' << s.q75 << ',' << s.mean << ',' << s.count << ',' << s.failures << ','
                       << s.elapsed_sec << '\n';
            };
            if (!sm_summary.empty()) {
                auto f = detail::open_out(sm_summary);
                write_summary(f);
            }
            if (sm_config == "VIII") {
                detail::print_rank_table(out, res, cells);
            } else {
                write_summary(out);
            }
            for (const auto& f : res.failures) err << "failure: " << f << '\n';
        }
    } catch (const Error& e) {
        err << "error [" << e.code() << "]: " << e.what() << '\n';
        return exit_code_for(e.category());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace cpfactor::io
