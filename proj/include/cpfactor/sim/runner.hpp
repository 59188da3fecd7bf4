#pragma once

// Monte-Carlo runner: replicate a DGP over a grid of cells, fit the requested
// estimators, and collect per-replication metrics.

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cpfactor/covariance.hpp"
#include "cpfactor/errors.hpp"
#include "cpfactor/inference.hpp"
#include "cpfactor/init.hpp"
#include "cpfactor/iso.hpp"
#include "cpfactor/rank.hpp"
#include "cpfactor/rng.hpp"
#include "cpfactor/sim/dgp.hpp"
#include "cpfactor/sim/metrics.hpp"

namespace cpfactor::sim {

enum class Estimator { rcpca, cpca, cc_iso, ac_iso, uer, ip, clt_known, clt_est };

inline const char* estimator_name(Estimator e) {
    switch (e) {
    case Estimator::rcpca: return "rcpca";
    case Estimator::cpca: return "cpca";
    case Estimator::cc_iso: return "cc_iso";
    case Estimator::ac_iso: return "ac_iso";
    case Estimator::uer: return "uer";
    case Estimator::ip: return "ip";
    case Estimator::clt_known: return "clt_known";
    case Estimator::clt_est: return "clt_est";
    }
    return "?";
}

inline Estimator parse_estimator(const std::string& s) {
    for (auto e : {Estimator::rcpca, Estimator::cpca, Estimator::cc_iso, Estimator::ac_iso, Estimator::uer,
                   Estimator::ip, Estimator::clt_known, Estimator::clt_est})
        if (s == estimator_name(e)) return e;
    throw InputError("sim-lab/estimator", "unknown estimator '" + s + "'");
}

struct Cell {
    std::string label;  // "key=value;key=value"
    DgpSpec spec;
};

struct Record {
    std::string config;
    std::string cell;
    std::size_t rep = 0;
    std::string estimator;
    std::string metric;
    double value = 0.0;
};

struct McSummary {
    std::string config, cell, estimator, metric;
    std::vector<double> values;  // in replication order
    std::size_t count = 0;       // replications requested
    std::size_t failures = 0;
    double median = 0.0, q25 = 0.0, q75 = 0.0, mean = 0.0;
    double elapsed_sec = 0.0;    // wall time of the whole cell
};

struct RunOptions {
    std::vector<Estimator> estimators{Estimator::rcpca, Estimator::cc_iso, Estimator::ac_iso};
    std::size_t n_rep = 1;
    std::uint64_t seed = 0;
    std::size_t workers = 0;  // 0: CPFACTOR_WORKERS or hardware concurrency
    InitConfig init;          // r and seed are filled per replication
    IsoConfig iso;
    std::size_t r_max = 0;    // 0: default_r_max
    int max_retries = 3;      // projection shortfall retries with L doubled
    double c_thr = 2.0;
    std::size_t clt_factor = 0;  // true factor index for the CLT statistic
    std::size_t clt_mode = 0;
};

struct RunResult {
    std::vector<Record> records;
    std::vector<McSummary> summaries;
    std::vector<std::string> failures;
};

inline std::size_t worker_count(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("CPFACTOR_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// rc_pca with the projection-shortfall retry policy.
inline LoadingSet rc_pca_retry(const TensorSeries& s, InitConfig cfg, CovKind kind, int max_retries) {
    for (int attempt = 0;; ++attempt) {
        try {
            return rc_pca(s, cfg, kind, 1);
        } catch (const InsufficientSurvivors&) {
            if (attempt >= max_retries) throw;
            cfg.L = 2 * cfg.projections();
        }
    }
}

namespace detail {

struct RepOutput {
    std::vector<Record> records;
    std::vector<std::pair<std::string, std::string>> failures;  // estimator, message
};

inline void push_fit_metrics(RepOutput& out, const std::string& est, const std::vector<Eigen::MatrixXd>& A,
                             const GroundTruth& g) {
    out.records.push_back({"", "", 0, est, "sin_error", sin_angle_error(A, g.A)});
    const auto modes = mode_errors(A, g.A);
    for (std::size_t k = 0; k < modes.size(); ++k)
        out.records.push_back({"", "", 0, est, "mode" + std::to_string(k + 1) + "_error", modes[k]});
}

inline RepOutput run_rep(const DgpSpec& cell_spec, std::uint64_t rep_seed, const RunOptions& opt) {
    DgpSpec spec = cell_spec;
    spec.seed = rep_seed;
    const GroundTruth g = gen_dataset(spec);
    const TensorSeries& s = g.series;
    RepOutput out;

    InitConfig ic = opt.init;
    ic.r = spec.r;
    ic.seed = derive_seed(rep_seed, {17});

    std::optional<LoadingSet> cc_init;
    std::optional<CpModel> cc_model;
    auto get_cc_init = [&]() -> const LoadingSet& {
        if (!cc_init) cc_init = rc_pca_retry(s, ic, CovKind::contemporary, opt.max_retries);
        return *cc_init;
    };
    auto get_cc_model = [&]() -> const CpModel& {
        if (!cc_model) {
            IsoConfig c = opt.iso;
            c.cov_kind = CovKind::contemporary;
            cc_model = iso_fit(s, get_cc_init(), c);
        }
        return *cc_model;
    };

    for (Estimator e : opt.estimators) {
        const std::string name = estimator_name(e);
        try {
            switch (e) {
            case Estimator::rcpca: {
                const auto& init = get_cc_init();
                push_fit_metrics(out, name, init.A, g);
                double proj = 0;
                for (bool p : init.projected) proj += p ? 1.0 : 0.0;
                out.records.push_back({"", "", 0, name, "projected", proj});
                break;
            }
            case Estimator::cpca: {
                InitConfig c = ic;
                c.branch = InitBranch::composite_only;
                push_fit_metrics(out, name, rc_pca(s, c).A, g);
                break;
            }
            case Estimator::cc_iso:
            case Estimator::ac_iso: {
                const CpModel* m;
                CpModel ac;
                if (e == Estimator::cc_iso) {
                    m = &get_cc_model();
                } else {
                    const LoadingSet init = rc_pca_retry(s, ic, CovKind::lag, opt.max_retries);
                    IsoConfig c = opt.iso;
                    c.cov_kind = CovKind::lag;
                    c.lag = 1;
                    ac = iso_fit(s, init, c);
                    m = &ac;
                }
                push_fit_metrics(out, name, m->A, g);
                out.records.push_back({"", "", 0, name, "n_iter", static_cast<double>(m->n_iter)});
                out.records.push_back({"", "", 0, name, "converged", m->converged ? 1.0 : 0.0});
                out.records.push_back({"", "", 0, name, "factor_mse", factor_mse(*m, g.A, g.w, g.F)});
                break;
            }
            case Estimator::uer:
            case Estimator::ip: {
                const std::size_t rmax = opt.r_max > 0 ? opt.r_max : default_r_max(spec.dims);
                const RankEstimate est = e == Estimator::uer ? rank_uer(s, rmax) : rank_ip(s, rmax);
                out.records.push_back({"", "", 0, name, "r_hat", static_cast<double>(est.r_hat)});
                out.records.push_back({"", "", 0, name, "correct", est.r_hat == spec.r ? 1.0 : 0.0});
                break;
            }
            case Estimator::clt_known:
            case Estimator::clt_est: {
                const CpModel& m = get_cc_model();
                const std::size_t i = opt.clt_factor, k = opt.clt_mode;
                const auto match = match_factors(m.A, g.A);
                const std::size_t ie = match[i];
                const auto dk = g.A[k].rows();
                const Eigen::VectorXd u = Eigen::VectorXd::Unit(dk, 0);
                const Eigen::VectorXd a = g.A[k].col(static_cast<Eigen::Index>(i));
                const Eigen::VectorXd a_hat = m.A[k].col(static_cast<Eigen::Index>(ie));
                const double T = static_cast<double>(s.length());
                if (e == Estimator::clt_known) {
                    const auto B = g.duals();
                    std::vector<Eigen::VectorXd> vs;
                    for (std::size_t l = 0; l < B.size(); ++l)
                        vs.push_back(l == k ? Eigen::VectorXd(u - a * a.dot(u)) : Eigen::VectorXd(B[l].col(static_cast<Eigen::Index>(i))));
                    const double sigma = std::sqrt(kron_quadratic_form(g, vs));
                    const double wi = g.w(static_cast<Eigen::Index>(i));
                    out.records.push_back({"", "", 0, name, "z", clt_pivot(a_hat, a, u, sigma, wi * wi, T)});
                } else {
                    const NoiseCov nc = threshold_cov(residuals(s, m), opt.c_thr);
                    out.records.push_back({"", "", 0, name, "z", clt_statistic(m, nc, ie, k, u, a)});
                    const CiReport ci = loading_ci(m, nc, ie, k, 0, 0.95);
                    const double truth = (a_hat.dot(a) < 0 ? -1.0 : 1.0) * a(0);
                    out.records.push_back({"", "", 0, name, "ci_cover", ci.lower <= truth && truth <= ci.upper ? 1.0 : 0.0});
                }
                break;
            }
            }
        } catch (const std::exception& ex) {
            out.failures.emplace_back(name, ex.what());
        }
    }
    return out;
}

}  // namespace detail

/// Run every cell for n_rep replications. Output is identical for any worker
/// count: each (cell, rep) draws from its own substream and results are
/// placed by index.
inline RunResult run_config(const std::string& config, const std::vector<Cell>& cells, const RunOptions& opt) {
    if (opt.n_rep < 1) throw InputError("sim-lab/reps", "n_rep must be >= 1");
    RunResult result;
    const std::size_t workers = worker_count(opt.workers);
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<detail::RepOutput> outs(opt.n_rep);
        std::atomic<std::size_t> next{0};
        auto work = [&]() {
            for (std::size_t rep; (rep = next.fetch_add(1)) < opt.n_rep;) {
                const std::uint64_t rs = derive_seed(opt.seed, {static_cast<std::uint64_t>(c), rep});
                try {
                    outs[rep] = detail::run_rep(cells[c].spec, rs, opt);
                } catch (const std::exception& ex) {
                    for (Estimator e : opt.estimators) outs[rep].failures.emplace_back(estimator_name(e), ex.what());
                }
            }
        };
        if (workers <= 1 || opt.n_rep == 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < std::min(workers, opt.n_rep); ++w) pool.emplace_back(work);
            for (auto& th : pool) th.join();
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::map<std::pair<std::string, std::string>, McSummary> by_metric;
        std::vector<std::pair<std::string, std::string>> order;
        std::map<std::string, std::size_t> fail_count;
        for (std::size_t rep = 0; rep < opt.n_rep; ++rep) {
            for (auto rec : outs[rep].records) {
                rec.config = config;
                rec.cell = cells[c].label;
                rec.rep = rep + 1;
                const auto key = std::make_pair(rec.estimator, rec.metric);
                auto it = by_metric.find(key);
                if (it == by_metric.end()) {
                    order.push_back(key);
                    it = by_metric.emplace(key, McSummary{config, cells[c].label, rec.estimator, rec.metric}).first;
                }
                it->second.values.push_back(rec.value);
                result.records.push_back(std::move(rec));
            }
            for (const auto& [est, msg] : outs[rep].failures) {
                ++fail_count[est];
                result.failures.push_back(config + " " + cells[c].label + " rep " + std::to_string(rep + 1) + " " + est +
                                          ": " + msg);
            }
        }
        for (const auto& key : order) {
            McSummary sm = by_metric.at(key);
            sm.count = opt.n_rep;
            sm.failures = fail_count.count(key.first) ? fail_count.at(key.first) : 0;
            sm.median = median(sm.values);
            sm.q25 = quantile(sm.values, 0.25);
            sm.q75 = quantile(sm.values, 0.75);
            sm.mean = mean(sm.values);
            sm.elapsed_sec = elapsed;
            result.summaries.push_back(std::move(sm));
        }
    }
    return result;
}

inline const McSummary* find_summary(const RunResult& r, const std::string& cell, const std::string& estimator,
                                     const std::string& metric) {
    for (const auto& s : r.summaries)
        if (s.cell == cell && s.estimator == estimator && s.metric == metric) return &s;
    return nullptr;
}

inline void write_long_csv(std::ostream& os, const std::vector<Record>& records, bool header = true) {
    if (header) os << "config,cell,rep,estimator,metric,value\n";
    std::ostringstream line;
    line.precision(10);
    for (const auto& r : records) {
        line.str("");
        line << r.config << ',' << r.cell << ',' << r.rep << ',' << r.estimator << ',' << r.metric << ',' << r.value << '\n';
        os << line.str();
    }
}

// ---- grids ------------------------------------------------------------------

inline std::string fmt_num(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

inline std::string dims_label(const Shape& d) {
    std::string s;
    for (std::size_t k = 0; k < d.size(); ++k) s += "d" + std::to_string(k + 1) + "=" + std::to_string(d[k]) + ";";
    return s;
}

inline Cell make_cell(const DgpSpec& spec, const std::string& extra = "") {
    std::string label = dims_label(spec.dims) + "T=" + std::to_string(spec.T);
    if (!extra.empty()) label += ";" + extra;
    return {label, spec};
}

/// The grids used in the paper's experiments. `phi` overrides the factor AR
/// coefficient where the configuration leaves it at its default.
inline std::vector<Cell> paper_grid(const std::string& config, double phi = 0.1) {
    const std::vector<Shape> dims{{40, 40}, {40, 60}, {60, 60}};
    const std::vector<std::size_t> Ts{100, 300, 500};
    std::vector<Cell> cells;
    auto with_phi = [&](DgpSpec s) {
        s.phi = phi;
        return s;
    };
    if (config == "I") {
        for (const auto& d : dims)
            for (auto T : Ts) cells.push_back(make_cell(with_phi(config_I(d, T))));
    } else if (config == "II") {
        for (const auto& d : dims)
            for (auto T : Ts)
                for (double eta : {0.05, 0.15, 0.25}) cells.push_back(make_cell(with_phi(config_II(d, T, eta)), "eta=" + fmt_num(eta)));
    } else if (config == "III") {
        for (const auto& d : dims)
            for (auto T : Ts)
                for (double rho : {0.1, 0.3, 0.5}) cells.push_back(make_cell(with_phi(config_III(d, T, rho)), "rho=" + fmt_num(rho)));
    } else if (config == "IV") {
        for (const auto& d : dims)
            for (auto T : Ts)
                for (double a : {2.5, 3.0, 3.5, 4.0}) cells.push_back(make_cell(with_phi(config_IV(d, T, a)), "alpha=" + fmt_num(a)));
    } else if (config == "V") {
        for (std::size_t db : {20, 40, 80})
            for (std::size_t T : {100, 200, 500}) cells.push_back(make_cell(with_phi(config_V(db, T))));
    } else if (config == "VI") {
        for (const auto& d : dims)
            for (auto T : Ts)
                for (double a : {3.0, 4.0, 5.0}) cells.push_back(make_cell(with_phi(config_VI(d, T, a)), "alpha=" + fmt_num(a)));
    } else if (config == "VII") {
        for (std::size_t db : {20, 60, 100}) cells.push_back(make_cell(with_phi(config_VII(db))));
    } else if (config == "VII-est") {
        for (std::size_t db : {20, 60, 100}) {
            const double d = static_cast<double>(db * db);
            cells.push_back(make_cell(with_phi(config_VII(db, static_cast<std::size_t>(std::ceil(800.0 + std::pow(d, 0.75)))))));
        }
    } else if (config == "VIII") {
        for (std::size_t db : {20, 40, 60, 80})
            for (auto T : Ts)
                for (double p : {0.1, 0.5}) cells.push_back(make_cell(config_VIII(db, T, p), "phi=" + fmt_num(p)));
    } else if (config == "IX") {
        for (const auto& d : dims)
            for (auto T : Ts) cells.push_back(make_cell(with_phi(config_IX(d, T))));
    } else if (config == "pareto") {
        for (std::size_t db : {20, 40, 60, 80})
            for (std::size_t T : {100, 200, 300, 400, 500}) cells.push_back(make_cell(with_phi(config_pareto(db, T))));
    } else if (config == "corr-factors") {
        for (const auto& d : dims)
            for (auto T : Ts)
                for (double z : {0.2, 0.5, 0.8}) cells.push_back(make_cell(with_phi(config_corr_factors(d, T, z)), "zeta=" + fmt_num(z)));
    } else if (config == "unbalanced") {
        for (std::size_t d1 : {20, 50, 100, 200})
            for (auto T : Ts) cells.push_back(make_cell(with_phi(config_unbalanced(d1, T))));
    } else {
        throw InputError("sim-lab/config", "unknown configuration '" + config + "'");
    }
    return cells;
}

inline std::vector<Estimator> default_estimators(const std::string& config) {
    if (config == "IV" || config == "VI" || config == "pareto" || config == "corr-factors" || config == "unbalanced")
        return {Estimator::rcpca, Estimator::cc_iso};
    if (config == "V") return {Estimator::rcpca, Estimator::cpca, Estimator::cc_iso};
    if (config == "VII") return {Estimator::clt_known};
    if (config == "VII-est") return {Estimator::clt_est};
    if (config == "VIII") return {Estimator::uer, Estimator::ip};
    if (config == "IX") return {Estimator::cc_iso, Estimator::ac_iso};
    return {Estimator::rcpca, Estimator::cc_iso, Estimator::ac_iso};
}

}  // namespace cpfactor::sim
