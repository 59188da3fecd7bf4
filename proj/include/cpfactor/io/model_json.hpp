#pragma once

// Versioned JSON document for fitted CP models.

#include <Eigen/Dense>
#include <json.hpp>

#include <fstream>
#include <string>

#include "cpfactor/errors.hpp"
#include "cpfactor/iso.hpp"

namespace cpfactor::io {

inline constexpr const char* kModelFormat = "cpfactor-model/1";

namespace detail {

// Matrices are stored column by column.
inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json cols = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        nlohmann::json c = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) c.push_back(m(i, j));
        cols.push_back(std::move(c));
    }
    return cols;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows) {
    Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const auto& col = j.at(static_cast<std::size_t>(c));
        if (static_cast<Eigen::Index>(col.size()) != rows)
            throw InputError("cli-io/model", "matrix column has the wrong length");
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = col.at(static_cast<std::size_t>(r)).get<double>();
    }
    return m;
}

}  // namespace detail

/// `echo` carries the run configuration that produced the model.
inline nlohmann::json model_to_json(const CpModel& m, const nlohmann::json& echo = nlohmann::json::object()) {
    nlohmann::json j;
    j["format"] = kModelFormat;
    j["shape"] = m.shape;
    j["rank"] = m.rank();
    j["T"] = m.F.rows();
    j["loadings"] = nlohmann::json::array();
    j["duals"] = nlohmann::json::array();
    for (const auto& a : m.A) j["loadings"].push_back(detail::matrix_to_json(a));
    for (const auto& b : m.B) j["duals"].push_back(detail::matrix_to_json(b));
    j["weights"] = std::vector<double>(m.w.data(), m.w.data() + m.w.size());
    j["factors"] = detail::matrix_to_json(m.F);
    j["degenerate"] = m.degenerate;
    j["convergence"] = {{"n_iter", m.n_iter}, {"converged", m.converged}, {"history", m.history}};
    j["iso"] = {{"epsilon", m.config.epsilon},
                {"max_iter", m.config.max_iter},
                {"cov", m.config.cov_kind == CovKind::contemporary ? "contemporary" : "lag"},
                {"lag", m.config.lag}};
    j["config"] = echo;
    return j;
}

inline CpModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kModelFormat)
            throw InputError("cli-io/model-format", "unsupported model format '" + j.at("format").get<std::string>() + "'");
        CpModel m;
        m.shape = j.at("shape").get<Shape>();
        const auto r = j.at("rank").get<std::size_t>();
        const auto T = j.at("T").get<Eigen::Index>();
        for (std::size_t k = 0; k < m.shape.size(); ++k) {
            m.A.push_back(detail::matrix_from_json(j.at("loadings").at(k), static_cast<Eigen::Index>(m.shape[k])));
            m.B.push_back(detail::matrix_from_json(j.at("duals").at(k), static_cast<Eigen::Index>(m.shape[k])));
            if (static_cast<std::size_t>(m.A.back().cols()) != r)
                throw InputError("cli-io/model", "loading matrix rank differs from declared rank");
        }
        const auto w = j.at("weights").get<std::vector<double>>();
        if (w.size() != r) throw InputError("cli-io/model", "weight count differs from rank");
        m.w = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        m.F = detail::matrix_from_json(j.at("factors"), T);
        if (r == 0) m.F.resize(T, 0);
        m.degenerate = j.at("degenerate").get<std::vector<bool>>();
        const auto& c = j.at("convergence");
        m.n_iter = c.at("n_iter").get<std::size_t>();
        m.converged = c.at("converged").get<bool>();
        m.history = c.at("history").get<std::vector<double>>();
        const auto& iso = j.at("iso");
        m.config.epsilon = iso.at("epsilon").get<double>();
        m.config.max_iter = iso.at("max_iter").get<std::size_t>();
        m.config.cov_kind = iso.at("cov").get<std::string>() == "lag" ? CovKind::lag : CovKind::contemporary;
        m.config.lag = iso.at("lag").get<std::size_t>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("cli-io/model", std::string("malformed model document: ") + e.what());
    }
}

inline void save_model(const std::string& path, const CpModel& m, const nlohmann::json& echo = nlohmann::json::object()) {
    std::ofstream f(path);
    if (!f) throw InputError("cli-io/open", "cannot write '" + path + "'");
    f << model_to_json(m, echo).dump(2) << '\n';
}

inline CpModel load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cli-io/open", "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("cli-io/model", std::string("cannot parse model: ") + e.what());
    }
    return model_from_json(j);
}

}  // namespace cpfactor::io
