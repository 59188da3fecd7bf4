#pragma once

// Long-format CSV for tensor series: header `t,i1,...,iK,value`, one row per
// cell, all indices 1-based.

#include <Eigen/Dense>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cpfactor/covariance.hpp"
#include "cpfactor/errors.hpp"
#include "cpfactor/tensor.hpp"

namespace cpfactor::io {

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != ' ' && c != '\t') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string coord_string(std::size_t t, const std::vector<std::size_t>& idx) {
    std::string s = "(t=" + std::to_string(t);
    for (std::size_t k = 0; k < idx.size(); ++k) s += ", i" + std::to_string(k + 1) + "=" + std::to_string(idx[k]);
    return s + ")";
}

inline long parse_index(const std::string& s, std::size_t line) {
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || errno != 0)
        throw InputError("cli-io/parse", "line " + std::to_string(line) + ": bad index '" + s + "'");
    return v;
}

inline double parse_value(const std::string& s, std::size_t line) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE)
        throw InputError("cli-io/parse", "line " + std::to_string(line) + ": bad value '" + s + "'");
    return v;
}

}  // namespace detail

inline Shape parse_shape(const std::string& s) {
    Shape out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const long v = detail::parse_index(part, 0);
        if (v < 1) throw InputError("cli-io/shape", "shape entries must be positive: '" + s + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw InputError("cli-io/shape", "empty shape");
    return out;
}

/// Read a full-grid series. T is the largest t present; every (t, i) cell
/// must appear exactly once.
inline TensorSeries read_series(std::istream& in, const Shape& shape) {
    const std::size_t K = shape.size();
    std::string line;
    if (!std::getline(in, line)) throw InputError("cli-io/parse", "empty input");
    const auto head = detail::split_csv(line);
    if (head.size() != K + 2 || head.front() != "t" || head.back() != "value")
        throw InputError("cli-io/header", "expected header t,i1,...,i" + std::to_string(K) + ",value for shape " +
                                              shape_string(shape));
    for (std::size_t k = 0; k < K; ++k)
        if (head[k + 1] != "i" + std::to_string(k + 1))
            throw InputError("cli-io/header", "header column " + std::to_string(k + 2) + " should be i" + std::to_string(k + 1));

    struct Row {
        std::size_t t;
        std::vector<std::size_t> idx;
        double v;
    };
    std::vector<Row> rows;
    std::size_t T = 0, lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != K + 2)
            throw InputError("cli-io/parse", "line " + std::to_string(lineno) + ": expected " + std::to_string(K + 2) + " fields");
        Row r;
        const long t = detail::parse_index(f[0], lineno);
        if (t < 1) throw InputError("cli-io/grid", "line " + std::to_string(lineno) + ": t must be >= 1");
        r.t = static_cast<std::size_t>(t);
        for (std::size_t k = 0; k < K; ++k) {
            const long i = detail::parse_index(f[k + 1], lineno);
            if (i < 1 || static_cast<std::size_t>(i) > shape[k])
                throw InputError("cli-io/grid", "line " + std::to_string(lineno) + ": index i" + std::to_string(k + 1) + "=" +
                                                    std::to_string(i) + " outside 1.." + std::to_string(shape[k]));
            r.idx.push_back(static_cast<std::size_t>(i));
        }
        r.v = detail::parse_value(f[K + 1], lineno);
        T = std::max(T, r.t);
        rows.push_back(std::move(r));
    }
    if (T == 0) throw InputError("cli-io/grid", "no data rows");
    const std::size_t d = numel(shape);
    Eigen::MatrixXd data(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(T));
    std::vector<bool> seen(d * T, false);
    for (const auto& r : rows) {
        std::size_t off = 0;
        for (std::size_t k = K; k-- > 0;) off = off * shape[k] + (r.idx[k] - 1);
        const std::size_t cell = off + d * (r.t - 1);
        if (seen[cell]) throw InputError("cli-io/duplicate", "duplicate cell " + detail::coord_string(r.t, r.idx));
        seen[cell] = true;
        data(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(r.t - 1)) = r.v;
    }
    for (std::size_t cell = 0; cell < seen.size(); ++cell) {
        if (seen[cell]) continue;
        std::size_t off = cell % d;
        const std::size_t t = cell / d + 1;
        std::vector<std::size_t> idx(K);
        for (std::size_t k = 0; k < K; ++k) {
            idx[k] = off % shape[k] + 1;
            off /= shape[k];
        }
        throw InputError("cli-io/missing", "missing cell " + detail::coord_string(t, idx));
    }
    return TensorSeries(shape, std::move(data));
}

inline TensorSeries read_series(const std::string& path, const Shape& shape) {
    std::ifstream f(path);
    if (!f) throw InputError("cli-io/open", "cannot open '" + path + "'");
    return read_series(f, shape);
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Rows ordered by t, then by the canonical (first index fastest) layout.
inline void write_series(std::ostream& out, const TensorSeries& s, std::size_t t0 = 1) {
    const Shape& shape = s.shape();
    const std::size_t K = shape.size();
    out << "t";
    for (std::size_t k = 0; k < K; ++k) out << ",i" << (k + 1);
    out << ",value\n";
    std::vector<std::size_t> idx(K);
    for (Eigen::Index t = 0; t < s.length(); ++t) {
        for (Eigen::Index j = 0; j < s.dim(); ++j) {
            std::size_t off = static_cast<std::size_t>(j);
            out << (static_cast<std::size_t>(t) + t0);
            for (std::size_t k = 0; k < K; ++k) {
                out << ',' << (off % shape[k] + 1);
                off /= shape[k];
            }
            out << ',' << format_double(s.data()(j, t)) << '\n';
        }
    }
}

inline void write_series(const std::string& path, const TensorSeries& s, std::size_t t0 = 1) {
    std::ofstream f(path);
    if (!f) throw InputError("cli-io/open", "cannot write '" + path + "'");
    write_series(f, s, t0);
}

}  // namespace cpfactor::io
