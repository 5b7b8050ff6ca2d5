#pragma once

#include "bnpmix/core.hpp"
#include "bnpmix/summarize.hpp"

#include <Eigen/Core>

#include <bit>
#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace bnpmix {

/// File could not be opened, written or parsed.
struct IoError : ValidationError {
    using ValidationError::ValidationError;
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view s, const std::string& where) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw IoError(where + ": cannot parse '" + std::string(s) + "' as a number");
    }
    return v;
}

inline long parse_long(std::string_view s, const std::string& where) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw IoError(where + ": cannot parse '" + std::string(s) + "' as an integer");
    }
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw IoError("cannot write '" + path + "'");
    return out;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot read '" + path + "'");
    return in;
}

inline bool blank(std::string_view s) { return s.find_first_not_of(" \t\r") == std::string_view::npos; }

}  // namespace detail

/// Prefixes every line of `text` with "# ".
inline std::string comment_block(const std::string& text) {
    std::string out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out += "# " + line + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Dataset and labels
// ---------------------------------------------------------------------------

/// Headerless comma-separated rows. Lines starting with '#' are skipped.
inline Dataset read_dataset_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line) || line[0] == '#') continue;
        std::vector<double> row;
        for (auto f : detail::split(line, ',')) row.push_back(detail::parse_double(f, path + ":" + std::to_string(lineno)));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                          " columns");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError(path + ": no observations");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return Dataset(std::move(x));
}

inline void write_dataset_csv(const std::string& path, const Dataset& d, const std::string& header = {}) {
    auto out = detail::open_out(path);
    out << comment_block(header);
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t j = 0; j < d.dim(); ++j) {
            if (j) out << ',';
            out << detail::fmt_double(d.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        out << '\n';
    }
}

/// One positive integer per line; relabelled by first appearance.
inline Partition read_labels(const std::string& path) {
    auto in = detail::open_in(path);
    std::vector<int> raw;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::blank(line) || line[0] == '#') continue;
        raw.push_back(static_cast<int>(detail::parse_long(line, path + ":" + std::to_string(lineno))));
    }
    return relabel_contiguous(raw);
}

inline void write_labels(const std::string& path, const Partition& z, const std::string& header = {}) {
    auto out = detail::open_out(path);
    out << comment_block(header);
    for (int l : z.labels()) out << l << '\n';
}

// ---------------------------------------------------------------------------
// Trace files
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTraceHeader = "chain\titer\tt\tlogpost\talpha\tlabels";

inline void write_trace(std::ostream& out, std::span<const SampleTrace> traces, const std::string& header = {}) {
    out << comment_block(header) << kTraceHeader << '\n';
    for (const auto& tr : traces) {
        for (const auto& r : tr.records()) {
            out << tr.chain_id() << '\t' << r.iter << '\t' << r.t() << '\t' << detail::fmt_double(r.log_post) << '\t'
                << (r.alpha ? detail::fmt_double(*r.alpha) : "NA") << '\t';
            const auto& l = r.partition.labels();
            for (std::size_t i = 0; i < l.size(); ++i) {
                if (i) out << ' ';
                out << l[i];
            }
            out << '\n';
        }
    }
}

inline void write_trace(const std::string& path, std::span<const SampleTrace> traces, const std::string& header = {}) {
    auto out = detail::open_out(path);
    write_trace(out, traces, header);
}

/// Traces in order of first appearance of each chain id.
inline std::vector<SampleTrace> read_trace(const std::string& path) {
    auto in = detail::open_in(path);
    std::vector<SampleTrace> out;
    std::string line;
    long lineno = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::blank(line) || line[0] == '#') continue;
        if (!seen_header) {
            if (line != kTraceHeader) throw IoError(path + ": missing trace header line");
            seen_header = true;
            continue;
        }
        const std::string where = path + ":" + std::to_string(lineno);
        const auto f = detail::split(line, '\t');
        if (f.size() != 6) throw IoError(where + ": expected 6 tab-separated fields");
        const int chain = static_cast<int>(detail::parse_long(f[0], where));
        TraceRecord r;
        r.iter = detail::parse_long(f[1], where);
        const long t = detail::parse_long(f[2], where);
        r.log_post = detail::parse_double(f[3], where);
        if (f[4] != "NA") r.alpha = detail::parse_double(f[4], where);
        std::vector<int> labels;
        for (auto tok : detail::split(f[5], ' ')) {
            if (!tok.empty()) labels.push_back(static_cast<int>(detail::parse_long(tok, where)));
        }
        try {
            r.partition = Partition(std::move(labels));
        } catch (const ValidationError& e) {
            throw IoError(where + ": " + e.what());
        }
        if (r.t() != t) throw IoError(where + ": t column disagrees with the labels");
        auto it = std::find_if(out.begin(), out.end(), [chain](const SampleTrace& s) { return s.chain_id() == chain; });
        if (it == out.end()) {
            out.emplace_back(chain);
            it = out.end() - 1;
        }
        it->push(std::move(r));
    }
    if (!seen_header) throw IoError(path + ": missing trace header line");
    return out;
}

// ---------------------------------------------------------------------------
// PSM binary
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void put_le(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw IoError("truncated PSM file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace detail

/// "PSM1", uint32 N, then N*N float64 row-major, all little-endian.
inline void write_psm(const std::string& path, const Psm& psm) {
    auto out = detail::open_out(path, std::ios::out | std::ios::binary);
    out.write("PSM1", 4);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(psm.n()));
    for (std::size_t i = 0; i < psm.n(); ++i) {
        for (std::size_t j = 0; j < psm.n(); ++j) detail::put_le<double>(out, psm(i, j));
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline Psm read_psm(const std::string& path) {
    auto in = detail::open_in(path, std::ios::in | std::ios::binary);
    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != "PSM1") throw IoError(path + ": not a PSM1 file");
    const auto n = detail::get_le<std::uint32_t>(in);
    Eigen::MatrixXd p(n, n);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < n; ++j) p(i, j) = detail::get_le<double>(in);
    }
    return Psm(std::move(p));
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

inline void write_summary(std::ostream& out, const SummaryResult& s) {
    const auto plus = s.method.find('+');
    out << "method = " << s.method << '\n';
    out << "loss = " << (plus == std::string::npos ? s.method : s.method.substr(0, plus)) << '\n';
    out << "value = " << detail::fmt_double(s.value) << '\n';
    out << "num_clusters = " << s.num_clusters << '\n';
    out << "candidates = " << s.candidates << '\n';
    if (s.degenerate) out << "degenerate = true\n";
    out << "labels =";
    for (int l : s.partition.labels()) out << ' ' << l;
    out << "\n\n";
}

}  // namespace bnpmix
