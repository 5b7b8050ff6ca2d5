#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace bnpmix {

/// Invalid arguments or configuration supplied by the caller.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Input data that cannot support the requested transformation.
struct DegenerateDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A matrix factorisation or density evaluation broke down.
struct NumericDegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// N x p matrix of real observations, one row per observation.
class Dataset {
public:
    Dataset() = default;

    explicit Dataset(Eigen::MatrixXd values, bool standardized = false)
        : values_(std::move(values)), standardized_(standardized) {
        if (values_.rows() < 1 || values_.cols() < 1) {
            throw ValidationError("dataset must have at least one row and one column");
        }
        if (!values_.allFinite()) {
            throw ValidationError("dataset contains non-finite entries");
        }
    }

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    [[nodiscard]] bool standardized() const noexcept { return standardized_; }
    [[nodiscard]] const Eigen::MatrixXd& values() const noexcept { return values_; }

    [[nodiscard]] auto row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)); }

private:
    Eigen::MatrixXd values_;
    bool standardized_ = false;
};

/// Column-wise (x - mean) / sd copy, sd with denominator N - 1.
inline Dataset standardize(const Dataset& data) {
    if (data.n() < 2) {
        throw DegenerateDataError("standardize needs at least two observations");
    }
    Eigen::MatrixXd out = data.values();
    const double denom = static_cast<double>(data.n()) - 1.0;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const double mean = out.col(c).mean();
        out.col(c).array() -= mean;
        const double sd = std::sqrt(out.col(c).squaredNorm() / denom);
        if (!(sd > 0.0) || !std::isfinite(sd)) {
            throw DegenerateDataError("column " + std::to_string(c + 1) + " has zero variance");
        }
        out.col(c) /= sd;
    }
    return Dataset(std::move(out), true);
}

/// Set partition of N observations with contiguous 1-based cluster ids.
class Partition {
public:
    Partition() = default;

    /// Labels must already be contiguous, i.e. every id in 1..T occurs.
    explicit Partition(std::vector<int> labels) : labels_(std::move(labels)) {
        int t = 0;
        for (int l : labels_) {
            if (l < 1) throw ValidationError("cluster labels must be positive");
            t = std::max(t, l);
        }
        sizes_.assign(static_cast<std::size_t>(t), 0);
        for (int l : labels_) ++sizes_[static_cast<std::size_t>(l - 1)];
        for (std::size_t k = 0; k < sizes_.size(); ++k) {
            if (sizes_[k] == 0) {
                throw ValidationError("labels are not contiguous: id " + std::to_string(k + 1) + " unused");
            }
        }
    }

    [[nodiscard]] const std::vector<int>& labels() const noexcept { return labels_; }
    [[nodiscard]] const std::vector<int>& sizes() const noexcept { return sizes_; }
    [[nodiscard]] int t() const noexcept { return static_cast<int>(sizes_.size()); }
    [[nodiscard]] std::size_t n() const noexcept { return labels_.size(); }
    [[nodiscard]] int operator[](std::size_t i) const { return labels_[i]; }

    /// Observation indices (0-based) grouped by cluster.
    [[nodiscard]] std::vector<std::vector<std::size_t>> members() const {
        std::vector<std::vector<std::size_t>> out(sizes_.size());
        for (std::size_t k = 0; k < sizes_.size(); ++k) out[k].reserve(static_cast<std::size_t>(sizes_[k]));
        for (std::size_t i = 0; i < labels_.size(); ++i) out[static_cast<std::size_t>(labels_[i] - 1)].push_back(i);
        return out;
    }

    friend bool operator==(const Partition& a, const Partition& b) { return a.labels_ == b.labels_; }

private:
    std::vector<int> labels_;
    std::vector<int> sizes_;
};

/// Relabels by order of first appearance; the induced set partition is kept.
inline Partition relabel_contiguous(std::span<const int> raw) {
    if (raw.empty()) throw ValidationError("relabel_contiguous needs a non-empty label vector");
    std::unordered_map<int, int> map;
    std::vector<int> out;
    out.reserve(raw.size());
    for (int l : raw) {
        if (l < 1) throw ValidationError("raw labels must be positive integers");
        auto [it, inserted] = map.try_emplace(l, static_cast<int>(map.size()) + 1);
        out.push_back(it->second);
    }
    return Partition(std::move(out));
}

inline Partition relabel_contiguous(const std::vector<int>& raw) {
    return relabel_contiguous(std::span<const int>(raw));
}

/// True when both label vectors induce the same set partition.
inline bool same_set_partition(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) return false;
    std::unordered_map<int, int> fwd, bwd;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto [f, fi] = fwd.try_emplace(a[i], b[i]);
        auto [r, ri] = bwd.try_emplace(b[i], a[i]);
        if (f->second != b[i] || r->second != a[i]) return false;
    }
    return true;
}

struct TraceRecord {
    long iter = 0;
    Partition partition;
    double log_post = 0.0;
    std::optional<double> alpha;

    [[nodiscard]] int t() const noexcept { return partition.t(); }
};

/// Retained samples of a single chain, in increasing iteration order.
class SampleTrace {
public:
    SampleTrace() = default;
    explicit SampleTrace(int chain_id) : chain_id_(chain_id) {}

    void push(TraceRecord rec) {
        if (!records_.empty() && rec.iter <= records_.back().iter) {
            throw ValidationError("trace iterations must be strictly increasing");
        }
        if (!records_.empty() && rec.partition.n() != records_.front().partition.n()) {
            throw ValidationError("trace partitions must share N");
        }
        records_.push_back(std::move(rec));
    }

    [[nodiscard]] int chain_id() const noexcept { return chain_id_; }
    [[nodiscard]] const std::vector<TraceRecord>& records() const noexcept { return records_; }
    [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
    [[nodiscard]] bool empty() const noexcept { return records_.empty(); }

private:
    int chain_id_ = 0;
    std::vector<TraceRecord> records_;
};

}  // namespace bnpmix
