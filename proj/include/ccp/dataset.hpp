#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ccp/core.hpp"

namespace ccp {

struct DataMatrix {
    Matrix values;  // M samples x I features
    std::vector<std::string> feature_names;

    std::size_t samples() const { return values.rows(); }
    std::size_t features() const { return values.cols(); }
};

struct LabelVector {
    std::vector<int> labels;       // in {0..num_classes-1}
    int num_classes = 0;
    std::vector<std::string> names;  // class id -> original label text

    std::size_t size() const { return labels.size(); }
};

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct SplitPlan {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::vector<Fold> folds;
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
    // strip surrounding whitespace
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out, std::chars_format::general);
    return ec == std::errc{} && ptr == end && std::isfinite(out);
}

inline std::string trim_cell(std::string s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(trim_cell(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cells.push_back(trim_cell(cur));
    return cells;
}

}  // namespace detail

// Shifts every column to mean 0 and scales to unit population standard
// deviation; zero-variance columns stay at 0 after centering.
inline void standardize_columns(Matrix& m) {
    const std::size_t M = m.rows(), I = m.cols();
    if (M == 0) return;
    for (std::size_t j = 0; j < I; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < M; ++r) mean += m(r, j);
        mean /= static_cast<double>(M);
        double var = 0.0;
        for (std::size_t r = 0; r < M; ++r) {
            const double d = m(r, j) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(M));
        for (std::size_t r = 0; r < M; ++r) {
            m(r, j) = sd > 0.0 ? (m(r, j) - mean) / sd : m(r, j) - mean;
        }
    }
}

/// Loads a UTF-8 comma-separated table with one header row. The optional label
/// column is removed from the matrix and mapped to integer class ids.
inline std::pair<DataMatrix, std::optional<LabelVector>> load_csv(
    const std::string& path, std::optional<std::string> label_column = std::nullopt,
    bool standardize = false) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty table: " + path);
    const std::vector<std::string> header = detail::split_csv_line(line);
    const std::size_t n_cols = header.size();

    std::ptrdiff_t label_idx = -1;
    if (label_column) {
        for (std::size_t j = 0; j < n_cols; ++j)
            if (header[j] == *label_column) label_idx = static_cast<std::ptrdiff_t>(j);
        if (label_idx < 0)
            throw DataError("label column not found: " + *label_column);
    }

    std::vector<double> values;
    std::vector<std::string> raw_labels;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != n_cols)
            throw DataError("ragged row " + std::to_string(rows + 2) + " in " + path);
        for (std::size_t j = 0; j < n_cols; ++j) {
            if (static_cast<std::ptrdiff_t>(j) == label_idx) {
                raw_labels.push_back(cells[j]);
                continue;
            }
            double x;
            if (!detail::parse_double(cells[j], x))
                throw DataError("non-numeric cell '" + cells[j] + "' at row " +
                                std::to_string(rows + 2) + ", column " + header[j]);
            values.push_back(x);
        }
        ++rows;
    }
    if (rows == 0) throw DataError("empty table: " + path);

    const std::size_t n_features = label_idx >= 0 ? n_cols - 1 : n_cols;
    if (n_features == 0) throw DataError("no feature columns in " + path);

    DataMatrix data;
    data.values = Matrix(rows, n_features);
    data.values.data() = std::move(values);
    for (std::size_t j = 0; j < n_cols; ++j)
        if (static_cast<std::ptrdiff_t>(j) != label_idx) data.feature_names.push_back(header[j]);

    std::optional<LabelVector> labels;
    if (label_idx >= 0) {
        LabelVector lv;
        // Keep integer labels that already form {0..L-1}; otherwise map by
        // first appearance.
        bool all_int = true;
        std::vector<long long> as_int(raw_labels.size());
        for (std::size_t m = 0; m < raw_labels.size(); ++m) {
            const std::string& s = raw_labels[m];
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), as_int[m]);
            if (ec != std::errc{} || ptr != s.data() + s.size()) {
                all_int = false;
                break;
            }
        }
        bool direct = false;
        if (all_int && !as_int.empty()) {
            const auto [lo, hi] = std::minmax_element(as_int.begin(), as_int.end());
            if (*lo == 0 && *hi < static_cast<long long>(raw_labels.size())) {
                std::vector<bool> seen(static_cast<std::size_t>(*hi) + 1, false);
                for (long long v : as_int) seen[static_cast<std::size_t>(v)] = true;
                direct = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
            }
        }
        if (direct) {
            lv.num_classes = static_cast<int>(1 + *std::max_element(as_int.begin(), as_int.end()));
            lv.names.resize(lv.num_classes);
            for (int c = 0; c < lv.num_classes; ++c) lv.names[c] = std::to_string(c);
            for (long long v : as_int) lv.labels.push_back(static_cast<int>(v));
        } else {
            for (const std::string& s : raw_labels) {
                auto it = std::find(lv.names.begin(), lv.names.end(), s);
                if (it == lv.names.end()) {
                    lv.names.push_back(s);
                    lv.labels.push_back(static_cast<int>(lv.names.size()) - 1);
                } else {
                    lv.labels.push_back(static_cast<int>(it - lv.names.begin()));
                }
            }
            lv.num_classes = static_cast<int>(lv.names.size());
        }
        labels = std::move(lv);
    }

    if (standardize) standardize_columns(data.values);
    return {std::move(data), std::move(labels)};
}

// Renders with 17 significant digits so finite doubles round-trip bit-identically.
inline void write_csv(const std::string& path, const DataMatrix& data,
                      const LabelVector* labels = nullptr,
                      const std::string& label_name = "label") {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    for (std::size_t j = 0; j < data.features(); ++j) {
        if (j) out << ',';
        out << (j < data.feature_names.size() ? data.feature_names[j]
                                              : "f" + std::to_string(j));
    }
    if (labels) out << ',' << label_name;
    out << '\n';
    char buf[40];
    for (std::size_t r = 0; r < data.samples(); ++r) {
        for (std::size_t j = 0; j < data.features(); ++j) {
            if (j) out << ',';
            std::snprintf(buf, sizeof buf, "%.17g", data.values(r, j));
            out << buf;
        }
        if (labels) out << ',' << labels->labels[r];
        out << '\n';
    }
}

struct SubsampleResult {
    DataMatrix data;
    std::optional<LabelVector> labels;
    std::vector<std::size_t> indices;  // positions in the original matrix
};

/// Draws ceil(fraction*M) rows uniformly without replacement; deterministic for
/// a fixed seed. Returned indices are ascending, so fraction=1 is the identity.
inline SubsampleResult subsample(const DataMatrix& data, const LabelVector* labels,
                                 double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("subsample fraction must be in (0,1]");
    const std::size_t M = data.samples();
    const std::size_t n = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(M)));

    std::vector<std::size_t> idx(M);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());

    SubsampleResult out;
    out.indices = idx;
    out.data.feature_names = data.feature_names;
    out.data.values = Matrix(n, data.features());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < data.features(); ++j)
            out.data.values(r, j) = data.values(idx[r], j);
    if (labels) {
        LabelVector lv;
        lv.num_classes = labels->num_classes;
        lv.names = labels->names;
        for (std::size_t r : idx) lv.labels.push_back(labels->labels[r]);
        out.labels = std::move(lv);
    }
    return out;
}

/// Shuffled (non-stratified) k-fold plan; test blocks partition {0..M-1} with
/// sizes differing by at most 1.
inline SplitPlan make_folds(std::size_t M, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > M) throw std::invalid_argument("fold count must satisfy 2 <= k <= M");
    std::vector<std::size_t> idx(M);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    SplitPlan plan;
    plan.seed = seed;
    plan.k = k;
    const std::size_t base = M / k, extra = M % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t sz = base + (f < extra ? 1 : 0);
        Fold fold;
        fold.test.assign(idx.begin() + pos, idx.begin() + pos + sz);
        pos += sz;
        std::sort(fold.test.begin(), fold.test.end());
        std::vector<bool> in_test(M, false);
        for (std::size_t t : fold.test) in_test[t] = true;
        for (std::size_t m = 0; m < M; ++m)
            if (!in_test[m]) fold.train.push_back(m);
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

inline nlohmann::json to_json(const SplitPlan& plan) {
    nlohmann::json folds = nlohmann::json::array();
    for (const Fold& f : plan.folds)
        folds.push_back({{"train", f.train}, {"test", f.test}});
    return {{"seed", plan.seed}, {"k", plan.k}, {"folds", folds}};
}

inline SplitPlan split_plan_from_json(const nlohmann::json& j) {
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.k = j.at("k").get<std::size_t>();
    for (const auto& f : j.at("folds")) {
        Fold fold;
        fold.train = f.at("train").get<std::vector<std::size_t>>();
        fold.test = f.at("test").get<std::vector<std::size_t>>();
        plan.folds.push_back(std::move(fold));
    }
    return plan;
}

// Row gather helper used by the CV harness.
inline DataMatrix take_rows(const DataMatrix& data, std::span<const std::size_t> rows) {
    DataMatrix out;
    out.feature_names = data.feature_names;
    out.values = Matrix(rows.size(), data.features());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < data.features(); ++j)
            out.values(r, j) = data.values(rows[r], j);
    return out;
}

inline std::vector<int> take_labels(const LabelVector& labels,
                                    std::span<const std::size_t> rows) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(labels.labels[r]);
    return out;
}

}  // namespace ccp
