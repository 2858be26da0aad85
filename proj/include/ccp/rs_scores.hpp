#pragma once

#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccp/core.hpp"
#include "ccp/dataset.hpp"

namespace ccp {

struct RsReport {
    std::vector<double> R;    // per sample, [0,1]
    std::vector<double> S;    // per sample, [0,1]
    std::vector<double> cri;  // per class mean of R
    std::vector<double> csi;  // per class mean of S
    double ri = 0.0;
    double si = 0.0;
    double rsd = 0.0;  // ri - si
    double rsi = 0.0;  // 1 - |ri - si|
};

namespace detail {

inline void check_labels(std::size_t M, const LabelVector& labels) {
    if (labels.size() != M) throw std::invalid_argument("label length mismatch");
    if (M == 0) throw std::invalid_argument("empty input");
    std::vector<std::size_t> count(static_cast<std::size_t>(labels.num_classes), 0);
    for (int l : labels.labels) {
        if (l < 0 || l >= labels.num_classes)
            throw std::invalid_argument("label id out of range");
        ++count[static_cast<std::size_t>(l)];
    }
    for (int c = 0; c < labels.num_classes; ++c)
        if (count[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument("class " + std::to_string(c) + " has no members");
}

}  // namespace detail

/// Residue score (normalized inter-class distance sum) and similarity score
/// (average intra-class proximity, self term included). Degenerate cases:
/// R = 0 everywhere when R_max = 0, S = 1 everywhere when d_max = 0.
inline std::pair<std::vector<double>, std::vector<double>> rs_scores(
    const Matrix& points, const LabelVector& labels) {
    const std::size_t M = points.rows();
    detail::check_labels(M, labels);

    // two row-parallel passes keep memory at O(M) even for large point sets
    std::vector<double> row_max(M, 0.0);
    parallel_for(M, [&](std::size_t m) {
        double best = 0.0;
        for (std::size_t j = 0; j < M; ++j)
            best = std::max(best, euclidean(points.row(m), points.row(j)));
        row_max[m] = best;
    });
    double d_max = 0.0;
    for (double x : row_max) d_max = std::max(d_max, x);

    std::vector<std::size_t> class_size(static_cast<std::size_t>(labels.num_classes), 0);
    for (int l : labels.labels) ++class_size[static_cast<std::size_t>(l)];

    std::vector<double> raw_r(M, 0.0), s_sum(M, 0.0);
    parallel_for(M, [&](std::size_t m) {
        const int l = labels.labels[m];
        double r = 0.0, s = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            const double d = euclidean(points.row(m), points.row(j));
            if (labels.labels[j] != l) {
                r += d;
            } else {
                s += d_max > 0.0 ? 1.0 - d / d_max : 1.0;
            }
        }
        raw_r[m] = r;
        s_sum[m] = s;
    });
    const double r_max = *std::max_element(raw_r.begin(), raw_r.end());
    std::vector<double> R(M), S(M);
    for (std::size_t m = 0; m < M; ++m) {
        R[m] = r_max > 0.0 ? raw_r[m] / r_max : 0.0;
        S[m] = s_sum[m] / static_cast<double>(class_size[static_cast<std::size_t>(
                   labels.labels[m])]);
    }
    return {std::move(R), std::move(S)};
}

/// Class and global indices derived from per-sample R and S.
inline RsReport rs_indices(std::vector<double> R, std::vector<double> S,
                           const LabelVector& labels) {
    const std::size_t M = R.size();
    if (S.size() != M) throw std::invalid_argument("R/S length mismatch");
    detail::check_labels(M, labels);

    const auto L = static_cast<std::size_t>(labels.num_classes);
    RsReport rep;
    rep.R = std::move(R);
    rep.S = std::move(S);
    rep.cri.assign(L, 0.0);
    rep.csi.assign(L, 0.0);
    std::vector<std::size_t> count(L, 0);
    for (std::size_t m = 0; m < M; ++m) {
        const auto l = static_cast<std::size_t>(labels.labels[m]);
        rep.cri[l] += rep.R[m];
        rep.csi[l] += rep.S[m];
        ++count[l];
    }
    for (std::size_t l = 0; l < L; ++l) {
        rep.cri[l] /= static_cast<double>(count[l]);
        rep.csi[l] /= static_cast<double>(count[l]);
    }
    rep.ri = mean_of(rep.cri);
    rep.si = mean_of(rep.csi);
    rep.rsd = rep.ri - rep.si;
    rep.rsi = 1.0 - std::abs(rep.ri - rep.si);
    return rep;
}

inline RsReport rs_report(const Matrix& points, const LabelVector& labels) {
    auto [R, S] = rs_scores(points, labels);
    return rs_indices(std::move(R), std::move(S), labels);
}

inline nlohmann::json rs_report_to_json(const RsReport& rep) {
    return {{"R", rep.R},     {"S", rep.S},     {"cri", rep.cri}, {"csi", rep.csi},
            {"ri", rep.ri},   {"si", rep.si},   {"rsd", rep.rsd}, {"rsi", rep.rsi}};
}

/// CSV behind the per-class R-S panels: one row per sample, grouped by true
/// label. Columns: sample_id, true_label[, predicted_label], R, S.
inline void rs_chart_export(const Matrix& points, const LabelVector& labels,
                            const LabelVector* predicted, const std::string& path) {
    if (predicted && predicted->size() != static_cast<std::size_t>(points.rows()))
        throw std::invalid_argument("predicted label length mismatch");
    const auto [R, S] = rs_scores(points, labels);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "sample_id,true_label";
    if (predicted) out << ",predicted_label";
    out << ",R,S\n";
    std::vector<std::size_t> order(points.rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return labels.labels[a] < labels.labels[b];
    });
    char buf[96];
    for (std::size_t m : order) {
        out << m << ',' << labels.labels[m];
        if (predicted) out << ',' << predicted->labels[m];
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g", R[m], S[m]);
        out << buf << '\n';
    }
}

}  // namespace ccp
