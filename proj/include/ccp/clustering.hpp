#pragma once

#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccp/core.hpp"
#include "ccp/feature_metrics.hpp"

namespace ccp {

enum class UpdateRule { min_sum, center_proxy };
enum class PartitionScheme { correlated, random_equal, equal_variance };

inline std::string scheme_name(PartitionScheme s) {
    switch (s) {
        case PartitionScheme::correlated: return "correlated";
        case PartitionScheme::random_equal: return "random";
        default: return "variance";
    }
}

inline PartitionScheme scheme_from_name(const std::string& s) {
    if (s == "correlated") return PartitionScheme::correlated;
    if (s == "random" || s == "random_equal") return PartitionScheme::random_equal;
    if (s == "variance" || s == "equal_variance") return PartitionScheme::equal_variance;
    throw std::invalid_argument("unknown partition scheme: " + s);
}

struct FeaturePartition {
    std::vector<int> assignments;      // length I, cluster ids in {0..N-1}
    std::vector<std::size_t> medoids;  // length N, feature indices
    std::size_t n_clusters = 0;
    double loss = -1.0;  // -1 marks "not metric-derived"
    PartitionScheme scheme = PartitionScheme::correlated;
    bool fallback_used = false;
    std::vector<double> loss_history;  // per-iteration loss (correlated scheme)

    std::vector<std::vector<std::size_t>> members() const {
        std::vector<std::vector<std::size_t>> out(n_clusters);
        for (std::size_t i = 0; i < assignments.size(); ++i)
            out[static_cast<std::size_t>(assignments[i])].push_back(i);
        return out;
    }
};

/// Sum over clusters of member-to-medoid distances.
inline double partition_loss(const DistanceMatrix& D, std::span<const int> assignments,
                             std::span<const std::size_t> medoids) {
    if (assignments.size() != D.size)
        throw std::invalid_argument("assignment length does not match distance matrix");
    for (std::size_t n = 0; n < medoids.size(); ++n) {
        if (medoids[n] >= D.size) throw std::invalid_argument("medoid index out of range");
        if (assignments[medoids[n]] != static_cast<int>(n))
            throw std::invalid_argument("medoid not assigned to its own cluster");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const int n = assignments[i];
        if (n < 0 || static_cast<std::size_t>(n) >= medoids.size())
            throw std::invalid_argument("assignment out of range");
        loss += D(i, medoids[static_cast<std::size_t>(n)]);
    }
    return loss;
}

namespace detail {

// Metric distance between an arbitrary vector and a data column, used by the
// center_proxy update. Degenerate cases fall back to the constant-column
// convention (distance 1).
inline double proxy_distance(std::span<const double> center, std::span<const double> col,
                             Metric metric) {
    if (metric == Metric::covariance) return covariance_distance(center, col);
    const bool const_center =
        std::all_of(center.begin(), center.end(), [&](double x) { return x == center[0]; });
    const bool const_col =
        std::all_of(col.begin(), col.end(), [&](double x) { return x == col[0]; });
    if (const_center || const_col) return 1.0;
    return correlation_distance(center, col);
}

}  // namespace detail

/// k-medoids over a precomputed distance matrix. min_sum is the classical
/// update (monotone loss); center_proxy picks the member column closest to the
/// Euclidean mean of its cluster's columns and needs the data matrix.
inline FeaturePartition kmedoids_partition(const DistanceMatrix& D, std::size_t N,
                                           std::uint64_t seed, std::size_t max_iter = 300,
                                           UpdateRule rule = UpdateRule::min_sum,
                                           const DataMatrix* data = nullptr) {
    const std::size_t I = D.size;
    if (N < 1 || N > I) throw std::invalid_argument("cluster count must satisfy 1 <= N <= I");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (rule == UpdateRule::center_proxy && data == nullptr)
        throw std::invalid_argument("center_proxy update requires the data matrix");

    std::vector<std::size_t> order(I);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> medoids(order.begin(), order.begin() + N);

    std::vector<int> assignments(I, -1);
    FeaturePartition part;
    part.n_clusters = N;
    part.scheme = PartitionScheme::correlated;

    auto assign_all = [&] {
        std::vector<int> next(I);
        parallel_for(I, [&](std::size_t i) {
            int best = 0;
            double best_d = D(i, medoids[0]);
            std::size_t best_medoid = medoids[0];
            for (std::size_t n = 1; n < N; ++n) {
                const double d = D(i, medoids[n]);
                // ties go to the medoid with the lower feature index
                if (d < best_d || (d == best_d && medoids[n] < best_medoid)) {
                    best = static_cast<int>(n);
                    best_d = d;
                    best_medoid = medoids[n];
                }
            }
            next[i] = best;
        });
        return next;
    };

    auto repair_empty = [&](std::vector<int>& a) {
        for (std::size_t n = 0; n < N; ++n) {
            if (std::find(a.begin(), a.end(), static_cast<int>(n)) != a.end()) continue;
            // steal the globally farthest-from-its-medoid feature
            std::size_t victim = 0;
            double far = -1.0;
            for (std::size_t i = 0; i < I; ++i) {
                const auto cl = static_cast<std::size_t>(a[i]);
                if (i == medoids[cl]) continue;
                const double d = D(i, medoids[cl]);
                if (d > far) {
                    far = d;
                    victim = i;
                }
            }
            a[victim] = static_cast<int>(n);
            medoids[n] = victim;
        }
    };

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::vector<int> next = assign_all();
        repair_empty(next);
        if (next == assignments) break;
        assignments = std::move(next);

        std::vector<std::vector<std::size_t>> members(N);
        for (std::size_t i = 0; i < I; ++i)
            members[static_cast<std::size_t>(assignments[i])].push_back(i);

        std::vector<std::size_t> new_medoids(N);
        parallel_for(N, [&](std::size_t n) {
            const auto& mem = members[n];
            std::size_t best = mem[0];
            if (rule == UpdateRule::min_sum) {
                double best_sum = std::numeric_limits<double>::infinity();
                for (std::size_t cand : mem) {
                    double s = 0.0;
                    for (std::size_t other : mem) s += D(cand, other);
                    if (s < best_sum) {
                        best_sum = s;
                        best = cand;
                    }
                }
            } else {
                const std::size_t M = data->samples();
                std::vector<double> center(M, 0.0);
                for (std::size_t cand : mem) {
                    const auto col = data->values.col(cand);
                    for (std::size_t m = 0; m < M; ++m) center[m] += col[m];
                }
                for (double& x : center) x /= static_cast<double>(mem.size());
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t cand : mem) {
                    const double d =
                        detail::proxy_distance(center, data->values.col(cand), D.metric);
                    if (d < best_d) {
                        best_d = d;
                        best = cand;
                    }
                }
            }
            new_medoids[n] = best;
        });
        medoids = std::move(new_medoids);
        // re-anchor: medoid must sit in its own cluster
        for (std::size_t n = 0; n < N; ++n)
            assignments[medoids[n]] = static_cast<int>(n);
        part.loss_history.push_back(partition_loss(D, assignments, medoids));
    }

    part.assignments = std::move(assignments);
    part.medoids = std::move(medoids);
    part.loss = partition_loss(D, part.assignments, part.medoids);
    return part;
}

/// Seeded shuffle chunked into N near-equal contiguous blocks; loss is the -1
/// sentinel (not metric-derived).
inline FeaturePartition random_equal_partition(std::size_t I, std::size_t N,
                                               std::uint64_t seed) {
    if (N < 1 || N > I) throw std::invalid_argument("cluster count must satisfy 1 <= N <= I");
    std::vector<std::size_t> order(I);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    FeaturePartition part;
    part.n_clusters = N;
    part.scheme = PartitionScheme::random_equal;
    part.assignments.assign(I, 0);
    const std::size_t base = I / N, extra = I % N;
    std::size_t pos = 0;
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t sz = base + (n < extra ? 1 : 0);
        part.medoids.push_back(order[pos]);
        for (std::size_t k = 0; k < sz; ++k)
            part.assignments[order[pos + k]] = static_cast<int>(n);
        pos += sz;
    }
    return part;
}

/// Sorts features by normalized variance and cuts clusters greedily so each
/// holds about 1/N of the total variance; exactly N non-empty clusters.
inline FeaturePartition equal_variance_partition(const DataMatrix& data, std::size_t N) {
    const std::size_t I = data.features();
    if (N < 1 || N > I) throw std::invalid_argument("cluster count must satisfy 1 <= N <= I");

    std::vector<double> var(I);
    for (std::size_t j = 0; j < I; ++j) {
        const auto col = data.values.col(j);
        const double sd = stddev_pop(col);
        var[j] = sd * sd;
    }
    const double vmax = *std::max_element(var.begin(), var.end());
    if (vmax == 0.0) {
        FeaturePartition part = random_equal_partition(I, N, 0);
        part.scheme = PartitionScheme::equal_variance;
        part.fallback_used = true;
        return part;
    }
    for (double& v : var) v /= vmax;

    std::vector<std::size_t> order(I);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return var[a] < var[b]; });

    const double total = std::accumulate(var.begin(), var.end(), 0.0);
    const double target = total / static_cast<double>(N);

    FeaturePartition part;
    part.n_clusters = N;
    part.scheme = PartitionScheme::equal_variance;
    part.assignments.assign(I, 0);
    std::size_t cluster = 0;
    double running = 0.0;
    for (std::size_t k = 0; k < I; ++k) {
        const std::size_t j = order[k];
        if (part.medoids.size() == cluster) part.medoids.push_back(j);
        part.assignments[j] = static_cast<int>(cluster);
        running += var[j];
        const std::size_t remaining_features = I - k - 1;
        const std::size_t remaining_clusters = N - cluster - 1;
        const bool quota_met = running >= target && cluster + 1 < N;
        const bool must_cut = remaining_features == remaining_clusters && remaining_clusters > 0;
        if (quota_met || must_cut) {
            ++cluster;
            running = 0.0;
        }
    }
    return part;
}

inline nlohmann::json partition_to_json(const FeaturePartition& p,
                                        std::optional<Metric> metric = std::nullopt,
                                        std::optional<std::uint64_t> seed = std::nullopt) {
    nlohmann::json j{{"N", p.n_clusters},
                     {"assignments", p.assignments},
                     {"medoids", p.medoids},
                     {"loss", p.loss},
                     {"scheme", scheme_name(p.scheme)}};
    if (metric) j["metric"] = metric_name(*metric);
    if (seed) j["seed"] = *seed;
    if (p.fallback_used) j["fallback_used"] = true;
    return j;
}

inline FeaturePartition partition_from_json(const nlohmann::json& j) {
    FeaturePartition p;
    p.n_clusters = j.at("N").get<std::size_t>();
    p.assignments = j.at("assignments").get<std::vector<int>>();
    p.medoids = j.at("medoids").get<std::vector<std::size_t>>();
    p.loss = j.at("loss").get<double>();
    p.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    p.fallback_used = j.value("fallback_used", false);
    return p;
}

}  // namespace ccp
