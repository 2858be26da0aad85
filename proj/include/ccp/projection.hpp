#pragma once

#include <cstring>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "ccp/centrality.hpp"
#include "ccp/clustering.hpp"
#include "ccp/core.hpp"
#include "ccp/dataset.hpp"
#include "ccp/feature_metrics.hpp"
#include "ccp/kernel.hpp"

namespace ccp {

/// Fitted reducer: feature partition plus per-cluster kernel scale, cutoff and
/// retained training rows.
struct CcpModel {
    FeaturePartition partition;
    KernelConfig kernel;
    Metric metric = Metric::covariance;
    std::vector<double> etas;     // per cluster, > 0
    std::vector<double> cutoffs;  // per cluster, > 0 or +inf
    std::vector<Matrix> train_clusters;  // M_train x |S^n|
    bool standardize_flag = true;
    std::size_t n_features = 0;
    std::uint64_t seed = 0;

    std::size_t n_clusters() const { return partition.n_clusters; }
    std::size_t train_rows() const {
        return train_clusters.empty() ? 0 : train_clusters[0].rows();
    }
};

/// M x N reduced representation; entries are non-negative kernel sums.
struct Embedding {
    Matrix values;
};

namespace detail {

inline Matrix gather_cluster(const Matrix& rows, std::span<const std::size_t> features) {
    Matrix out(rows.rows(), features.size());
    for (std::size_t r = 0; r < rows.rows(); ++r)
        for (std::size_t k = 0; k < features.size(); ++k)
            out(r, k) = rows(r, features[k]);
    return out;
}

}  // namespace detail

/// Fits a CCP model on training rows: partition features, then per cluster
/// compute eta and the cutoff from training rows only.
inline CcpModel fit(const DataMatrix& train, std::size_t N, Metric metric,
                    const KernelConfig& kernel, std::uint64_t seed,
                    PartitionScheme scheme = PartitionScheme::correlated,
                    UpdateRule rule = UpdateRule::min_sum, bool standardize_flag = true,
                    std::size_t max_iter = 300) {
    if (train.samples() < 2) throw std::invalid_argument("fit needs at least 2 training rows");
    if (N > train.features()) throw std::invalid_argument("N exceeds feature count");

    CcpModel model;
    model.kernel = kernel;
    model.metric = metric;
    model.standardize_flag = standardize_flag;
    model.n_features = train.features();
    model.seed = seed;

    if (scheme == PartitionScheme::correlated) {
        // standardization applies to the clustering metric only; projection
        // uses raw feature values
        DataMatrix for_metric = train;
        if (standardize_flag) standardize_columns(for_metric.values);
        const DistanceMatrix D = feature_distance_matrix(for_metric, metric);
        model.partition = kmedoids_partition(D, N, seed, max_iter, rule, &for_metric);
    } else if (scheme == PartitionScheme::random_equal) {
        model.partition = random_equal_partition(train.features(), N, seed);
    } else {
        model.partition = equal_variance_partition(train, N);
    }

    const auto members = model.partition.members();
    model.etas.resize(N);
    model.cutoffs.resize(N);
    model.train_clusters.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
        model.train_clusters[n] = detail::gather_cluster(train.values, members[n]);
        model.etas[n] = cluster_scale_eta(model.train_clusters[n]);
        model.cutoffs[n] = cluster_cutoff(model.train_clusters[n], kernel.cutoff);
    }
    return model;
}

namespace detail {

// Cell list over a low-dimensional cluster: cubic cells of side r_c keyed by a
// linear id over the occupied bounding grid.
struct CellList {
    double cell = 0.0;
    std::vector<double> lo;
    std::vector<std::size_t> dims;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells;
    bool valid = false;

    static CellList build(const Matrix& pts, double r_c) {
        CellList cl;
        const std::size_t d = pts.cols(), M = pts.rows();
        if (d == 0 || d > 6 || !std::isfinite(r_c) || !(r_c > 0.0)) return cl;
        cl.cell = r_c;
        cl.lo.assign(d, std::numeric_limits<double>::infinity());
        std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t k = 0; k < d; ++k) {
                cl.lo[k] = std::min(cl.lo[k], pts(m, k));
                hi[k] = std::max(hi[k], pts(m, k));
            }
        cl.dims.resize(d);
        double total = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            cl.dims[k] = static_cast<std::size_t>((hi[k] - cl.lo[k]) / r_c) + 1;
            total *= static_cast<double>(cl.dims[k]);
        }
        if (total > 5e7) return cl;  // grid too fine, caller falls back
        for (std::uint32_t m = 0; m < M; ++m)
            cl.cells[cl.cell_id(pts.row(m))].push_back(m);
        cl.valid = true;
        return cl;
    }

    std::uint64_t cell_id(std::span<const double> p) const {
        std::uint64_t id = 0;
        for (std::size_t k = 0; k < dims.size(); ++k) {
            auto c = static_cast<std::int64_t>((p[k] - lo[k]) / cell);
            c = std::clamp<std::int64_t>(c, 0, static_cast<std::int64_t>(dims[k]) - 1);
            id = id * dims[k] + static_cast<std::uint64_t>(c);
        }
        return id;
    }

    // Train indices in the 3^d cells around p, sorted ascending so summation
    // order matches the naive loop.
    std::vector<std::uint32_t> candidates(std::span<const double> p) const {
        const std::size_t d = dims.size();
        std::vector<std::int64_t> base(d);
        for (std::size_t k = 0; k < d; ++k)
            base[k] = static_cast<std::int64_t>((p[k] - lo[k]) / cell);
        std::vector<std::uint32_t> out;
        std::vector<std::int64_t> off(d, -1);
        for (;;) {
            bool in_range = true;
            std::uint64_t id = 0;
            for (std::size_t k = 0; k < d; ++k) {
                const std::int64_t c = base[k] + off[k];
                if (c < 0 || c >= static_cast<std::int64_t>(dims[k])) {
                    in_range = false;
                    break;
                }
                id = id * dims[k] + static_cast<std::uint64_t>(c);
            }
            if (in_range) {
                auto it = cells.find(id);
                if (it != cells.end())
                    out.insert(out.end(), it->second.begin(), it->second.end());
            }
            std::size_t k = 0;
            while (k < d && off[k] == 1) off[k++] = -1;
            if (k == d) break;
            ++off[k];
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

}  // namespace detail

/// Rigidity projection: x_i^n is the sum of kernel values between sample i and
/// every retained training row over cluster n's features. A cell-list path is
/// used for low-dimensional clusters with a finite cutoff; it skips only terms
/// that are exactly zero, so it is bit-identical to the full sum.
inline Embedding transform(const CcpModel& model, const DataMatrix& samples) {
    if (samples.features() != model.n_features)
        throw std::invalid_argument("sample feature count does not match model");
    const std::size_t N = model.n_clusters(), M = samples.samples();
    Embedding emb;
    emb.values = Matrix(M, N);
    const auto members = model.partition.members();

    for (std::size_t n = 0; n < N; ++n) {
        const Matrix query = detail::gather_cluster(samples.values, members[n]);
        const Matrix& train = model.train_clusters[n];
        const double eta = model.etas[n], r_c = model.cutoffs[n];
        const KernelConfig& k = model.kernel;

        const auto cl = detail::CellList::build(train, r_c);
        parallel_for(M, [&](std::size_t i) {
            double sum = 0.0;
            if (cl.valid) {
                for (std::uint32_t m : cl.candidates(query.row(i)))
                    sum += kernel_eval(euclidean(query.row(i), train.row(m)), k.family,
                                       k.kappa, k.tau, eta, r_c);
            } else {
                for (std::size_t m = 0; m < train.rows(); ++m)
                    sum += kernel_eval(euclidean(query.row(i), train.row(m)), k.family,
                                       k.kappa, k.tau, eta, r_c);
            }
            emb.values(i, n) = sum;
        });
    }
    return emb;
}

/// Graph-centrality projection: per cluster, nodes are the training rows plus
/// any query rows not bit-identical to a training row; edges connect nodes
/// closer than rc_fraction * d_max.
inline Embedding centrality_project(const CcpModel& model, const DataMatrix& samples,
                                    CentralityKind kind, double rc_fraction = 0.7) {
    if (samples.features() != model.n_features)
        throw std::invalid_argument("sample feature count does not match model");
    if (!(rc_fraction > 0.0) || rc_fraction > 1.0)
        throw std::invalid_argument("rc_fraction must be in (0,1]");
    const std::size_t N = model.n_clusters(), Mq = samples.samples();
    Embedding emb;
    emb.values = Matrix(Mq, N);
    const auto members = model.partition.members();

    for (std::size_t n = 0; n < N; ++n) {
        const Matrix query = detail::gather_cluster(samples.values, members[n]);
        const Matrix& train = model.train_clusters[n];
        const std::size_t Mt = train.rows();

        // node table: train rows first, then distinct query rows
        std::vector<std::vector<double>> nodes;
        nodes.reserve(Mt + Mq);
        for (std::size_t m = 0; m < Mt; ++m) {
            auto r = train.row(m);
            nodes.emplace_back(r.begin(), r.end());
        }
        std::vector<std::size_t> query_node(Mq);
        for (std::size_t i = 0; i < Mq; ++i) {
            auto r = query.row(i);
            std::vector<double> v(r.begin(), r.end());
            std::size_t hit = nodes.size();
            for (std::size_t u = 0; u < nodes.size(); ++u)
                if (nodes[u] == v) {
                    hit = u;
                    break;
                }
            if (hit == nodes.size()) nodes.push_back(std::move(v));
            query_node[i] = hit;
        }

        const std::size_t V = nodes.size();
        double d_max = 0.0;
        for (std::size_t a = 0; a < V; ++a)
            for (std::size_t b = a + 1; b < V; ++b)
                d_max = std::max(d_max, euclidean(nodes[a], nodes[b]));
        const double r_c = rc_fraction * d_max;

        Graph g;
        g.adj.resize(V);
        for (std::size_t a = 0; a < V; ++a)
            for (std::size_t b = a + 1; b < V; ++b)
                if (euclidean(nodes[a], nodes[b]) < r_c) {
                    g.adj[a].push_back(b);
                    g.adj[b].push_back(a);
                }

        const std::vector<double> cent = compute_centrality(g, kind);
        for (std::size_t i = 0; i < Mq; ++i) emb.values(i, n) = cent[query_node[i]];
    }
    return emb;
}

// ---- serialization ----

inline nlohmann::json model_to_json(const CcpModel& model) {
    return {{"version", 1},
            {"kernel", kernel_to_json(model.kernel)},
            {"partition", partition_to_json(model.partition, model.metric, model.seed)},
            {"etas", model.etas},
            {"cutoffs", model.cutoffs},
            {"standardize_flag", model.standardize_flag},
            {"n_features", model.n_features}};
}

// Sidecar layout: magic "CCPM", u32 N, then per cluster u32 rows, u32 cols,
// f64 data row-major.
inline void save_model(const std::string& json_path, const std::string& bin_path,
                       const CcpModel& model) {
    {
        std::ofstream out(json_path);
        if (!out) throw DataError("cannot write file: " + json_path);
        out << model_to_json(model).dump(2) << '\n';
    }
    std::ofstream out(bin_path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + bin_path);
    out.write("CCPM", 4);
    const std::uint32_t N = static_cast<std::uint32_t>(model.train_clusters.size());
    out.write(reinterpret_cast<const char*>(&N), 4);
    for (const Matrix& m : model.train_clusters) {
        const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
        const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
        out.write(reinterpret_cast<const char*>(&rows), 4);
        out.write(reinterpret_cast<const char*>(&cols), 4);
        out.write(reinterpret_cast<const char*>(m.data().data()),
                  static_cast<std::streamsize>(m.data().size() * sizeof(double)));
    }
}

inline CcpModel load_model(const std::string& json_path, const std::string& bin_path) {
    std::ifstream jin(json_path);
    if (!jin) throw DataError("cannot open file: " + json_path);
    nlohmann::json j = nlohmann::json::parse(jin);
    CcpModel model;
    model.kernel = kernel_from_json(j.at("kernel"));
    model.partition = partition_from_json(j.at("partition"));
    model.metric = metric_from_name(j.at("partition").value("metric", "covariance"));
    model.seed = j.at("partition").value("seed", std::uint64_t{0});
    model.etas = j.at("etas").get<std::vector<double>>();
    model.cutoffs = j.at("cutoffs").get<std::vector<double>>();
    model.standardize_flag = j.at("standardize_flag").get<bool>();
    model.n_features = j.at("n_features").get<std::size_t>();

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + bin_path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CCPM", 4) != 0)
        throw DataError("not a model sidecar file: " + bin_path);
    std::uint32_t N = 0;
    in.read(reinterpret_cast<char*>(&N), 4);
    model.train_clusters.resize(N);
    for (std::uint32_t n = 0; n < N; ++n) {
        std::uint32_t rows = 0, cols = 0;
        in.read(reinterpret_cast<char*>(&rows), 4);
        in.read(reinterpret_cast<char*>(&cols), 4);
        Matrix m(rows, cols);
        in.read(reinterpret_cast<char*>(m.data().data()),
                static_cast<std::streamsize>(m.data().size() * sizeof(double)));
        model.train_clusters[n] = std::move(m);
    }
    if (!in) throw DataError("truncated model sidecar file: " + bin_path);
    return model;
}

/// Embedding CSV with header x1..xN and an optional trailing label column.
inline void save_embedding_csv(const std::string& path, const Embedding& emb,
                               const LabelVector* labels = nullptr) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    for (std::size_t n = 0; n < emb.values.cols(); ++n) {
        if (n) out << ',';
        out << 'x' << (n + 1);
    }
    if (labels) out << ",label";
    out << '\n';
    char buf[40];
    for (std::size_t r = 0; r < emb.values.rows(); ++r) {
        for (std::size_t n = 0; n < emb.values.cols(); ++n) {
            if (n) out << ',';
            std::snprintf(buf, sizeof buf, "%.17g", emb.values(r, n));
            out << buf;
        }
        if (labels) out << ',' << labels->labels[r];
        out << '\n';
    }
}

}  // namespace ccp
