#pragma once

#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccp/core.hpp"
#include "ccp/dataset.hpp"
#include "ccp/projection.hpp"

namespace ccp {

/// Majority vote over the k nearest training points (Euclidean). Distance ties
/// break toward the lower training index; vote ties toward the tied label with
/// the nearest single neighbor, then the lower label id.
inline std::vector<int> knn_classify(const Matrix& train_points,
                                     std::span<const int> train_labels,
                                     const Matrix& query_points, std::size_t k) {
    const std::size_t Mt = train_points.rows(), Mq = query_points.rows();
    if (k < 1 || k > Mt) throw std::invalid_argument("k must satisfy 1 <= k <= M_train");
    if (train_labels.size() != Mt) throw std::invalid_argument("train label length mismatch");

    std::vector<int> out(Mq);
    parallel_for(Mq, [&](std::size_t q) {
        std::vector<std::pair<double, std::size_t>> dist(Mt);
        for (std::size_t t = 0; t < Mt; ++t)
            dist[t] = {euclidean(query_points.row(q), train_points.row(t)), t};
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                          dist.end());
        int max_label = 0;
        for (std::size_t t = 0; t < k; ++t)
            max_label = std::max(max_label, train_labels[dist[t].second]);
        std::vector<int> votes(static_cast<std::size_t>(max_label) + 1, 0);
        std::vector<std::size_t> first_rank(static_cast<std::size_t>(max_label) + 1,
                                            std::numeric_limits<std::size_t>::max());
        for (std::size_t t = 0; t < k; ++t) {
            const auto l = static_cast<std::size_t>(train_labels[dist[t].second]);
            ++votes[l];
            first_rank[l] = std::min(first_rank[l], t);
        }
        int best = -1;
        for (int l = 0; l <= max_label; ++l) {
            const auto lu = static_cast<std::size_t>(l);
            if (votes[lu] == 0) continue;
            if (best < 0 || votes[lu] > votes[static_cast<std::size_t>(best)] ||
                (votes[lu] == votes[static_cast<std::size_t>(best)] &&
                 first_rank[lu] < first_rank[static_cast<std::size_t>(best)])) {
                best = l;
            }
        }
        out[q] = best;
    });
    return out;
}

struct ReducerConfig {
    enum class Kind { none, ccp, ccp_centrality, pca };
    Kind kind = Kind::ccp;
    std::size_t n_components = 10;
    Metric metric = Metric::covariance;
    KernelConfig kernel;
    PartitionScheme scheme = PartitionScheme::correlated;
    UpdateRule update_rule = UpdateRule::min_sum;
    bool standardize = true;
    CentralityKind centrality = CentralityKind::degree;
    double rc_fraction = 0.7;
};

struct PipelineConfig {
    ReducerConfig reducer;
    std::size_t k_nn = 5;
    bool post_scale = true;
};

inline nlohmann::json pipeline_to_json(const PipelineConfig& p) {
    const char* kind = "ccp";
    switch (p.reducer.kind) {
        case ReducerConfig::Kind::none: kind = "none"; break;
        case ReducerConfig::Kind::ccp: kind = "ccp"; break;
        case ReducerConfig::Kind::ccp_centrality: kind = "ccp_centrality"; break;
        case ReducerConfig::Kind::pca: kind = "pca"; break;
    }
    return {{"reducer", kind},
            {"n_components", p.reducer.n_components},
            {"metric", metric_name(p.reducer.metric)},
            {"kernel", kernel_to_json(p.reducer.kernel)},
            {"scheme", scheme_name(p.reducer.scheme)},
            {"update_rule", p.reducer.update_rule == UpdateRule::min_sum ? "min_sum"
                                                                         : "center_proxy"},
            {"standardize", p.reducer.standardize},
            {"centrality", centrality_name(p.reducer.centrality)},
            {"rc_fraction", p.reducer.rc_fraction},
            {"k_nn", p.k_nn},
            {"post_scale", p.post_scale}};
}

struct CvReport {
    std::vector<double> per_fold_accuracy;  // seed-major; -1 marks a failed fold
    std::vector<double> per_seed_mean;
    double overall_mean = 0.0;
    double overall_sd = 0.0;  // population sd across per-seed means
    std::vector<double> per_class_accuracy;
    std::vector<int> predictions;  // first seed, pooled across folds
    std::size_t failed_folds = 0;
    nlohmann::json config_echo;
};

inline nlohmann::json cv_report_to_json(const CvReport& r) {
    return {{"per_fold_accuracy", r.per_fold_accuracy},
            {"per_seed_mean", r.per_seed_mean},
            {"overall_mean", r.overall_mean},
            {"overall_sd", r.overall_sd},
            {"per_class_accuracy", r.per_class_accuracy},
            {"predictions", r.predictions},
            {"failed_folds", r.failed_folds},
            {"config", r.config_echo}};
}

namespace detail {

// Standard scaling with train statistics (population sd; flat components are
// centered only).
inline void scale_with_train_stats(Matrix& train, Matrix& test) {
    for (std::size_t c = 0; c < train.cols(); ++c) {
        const auto col = train.col(c);
        const double m = mean_of(col), sd = stddev_pop(col);
        for (std::size_t r = 0; r < train.rows(); ++r)
            train(r, c) = sd > 0.0 ? (train(r, c) - m) / sd : train(r, c) - m;
        for (std::size_t r = 0; r < test.rows(); ++r)
            test(r, c) = sd > 0.0 ? (test(r, c) - m) / sd : test(r, c) - m;
    }
}

}  // namespace detail

// forward declaration; defined below
inline std::pair<Matrix, Matrix> pca_baseline_fit_transform(const DataMatrix& train,
                                                            const DataMatrix& test,
                                                            std::size_t N);

/// Per seed and fold: fit the reducer on train rows only, transform both
/// sides, optionally standard-scale with train statistics, classify with kNN.
/// A fold whose reducer throws is marked failed and excluded from the means.
inline CvReport cross_validate(const DataMatrix& data, const LabelVector& labels,
                               const PipelineConfig& pipeline, std::size_t k_folds,
                               const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("need at least one seed");
    const std::size_t M = data.samples();
    if (labels.size() != M) throw std::invalid_argument("label length mismatch");

    CvReport report;
    report.config_echo = pipeline_to_json(pipeline);
    report.config_echo["k_folds"] = k_folds;
    report.config_echo["seeds"] = seeds;

    const auto L = static_cast<std::size_t>(labels.num_classes);
    std::vector<std::size_t> class_correct(L, 0), class_total(L, 0);

    for (std::size_t si = 0; si < seeds.size(); ++si) {
        const std::uint64_t seed = seeds[si];
        const SplitPlan plan = make_folds(M, k_folds, seed);
        double seed_sum = 0.0;
        std::size_t seed_folds = 0;
        std::vector<int> pooled(M, -1);
        for (const Fold& fold : plan.folds) {
            const DataMatrix train = take_rows(data, fold.train);
            const DataMatrix test = take_rows(data, fold.test);
            const std::vector<int> train_y = take_labels(labels, fold.train);
            const std::vector<int> test_y = take_labels(labels, fold.test);

            Matrix train_pts, test_pts;
            try {
                switch (pipeline.reducer.kind) {
                    case ReducerConfig::Kind::none:
                        train_pts = train.values;
                        test_pts = test.values;
                        break;
                    case ReducerConfig::Kind::ccp: {
                        const CcpModel model =
                            fit(train, pipeline.reducer.n_components, pipeline.reducer.metric,
                                pipeline.reducer.kernel, seed, pipeline.reducer.scheme,
                                pipeline.reducer.update_rule, pipeline.reducer.standardize);
                        train_pts = transform(model, train).values;
                        test_pts = transform(model, test).values;
                        break;
                    }
                    case ReducerConfig::Kind::ccp_centrality: {
                        const CcpModel model =
                            fit(train, pipeline.reducer.n_components, pipeline.reducer.metric,
                                pipeline.reducer.kernel, seed, pipeline.reducer.scheme,
                                pipeline.reducer.update_rule, pipeline.reducer.standardize);
                        train_pts = centrality_project(model, train, pipeline.reducer.centrality,
                                                       pipeline.reducer.rc_fraction)
                                        .values;
                        test_pts = centrality_project(model, test, pipeline.reducer.centrality,
                                                      pipeline.reducer.rc_fraction)
                                       .values;
                        break;
                    }
                    case ReducerConfig::Kind::pca: {
                        auto [tr, te] =
                            pca_baseline_fit_transform(train, test, pipeline.reducer.n_components);
                        train_pts = std::move(tr);
                        test_pts = std::move(te);
                        break;
                    }
                }
                if (pipeline.post_scale && pipeline.reducer.kind != ReducerConfig::Kind::none)
                    detail::scale_with_train_stats(train_pts, test_pts);

                const std::vector<int> pred =
                    knn_classify(train_pts, train_y, test_pts, pipeline.k_nn);
                std::size_t correct = 0;
                for (std::size_t q = 0; q < pred.size(); ++q) {
                    const auto cls = static_cast<std::size_t>(test_y[q]);
                    ++class_total[cls];
                    if (pred[q] == test_y[q]) {
                        ++correct;
                        ++class_correct[cls];
                    }
                    if (si == 0) pooled[fold.test[q]] = pred[q];
                }
                const double acc = static_cast<double>(correct) /
                                   static_cast<double>(pred.size());
                report.per_fold_accuracy.push_back(acc);
                seed_sum += acc;
                ++seed_folds;
            } catch (const std::exception&) {
                report.per_fold_accuracy.push_back(-1.0);
                ++report.failed_folds;
            }
        }
        report.per_seed_mean.push_back(
            seed_folds > 0 ? seed_sum / static_cast<double>(seed_folds) : -1.0);
        if (si == 0) report.predictions = std::move(pooled);
    }

    report.overall_mean = mean_of(report.per_seed_mean);
    report.overall_sd = stddev_pop(report.per_seed_mean);
    report.per_class_accuracy.assign(L, 0.0);
    for (std::size_t l = 0; l < L; ++l)
        report.per_class_accuracy[l] =
            class_total[l] > 0
                ? static_cast<double>(class_correct[l]) / static_cast<double>(class_total[l])
                : 0.0;
    return report;
}

namespace detail {

// Jacobi eigendecomposition of a small symmetric matrix; eigenpairs sorted by
// descending eigenvalue.
inline void jacobi_eigen(std::vector<double>& A, std::size_t n, std::vector<double>& evals,
                         std::vector<double>& evecs) {
    evecs.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) evecs[i * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += A[p * n + q] * A[p * n + q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (A[q * n + q] - A[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cs = 1.0 / std::sqrt(t * t + 1.0), sn = t * cs;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A[k * n + p], akq = A[k * n + q];
                    A[k * n + p] = cs * akp - sn * akq;
                    A[k * n + q] = sn * akp + cs * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A[p * n + k], aqk = A[q * n + k];
                    A[p * n + k] = cs * apk - sn * aqk;
                    A[q * n + k] = sn * apk + cs * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = evecs[k * n + p], vkq = evecs[k * n + q];
                    evecs[k * n + p] = cs * vkp - sn * vkq;
                    evecs[k * n + q] = sn * vkp + cs * vkq;
                }
            }
    }
    evals.resize(n);
    for (std::size_t i = 0; i < n; ++i) evals[i] = A[i * n + i];
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return evals[a] > evals[b]; });
    std::vector<double> ev2(n), vec2(n * n);
    for (std::size_t c = 0; c < n; ++c) {
        ev2[c] = evals[order[c]];
        for (std::size_t r = 0; r < n; ++r) vec2[r * n + c] = evecs[r * n + order[c]];
    }
    evals = std::move(ev2);
    evecs = std::move(vec2);
}

inline void orthonormalize_columns(Matrix& Q) {
    for (std::size_t c = 0; c < Q.cols(); ++c) {
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0.0;
            for (std::size_t r = 0; r < Q.rows(); ++r) dot += Q(r, c) * Q(r, p);
            for (std::size_t r = 0; r < Q.rows(); ++r) Q(r, c) -= dot * Q(r, p);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < Q.rows(); ++r) norm += Q(r, c) * Q(r, c);
        norm = std::sqrt(norm);
        if (norm < 1e-300) throw NumericError("rank deficiency in orthogonal iteration");
        for (std::size_t r = 0; r < Q.rows(); ++r) Q(r, c) /= norm;
    }
}

}  // namespace detail

/// PCA via orthogonal iteration on the train covariance (deterministic seeded
/// start, tolerance 1e-10, max 1000 sweeps). Component signs are fixed so the
/// largest-magnitude entry of each direction is positive.
inline std::pair<Matrix, Matrix> pca_baseline_fit_transform(const DataMatrix& train,
                                                            const DataMatrix& test,
                                                            std::size_t N) {
    const std::size_t Mt = train.samples(), I = train.features();
    if (N < 1 || N > std::min(Mt, I))
        throw std::invalid_argument("N must satisfy 1 <= N <= min(M_train, I)");
    if (test.features() != I) throw std::invalid_argument("test feature count mismatch");

    std::vector<double> mean(I, 0.0);
    for (std::size_t r = 0; r < Mt; ++r)
        for (std::size_t c = 0; c < I; ++c) mean[c] += train.values(r, c);
    for (double& m : mean) m /= static_cast<double>(Mt);

    Matrix X(Mt, I);
    for (std::size_t r = 0; r < Mt; ++r)
        for (std::size_t c = 0; c < I; ++c) X(r, c) = train.values(r, c) - mean[c];

    // covariance C = X^T X / M
    Matrix C(I, I);
    parallel_for(I, [&](std::size_t a) {
        for (std::size_t b = a; b < I; ++b) {
            double s = 0.0;
            for (std::size_t r = 0; r < Mt; ++r) s += X(r, a) * X(r, b);
            s /= static_cast<double>(Mt);
            C(a, b) = s;
            C(b, a) = s;
        }
    });

    Matrix Q(I, N);
    std::mt19937_64 rng(0xCC9u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t r = 0; r < I; ++r)
        for (std::size_t c = 0; c < N; ++c) Q(r, c) = gauss(rng);
    detail::orthonormalize_columns(Q);

    auto mul_CQ = [&](const Matrix& Qin) {
        Matrix Z(I, N);
        parallel_for(I, [&](std::size_t r) {
            for (std::size_t c = 0; c < N; ++c) {
                double s = 0.0;
                for (std::size_t k = 0; k < I; ++k) s += C(r, k) * Qin(k, c);
                Z(r, c) = s;
            }
        });
        return Z;
    };

    bool converged = false;
    double scale = 0.0;
    for (std::size_t a = 0; a < I; ++a) scale = std::max(scale, std::abs(C(a, a)));
    if (scale == 0.0) scale = 1.0;
    for (int sweep = 0; sweep < 1000; ++sweep) {
        Matrix Z = mul_CQ(Q);
        // residual of the invariant-subspace equation C Q = Q (Q^T C Q)
        std::vector<double> B(N * N, 0.0);
        for (std::size_t a = 0; a < N; ++a)
            for (std::size_t b = 0; b < N; ++b) {
                double s = 0.0;
                for (std::size_t r = 0; r < I; ++r) s += Q(r, a) * Z(r, b);
                B[a * N + b] = s;
            }
        double res = 0.0;
        for (std::size_t r = 0; r < I; ++r)
            for (std::size_t c = 0; c < N; ++c) {
                double s = Z(r, c);
                for (std::size_t a = 0; a < N; ++a) s -= Q(r, a) * B[a * N + c];
                res = std::max(res, std::abs(s));
            }
        detail::orthonormalize_columns(Z);
        Q = std::move(Z);
        if (res / scale < 1e-10) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericError("orthogonal iteration did not converge");

    // Rayleigh-Ritz rotation inside the converged subspace
    Matrix Z = mul_CQ(Q);
    std::vector<double> B(N * N, 0.0);
    for (std::size_t a = 0; a < N; ++a)
        for (std::size_t b = 0; b < N; ++b) {
            double s = 0.0;
            for (std::size_t r = 0; r < I; ++r) s += Q(r, a) * Z(r, b);
            B[a * N + b] = s;
        }
    std::vector<double> evals, evecs;
    detail::jacobi_eigen(B, N, evals, evecs);
    Matrix V(I, N);
    for (std::size_t r = 0; r < I; ++r)
        for (std::size_t c = 0; c < N; ++c) {
            double s = 0.0;
            for (std::size_t a = 0; a < N; ++a) s += Q(r, a) * evecs[a * N + c];
            V(r, c) = s;
        }
    for (std::size_t c = 0; c < N; ++c) {
        std::size_t arg = 0;
        for (std::size_t r = 1; r < I; ++r)
            if (std::abs(V(r, c)) > std::abs(V(arg, c))) arg = r;
        if (V(arg, c) < 0.0)
            for (std::size_t r = 0; r < I; ++r) V(r, c) = -V(r, c);
    }

    auto project = [&](const DataMatrix& d) {
        Matrix out(d.samples(), N);
        parallel_for(d.samples(), [&](std::size_t r) {
            for (std::size_t c = 0; c < N; ++c) {
                double s = 0.0;
                for (std::size_t k = 0; k < I; ++k)
                    s += (d.values(r, k) - mean[k]) * V(k, c);
                out(r, c) = s;
            }
        });
        return out;
    };
    return {project(train), project(test)};
}

struct TuneGrid {
    std::vector<KernelFamily> families;
    std::vector<double> kappas;
    std::vector<double> taus;
};

struct TuneProtocol {
    std::size_t k_folds = 5;
    std::size_t k_nn = 5;
    std::size_t n_components = 10;
    Metric metric = Metric::covariance;
    PartitionScheme scheme = PartitionScheme::correlated;
    CutoffPolicy cutoff = {};
    bool standardize = true;
    bool post_scale = true;
};

/// Grid-searches kernel parameters by cross-validation on a subsample. Ties
/// break toward smaller kappa, then smaller tau, then exponential over lorentz.
inline KernelConfig subsample_tune(const DataMatrix& data, const LabelVector& labels,
                                   double fraction, std::uint64_t seed,
                                   const TuneGrid& grid, const TuneProtocol& protocol) {
    if (grid.families.empty() || grid.kappas.empty() || grid.taus.empty())
        throw std::invalid_argument("empty parameter grid");
    const auto sub = subsample(data, labels.size() ? &labels : nullptr, fraction, seed);
    if (sub.data.samples() < 2 * protocol.k_folds)
        throw std::invalid_argument("subsample too small for the inner cross-validation");

    struct Candidate {
        KernelConfig config;
        double mean = -1.0;
    };
    std::optional<Candidate> best;
    auto better = [](const Candidate& a, const Candidate& b) {
        if (a.mean != b.mean) return a.mean > b.mean;
        if (a.config.kappa != b.config.kappa) return a.config.kappa < b.config.kappa;
        if (a.config.tau != b.config.tau) return a.config.tau < b.config.tau;
        return a.config.family == KernelFamily::exponential &&
               b.config.family != KernelFamily::exponential;
    };
    for (KernelFamily family : grid.families)
        for (double kappa : grid.kappas)
            for (double tau : grid.taus) {
                PipelineConfig pipe;
                pipe.reducer.kind = ReducerConfig::Kind::ccp;
                pipe.reducer.n_components = protocol.n_components;
                pipe.reducer.metric = protocol.metric;
                pipe.reducer.scheme = protocol.scheme;
                pipe.reducer.standardize = protocol.standardize;
                pipe.reducer.kernel = {family, kappa, tau, protocol.cutoff};
                pipe.k_nn = protocol.k_nn;
                pipe.post_scale = protocol.post_scale;
                const CvReport rep =
                    cross_validate(sub.data, *sub.labels, pipe, protocol.k_folds, {seed});
                Candidate cand{pipe.reducer.kernel, rep.overall_mean};
                if (!best || better(cand, *best)) best = cand;
            }
    return best->config;
}

}  // namespace ccp
