#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "ccp/eval.hpp"  // for detail::jacobi_eigen used as an eigenvector oracle
#include "ccp/projection.hpp"

using namespace ccp;

namespace {

DataMatrix make_random_data(std::size_t M, std::size_t I, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    DataMatrix d;
    d.values = Matrix(M, I);
    for (auto& x : d.values.data()) x = g(rng);
    return d;
}

// Straight double loop over Eq-style kernel sums, no acceleration.
Matrix naive_transform(const CcpModel& model, const DataMatrix& samples) {
    const auto members = model.partition.members();
    Matrix out(samples.samples(), model.n_clusters());
    for (std::size_t n = 0; n < model.n_clusters(); ++n) {
        const Matrix query = ccp::detail::gather_cluster(samples.values, members[n]);
        const Matrix& train = model.train_clusters[n];
        for (std::size_t i = 0; i < query.rows(); ++i) {
            double s = 0.0;
            for (std::size_t m = 0; m < train.rows(); ++m)
                s += kernel_eval(euclidean(query.row(i), train.row(m)),
                                 model.kernel.family, model.kernel.kappa, model.kernel.tau,
                                 model.etas[n], model.cutoffs[n]);
            out(i, n) = s;
        }
    }
    return out;
}

// Exhaustive centrality oracles for tiny graphs.
std::vector<std::vector<int>> hop_matrix(const Graph& g) {
    const std::size_t V = g.size();
    std::vector<std::vector<int>> d(V, std::vector<int>(V, 1 << 20));
    for (std::size_t v = 0; v < V; ++v) d[v][v] = 0;
    for (std::size_t v = 0; v < V; ++v)
        for (std::size_t w : g.adj[v]) d[v][w] = 1;
    for (std::size_t k = 0; k < V; ++k)
        for (std::size_t i = 0; i < V; ++i)
            for (std::size_t j = 0; j < V; ++j)
                d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    return d;
}

std::vector<double> closeness_oracle(const Graph& g) {
    const auto d = hop_matrix(g);
    std::vector<double> out(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j)
            if (i != j && d[i][j] < (1 << 20)) out[i] += 1.0 / d[i][j];
    return out;
}

// Counts shortest paths through each node by enumerating every path of optimal
// length with depth-first search.
std::vector<double> betweenness_oracle(const Graph& g) {
    const std::size_t V = g.size();
    const auto d = hop_matrix(g);
    std::vector<double> out(V, 0.0);
    for (std::size_t s = 0; s < V; ++s)
        for (std::size_t t = s + 1; t < V; ++t) {
            if (s == t || d[s][t] >= (1 << 20)) continue;
            std::vector<std::vector<std::size_t>> paths;
            std::vector<std::size_t> cur{s};
            auto dfs = [&](auto&& self, std::size_t v) -> void {
                if (v == t) {
                    paths.push_back(cur);
                    return;
                }
                for (std::size_t w : g.adj[v])
                    if (d[s][v] + 1 == d[s][w] && d[w][t] + d[s][w] == d[s][t]) {
                        cur.push_back(w);
                        self(self, w);
                        cur.pop_back();
                    }
            };
            dfs(dfs, s);
            if (paths.empty()) continue;
            std::vector<double> through(V, 0.0);
            for (const auto& p : paths)
                for (std::size_t i = 1; i + 1 < p.size(); ++i) through[p[i]] += 1.0;
            for (std::size_t v = 0; v < V; ++v)
                out[v] += through[v] / static_cast<double>(paths.size());
        }
    return out;
}

// Dominant eigenvector per component via a dense symmetric eigensolve.
std::vector<double> eigenvector_oracle(const Graph& g) {
    const std::size_t V = g.size();
    std::vector<double> out(V, 0.0);
    std::vector<int> comp(V, -1);
    int nc = 0;
    for (std::size_t s = 0; s < V; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<std::size_t> nodes{s};
        comp[s] = nc;
        for (std::size_t q = 0; q < nodes.size(); ++q)
            for (std::size_t w : g.adj[nodes[q]])
                if (comp[w] < 0) {
                    comp[w] = nc;
                    nodes.push_back(w);
                }
        ++nc;
        const std::size_t n = nodes.size();
        if (n == 1 && g.adj[nodes[0]].empty()) continue;
        std::vector<std::size_t> local(V);
        for (std::size_t k = 0; k < n; ++k) local[nodes[k]] = k;
        std::vector<double> A(n * n, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t w : g.adj[nodes[k]]) A[k * n + local[w]] = 1.0;
        std::vector<double> evals, evecs;
        ccp::detail::jacobi_eigen(A, n, evals, evecs);
        double vmax = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            vmax = std::max(vmax, std::abs(evecs[k * n + 0]));
        for (std::size_t k = 0; k < n; ++k) {
            // Perron vector is sign-definite; normalize to unit max magnitude
            out[nodes[k]] = std::abs(evecs[k * n + 0]) / vmax;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("kernel_eval direct substitutions") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(kernel_eval(0.0, KernelFamily::exponential, 1, 2, 1, inf) == 1.0);
    CHECK(kernel_eval(0.0, KernelFamily::lorentz, 2, 2, 1, inf) == 1.0);
    CHECK_THAT(kernel_eval(2.0, KernelFamily::exponential, 1, 2, 1, inf),
               Catch::Matchers::WithinAbs(std::exp(-1.0), 1e-15));
    CHECK_THAT(kernel_eval(2.0, KernelFamily::lorentz, 2, 2, 1, inf),
               Catch::Matchers::WithinAbs(0.5, 1e-15));
    CHECK(kernel_eval(3.0, KernelFamily::exponential, 1, 2, 1, 3.0) == 0.0);  // closed cutoff
    CHECK(kernel_eval(4.0, KernelFamily::lorentz, 1, 2, 1, 3.0) == 0.0);
}

TEST_CASE("kernel_eval validates parameters") {
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(kernel_eval(1, KernelFamily::exponential, 1, 2, 0, inf),
                    std::invalid_argument);
    CHECK_THROWS_AS(kernel_eval(1, KernelFamily::exponential, 1, 0, 1, inf),
                    std::invalid_argument);
    CHECK_THROWS_AS(kernel_eval(1, KernelFamily::exponential, 0, 2, 1, inf),
                    std::invalid_argument);
}

TEST_CASE("kernel monotone non-increasing over the parameter grid") {
    const double inf = std::numeric_limits<double>::infinity();
    for (KernelFamily fam : {KernelFamily::exponential, KernelFamily::lorentz})
        for (double kappa : {0.5, 1.0, 2.0, 5.0})
            for (double tau : {1.0, 2.0, 6.0}) {
                double prev = kernel_eval(0.0, fam, kappa, tau, 1.0, inf);
                REQUIRE(prev == 1.0);
                for (double d = 0.05; d < 10.0; d += 0.05) {
                    const double v = kernel_eval(d, fam, kappa, tau, 1.0, inf);
                    REQUIRE(v <= prev);
                    if (v > 0.0) REQUIRE(v < prev);  // steep tails underflow to 0
                    prev = v;
                }
            }
}

TEST_CASE("cluster_scale_eta") {
    SECTION("two rows at distance d") {
        Matrix m(2, 1);
        m(0, 0) = 0;
        m(1, 0) = 3;
        CHECK_THAT(cluster_scale_eta(m), Catch::Matchers::WithinAbs(3.0, 1e-15));
    }
    SECTION("three 1-D rows at 0,1,3") {
        Matrix m(3, 1);
        m(0, 0) = 0;
        m(1, 0) = 1;
        m(2, 0) = 3;
        CHECK_THAT(cluster_scale_eta(m), Catch::Matchers::WithinAbs(4.0 / 3.0, 1e-15));
    }
    SECTION("identical rows fall back to 1") {
        Matrix m(4, 2, 7.0);
        CHECK(cluster_scale_eta(m) == 1.0);
    }
    SECTION("duplicate-heavy data uses smallest nonzero distance") {
        Matrix m(3, 1);
        m(0, 0) = 0;
        m(1, 0) = 0;
        m(2, 0) = 5;
        // per-row minima: 0, 0, 5 -> mean > 0, so no fallback here; force it
        Matrix dup(4, 1);
        dup(0, 0) = 0;
        dup(1, 0) = 0;
        dup(2, 0) = 2;
        dup(3, 0) = 2;
        CHECK(cluster_scale_eta(dup) == 2.0);
    }
    SECTION("single row rejected") {
        Matrix m(1, 2);
        CHECK_THROWS_AS(cluster_scale_eta(m), std::invalid_argument);
    }
}

TEST_CASE("cluster_cutoff") {
    SECTION("policy none is infinite") {
        Matrix m(2, 1);
        m(1, 0) = 1;
        CHECK(cluster_cutoff(m, CutoffPolicy::none()) ==
              std::numeric_limits<double>::infinity());
    }
    SECTION("two rows with s=0 equals their distance") {
        Matrix m(2, 1);
        m(0, 0) = 1;
        m(1, 0) = 5;
        CHECK_THAT(cluster_cutoff(m, CutoffPolicy::mean_plus_sd(0.0)),
                   Catch::Matchers::WithinAbs(4.0, 1e-12));
    }
    SECTION("matches the all-pairs oracle on 100x5 data") {
        auto data = make_random_data(100, 5, 99);
        std::vector<double> ds;
        for (std::size_t i = 0; i < 100; ++i)
            for (std::size_t j = i + 1; j < 100; ++j)
                ds.push_back(euclidean(data.values.row(i), data.values.row(j)));
        const double mean = mean_of(ds), sd = stddev_pop(ds);
        CHECK_THAT(cluster_cutoff(data.values, CutoffPolicy::mean_plus_sd(3.0)),
                   Catch::Matchers::WithinAbs(mean + 3.0 * sd, 1e-9));
    }
}

TEST_CASE("fit wiring") {
    auto data = make_random_data(20, 8, 12);
    SECTION("N=1 holds all features in one cluster") {
        auto model = fit(data, 1, Metric::covariance, {}, 0);
        CHECK(model.n_clusters() == 1);
        CHECK(model.train_clusters[0].cols() == 8);
        CHECK(model.train_clusters[0].rows() == 20);
        CHECK(model.etas[0] > 0.0);
    }
    SECTION("deterministic serialization") {
        auto a = fit(data, 3, Metric::covariance, {}, 4);
        auto b = fit(data, 3, Metric::covariance, {}, 4);
        CHECK(model_to_json(a) == model_to_json(b));
        CHECK(a.train_clusters[0] == b.train_clusters[0]);
    }
    SECTION("non-correlated schemes skip the distance matrix") {
        auto r = fit(data, 4, Metric::covariance, {}, 0, PartitionScheme::random_equal);
        CHECK(r.partition.scheme == PartitionScheme::random_equal);
        auto v = fit(data, 4, Metric::covariance, {}, 0, PartitionScheme::equal_variance);
        CHECK(v.partition.scheme == PartitionScheme::equal_variance);
    }
}

TEST_CASE("fit separates a two-block latent structure") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    const std::size_t M = 60;
    DataMatrix data;
    data.values = Matrix(M, 10);
    for (std::size_t m = 0; m < M; ++m) {
        const double s1 = g(rng), s2 = g(rng);
        for (std::size_t j = 0; j < 5; ++j) data.values(m, j) = s1 + 0.1 * g(rng);
        for (std::size_t j = 5; j < 10; ++j) data.values(m, j) = s2 + 0.1 * g(rng);
    }
    auto model = fit(data, 2, Metric::covariance, {}, 1);
    const auto& a = model.partition.assignments;
    for (std::size_t j = 1; j < 5; ++j) CHECK(a[j] == a[0]);
    for (std::size_t j = 6; j < 10; ++j) CHECK(a[j] == a[5]);
    CHECK(a[0] != a[5]);
}

TEST_CASE("transform self terms") {
    SECTION("one training row transforms itself to exactly 1") {
        DataMatrix train;
        train.values = Matrix(2, 2);
        train.values(0, 0) = 0;
        train.values(0, 1) = 0;
        train.values(1, 0) = 1;
        train.values(1, 1) = 1;
        auto model = fit(train, 1, Metric::covariance, {}, 0);
        // keep only the first training row to isolate the self term
        model.train_clusters[0] = Matrix(1, 2);
        DataMatrix q;
        q.values = Matrix(1, 2);
        auto emb = transform(model, q);
        CHECK(emb.values(0, 0) == 1.0);
    }
    SECTION("two identical training rows give exactly 2") {
        DataMatrix train;
        train.values = Matrix(3, 2);
        train.values(2, 0) = 1;  // third distinct row keeps eta finite
        auto model = fit(train, 1, Metric::covariance, {}, 0);
        model.train_clusters[0] = Matrix(2, 2, 0.0);
        DataMatrix q;
        q.values = Matrix(1, 2);
        auto emb = transform(model, q);
        CHECK(emb.values(0, 0) == 2.0);
    }
}

TEST_CASE("transform equals the naive sum, with and without cutoff") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto train = make_random_data(50, 30, 200 + seed);
        auto test = make_random_data(10, 30, 300 + seed);
        KernelConfig kernel;
        kernel.cutoff = seed % 2 ? CutoffPolicy::mean_plus_sd(1.0) : CutoffPolicy::none();
        auto model = fit(train, 6, Metric::covariance, kernel, seed);
        auto emb = transform(model, test);
        auto naive = naive_transform(model, test);
        // the accelerated path only skips exact zeros, so bit equality holds
        CHECK(emb.values == naive);
        auto emb_train = transform(model, train);
        CHECK(emb_train.values == naive_transform(model, train));
    }
}

TEST_CASE("cell list path is exercised and bit-identical across thread counts") {
    auto train = make_random_data(200, 4, 41);
    auto test = make_random_data(40, 4, 42);
    KernelConfig kernel;
    kernel.cutoff = CutoffPolicy::mean_plus_sd(0.5);  // tight cutoff, real skipping
    auto model = fit(train, 2, Metric::covariance, kernel, 0);

    const unsigned saved = thread_count();
    set_thread_count(1);
    auto serial = transform(model, test);
    set_thread_count(8);
    auto parallel = transform(model, test);
    set_thread_count(saved);
    CHECK(serial.values == parallel.values);
    CHECK(serial.values == naive_transform(model, test));
}

TEST_CASE("embedding bounds and stability under dropping a row") {
    auto train = make_random_data(30, 12, 77);
    auto model = fit(train, 3, Metric::covariance, {}, 0);
    auto emb = transform(model, train);
    for (double x : emb.values.data()) {
        REQUIRE(x >= 0.0);
        REQUIRE(x <= 30.0);
    }
    // removing one retained row moves any embedding entry by at most 1
    CcpModel dropped = model;
    for (std::size_t n = 0; n < 3; ++n) {
        const Matrix& full = model.train_clusters[n];
        Matrix less(full.rows() - 1, full.cols());
        for (std::size_t r = 1; r < full.rows(); ++r)
            for (std::size_t c = 0; c < full.cols(); ++c) less(r - 1, c) = full(r, c);
        dropped.train_clusters[n] = less;
    }
    auto emb2 = transform(dropped, train);
    for (std::size_t i = 0; i < emb.values.data().size(); ++i)
        REQUIRE(std::abs(emb.values.data()[i] - emb2.values.data()[i]) <= 1.0 + 1e-12);
}

TEST_CASE("permuting features within a cluster leaves transform unchanged") {
    auto train = make_random_data(25, 6, 55);
    auto model = fit(train, 1, Metric::covariance, {}, 0);
    auto base = transform(model, train);

    // reverse the column order both in the retained matrix and in the queries
    CcpModel permuted = model;
    const Matrix& tc = model.train_clusters[0];
    Matrix rev(tc.rows(), tc.cols());
    for (std::size_t r = 0; r < tc.rows(); ++r)
        for (std::size_t c = 0; c < tc.cols(); ++c) rev(r, c) = tc(r, tc.cols() - 1 - c);
    permuted.train_clusters[0] = rev;
    DataMatrix qrev;
    qrev.values = Matrix(train.samples(), 6);
    for (std::size_t r = 0; r < train.samples(); ++r)
        for (std::size_t c = 0; c < 6; ++c)
            qrev.values(r, c) = train.values(r, 5 - c);
    auto out = transform(permuted, qrev);
    for (std::size_t i = 0; i < base.values.data().size(); ++i)
        CHECK_THAT(out.values.data()[i],
                   Catch::Matchers::WithinAbs(base.values.data()[i], 1e-12));
}

TEST_CASE("centrality measures on tiny graphs") {
    Graph path;
    path.adj = {{1}, {0, 2}, {1}};
    SECTION("3-node path") {
        CHECK(degree_centrality(path) == std::vector<double>{1, 2, 1});
        CHECK(betweenness_centrality(path) == std::vector<double>{0, 1, 0});
        auto close = closeness_centrality(path);
        CHECK_THAT(close[0], Catch::Matchers::WithinAbs(1.5, 1e-12));
        CHECK_THAT(close[1], Catch::Matchers::WithinAbs(2.0, 1e-12));
    }
    SECTION("triangle is fully symmetric") {
        Graph tri;
        tri.adj = {{1, 2}, {0, 2}, {0, 1}};
        for (CentralityKind kind :
             {CentralityKind::degree, CentralityKind::closeness,
              CentralityKind::betweenness, CentralityKind::eigenvector}) {
            auto c = compute_centrality(tri, kind);
            CHECK_THAT(c[0], Catch::Matchers::WithinAbs(c[1], 1e-10));
            CHECK_THAT(c[1], Catch::Matchers::WithinAbs(c[2], 1e-10));
        }
    }
    SECTION("isolated node has zero eigenvector centrality") {
        Graph g;
        g.adj = {{1}, {0}, {}};
        auto c = eigenvector_centrality(g);
        CHECK(c[2] == 0.0);
        CHECK(c[0] > 0.0);
    }
}

TEST_CASE("centralities match exhaustive oracles on random 8-node graphs") {
    std::mt19937_64 rng(404);
    std::bernoulli_distribution edge(0.4);
    for (int rep = 0; rep < 12; ++rep) {
        Graph g;
        g.adj.resize(8);
        for (std::size_t a = 0; a < 8; ++a)
            for (std::size_t b = a + 1; b < 8; ++b)
                if (edge(rng)) {
                    g.adj[a].push_back(b);
                    g.adj[b].push_back(a);
                }
        auto deg = degree_centrality(g);
        for (std::size_t v = 0; v < 8; ++v)
            REQUIRE(deg[v] == static_cast<double>(g.adj[v].size()));

        auto close = closeness_centrality(g);
        auto close_ref = closeness_oracle(g);
        for (std::size_t v = 0; v < 8; ++v)
            REQUIRE_THAT(close[v], Catch::Matchers::WithinAbs(close_ref[v], 1e-12));

        auto btw = betweenness_centrality(g);
        auto btw_ref = betweenness_oracle(g);
        for (std::size_t v = 0; v < 8; ++v)
            REQUIRE_THAT(btw[v], Catch::Matchers::WithinAbs(btw_ref[v], 1e-9));

        auto eig = eigenvector_centrality(g);
        auto eig_ref = eigenvector_oracle(g);
        for (std::size_t v = 0; v < 8; ++v)
            REQUIRE_THAT(eig[v], Catch::Matchers::WithinAbs(eig_ref[v], 1e-6));
    }
}

TEST_CASE("centrality projection builds the expected path graph") {
    // three 1-D samples at 0,1,2: d_max=2, r_c=1.4, edges only between neighbors
    DataMatrix data;
    data.values = Matrix(3, 1);
    data.values(1, 0) = 1;
    data.values(2, 0) = 2;
    auto model = fit(data, 1, Metric::covariance, {}, 0, PartitionScheme::random_equal);
    auto emb = centrality_project(model, data, CentralityKind::degree, 0.7);
    CHECK(emb.values(0, 0) == 1.0);
    CHECK(emb.values(1, 0) == 2.0);
    CHECK(emb.values(2, 0) == 1.0);

    auto btw = centrality_project(model, data, CentralityKind::betweenness, 0.7);
    CHECK(btw.values(1, 0) == 1.0);
    CHECK(btw.values(0, 0) == 0.0);
}

TEST_CASE("model save and load round trip") {
    auto train = make_random_data(15, 7, 88);
    auto model = fit(train, 3, Metric::correlation, {}, 9);
    save_model("ccp_test_model.json", "ccp_test_model.bin", model);
    auto back = load_model("ccp_test_model.json", "ccp_test_model.bin");
    CHECK(model_to_json(back) == model_to_json(model));
    REQUIRE(back.train_clusters.size() == model.train_clusters.size());
    for (std::size_t n = 0; n < 3; ++n)
        CHECK(back.train_clusters[n] == model.train_clusters[n]);
    // loaded model transforms identically
    auto a = transform(model, train);
    auto b = transform(back, train);
    CHECK(a.values == b.values);
    std::remove("ccp_test_model.json");
    std::remove("ccp_test_model.bin");
}
