#pragma once

#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "ccp/core.hpp"

namespace ccp {

enum class CentralityKind { degree, closeness, betweenness, eigenvector };

inline std::string centrality_name(CentralityKind k) {
    switch (k) {
        case CentralityKind::degree: return "degree";
        case CentralityKind::closeness: return "closeness";
        case CentralityKind::betweenness: return "betweenness";
        default: return "eigenvector";
    }
}

inline CentralityKind centrality_from_name(const std::string& s) {
    if (s == "degree") return CentralityKind::degree;
    if (s == "closeness") return CentralityKind::closeness;
    if (s == "betweenness") return CentralityKind::betweenness;
    if (s == "eigenvector") return CentralityKind::eigenvector;
    throw std::invalid_argument("unknown centrality kind: " + s);
}

/// Undirected unweighted graph as adjacency lists (sorted, no self loops).
struct Graph {
    std::vector<std::vector<std::size_t>> adj;
    std::size_t size() const { return adj.size(); }
};

inline std::vector<double> degree_centrality(const Graph& g) {
    std::vector<double> out(g.size());
    for (std::size_t v = 0; v < g.size(); ++v)
        out[v] = static_cast<double>(g.adj[v].size());
    return out;
}

/// Harmonic closeness: sum over reachable j != i of 1/hops(i,j).
inline std::vector<double> closeness_centrality(const Graph& g) {
    const std::size_t V = g.size();
    std::vector<double> out(V, 0.0);
    parallel_for(V, [&](std::size_t src) {
        std::vector<int> dist(V, -1);
        std::deque<std::size_t> q{src};
        dist[src] = 0;
        double acc = 0.0;
        while (!q.empty()) {
            const std::size_t v = q.front();
            q.pop_front();
            if (v != src) acc += 1.0 / static_cast<double>(dist[v]);
            for (std::size_t w : g.adj[v])
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
        }
        out[src] = acc;
    });
    return out;
}

/// Brandes' exact betweenness for unweighted graphs (undirected convention:
/// each pair counted once).
inline std::vector<double> betweenness_centrality(const Graph& g) {
    const std::size_t V = g.size();
    std::vector<std::vector<double>> partial(V);
    parallel_for(V, [&](std::size_t s) {
        std::vector<double> delta(V, 0.0), sigma(V, 0.0);
        std::vector<int> dist(V, -1);
        std::vector<std::vector<std::size_t>> pred(V);
        std::vector<std::size_t> stack;
        std::deque<std::size_t> q{s};
        sigma[s] = 1.0;
        dist[s] = 0;
        while (!q.empty()) {
            const std::size_t v = q.front();
            q.pop_front();
            stack.push_back(v);
            for (std::size_t w : g.adj[v]) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
                if (dist[w] == dist[v] + 1) {
                    sigma[w] += sigma[v];
                    pred[w].push_back(v);
                }
            }
        }
        for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            const std::size_t w = *it;
            for (std::size_t v : pred[w])
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
        delta[s] = 0.0;
        partial[s] = std::move(delta);
    });
    std::vector<double> out(V, 0.0);
    for (std::size_t s = 0; s < V; ++s)
        for (std::size_t v = 0; v < V; ++v) out[v] += partial[s][v];
    for (double& x : out) x /= 2.0;
    return out;
}

/// Power iteration per connected component (all-ones start, 200 iterations or
/// relative change < 1e-10), normalized to unit maximum entry per component.
/// Isolated nodes get 0.
inline std::vector<double> eigenvector_centrality(const Graph& g) {
    const std::size_t V = g.size();
    std::vector<double> out(V, 0.0);
    std::vector<int> comp(V, -1);
    int n_comp = 0;
    for (std::size_t s = 0; s < V; ++s) {
        if (comp[s] >= 0) continue;
        std::deque<std::size_t> q{s};
        comp[s] = n_comp;
        std::vector<std::size_t> nodes;
        while (!q.empty()) {
            const std::size_t v = q.front();
            q.pop_front();
            nodes.push_back(v);
            for (std::size_t w : g.adj[v])
                if (comp[w] < 0) {
                    comp[w] = n_comp;
                    q.push_back(w);
                }
        }
        ++n_comp;
        if (nodes.size() == 1 && g.adj[nodes[0]].empty()) continue;  // isolated

        std::vector<double> v(nodes.size(), 1.0), next(nodes.size());
        std::vector<std::size_t> local(V);
        for (std::size_t k = 0; k < nodes.size(); ++k) local[nodes[k]] = k;
        for (int iter = 0; iter < 200; ++iter) {
            double norm = 0.0;
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                double s_k = 0.0;
                for (std::size_t w : g.adj[nodes[k]]) s_k += v[local[w]];
                next[k] = s_k;
                norm = std::max(norm, std::abs(s_k));
            }
            if (norm == 0.0) break;
            double change = 0.0;
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                next[k] /= norm;
                change = std::max(change, std::abs(next[k] - v[k]));
            }
            v = next;
            if (change < 1e-10) break;
        }
        double vmax = 0.0;
        for (double x : v) vmax = std::max(vmax, std::abs(x));
        for (std::size_t k = 0; k < nodes.size(); ++k)
            out[nodes[k]] = vmax > 0.0 ? v[k] / vmax : 0.0;
    }
    return out;
}

inline std::vector<double> compute_centrality(const Graph& g, CentralityKind kind) {
    switch (kind) {
        case CentralityKind::degree: return degree_centrality(g);
        case CentralityKind::closeness: return closeness_centrality(g);
        case CentralityKind::betweenness: return betweenness_centrality(g);
        default: return eigenvector_centrality(g);
    }
}

}  // namespace ccp
