#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ccp/core.hpp"
#include "ccp/dataset.hpp"

namespace ccp {

enum class Metric { covariance, correlation };

inline std::string metric_name(Metric m) {
    return m == Metric::covariance ? "covariance" : "correlation";
}

inline Metric metric_from_name(const std::string& s) {
    if (s == "covariance") return Metric::covariance;
    if (s == "correlation") return Metric::correlation;
    throw std::invalid_argument("unknown metric: " + s);
}

/// Symmetric I x I feature dissimilarity matrix with entries in [0,1].
struct DistanceMatrix {
    std::size_t size = 0;
    Metric metric = Metric::covariance;
    std::vector<double> values;  // row-major size*size

    double operator()(std::size_t i, std::size_t j) const { return values[i * size + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values[i * size + j]; }
};

/// 1 - max(rho, 0) with rho the Pearson correlation; 1 when either vector is
/// constant.
inline double covariance_distance(std::span<const double> zi, std::span<const double> zj) {
    if (zi.size() != zj.size()) throw std::invalid_argument("length mismatch");
    const std::size_t M = zi.size();
    if (M < 2) throw std::invalid_argument("need at least 2 samples");
    const double mi = mean_of(zi), mj = mean_of(zj);
    double cov = 0.0, vi = 0.0, vj = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        const double a = zi[m] - mi, b = zj[m] - mj;
        cov += a * b;
        vi += a * a;
        vj += b * b;
    }
    if (vi == 0.0 || vj == 0.0) return 1.0;
    const double rho = cov / std::sqrt(vi * vj);
    return std::clamp(1.0 - std::max(rho, 0.0), 0.0, 1.0);
}

namespace detail {

// Row means and grand mean of the |z_u - z_v| matrix, plus the self distance
// covariance; the matrix itself is never stored.
struct DcorStats {
    std::vector<double> row_mean;
    double grand_mean = 0.0;
    double self_dcov = 0.0;  // sqrt of (1/M^2) sum A^2
};

inline DcorStats dcor_stats(std::span<const double> z) {
    const std::size_t M = z.size();
    DcorStats st;
    st.row_mean.assign(M, 0.0);
    for (std::size_t u = 0; u < M; ++u) {
        double s = 0.0;
        for (std::size_t v = 0; v < M; ++v) s += std::abs(z[u] - z[v]);
        st.row_mean[u] = s / static_cast<double>(M);
        st.grand_mean += s;
    }
    st.grand_mean /= static_cast<double>(M) * static_cast<double>(M);
    double acc = 0.0;
    for (std::size_t u = 0; u < M; ++u)
        for (std::size_t v = 0; v < M; ++v) {
            const double A = std::abs(z[u] - z[v]) - st.row_mean[u] - st.row_mean[v] +
                             st.grand_mean;
            acc += A * A;
        }
    st.self_dcov = std::sqrt(acc / (static_cast<double>(M) * static_cast<double>(M)));
    return st;
}

inline double dcor_pair(std::span<const double> zi, const DcorStats& si,
                        std::span<const double> zj, const DcorStats& sj) {
    const std::size_t M = zi.size();
    double acc = 0.0;
    for (std::size_t u = 0; u < M; ++u)
        for (std::size_t v = 0; v < M; ++v) {
            const double Ai = std::abs(zi[u] - zi[v]) - si.row_mean[u] - si.row_mean[v] +
                              si.grand_mean;
            const double Aj = std::abs(zj[u] - zj[v]) - sj.row_mean[u] - sj.row_mean[v] +
                              sj.grand_mean;
            acc += Ai * Aj;
        }
    const double dcov2 = acc / (static_cast<double>(M) * static_cast<double>(M));
    return dcov2 / (si.self_dcov * sj.self_dcov);
}

}  // namespace detail

/// Correlation distance 1 - dCov^2(zi,zj)/(dCov(zi,zi) dCov(zj,zj)), clamped to
/// [0,1]. Both vectors must be non-constant.
inline double correlation_distance(std::span<const double> zi, std::span<const double> zj) {
    if (zi.size() != zj.size()) throw std::invalid_argument("length mismatch");
    if (zi.size() < 2) throw std::invalid_argument("need at least 2 samples");
    const auto si = detail::dcor_stats(zi);
    const auto sj = detail::dcor_stats(zj);
    if (si.self_dcov == 0.0 || sj.self_dcov == 0.0)
        throw std::invalid_argument("constant vector has undefined distance correlation");
    return std::clamp(1.0 - detail::dcor_pair(zi, si, zj, sj), 0.0, 1.0);
}

/// Fills all unordered feature pairs with the chosen metric. Constant columns
/// get distance 1 to every other column and 0 to themselves.
inline DistanceMatrix feature_distance_matrix(const DataMatrix& data, Metric metric) {
    const std::size_t I = data.features(), M = data.samples();
    if (I < 2) throw std::invalid_argument("need at least 2 features");
    if (M < 2) throw std::invalid_argument("need at least 2 samples");

    DistanceMatrix D;
    D.size = I;
    D.metric = metric;
    D.values.assign(I * I, 0.0);

    std::vector<std::vector<double>> cols(I);
    for (std::size_t j = 0; j < I; ++j) cols[j] = data.values.col(j);

    std::vector<char> constant(I, 0);
    for (std::size_t j = 0; j < I; ++j) {
        constant[j] = std::all_of(cols[j].begin(), cols[j].end(),
                                  [&](double x) { return x == cols[j][0]; });
    }

    std::vector<detail::DcorStats> stats;
    if (metric == Metric::correlation) {
        stats.resize(I);
        parallel_for(I, [&](std::size_t j) {
            if (!constant[j]) stats[j] = detail::dcor_stats(cols[j]);
        });
    }

    // one worker per (i,j) cell; mirrored afterwards
    const std::size_t n_pairs = I * (I - 1) / 2;
    parallel_for(n_pairs, [&](std::size_t p) {
        // unrank p -> (i, j), i < j
        std::size_t i = 0, offset = 0;
        while (offset + (I - 1 - i) <= p) {
            offset += I - 1 - i;
            ++i;
        }
        const std::size_t j = i + 1 + (p - offset);
        double d;
        if (constant[i] || constant[j]) {
            d = 1.0;
        } else if (metric == Metric::covariance) {
            d = covariance_distance(cols[i], cols[j]);
        } else {
            d = std::clamp(1.0 - detail::dcor_pair(cols[i], stats[i], cols[j], stats[j]),
                           0.0, 1.0);
        }
        D(i, j) = d;
        D(j, i) = d;
    });
    return D;
}

// Binary layout: magic "CCPD", u32 I, u8 metric tag, I*I little-endian f64 row-major.
inline void save_distance_matrix(const std::string& path, const DistanceMatrix& D) {
    static_assert(std::endian::native == std::endian::little);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out.write("CCPD", 4);
    const std::uint32_t n = static_cast<std::uint32_t>(D.size);
    out.write(reinterpret_cast<const char*>(&n), 4);
    const std::uint8_t tag = D.metric == Metric::covariance ? 0 : 1;
    out.write(reinterpret_cast<const char*>(&tag), 1);
    out.write(reinterpret_cast<const char*>(D.values.data()),
              static_cast<std::streamsize>(D.values.size() * sizeof(double)));
}

inline DistanceMatrix load_distance_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CCPD", 4) != 0)
        throw DataError("not a distance matrix file: " + path);
    std::uint32_t n = 0;
    std::uint8_t tag = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&tag), 1);
    DistanceMatrix D;
    D.size = n;
    D.metric = tag == 0 ? Metric::covariance : Metric::correlation;
    D.values.resize(static_cast<std::size_t>(n) * n);
    in.read(reinterpret_cast<char*>(D.values.data()),
            static_cast<std::streamsize>(D.values.size() * sizeof(double)));
    if (!in) throw DataError("truncated distance matrix file: " + path);
    return D;
}

}  // namespace ccp
