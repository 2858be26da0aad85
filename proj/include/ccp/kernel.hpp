#pragma once

#include <limits>
#include <random>
#include <string>

#include <json.hpp>

#include "ccp/core.hpp"

namespace ccp {

enum class KernelFamily { exponential, lorentz };

inline std::string family_name(KernelFamily f) {
    return f == KernelFamily::exponential ? "exponential" : "lorentz";
}

inline KernelFamily family_from_name(const std::string& s) {
    if (s == "exponential" || s == "exp") return KernelFamily::exponential;
    if (s == "lorentz") return KernelFamily::lorentz;
    throw std::invalid_argument("unknown kernel family: " + s);
}

struct CutoffPolicy {
    enum class Kind { none, mean_plus_sd };
    Kind kind = Kind::mean_plus_sd;
    double s = 3.0;  // standard-deviation multiplier

    static CutoffPolicy none() { return {Kind::none, 0.0}; }
    static CutoffPolicy mean_plus_sd(double s) {
        if (s < 0.0) throw std::invalid_argument("cutoff multiplier must be >= 0");
        return {Kind::mean_plus_sd, s};
    }
};

struct KernelConfig {
    KernelFamily family = KernelFamily::exponential;
    double kappa = 1.0;
    double tau = 2.0;
    CutoffPolicy cutoff = {};
    // weights are implicitly all ones
};

inline nlohmann::json kernel_to_json(const KernelConfig& k) {
    nlohmann::json cutoff;
    if (k.cutoff.kind == CutoffPolicy::Kind::none) {
        cutoff = {{"kind", "none"}};
    } else {
        cutoff = {{"kind", "mean_plus_sd"}, {"s", k.cutoff.s}};
    }
    return {{"family", family_name(k.family)},
            {"kappa", k.kappa},
            {"tau", k.tau},
            {"cutoff_policy", cutoff}};
}

inline KernelConfig kernel_from_json(const nlohmann::json& j) {
    KernelConfig k;
    k.family = family_from_name(j.at("family").get<std::string>());
    k.kappa = j.at("kappa").get<double>();
    k.tau = j.at("tau").get<double>();
    const auto& c = j.at("cutoff_policy");
    if (c.at("kind").get<std::string>() == "none") {
        k.cutoff = CutoffPolicy::none();
    } else {
        k.cutoff = CutoffPolicy::mean_plus_sd(c.at("s").get<double>());
    }
    return k;
}

/// Radial basis kernel value in [0,1]; exactly 0 at and beyond the cutoff.
inline double kernel_eval(double dist, KernelFamily family, double kappa, double tau,
                          double eta, double r_c) {
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be > 0");
    if (dist >= r_c) return 0.0;
    const double t = std::pow(dist / (tau * eta), kappa);
    return family == KernelFamily::exponential ? std::exp(-t) : 1.0 / (1.0 + t);
}

/// Scale eta: mean over rows of the minimum Euclidean distance to any other
/// row. Falls back to the smallest nonzero pairwise distance (or 1) when the
/// mean degenerates to 0.
inline double cluster_scale_eta(const Matrix& cluster_rows) {
    const std::size_t M = cluster_rows.rows();
    if (M < 2) throw std::invalid_argument("eta needs at least 2 rows");
    std::vector<double> row_min(M);
    parallel_for(M, [&](std::size_t m) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < M; ++j) {
            if (j == m) continue;
            best = std::min(best, euclidean(cluster_rows.row(m), cluster_rows.row(j)));
        }
        row_min[m] = best;
    });
    double eta = 0.0;
    for (double d : row_min) eta += d;
    eta /= static_cast<double>(M);
    if (eta > 0.0) return eta;

    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = i + 1; j < M; ++j) {
            const double d = euclidean(cluster_rows.row(i), cluster_rows.row(j));
            if (d > 0.0) smallest = std::min(smallest, d);
        }
    return std::isfinite(smallest) ? smallest : 1.0;
}

/// Cutoff radius: +inf for policy none, else mean + s*sd of pairwise Euclidean
/// distances (exact up to 2000 rows, seeded 2e6-pair sample beyond).
inline double cluster_cutoff(const Matrix& cluster_rows, const CutoffPolicy& policy) {
    if (policy.kind == CutoffPolicy::Kind::none)
        return std::numeric_limits<double>::infinity();
    const std::size_t M = cluster_rows.rows();
    if (M < 2) throw std::invalid_argument("cutoff needs at least 2 rows");

    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    if (M <= 2000) {
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t j = i + 1; j < M; ++j) {
                const double d = euclidean(cluster_rows.row(i), cluster_rows.row(j));
                sum += d;
                sum_sq += d * d;
                ++count;
            }
    } else {
        std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
        std::uniform_int_distribution<std::size_t> pick(0, M - 1);
        constexpr std::size_t n_samples = 2'000'000;
        for (std::size_t k = 0; k < n_samples; ++k) {
            std::size_t i = pick(rng), j = pick(rng);
            while (j == i) j = pick(rng);
            const double d = euclidean(cluster_rows.row(i), cluster_rows.row(j));
            sum += d;
            sum_sq += d * d;
            ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean);
    return mean + policy.s * std::sqrt(var);
}

}  // namespace ccp
