#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccp/rs_scores.hpp"

using namespace ccp;

namespace {

LabelVector make_labels(std::vector<int> labels) {
    LabelVector lv;
    lv.labels = std::move(labels);
    lv.num_classes = 1 + *std::max_element(lv.labels.begin(), lv.labels.end());
    for (int c = 0; c < lv.num_classes; ++c) lv.names.push_back(std::to_string(c));
    return lv;
}

// Definition-first reference computation storing the full distance matrix.
std::pair<std::vector<double>, std::vector<double>> rs_oracle(const Matrix& pts,
                                                              const LabelVector& labels) {
    const std::size_t M = pts.rows();
    std::vector<double> dist(M * M);
    double d_max = 0.0;
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            dist[i * M + j] = euclidean(pts.row(i), pts.row(j));
            d_max = std::max(d_max, dist[i * M + j]);
        }
    std::vector<double> raw(M, 0.0), S(M, 0.0);
    std::vector<std::size_t> size(static_cast<std::size_t>(labels.num_classes), 0);
    for (int l : labels.labels) ++size[static_cast<std::size_t>(l)];
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t j = 0; j < M; ++j) {
            if (labels.labels[j] != labels.labels[m])
                raw[m] += dist[m * M + j];
            else
                S[m] += d_max > 0.0 ? 1.0 - dist[m * M + j] / d_max : 1.0;
        }
        S[m] /= static_cast<double>(size[static_cast<std::size_t>(labels.labels[m])]);
    }
    const double r_max = *std::max_element(raw.begin(), raw.end());
    std::vector<double> R(M);
    for (std::size_t m = 0; m < M; ++m) R[m] = r_max > 0.0 ? raw[m] / r_max : 0.0;
    return {R, S};
}

}  // namespace

TEST_CASE("rs_scores basic cases") {
    SECTION("two singleton classes") {
        Matrix pts(2, 1);
        pts(1, 0) = 4.0;
        auto [R, S] = rs_scores(pts, make_labels({0, 1}));
        CHECK(R == std::vector<double>{1, 1});
        CHECK(S == std::vector<double>{1, 1});
    }
    SECTION("all samples identical hits both degenerate conventions") {
        Matrix pts(4, 2, 3.0);
        auto [R, S] = rs_scores(pts, make_labels({0, 0, 1, 1}));
        for (double r : R) CHECK(r == 0.0);
        for (double s : S) CHECK(s == 1.0);
    }
    SECTION("hand-enumerated 3-point example") {
        Matrix pts(3, 1);
        pts(1, 0) = 1.0;
        pts(2, 0) = 3.0;
        auto [R, S] = rs_scores(pts, make_labels({0, 0, 1}));
        CHECK_THAT(R[0], Catch::Matchers::WithinAbs(0.6, 1e-15));
        CHECK_THAT(R[1], Catch::Matchers::WithinAbs(0.4, 1e-15));
        CHECK_THAT(R[2], Catch::Matchers::WithinAbs(1.0, 1e-15));
        CHECK_THAT(S[0], Catch::Matchers::WithinAbs(5.0 / 6.0, 1e-15));
        CHECK_THAT(S[1], Catch::Matchers::WithinAbs(5.0 / 6.0, 1e-15));
        CHECK_THAT(S[2], Catch::Matchers::WithinAbs(1.0, 1e-15));
    }
}

TEST_CASE("rs_scores input validation") {
    Matrix pts(3, 1);
    CHECK_THROWS_AS(rs_scores(pts, make_labels({0, 1})), std::invalid_argument);
    LabelVector gap;
    gap.labels = {0, 2, 0};
    gap.num_classes = 3;
    CHECK_THROWS_AS(rs_scores(pts, gap), std::invalid_argument);
}

TEST_CASE("rs_indices arithmetic") {
    SECTION("R equals S gives zero disparity") {
        auto labels = make_labels({0, 1});
        auto rep = rs_indices({0.3, 0.7}, {0.3, 0.7}, labels);
        CHECK_THAT(rep.rsd, Catch::Matchers::WithinAbs(0.0, 1e-15));
        CHECK_THAT(rep.rsi, Catch::Matchers::WithinAbs(1.0, 1e-15));
    }
    SECTION("extreme single-class case") {
        auto labels = make_labels({0, 0});
        auto rep = rs_indices({0.0, 0.0}, {1.0, 1.0}, labels);
        CHECK(rep.ri == 0.0);
        CHECK(rep.si == 1.0);
        CHECK(rep.rsd == -1.0);
        CHECK(rep.rsi == 0.0);
    }
    SECTION("3-point example indices") {
        Matrix pts(3, 1);
        pts(1, 0) = 1.0;
        pts(2, 0) = 3.0;
        auto rep = rs_report(pts, make_labels({0, 0, 1}));
        CHECK_THAT(rep.cri[0], Catch::Matchers::WithinAbs(0.5, 1e-15));
        CHECK_THAT(rep.cri[1], Catch::Matchers::WithinAbs(1.0, 1e-15));
        CHECK_THAT(rep.csi[0], Catch::Matchers::WithinAbs(5.0 / 6.0, 1e-15));
        CHECK_THAT(rep.csi[1], Catch::Matchers::WithinAbs(1.0, 1e-15));
        CHECK_THAT(rep.ri, Catch::Matchers::WithinAbs(0.75, 1e-15));
        CHECK_THAT(rep.si, Catch::Matchers::WithinAbs(11.0 / 12.0, 1e-15));
        CHECK_THAT(rep.rsd, Catch::Matchers::WithinAbs(-1.0 / 6.0, 1e-15));
        CHECK_THAT(rep.rsi, Catch::Matchers::WithinAbs(5.0 / 6.0, 1e-15));
    }
}

TEST_CASE("report identities recompute") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Matrix pts(60, 4);
    for (auto& x : pts.data()) x = g(rng);
    std::vector<int> y(60);
    for (std::size_t m = 0; m < 60; ++m) y[m] = static_cast<int>(m % 3);
    auto rep = rs_report(pts, make_labels(y));
    CHECK_THAT(rep.ri, Catch::Matchers::WithinAbs(mean_of(rep.cri), 1e-12));
    CHECK_THAT(rep.si, Catch::Matchers::WithinAbs(mean_of(rep.csi), 1e-12));
    CHECK_THAT(rep.rsd, Catch::Matchers::WithinAbs(rep.ri - rep.si, 1e-15));
    CHECK_THAT(rep.rsi, Catch::Matchers::WithinAbs(1.0 - std::abs(rep.rsd), 1e-15));
    for (double r : rep.R) {
        CHECK(r >= 0.0);
        CHECK(r <= 1.0);
    }
    for (double s : rep.S) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("rs_scores agrees exactly with the stored-matrix oracle") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    for (std::size_t M : {5, 50, 200}) {
        Matrix pts(M, 3);
        for (auto& x : pts.data()) x = g(rng);
        std::vector<int> y(M);
        for (std::size_t m = 0; m < M; ++m) y[m] = static_cast<int>(m % 4);
        auto labels = make_labels(y);
        auto [R, S] = rs_scores(pts, labels);
        auto [Ro, So] = rs_oracle(pts, labels);
        for (std::size_t m = 0; m < M; ++m) {
            REQUIRE(R[m] == Ro[m]);
            REQUIRE(S[m] == So[m]);
        }
    }
}

TEST_CASE("rs_scores invariant under rigid motion and uniform scaling") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    Matrix pts(40, 2);
    for (auto& x : pts.data()) x = g(rng);
    std::vector<int> y(40);
    for (std::size_t m = 0; m < 40; ++m) y[m] = static_cast<int>(m % 2);
    auto labels = make_labels(y);
    auto [R, S] = rs_scores(pts, labels);

    const double theta = 0.83;
    Matrix moved(40, 2);
    for (std::size_t m = 0; m < 40; ++m) {
        const double x = pts(m, 0), yy = pts(m, 1);
        moved(m, 0) = std::cos(theta) * x - std::sin(theta) * yy + 5.0;
        moved(m, 1) = std::sin(theta) * x + std::cos(theta) * yy - 2.0;
    }
    auto [R2, S2] = rs_scores(moved, labels);
    for (std::size_t m = 0; m < 40; ++m) {
        CHECK_THAT(R2[m], Catch::Matchers::WithinAbs(R[m], 1e-9));
        CHECK_THAT(S2[m], Catch::Matchers::WithinAbs(S[m], 1e-9));
    }

    Matrix scaled = pts;
    for (auto& x : scaled.data()) x *= 37.5;
    auto [R3, S3] = rs_scores(scaled, labels);
    for (std::size_t m = 0; m < 40; ++m) {
        CHECK_THAT(R3[m], Catch::Matchers::WithinAbs(R[m], 1e-9));
        CHECK_THAT(S3[m], Catch::Matchers::WithinAbs(S[m], 1e-9));
    }
}

TEST_CASE("rs chart export") {
    Matrix pts(3, 1);
    pts(1, 0) = 1.0;
    pts(2, 0) = 3.0;
    auto labels = make_labels({0, 0, 1});
    const std::string path = "ccp_test_rs.csv";

    SECTION("without predictions") {
        rs_chart_export(pts, labels, nullptr, path);
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "sample_id,true_label,R,S");
        std::size_t rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 3);
    }
    SECTION("with predictions") {
        auto pred = make_labels({0, 1, 1});
        rs_chart_export(pts, labels, &pred, path);
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "sample_id,true_label,predicted_label,R,S");
        std::getline(in, line);
        CHECK(line.rfind("0,0,0,", 0) == 0);
    }
    std::remove(path.c_str());
}

TEST_CASE("rs report serializes all fields") {
    Matrix pts(3, 1);
    pts(1, 0) = 1.0;
    pts(2, 0) = 3.0;
    auto rep = rs_report(pts, make_labels({0, 0, 1}));
    auto j = rs_report_to_json(rep);
    CHECK(j.at("R").size() == 3);
    CHECK(j.at("cri").size() == 2);
    CHECK(j.at("rsi").get<double>() == rep.rsi);
}
