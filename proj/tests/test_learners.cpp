#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "driftdx/learners.hpp"

using namespace driftdx;

namespace {

Matrix random_features(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix X(n, d);
    for (auto& v : X.values) v = gauss(rng);
    return X;
}

CvConfig quick_cv(std::uint64_t seed) {
    CvConfig cfg;
    cfg.folds = 5;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("linear regressor recovers a noiseless linear function") {
    Matrix X = random_features(400, 3, 21);
    std::vector<double> y(400);
    for (std::size_t i = 0; i < 400; ++i)
        y[i] = 1.5 + 2.0 * X.at(i, 0) - 1.0 * X.at(i, 1);
    Model m = fit_regressor(X, y, quick_cv(1));
    double max_err = 0;
    for (std::size_t i = 0; i < 400; ++i)
        max_err = std::max(max_err, std::fabs(m.predict_row(X.row(i)) - y[i]));
    CHECK(max_err < 0.05);
}

TEST_CASE("constant targets produce a constant model") {
    Matrix X = random_features(50, 2, 5);
    std::vector<double> y(50, 0.75);
    Model m = fit_regressor(X, y, quick_cv(2));
    for (std::size_t i = 0; i < 50; ++i)
        CHECK(m.predict_row(X.row(i)) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("classifier requires both classes") {
    Matrix X = random_features(30, 2, 6);
    std::vector<int> labels(30, 1);
    CHECK_THROWS_AS(fit_prob_classifier(X, labels, quick_cv(3)), InputError);
}

TEST_CASE("classifier outputs stay strictly inside (0,1)") {
    Matrix X = random_features(300, 2, 7);
    std::vector<int> labels(300);
    for (std::size_t i = 0; i < 300; ++i) labels[i] = X.at(i, 0) > 0 ? 1 : 0;  // separable
    Model m = fit_prob_classifier(X, labels, quick_cv(4));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 300; ++i) {
        double p = m.predict_row(X.row(i));
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        if ((p >= 0.5) == (labels[i] == 1)) ++correct;
    }
    CHECK(correct >= 270);
}

TEST_CASE("boosted stumps capture a step function a linear model cannot") {
    Matrix X = random_features(800, 1, 8);
    std::vector<double> y(800);
    for (std::size_t i = 0; i < 800; ++i) y[i] = std::fabs(X.at(i, 0)) > 1.0 ? 1.0 : 0.0;
    Model m = fit_regressor(X, y, quick_cv(5));
    double sse = 0;
    for (std::size_t i = 0; i < 800; ++i) {
        double e = m.predict_row(X.row(i)) - y[i];
        sse += e * e;
    }
    CHECK(m.kind == Model::Kind::boosted_stumps);  // CV must prefer the stumps
    CHECK(sse / 800 < 0.05);
}

TEST_CASE("stump threshold ties route right") {
    Stump s{0, 1.0, -1.0, 1.0};
    Model m;
    m.kind = Model::Kind::boosted_stumps;
    m.n_features = 1;
    m.stumps = {s};
    std::vector<double> at_threshold{1.0}, below{0.999};
    CHECK(m.raw(at_threshold) == 1.0);
    CHECK(m.raw(below) == -1.0);
}

TEST_CASE("raw_partial over complementary masks reconstructs raw exactly") {
    Rng rng(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix X = random_features(200, 4, 100 + trial);
        std::vector<double> y(200);
        for (std::size_t i = 0; i < 200; ++i)
            y[i] = X.at(i, 0) + (X.at(i, 1) > 0 ? 1.0 : 0.0) + 0.1 * gauss(rng);
        Model m = fit_regressor(X, y, quick_cv(trial));
        std::vector<std::uint8_t> mask_a(4), mask_b(4);
        for (int c = 0; c < 4; ++c) {
            mask_a[c] = (trial >> (c % 4)) & 1 ? 1 : 0;
            mask_b[c] = mask_a[c] ? 0 : 1;
        }
        for (std::size_t i = 0; i < 10; ++i) {
            auto x = X.row(i);
            double whole = m.raw(x);
            double parts = m.raw_partial(x, mask_a, true) + m.raw_partial(x, mask_b, false);
            CHECK(std::fabs(whole - parts) < 1e-12);
        }
    }
}

TEST_CASE("column_contrib_table equals per-column raw_partial") {
    Matrix X = random_features(300, 3, 55);
    std::vector<double> y(300);
    for (std::size_t i = 0; i < 300; ++i)
        y[i] = (X.at(i, 2) > 0.5 ? 2.0 : -1.0) + X.at(i, 0);
    Model m = fit_regressor(X, y, quick_cv(9));
    std::vector<double> grid{-2.0, -0.5, 0.0, 0.5, 2.0};
    std::vector<double> table = m.column_contrib_table(2, grid);
    REQUIRE(table.size() == grid.size());
    std::vector<std::uint8_t> only_c2{0, 0, 1};
    for (std::size_t k = 0; k < grid.size(); ++k) {
        std::vector<double> x{0.0, 0.0, grid[k]};
        CHECK(table[k] == doctest::Approx(m.raw_partial(x, only_c2, false)).epsilon(1e-14));
    }
}

TEST_CASE("fold assignment is invariant to row permutation") {
    Matrix X = random_features(60, 3, 31);
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i) y[i] = X.at(i, 0);
    std::vector<int> folds(60);
    for (std::size_t i = 0; i < 60; ++i) folds[i] = fold_of_row(X.row(i), y[i], 5, 77);
    // shuffle rows; each row's fold must follow its content
    std::vector<std::size_t> perm(60);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(3);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t k = 0; k < 60; ++k)
        CHECK(fold_of_row(X.row(perm[k]), y[perm[k]], 5, 77) == folds[perm[k]]);
}

TEST_CASE("model JSON round trip reproduces predictions bit for bit") {
    Matrix X = random_features(250, 3, 41);
    std::vector<int> labels(250);
    for (std::size_t i = 0; i < 250; ++i)
        labels[i] = X.at(i, 0) + X.at(i, 1) * X.at(i, 1) > 1 ? 1 : 0;
    Model m = fit_prob_classifier(X, labels, quick_cv(12));
    Model back = Model::from_json(m.to_json());
    for (std::size_t i = 0; i < 250; ++i)
        CHECK(back.predict_row(X.row(i)) == m.predict_row(X.row(i)));
}

TEST_CASE("cv selection is deterministic in the seed") {
    Matrix X = random_features(300, 2, 61);
    std::vector<double> y(300);
    Rng rng(4);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < 300; ++i) y[i] = X.at(i, 0) + 0.3 * gauss(rng);
    Model a = fit_regressor(X, y, quick_cv(71));
    Model b = fit_regressor(X, y, quick_cv(71));
    CHECK(a.meta.chosen == b.meta.chosen);
    for (std::size_t i = 0; i < 20; ++i) CHECK(a.predict_row(X.row(i)) == b.predict_row(X.row(i)));
}

TEST_CASE("zero-feature model predicts its intercept") {
    Matrix X(40, 0);
    std::vector<double> y(40, 0.0);
    for (std::size_t i = 0; i < 40; ++i) y[i] = i < 10 ? 1.0 : 0.0;
    Model m = fit_regressor(X, y, quick_cv(13));
    std::vector<double> empty;
    CHECK(m.predict_row(empty) == doctest::Approx(0.25).epsilon(1e-9));
}
