#include <cmath>

#include "doctest.h"
#include "driftdx/simlab.hpp"
#include "driftdx/stats.hpp"

using namespace driftdx;

namespace {

double accuracy(const Dataset& ds) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < ds.n(); ++i)
        if (predicted_class(ds.predictions[i]) == ds.outcome[i]) ++ok;
    return static_cast<double>(ok) / static_cast<double>(ds.n());
}

}  // namespace

TEST_CASE("generated moments match the setup parameters") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_3);
    spec.n_per_domain = 8000;
    auto [src, tgt] = generate_setup(spec, 1);
    for (std::size_t c = 0; c < spec.d(); ++c) {
        std::vector<double> col0, col1;
        for (std::size_t i = 0; i < src.n(); ++i) col0.push_back(src.features.at(i, c));
        for (std::size_t i = 0; i < tgt.n(); ++i) col1.push_back(tgt.features.at(i, c));
        double se0 = spec.sd0[c] / std::sqrt(8000.0);
        double se1 = spec.sd1[c] / std::sqrt(8000.0);
        CHECK(std::fabs(stats::mean(col0) - spec.m0[c]) < 4 * se0);
        CHECK(std::fabs(stats::mean(col1) - spec.m1[c]) < 4 * se1);
        // sd of the sample sd is roughly sd/sqrt(2n)
        CHECK(std::fabs(std::sqrt(stats::variance(col0)) - spec.sd0[c]) <
              4 * spec.sd0[c] / std::sqrt(16000.0));
        CHECK(std::fabs(std::sqrt(stats::variance(col1)) - spec.sd1[c]) <
              4 * spec.sd1[c] / std::sqrt(16000.0));
    }
}

TEST_CASE("setup_2 reproduces the published accuracy drop") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_2);
    spec.n_per_domain = 40000;
    Model study = train_study_model(spec, 10000, 2);
    auto [src, tgt] = generate_setup(spec, 3);
    apply_study_model(src, study);
    apply_study_model(tgt, study);
    CHECK(accuracy(src) == doctest::Approx(0.838).epsilon(0.015));
    CHECK(accuracy(tgt) == doctest::Approx(0.779).epsilon(0.015));
}

TEST_CASE("setup_3 accuracy drops by about 5.4 points") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_3);
    spec.n_per_domain = 40000;
    Model study = train_study_model(spec, 10000, 4);
    auto [src, tgt] = generate_setup(spec, 5);
    apply_study_model(src, study);
    apply_study_model(tgt, study);
    CHECK(accuracy(src) - accuracy(tgt) == doctest::Approx(0.054).epsilon(0.25));
}

TEST_CASE("null_variant shows no accuracy change beyond noise") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::null_variant);
    spec.n_per_domain = 20000;
    Model study = train_study_model(spec, 10000, 6);
    auto [src, tgt] = generate_setup(spec, 7);
    apply_study_model(src, study);
    apply_study_model(tgt, study);
    double se = std::sqrt(2 * 0.25 / 20000.0);
    CHECK(std::fabs(accuracy(src) - accuracy(tgt)) < 2 * se + 0.004);
}

TEST_CASE("study model recovers the generating coefficients") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_2);
    Model m = train_study_model(spec, 10000, 8);
    REQUIRE(m.weights.size() == 4);
    for (std::size_t c = 0; c < 4; ++c)
        CHECK(m.weights[c] == doctest::Approx(spec.phi0[c]).epsilon(0.10));
    CHECK(std::fabs(m.intercept) < 0.15);
}

TEST_CASE("study model training is deterministic") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_2);
    Model a = train_study_model(spec, 2000, 9);
    Model b = train_study_model(spec, 2000, 9);
    CHECK(a.weights == b.weights);
    CHECK(a.intercept == b.intercept);
}

TEST_CASE("zero logits give chance-level predictions") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_2);
    spec.phi0.assign(4, 0.0);
    spec.phi1.assign(4, 0.0);
    Model m = train_study_model(spec, 10000, 10);
    std::vector<double> x{0.5, -1.0, 2.0, 0.0};
    CHECK(m.predict_row(x) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("overlap of the true indicator is exactly one") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_1a);
    Detector truth;
    truth.kind = DetectorKind::agg_outcome;
    double cut = *spec.subgroup_abs_cut;
    truth.predicate = [cut](std::span<const double> x) {
        return std::fabs(x[0]) > cut ? 1 : 0;
    };
    CHECK(true_subgroup_overlap(truth, spec, 4000, 11) == 1.0);
}

TEST_CASE("overlap of the empty detector equals the complement prevalence") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_1a);
    Detector none;
    none.kind = DetectorKind::agg_outcome;
    none.predicate = [](std::span<const double>) { return 0; };
    double overlap = true_subgroup_overlap(none, spec, 20000, 12);
    // P(|x1| > 3.5) for x1 ~ N(0, 2): 2 * (1 - Phi(1.75)) ~ 0.0801
    double prevalence = 2.0 * (1.0 - stats::norm_cdf(1.75));
    CHECK(overlap == doctest::Approx(1.0 - prevalence).epsilon(0.01));
}

TEST_CASE("overlap requires a setup with a true subgroup") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::setup_2);
    Detector any;
    any.predicate = [](std::span<const double>) { return 1; };
    CHECK_THROWS_AS(true_subgroup_overlap(any, spec, 100, 13), InputError);
}

TEST_CASE("oracle values are minus tau under equal distributions") {
    OracleSpec o;
    o.points = {{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}};
    o.p0 = {0.25, 0.25, 0.25, 0.25};
    o.p1 = o.p0;
    o.mu0 = {0.2, 0.4, 0.6, 0.8};
    o.mu1 = o.mu0;
    o.pred_class = {0, 0, 1, 1};
    o.subset_cols = {0};
    std::vector<int> all_ones(4, 1);
    double tau = 0.07;
    for (auto kind : {DetectorKind::agg_outcome, DetectorKind::agg_covariate,
                      DetectorKind::detail_outcome, DetectorKind::detail_covariate})
        CHECK(oracle_mcee(o, kind, all_ones, tau) == doctest::Approx(-tau).epsilon(1e-12));
    for (auto kind : {DetectorKind::agg_outcome, DetectorKind::agg_covariate,
                      DetectorKind::detail_outcome, DetectorKind::detail_covariate})
        CHECK(oracle_mcee_supremum(o, kind, 0.0, 0.05) <= 1e-12);
}

TEST_CASE("oracle supremum finds the single exceeding point") {
    // one point of mass 0.1 with extra target-side loss
    OracleSpec o;
    o.points = {{0.0}, {1.0}, {2.0}, {3.0}};
    o.p0 = {0.3, 0.3, 0.3, 0.1};
    o.p1 = {0.3, 0.3, 0.3, 0.1};
    o.mu0 = {0.1, 0.1, 0.1, 0.1};
    o.mu1 = {0.1, 0.1, 0.1, 0.6};  // loss rises at the last point only
    o.pred_class = {0, 0, 0, 0};
    o.subset_cols = {0};
    std::vector<int> argmax;
    double sup = oracle_mcee_supremum(o, DetectorKind::agg_outcome, 0.0, 0.05, &argmax);
    CHECK(sup == doctest::Approx(0.5).epsilon(1e-12));  // z1 - z0 = 0.6 - 0.1
    CHECK(argmax == std::vector<int>{0, 0, 0, 1});
    // the supremum dominates the full-population value
    std::vector<int> ones(4, 1);
    CHECK(sup >= oracle_mcee(o, DetectorKind::agg_outcome, ones, 0.0));
}

TEST_CASE("oracle rejects malformed specs") {
    OracleSpec o;
    o.points = {{0.0}};
    o.p0 = {0.5};  // does not sum to 1
    o.p1 = {1.0};
    o.mu0 = {0.5};
    o.mu1 = {0.5};
    o.pred_class = {0};
    CHECK_THROWS_AS(o.validate(), InputError);
}

TEST_CASE("power study records per-rep p-values and exact binomial intervals") {
    SimSetupSpec spec = SimSetupSpec::preset(SimSetupSpec::Id::null_variant);
    spec.n_per_domain = 400;
    spec.n_model_train = 1000;
    RunConfig cfg;
    cfg.bootstrap_reps = 150;
    StudyRun run = run_power_study(spec, 10, cfg, 21);
    CHECK(run.reps == 10);
    CHECK(run.failures == 0);
    bool found = false;
    for (const auto& [h, r] : run.rates) {
        CHECK(r.n <= 10);
        CHECK(r.ci_low <= r.rate);
        CHECK(r.rate <= r.ci_high);
        if (h == "H0_YX") found = true;
    }
    CHECK(found);
    std::string csv = run.to_csv();
    CHECK(csv.find("H0_YX") != std::string::npos);
}
