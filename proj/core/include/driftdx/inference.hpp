#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "driftdx/estimators.hpp"
#include "driftdx/explain.hpp"
#include "driftdx/nuisance.hpp"
#include "json.hpp"

namespace driftdx {

struct RunConfig {
    double tau = 0;
    double epsilon = 0.05;
    double alpha = 0.05;
    double clip_delta = 1e-3;
    double split_fraction = 0.5;
    double corr_alpha = 0.05;
    int bins = 40;
    int bootstrap_reps = 1000;
    int omega_grid_size = 17;
    int lambda_grid_size = 21;
    int cv_folds = 5;
    std::uint64_t seed = 0;
    std::vector<FeatureSubset> subsets;
    bool force_detailed = false;

    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

struct BootstrapDraws {
    int reps = 0;
    std::uint64_t seed = 0;
    std::vector<double> statistics;  // centered multiplier statistics
};

// One-sided multiplier-bootstrap p-value: each replicate draws xi ~ N(0,1)
// per influence entry and recomputes (1/n) sum xi * (psi - mean psi);
// p = (1 + #{replicate >= observed estimate}) / (R + 1). All-zero influence
// (degenerate test) returns p = 1.
std::pair<double, BootstrapDraws> multiplier_bootstrap_pvalue(const MceeResult& mcee, int R,
                                                              std::uint64_t seed);

struct TestResult {
    std::string hypothesis;  // H0_X, H0_YX, H0s_X(name), H0s_YX(name)
    MceeResult mcee;
    double p_value = 1;
    bool rejected = false;
    bool degenerate = false;
    std::optional<RuleSet> rules;
    SubgroupStats stats;
    nlohmann::json detector_info;
};

enum class ShiftBranch { covariate, outcome };

struct AggregateResults {
    TestResult covariate;  // H0_X
    TestResult outcome;    // H0_YX
};

// Full two-step pipeline per aggregate test: nuisances and detector on the
// training halves, debiased estimate and bootstrap p on the held-out halves.
// study_model, when given, is the frozen model that produced the predictions;
// otherwise a surrogate classifier of the predicted class is fitted for the
// pairwise outcome machinery.
AggregateResults run_aggregate_tests(const SplitPair& source, const SplitPair& target,
                                     const RunConfig& cfg, const Model* study_model = nullptr);

struct DetailedResults {
    std::vector<std::pair<std::string, TestResult>> by_subset;
    std::vector<std::string> flags;  // S-hat = subsets with p > alpha
};

DetailedResults run_detailed_tests(const SplitPair& source, const SplitPair& target,
                                   const std::vector<FeatureSubset>& subsets, ShiftBranch branch,
                                   const RunConfig& cfg, const Model* study_model = nullptr);

struct Decomposition {
    double total = 0;           // P1n[loss] - P0n[loss] on evaluation data
    double covariate_term = 0;  // P1n[Z0] - P0n[loss]
    double outcome_term = 0;    // P1n[loss] - P1n[Z0]
};

struct HierarchicalReport {
    RunConfig config;
    TestResult agg_covariate, agg_outcome;
    DetailedResults detail_covariate, detail_outcome;
    bool forced_detailed = false;
    Decomposition decomposition;
    std::vector<std::string> column_names;
    nlohmann::json to_json() const;
};

HierarchicalReport run_hierarchy(const Dataset& source_raw, const Dataset& target_raw,
                                 const std::vector<FeatureSubset>& subsets, const RunConfig& cfg,
                                 const Model* study_model = nullptr);

}  // namespace driftdx
