#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "driftdx/dataset.hpp"
#include "json.hpp"

namespace driftdx {

// One depth-1 tree. Points with feature value >= threshold go right.
struct Stump {
    int feature = 0;
    double threshold = 0;
    double left = 0;
    double right = 0;
};

struct TrainingMeta {
    double cv_score = 0;     // mean CV squared error or log-loss
    int folds = 0;
    std::uint64_t seed = 0;
    std::string chosen;      // human-readable hyperparameter description
};

// A fitted model. Linear models carry (intercept, weights); stump ensembles
// carry (bias, stumps). The raw score is additive over input columns, which
// the estimators exploit to evaluate mixed feature points in O(1) per pair.
struct Model {
    enum class Kind { linear, boosted_stumps };
    Kind kind = Kind::linear;
    bool logistic = false;   // sigmoid link on predictions
    std::size_t n_features = 0;

    std::vector<double> weights;  // linear
    double intercept = 0;         // linear

    std::vector<Stump> stumps;    // boosted_stumps
    double bias = 0;              // boosted_stumps

    TrainingMeta meta;

    double raw(std::span<const double> x) const;
    // raw-score contribution of the selected columns; bias/intercept included
    // only when with_bias is set, so two disjoint partials sum to raw()
    double raw_partial(std::span<const double> x, const std::vector<std::uint8_t>& column_mask,
                       bool with_bias) const;
    // contribution of a single column at each of the given values
    std::vector<double> column_contrib_table(int column, const std::vector<double>& values) const;

    double link(double score) const;
    double predict_row(std::span<const double> x) const;
    std::vector<double> predict(const Matrix& X) const;

    nlohmann::json to_json() const;
    static Model from_json(const nlohmann::json& j);
};

struct CvCandidate {
    Model::Kind kind = Model::Kind::linear;
    double ridge = 0;        // linear
    int rounds = 0;          // boosted_stumps
    double shrinkage = 0;    // boosted_stumps
};

struct CvConfig {
    int folds = 5;
    std::uint64_t seed = 0;
    std::vector<CvCandidate> grid;  // empty = default_grid()
    static std::vector<CvCandidate> default_grid();
};

// CV-selected least-squares fit. Constant y short-circuits to the constant
// predictor. Throws InputError if n < folds.
Model fit_regressor(const Matrix& X, const std::vector<double>& y, const CvConfig& cfg);

// CV-selected log-loss fit; predictions strictly inside (0,1). Throws
// InputError when only one class is present.
Model fit_prob_classifier(const Matrix& X, const std::vector<int>& labels, const CvConfig& cfg);

// Probability clamp applied before log-loss evaluation.
inline double clamp_prob(double p) {
    if (p < 1e-6) return 1e-6;
    if (p > 1.0 - 1e-6) return 1.0 - 1e-6;
    return p;
}

// Content-based fold id in [0, folds): depends on the row's bytes and seed,
// not its position, so permuting rows reproduces the same partition.
int fold_of_row(std::span<const double> x, double y, int folds, std::uint64_t seed);

}  // namespace driftdx
