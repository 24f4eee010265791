#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "driftdx/common.hpp"

namespace driftdx {

// Dense row-major matrix of doubles. Minimal on purpose: the learners convert
// to Eigen internally where they need factorizations.
struct Matrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : n_rows(r), n_cols(c), values(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return values[r * n_cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * n_cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * n_cols, n_cols};
    }
    // copy of selected columns, preserving the given order
    Matrix select_columns(const std::vector<int>& cols) const;
};

enum class Domain : int { source = 0, target = 1 };

struct Dataset {
    Matrix features;
    std::vector<int> outcome;          // {0,1}
    Domain domain = Domain::source;
    std::vector<double> predictions;   // [0,1] probabilities or {0,1} classes
    std::vector<double> loss;          // populated by compute_loss
    std::vector<std::string> column_names;

    std::size_t n() const { return features.n_rows; }
    std::size_t d() const { return features.n_cols; }
    void validate() const;  // throws InputError on any broken invariant
    Dataset select_rows(const std::vector<std::size_t>& idx) const;
};

struct SplitPair {
    Dataset train;
    Dataset eval;
    double split_fraction = 0.5;
    std::uint64_t seed = 0;
};

struct FeatureSubset {
    std::string name;
    std::vector<int> column_indices;  // ascending, unique, in [0, d)
};

enum class LossKind { zero_one };

struct CsvSchema {
    std::string outcome_column;
    std::string prediction_column;
    // empty = every remaining column is a feature
    std::vector<std::string> feature_columns;
};

Dataset load_dataset(const std::string& path, const CsvSchema& schema, Domain domain);
void write_dataset_csv(const Dataset& ds, const std::string& path);

// Thresholds probabilistic predictions at 0.5 (ties classify as 1).
int predicted_class(double prediction);
Dataset compute_loss(const Dataset& ds, LossKind kind);

SplitPair split(const Dataset& ds, double fraction, std::uint64_t seed);

// Features whose pooled-train Pearson correlation with loss is significant at
// alpha_corr. Constant columns are skipped with a warning on stderr.
FeatureSubset filter_loss_correlated(const Dataset& train_source,
                                     const Dataset& train_target,
                                     double alpha_corr);

}  // namespace driftdx
