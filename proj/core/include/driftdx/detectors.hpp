#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "driftdx/dataset.hpp"
#include "driftdx/learners.hpp"

namespace driftdx {

enum class DetectorKind { agg_outcome, detail_outcome, agg_covariate, detail_covariate };

using RowFn = std::function<double(std::span<const double>)>;

struct Detector {
    DetectorKind kind = DetectorKind::agg_outcome;
    double tau = 0;
    std::optional<double> omega;
    std::optional<double> lambda;
    std::optional<FeatureSubset> subset;
    double prevalence_source = 0;  // training-data prevalence
    double prevalence_target = 0;
    bool degenerate = false;
    std::string note;
    std::function<int(std::span<const double>)> predicate;  // x -> {0,1}

    std::vector<double> evaluate(const Dataset& ds) const;
};

struct GridSpec {
    std::vector<double> omega_grid;   // ascending, positive
    std::vector<double> lambda_grid;  // ascending, nonnegative
    // omega: log-spaced over [0.25, 4]; lambda: quantiles of Z0 on training data
    static GridSpec defaults(const std::vector<double>& z0_train_values, int n_omega,
                             int n_lambda);
};

// Plug-in outcome detectors: indicator of strict exceedence of the fitted gap.
Detector fit_agg_outcome_detector(const RowFn& z0, const RowFn& z1, double tau,
                                  const Dataset& train_target);
Detector fit_detailed_outcome_detector(const RowFn& z1, const RowFn& zs, double tau,
                                       const Dataset& train_target, const FeatureSubset& s);

// Regression-form aggregate outcome detector: fit a boosted-stump regression of
// the residual loss - Z0 - tau on target training data and flag where the
// smoothed gap is positive. Differencing two independently fitted loss models
// makes the plug-in indicator fire on estimation noise; the single residual fit
// shrinks null regions toward zero, so flagged regions track genuine exceedence.
Detector fit_agg_outcome_detector_reg(const RowFn& z0, double tau, const Dataset& train_target,
                                      const CvConfig& cv);

// Lagrangian grid detectors for covariate shifts. Candidates use >= at the
// boundary; feasibility requires prevalence >= epsilon in both training
// domains and the self-consistency check |omega - E0[h]/E1[h]| <= 0.25*omega.
// Ties break by smaller source-train prevalence, then grid order.
Detector fit_agg_covariate_detector(const RowFn& z0, const RowFn& pi, double tau,
                                    const GridSpec& grid, const Dataset& train_source,
                                    const Dataset& train_target, double epsilon);
Detector fit_detailed_covariate_detector(const RowFn& z0, const RowFn& pi, const RowFn& pi_s,
                                         double tau, const GridSpec& grid,
                                         const Dataset& train_source, const Dataset& train_target,
                                         double epsilon, const FeatureSubset& s);

enum class PrevalenceStatus { ok, degenerate };

// Checks the epsilon-prevalence requirement on evaluation data and marks the
// detector degenerate when it fails; the associated test then returns p = 1.
PrevalenceStatus enforce_prevalence(Detector& det, const Dataset& eval_source,
                                    const Dataset& eval_target, double epsilon);

}  // namespace driftdx
