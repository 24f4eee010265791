#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "driftdx/dataset.hpp"
#include "driftdx/learners.hpp"

namespace driftdx {

// Nearest multiple of 1/B, half rounding up: (1/B) * floor(p*B + 1/2).
double bin_mu(double p, int B);
// Integer bin id in [0, B] for the same rule; bin value is id / B.
int bin_index(double p, int B);

// Conditional loss for zero-one loss from the outcome probability and the
// frozen model's predicted class: Z(x) = mu*(1 - c) + (1 - mu)*c.
inline double z_from_mu(double mu, int pred_class) {
    return pred_class == 1 ? 1.0 - mu : mu;
}

struct OutcomeModels {
    Model mu0;  // P(y=1|x) under the source domain
    Model mu1;  // P(y=1|x) under the target domain
};

// mu_d fitted per domain on training data; Z_d evaluation is analytic via
// z_from_mu with the frozen model's per-row predicted class.
OutcomeModels fit_outcome_models(const Dataset& train_source, const Dataset& train_target,
                                 const CvConfig& cfg);

// P(y=1 | x_s, mu_bin(x)) on target training data. Input layout of the fitted
// model: subset columns in order, then one mu_bin column.
Model fit_shifted_outcome(const Dataset& train_target, const FeatureSubset& s, const Model& mu0,
                          int B, const CvConfig& cfg);

// E0[loss | x_s, h(x)] on source training data. Input layout: subset columns,
// then the detector column; if the detector is constant on the training data
// the fit drops the detector column and uses x_s alone (recorded in used_h).
struct ConditionalLossModel {
    Model model;
    bool used_h = true;
};
ConditionalLossModel fit_conditional_loss_subset(const Dataset& train_source,
                                                 const FeatureSubset& s,
                                                 const std::vector<double>& h_train,
                                                 const CvConfig& cfg);

// Density ratio p_target(x_s)/p_source(x_s) by classifier odds. Probabilities
// are clipped to [delta, 1-delta] before forming odds, and the final ratio is
// clamped to [delta/(1-delta), (1-delta)/delta].
struct DensityRatio {
    Model clf;
    double prior_factor = 1.0;  // n_source / n_target
    double clip_delta = 1e-3;
    double ratio_from_prob(double q) const;
    double eval(std::span<const double> x) const;
};
DensityRatio fit_density_ratio(const Matrix& X_source, const Matrix& X_target, double clip_delta,
                               const CvConfig& cfg);

// Pairwise conditional density ratio for the V-statistic correction:
// p1(x_c | x_s, mu_bin) / p1(x_c | mu_bin), fitted contrastively on target
// training rows: positives pair x_c with its own (x_s, mu_bin), negatives
// with a random same-bin row's x_c. Classifier input layout:
// [subset columns..., complement columns..., mu_bin].
struct PairRatio {
    Model clf;
    bool trivial = false;  // empty complement: ratio identically 1
    double clip_delta = 1e-3;
    double ratio_from_prob(double q) const;
    double eval(std::span<const double> x) const;
};
PairRatio fit_vstat_density_ratio(const Dataset& train_target, const FeatureSubset& s,
                                  const Model& mu0, int B, double clip_delta, const CvConfig& cfg,
                                  std::uint64_t seed);

// Multiplies a base ratio by scale = E0[h]/E1[h] (or E0[h]/E_s[h] when
// target_weights carries self-normalized importance weights pi_s).
struct ScaledRatio {
    double scale = 1.0;
};
ScaledRatio scale_ratio(const std::vector<double>& h_source, const std::vector<double>& h_target,
                        const std::optional<std::vector<double>>& source_weights_pis);

}  // namespace driftdx
