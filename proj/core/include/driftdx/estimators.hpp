#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "driftdx/detectors.hpp"

namespace driftdx {

// Result of one restricted-exceedence estimate. Influence entries align with
// the pooled evaluation rows, source rows first then target rows; tests whose
// estimator touches only one domain carry zeros for the other. numerator and
// denominator satisfy estimate = numerator / denominator exactly, and the
// influence vector is machine-centered.
struct MceeResult {
    DetectorKind kind = DetectorKind::agg_outcome;
    double estimate = 0;
    double plugin_estimate = 0;
    double numerator = 0;
    double denominator = 1;
    std::vector<double> influence;
    std::size_t n_source = 0;
    std::size_t n_target = 0;
    bool degenerate = false;
    std::string note;
};

using PairKernel = std::function<double(std::size_t, std::size_t)>;

// Mean of kernel(i, j) over all ordered pairs including i = j, compensated
// summation so the result is schedule-stable.
double vstatistic(const PairKernel& kernel, std::size_t n);

// Monte Carlo approximation over max_pairs uniformly drawn ordered pairs.
// Off the acceptance path; offered for very large n.
double vstatistic_subsampled(const PairKernel& kernel, std::size_t n, std::size_t max_pairs,
                             std::uint64_t seed);

// ---- aggregate outcome -----------------------------------------------------
// theta = (P1n[(l - Z0 - tau) h] - P0n[pi h (l - Z0)]) / P1n[h].
struct AggOutcomeInputs {
    // target evaluation rows
    std::vector<double> h1, loss1, z0_1;
    // source evaluation rows; pi is the unscaled full-feature density ratio
    std::vector<double> h0, loss0, z0_0, pi0;
};
MceeResult mcee_agg_outcome(const AggOutcomeInputs& in, double tau);
double plugin_mcee(const AggOutcomeInputs& in, double tau);

// ---- aggregate covariate ---------------------------------------------------
// theta = (P1n[Z0 h] + P0n[pi h (l - Z0)]) / P1n[h] - P0n[l h] / P0n[h] - tau.
struct AggCovariateInputs {
    std::vector<double> h1, z0_1;
    std::vector<double> h0, loss0, z0_0, pi0;
};
MceeResult mcee_agg_covariate(const AggCovariateInputs& in, double tau);
double plugin_mcee(const AggCovariateInputs& in, double tau);

// ---- detailed covariate ----------------------------------------------------
// Two debiased conditional means:
//   theta1 = (P1n[Z0 h] + P0n[pi h (l - Z0)]) / P1n[h]
//   theta2 = (P1n[mg] + P0n[pi_s (l h - mg)]) / (P1n[mh] + P0n[pi_s (h - mh)])
//   theta  = theta1 - theta2 - tau
// where mh(x_s) estimates E0[h | x_s] and mg(x_s) estimates E0[l h | x_s]
// (built from the conditional-loss nuisance as Z0s(x_s, 1) * mh(x_s)).
// With an empty subset the mg/mh corrections cancel constants exactly and
// theta2 reduces to P0n[l h] / P0n[h], the aggregate form.
struct DetailCovariateInputs {
    std::vector<double> h1, z0_1, mg1, mh1;
    std::vector<double> h0, loss0, z0_0, pi0, pis0, mg0, mh0;
};
MceeResult mcee_detail_covariate(const DetailCovariateInputs& in, double tau);
double plugin_mcee(const DetailCovariateInputs& in, double tau);

// ---- detailed outcome ------------------------------------------------------
// theta = (P1n[(l - Zs - tau) h] - C) / P1n[h], where C is the pairwise
// correction: the within-bin V-statistic of
//   c(i,j) = h' piV' [ l(y_i, f') - sum_y l(y, f') p_s(y | x_s_i, bin_i) ]
// evaluated at the mixed point (x_s from row i, x_complement from row j).
// Rows pair within the mu_bin bin of row i to match the pairwise density
// ratio's conditioning. pair_kernel(i, j) must return c(i, j).
//
// When use_pairs is false the inputs follow the empty-subset convention:
// zs carries Z0 values, the correction is dropped, and the source-side
// one-step term from the aggregate estimator applies (source arrays required).
struct DetailOutcomeInputs {
    // target evaluation rows
    std::vector<int> bin;  // mu_bin bin index per row
    std::vector<double> h, loss, zs;
    PairKernel pair_kernel;
    bool use_pairs = true;
    // source evaluation rows, used only when use_pairs is false
    std::vector<double> h0, loss0, z0_0, pi0;
};
MceeResult mcee_detail_outcome(const DetailOutcomeInputs& in, double tau);
double plugin_mcee(const DetailOutcomeInputs& in, double tau);

}  // namespace driftdx
