#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "driftdx/inference.hpp"

namespace driftdx {

// Synthetic benchmark family. Features are independent Gaussians per
// coordinate (sd entries are standard deviations); outcomes are Bernoulli of
// a logistic index. Setup 1a swaps the target logits to phi1 inside the
// subgroup A = {|x1| > subgroup_abs_cut}; every other setup applies phi_d
// globally per domain.
struct SimSetupSpec {
    enum class Id { setup_1a, setup_1b, setup_2, setup_3, null_variant };
    Id id = Id::setup_2;
    std::vector<double> m0, m1;    // per-coordinate means
    std::vector<double> sd0, sd1;  // per-coordinate standard deviations, > 0
    std::vector<double> phi0, phi1;
    bool subgroup_conditional = false;           // 1a: phi1 only inside A, target only
    std::optional<double> subgroup_abs_cut;      // 1a/1b: A = {|x1| > cut}
    std::size_t n_per_domain = 8000;
    std::size_t n_model_train = 10000;
    double default_split_fraction = 0.5;

    std::size_t d() const { return m0.size(); }
    void validate() const;
    static SimSetupSpec preset(Id id);
    static SimSetupSpec preset(const std::string& name);
    std::string name() const;
};

// Fresh draws per domain; predictions and loss left empty until a study
// model is applied.
std::pair<Dataset, Dataset> generate_setup(const SimSetupSpec& spec, std::uint64_t seed);

// Plain logistic regression on n_train fresh source draws; the frozen study
// model whose degradation the pipeline diagnoses.
Model train_study_model(const SimSetupSpec& spec, std::size_t n_train, std::uint64_t seed);

// Fills predictions from the model and computes zero-one loss in place.
void apply_study_model(Dataset& ds, const Model& model);

struct StudyRun {
    struct Rate {
        int rejections = 0;
        int n = 0;
        double rate = 0;
        double ci_low = 0, ci_high = 0;  // exact binomial 95%
    };
    std::string setup;
    int reps = 0;
    int failures = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::vector<double>>> p_values;  // per hypothesis
    std::vector<std::pair<std::string, Rate>> rates;

    nlohmann::json to_json() const;
    std::string to_csv() const;  // rep, hypothesis, p_value
};

// One full pipeline run per rep on fresh data with per-rep seed substreams.
// Failed reps are counted and excluded from rate denominators.
StudyRun run_power_study(const SimSetupSpec& spec, int reps, const RunConfig& cfg,
                         std::uint64_t seed);

// Classification accuracy of the detector against the true subgroup
// indicator on fresh target draws. Requires a spec with a true subgroup.
double true_subgroup_overlap(const Detector& det, const SimSetupSpec& spec, std::size_t n_eval,
                             std::uint64_t seed);

// Exact verification oracle on a finite support: every expectation computed
// by exhaustive summation. Both domains' probabilities must each sum to 1.
struct OracleSpec {
    std::vector<std::vector<double>> points;  // support feature vectors
    std::vector<double> p0, p1;               // point probabilities per domain
    std::vector<double> mu0, mu1;             // P(y=1 | x) per domain
    std::vector<int> pred_class;              // frozen model's class per point
    std::vector<int> subset_cols;             // conditioning subset for detailed kinds

    std::size_t size() const { return points.size(); }
    void validate() const;
};

// Population restricted exceedence of a fixed indicator h over the support.
double oracle_mcee(const OracleSpec& spec, DetectorKind kind, const std::vector<int>& h,
                   double tau);

// Supremum over all 2^K indicators meeting the epsilon-prevalence constraint
// in both domains; refuses supports larger than 20 points. argmax, when
// given, receives a maximizing indicator.
double oracle_mcee_supremum(const OracleSpec& spec, DetectorKind kind, double tau, double eps,
                            std::vector<int>* argmax = nullptr);

}  // namespace driftdx
