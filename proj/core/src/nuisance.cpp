#include "driftdx/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace driftdx {

double bin_mu(double p, int B) {
    return static_cast<double>(bin_index(p, B)) / static_cast<double>(B);
}

int bin_index(double p, int B) {
    int k = static_cast<int>(std::floor(p * static_cast<double>(B) + 0.5));
    return std::clamp(k, 0, B);
}

OutcomeModels fit_outcome_models(const Dataset& train_source, const Dataset& train_target,
                                 const CvConfig& cfg) {
    OutcomeModels out;
    out.mu0 = fit_prob_classifier(train_source.features, train_source.outcome, cfg);
    out.mu1 = fit_prob_classifier(train_target.features, train_target.outcome, cfg);
    return out;
}

namespace {

Matrix append_column(const Matrix& base, const std::vector<double>& col) {
    Matrix out(base.n_rows, base.n_cols + 1);
    for (std::size_t r = 0; r < base.n_rows; ++r) {
        for (std::size_t c = 0; c < base.n_cols; ++c) out.at(r, c) = base.at(r, c);
        out.at(r, base.n_cols) = col[r];
    }
    return out;
}

}  // namespace

Model fit_shifted_outcome(const Dataset& train_target, const FeatureSubset& s, const Model& mu0,
                          int B, const CvConfig& cfg) {
    Matrix Xs = train_target.features.select_columns(s.column_indices);
    std::vector<double> mub(train_target.n());
    for (std::size_t i = 0; i < train_target.n(); ++i)
        mub[i] = bin_mu(mu0.predict_row(train_target.features.row(i)), B);
    Matrix X = append_column(Xs, mub);
    return fit_prob_classifier(X, train_target.outcome, cfg);
}

ConditionalLossModel fit_conditional_loss_subset(const Dataset& train_source,
                                                 const FeatureSubset& s,
                                                 const std::vector<double>& h_train,
                                                 const CvConfig& cfg) {
    if (h_train.size() != train_source.n())
        throw RunError("fit_conditional_loss_subset: detector values misaligned");
    Matrix Xs = train_source.features.select_columns(s.column_indices);
    bool constant =
        std::all_of(h_train.begin(), h_train.end(), [&](double v) { return v == h_train[0]; });
    ConditionalLossModel out;
    out.used_h = !constant;
    Matrix X = constant ? Xs : append_column(Xs, h_train);
    out.model = fit_regressor(X, train_source.loss, cfg);
    return out;
}

double DensityRatio::ratio_from_prob(double q) const {
    double d = clip_delta;
    q = std::clamp(q, d, 1.0 - d);
    double r = q / (1.0 - q) * prior_factor;
    return std::clamp(r, d / (1.0 - d), (1.0 - d) / d);
}

double DensityRatio::eval(std::span<const double> x) const {
    return ratio_from_prob(clf.predict_row(x));
}

DensityRatio fit_density_ratio(const Matrix& X_source, const Matrix& X_target, double clip_delta,
                               const CvConfig& cfg) {
    std::size_t n0 = X_source.n_rows, n1 = X_target.n_rows;
    if (n0 == 0 || n1 == 0) throw InputError("fit_density_ratio: empty domain");
    if (X_source.n_cols != X_target.n_cols)
        throw InputError("fit_density_ratio: column mismatch");
    Matrix X(n0 + n1, X_source.n_cols);
    std::vector<int> labels(n0 + n1);
    for (std::size_t r = 0; r < n0; ++r)
        for (std::size_t c = 0; c < X.n_cols; ++c) X.at(r, c) = X_source.at(r, c);
    for (std::size_t r = 0; r < n1; ++r) {
        for (std::size_t c = 0; c < X.n_cols; ++c) X.at(n0 + r, c) = X_target.at(r, c);
        labels[n0 + r] = 1;
    }
    DensityRatio out;
    out.clip_delta = clip_delta;
    out.prior_factor = static_cast<double>(n0) / static_cast<double>(n1);
    out.clf = fit_prob_classifier(X, labels, cfg);
    return out;
}

double PairRatio::ratio_from_prob(double q) const {
    double d = clip_delta;
    q = std::clamp(q, d, 1.0 - d);
    double r = q / (1.0 - q);  // balanced contrastive classes: prior factor 1
    return std::clamp(r, d / (1.0 - d), (1.0 - d) / d);
}

double PairRatio::eval(std::span<const double> x) const {
    if (trivial) return 1.0;
    return ratio_from_prob(clf.predict_row(x));
}

PairRatio fit_vstat_density_ratio(const Dataset& train_target, const FeatureSubset& s,
                                  const Model& mu0, int B, double clip_delta, const CvConfig& cfg,
                                  std::uint64_t seed) {
    PairRatio out;
    out.clip_delta = clip_delta;
    std::vector<int> complement;
    for (int c = 0; c < static_cast<int>(train_target.d()); ++c)
        if (std::find(s.column_indices.begin(), s.column_indices.end(), c) ==
            s.column_indices.end())
            complement.push_back(c);
    if (complement.empty()) {
        out.trivial = true;
        return out;
    }

    std::size_t n = train_target.n();
    std::vector<int> bins(n);
    std::vector<std::vector<std::size_t>> by_bin(static_cast<std::size_t>(B) + 1);
    for (std::size_t i = 0; i < n; ++i) {
        bins[i] = bin_index(mu0.predict_row(train_target.features.row(i)), B);
        by_bin[static_cast<std::size_t>(bins[i])].push_back(i);
    }
    bool warned = false;
    for (const auto& rows : by_bin)
        if (rows.size() == 1 && !warned) {
            std::cerr << "warning: mu_bin bin with a single training row; its pairwise ratio "
                         "defaults toward 1\n";
            warned = true;
        }

    std::size_t d_in = s.column_indices.size() + complement.size() + 1;
    Matrix X(2 * n, d_in);
    std::vector<int> labels(2 * n, 0);
    Rng rng(substream(seed, 0x9a17));
    auto fill_row = [&](std::size_t out_row, std::size_t own, std::size_t donor) {
        std::size_t c = 0;
        for (int sc : s.column_indices)
            X.at(out_row, c++) = train_target.features.at(own, static_cast<std::size_t>(sc));
        for (int cc : complement)
            X.at(out_row, c++) = train_target.features.at(donor, static_cast<std::size_t>(cc));
        X.at(out_row, c) = static_cast<double>(bins[own]) / static_cast<double>(B);
    };
    for (std::size_t i = 0; i < n; ++i) {
        fill_row(i, i, i);
        labels[i] = 1;
        const auto& peers = by_bin[static_cast<std::size_t>(bins[i])];
        std::size_t donor = i;
        if (peers.size() > 1) {
            std::uniform_int_distribution<std::size_t> pick(0, peers.size() - 2);
            std::size_t k = pick(rng);
            donor = peers[k >= static_cast<std::size_t>(
                                   std::find(peers.begin(), peers.end(), i) - peers.begin())
                              ? k + 1
                              : k];
        }
        fill_row(n + i, i, donor);
    }
    out.clf = fit_prob_classifier(X, labels, cfg);
    return out;
}

ScaledRatio scale_ratio(const std::vector<double>& h_source, const std::vector<double>& h_target,
                        const std::optional<std::vector<double>>& source_weights_pis) {
    Kahan e0;
    for (double v : h_source) e0.add(v);
    double mean0 = h_source.empty() ? 0.0 : e0.value() / static_cast<double>(h_source.size());

    double mean1 = 0.0;
    if (source_weights_pis) {
        // E_s[h] by self-normalized importance weighting on source rows
        if (source_weights_pis->size() != h_source.size())
            throw RunError("scale_ratio: weight vector misaligned");
        Kahan num, den;
        for (std::size_t i = 0; i < h_source.size(); ++i) {
            num.add((*source_weights_pis)[i] * h_source[i]);
            den.add((*source_weights_pis)[i]);
        }
        if (den.value() <= 0) throw RunError("scale_ratio: degenerate importance weights");
        mean1 = num.value() / den.value();
    } else {
        Kahan e1;
        for (double v : h_target) e1.add(v);
        mean1 = h_target.empty() ? 0.0 : e1.value() / static_cast<double>(h_target.size());
    }
    if (mean0 <= 0.0 || mean1 <= 0.0)
        throw RunError("scale_ratio: zero detector prevalence");
    ScaledRatio out;
    out.scale = mean0 / mean1;
    return out;
}

}  // namespace driftdx
