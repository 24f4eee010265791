#include "driftdx/inference.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "driftdx/stats.hpp"

namespace driftdx {

void RunConfig::validate() const {
    if (tau < 0) throw InputError("tau must be >= 0");
    if (!(epsilon > 0 && epsilon <= 0.5)) throw InputError("epsilon must be in (0, 0.5]");
    if (!(alpha > 0 && alpha < 1)) throw InputError("alpha must be in (0,1)");
    if (!(clip_delta > 0 && clip_delta < 0.5)) throw InputError("clip_delta must be in (0, 0.5)");
    if (!(split_fraction > 0 && split_fraction < 1))
        throw InputError("split_fraction must be in (0,1)");
    if (bins < 1) throw InputError("bins must be >= 1");
    if (bootstrap_reps < 100) throw InputError("bootstrap_reps must be >= 100");
    if (cv_folds < 2) throw InputError("cv_folds must be >= 2");
    if (omega_grid_size < 1 || lambda_grid_size < 1) throw InputError("grid sizes must be >= 1");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["tau"] = tau;
    j["epsilon"] = epsilon;
    j["alpha"] = alpha;
    j["clip_delta"] = clip_delta;
    j["split_fraction"] = split_fraction;
    j["corr_alpha"] = corr_alpha;
    j["bins"] = bins;
    j["bootstrap_reps"] = bootstrap_reps;
    j["omega_grid_size"] = omega_grid_size;
    j["lambda_grid_size"] = lambda_grid_size;
    j["cv_folds"] = cv_folds;
    j["seed"] = seed;
    j["force_detailed"] = force_detailed;
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& s : subsets) subs.push_back({{"name", s.name}, {"columns", s.column_indices}});
    j["subsets"] = subs;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.tau = j.value("tau", c.tau);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.alpha = j.value("alpha", c.alpha);
    c.clip_delta = j.value("clip_delta", c.clip_delta);
    c.split_fraction = j.value("split_fraction", c.split_fraction);
    c.corr_alpha = j.value("corr_alpha", c.corr_alpha);
    c.bins = j.value("bins", c.bins);
    c.bootstrap_reps = j.value("bootstrap_reps", c.bootstrap_reps);
    c.omega_grid_size = j.value("omega_grid_size", c.omega_grid_size);
    c.lambda_grid_size = j.value("lambda_grid_size", c.lambda_grid_size);
    c.cv_folds = j.value("cv_folds", c.cv_folds);
    c.seed = j.value("seed", c.seed);
    c.force_detailed = j.value("force_detailed", c.force_detailed);
    if (j.contains("subsets"))
        for (const auto& s : j["subsets"]) {
            FeatureSubset fs;
            fs.name = s.at("name").get<std::string>();
            fs.column_indices = s.at("columns").get<std::vector<int>>();
            c.subsets.push_back(fs);
        }
    c.validate();
    return c;
}

std::pair<double, BootstrapDraws> multiplier_bootstrap_pvalue(const MceeResult& mcee, int R,
                                                              std::uint64_t seed) {
    if (R < 100) throw InputError("bootstrap reps must be >= 100");
    BootstrapDraws draws;
    draws.reps = R;
    draws.seed = seed;
    draws.statistics.reserve(R);

    const std::vector<double>& psi = mcee.influence;
    double maxabs = 0;
    for (double v : psi) maxabs = std::max(maxabs, std::fabs(v));
    if (mcee.degenerate || psi.empty() || maxabs < 1e-15) {
        draws.statistics.assign(R, 0.0);
        return {1.0, draws};
    }
    double mean = stats::mean(psi);
    double n = static_cast<double>(psi.size());
    std::size_t count = 0;
    for (int r = 0; r < R; ++r) {
        Rng rng(substream(seed, 0xb007 + static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        Kahan k;
        for (double v : psi) k.add(gauss(rng) * (v - mean));
        double stat = k.value() / n;
        draws.statistics.push_back(stat);
        if (stat >= mcee.estimate) ++count;
    }
    double p = (1.0 + static_cast<double>(count)) / (static_cast<double>(R) + 1.0);
    return {p, draws};
}

namespace {

Dataset concat_splits(const SplitPair& sp) {
    const Dataset &a = sp.train, &b = sp.eval;
    Dataset out;
    out.domain = a.domain;
    out.column_names = a.column_names;
    out.features = Matrix(a.n() + b.n(), a.d());
    for (std::size_t r = 0; r < a.n(); ++r)
        for (std::size_t c = 0; c < a.d(); ++c) out.features.at(r, c) = a.features.at(r, c);
    for (std::size_t r = 0; r < b.n(); ++r)
        for (std::size_t c = 0; c < b.d(); ++c)
            out.features.at(a.n() + r, c) = b.features.at(r, c);
    auto cat = [](const auto& x, const auto& y) {
        auto z = x;
        z.insert(z.end(), y.begin(), y.end());
        return z;
    };
    out.outcome = cat(a.outcome, b.outcome);
    out.predictions = cat(a.predictions, b.predictions);
    out.loss = cat(a.loss, b.loss);
    return out;
}

CvConfig cv_for(const RunConfig& cfg, std::uint64_t salt) {
    CvConfig c;
    c.folds = cfg.cv_folds;
    c.seed = substream(cfg.seed, salt);
    return c;
}

std::vector<double> column_of(const Dataset& ds, const std::vector<int>& cols, std::size_t row,
                              std::vector<double>& buf) {
    buf.resize(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k)
        buf[k] = ds.features.at(row, static_cast<std::size_t>(cols[k]));
    return buf;
}

// Constant-probability fallback when a surrogate cannot be fitted.
Model constant_prob_model(std::size_t n_features, double p) {
    Model m;
    m.kind = Model::Kind::linear;
    m.logistic = true;
    m.n_features = n_features;
    m.weights.assign(n_features, 0.0);
    p = std::clamp(p, 1e-6, 1.0 - 1e-6);
    m.intercept = std::log(p / (1.0 - p));
    m.meta.chosen = "constant";
    return m;
}

// Shared fitted state for one pipeline invocation.
struct Workbench {
    const SplitPair& src;
    const SplitPair& tgt;
    const RunConfig& cfg;

    Model f;  // frozen study model or surrogate for its predicted class
    bool surrogate_f = false;
    OutcomeModels om;
    FeatureSubset corr;
    DensityRatio pi_full;  // all features, outcome-test correction
    DensityRatio pi_corr;  // loss-correlated features, covariate detectors

    std::vector<double> z0_eval_src, z0_eval_tgt, z0_train_src;
    std::vector<double> pi_full_eval_src, pi_corr_eval_src;

    Workbench(const SplitPair& s, const SplitPair& t, const RunConfig& c, const Model* study)
        : src(s), tgt(t), cfg(c) {
        if (study) {
            f = *study;
        } else {
            surrogate_f = true;
            std::size_t n0 = src.train.n(), n1 = tgt.train.n();
            Matrix X(n0 + n1, src.train.d());
            std::vector<int> labels(n0 + n1);
            for (std::size_t r = 0; r < n0; ++r) {
                for (std::size_t cc = 0; cc < X.n_cols; ++cc)
                    X.at(r, cc) = src.train.features.at(r, cc);
                labels[r] = predicted_class(src.train.predictions[r]);
            }
            for (std::size_t r = 0; r < n1; ++r) {
                for (std::size_t cc = 0; cc < X.n_cols; ++cc)
                    X.at(n0 + r, cc) = tgt.train.features.at(r, cc);
                labels[n0 + r] = predicted_class(tgt.train.predictions[r]);
            }
            bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
            bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
            if (has0 && has1)
                f = fit_prob_classifier(X, labels, cv_for(cfg, 0xf0));
            else
                f = constant_prob_model(X.n_cols, has1 ? 1.0 : 0.0);
        }

        om = fit_outcome_models(src.train, tgt.train, cv_for(cfg, 0x01));
        // the correlation filter is a preprocessing step: screened on the full
        // domains (train + eval), not just the training partitions, since a
        // marginal dependence test needs all the sample it can get
        corr = filter_loss_correlated(concat_splits(src), concat_splits(tgt), cfg.corr_alpha);

        pi_full = fit_density_ratio(src.train.features, tgt.train.features, cfg.clip_delta,
                                    cv_for(cfg, 0x02));
        if (!corr.column_indices.empty()) {
            pi_corr = fit_density_ratio(src.train.features.select_columns(corr.column_indices),
                                        tgt.train.features.select_columns(corr.column_indices),
                                        cfg.clip_delta, cv_for(cfg, 0x03));
        }

        z0_eval_src = z0_rows(src.eval);
        z0_eval_tgt = z0_rows(tgt.eval);
        z0_train_src = z0_rows(src.train);
        pi_full_eval_src.resize(src.eval.n());
        pi_corr_eval_src.resize(src.eval.n());
        std::vector<double> buf;
        for (std::size_t i = 0; i < src.eval.n(); ++i) {
            pi_full_eval_src[i] = pi_full.eval(src.eval.features.row(i));
            pi_corr_eval_src[i] = corr.column_indices.empty()
                                      ? 1.0
                                      : pi_corr.eval(column_of(src.eval, corr.column_indices, i, buf));
        }
    }

    int pred_class(std::span<const double> x) const { return predicted_class(f.predict_row(x)); }

    double z0_at(std::span<const double> x) const {
        return z_from_mu(om.mu0.predict_row(x), pred_class(x));
    }
    double z1_at(std::span<const double> x) const {
        return z_from_mu(om.mu1.predict_row(x), pred_class(x));
    }

    std::vector<double> z0_rows(const Dataset& ds) const {
        std::vector<double> out(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i) out[i] = z0_at(ds.features.row(i));
        return out;
    }

    RowFn z0fn() const {
        return [this](std::span<const double> x) { return z0_at(x); };
    }
    RowFn z1fn() const {
        return [this](std::span<const double> x) { return z1_at(x); };
    }
    RowFn pi_corr_fn() const {
        return [this](std::span<const double> x) {
            if (corr.column_indices.empty()) return 1.0;
            std::vector<double> buf(corr.column_indices.size());
            for (std::size_t k = 0; k < buf.size(); ++k)
                buf[k] = x[static_cast<std::size_t>(corr.column_indices[k])];
            return pi_corr.eval(buf);
        };
    }
};

nlohmann::json detector_json(const Detector& det) {
    nlohmann::json j;
    switch (det.kind) {
        case DetectorKind::agg_outcome: j["kind"] = "agg_outcome"; break;
        case DetectorKind::detail_outcome: j["kind"] = "detail_outcome"; break;
        case DetectorKind::agg_covariate: j["kind"] = "agg_covariate"; break;
        case DetectorKind::detail_covariate: j["kind"] = "detail_covariate"; break;
    }
    j["tau"] = det.tau;
    if (det.omega) j["omega"] = *det.omega;
    if (det.lambda) j["lambda"] = *det.lambda;
    if (det.subset) j["subset"] = det.subset->name;
    j["prevalence_source_train"] = det.prevalence_source;
    j["prevalence_target_train"] = det.prevalence_target;
    j["degenerate"] = det.degenerate;
    if (!det.note.empty()) j["note"] = det.note;
    return j;
}

TestResult finish_test(const std::string& hypothesis, const Detector& det, MceeResult mcee,
                       const Workbench& wb, std::uint64_t boot_salt) {
    TestResult tr;
    tr.hypothesis = hypothesis;
    tr.detector_info = detector_json(det);
    if (det.degenerate || mcee.degenerate) {
        mcee.degenerate = true;
        if (mcee.note.empty()) mcee.note = det.note;
        tr.mcee = std::move(mcee);
        tr.degenerate = true;
        tr.p_value = 1.0;
        tr.rejected = false;
        return tr;
    }
    auto [p, draws] =
        multiplier_bootstrap_pvalue(mcee, wb.cfg.bootstrap_reps, substream(wb.cfg.seed, boot_salt));
    tr.mcee = std::move(mcee);
    tr.p_value = p;
    tr.rejected = (p <= wb.cfg.alpha);
    return tr;
}

// ---- aggregate tests -------------------------------------------------------

TestResult aggregate_outcome_test(const Workbench& wb) {
    Detector det = fit_agg_outcome_detector_reg(wb.z0fn(), wb.cfg.tau, wb.tgt.train,
                                                cv_for(wb.cfg, 0x0d));
    enforce_prevalence(det, wb.src.eval, wb.tgt.eval, wb.cfg.epsilon);
    MceeResult mcee;
    if (!det.degenerate) {
        AggOutcomeInputs in;
        in.h1 = det.evaluate(wb.tgt.eval);
        in.loss1 = wb.tgt.eval.loss;
        in.z0_1 = wb.z0_eval_tgt;
        in.h0 = det.evaluate(wb.src.eval);
        in.loss0 = wb.src.eval.loss;
        in.z0_0 = wb.z0_eval_src;
        in.pi0 = wb.pi_full_eval_src;
        mcee = mcee_agg_outcome(in, wb.cfg.tau);
    } else {
        mcee.kind = DetectorKind::agg_outcome;
        mcee.degenerate = true;
        mcee.note = det.note;
    }
    TestResult tr = finish_test("H0_YX", det, std::move(mcee), wb, 0x10);
    if (!det.degenerate) {
        tr.rules = summarize_subgroup(det, wb.tgt.eval, RuleCaps{});
        tr.stats = subgroup_stats(det, wb.src.eval, wb.tgt.eval);
    }
    return tr;
}

TestResult aggregate_covariate_test(const Workbench& wb) {
    GridSpec grid =
        GridSpec::defaults(wb.z0_train_src, wb.cfg.omega_grid_size, wb.cfg.lambda_grid_size);
    Detector det = fit_agg_covariate_detector(wb.z0fn(), wb.pi_corr_fn(), wb.cfg.tau, grid,
                                              wb.src.train, wb.tgt.train, wb.cfg.epsilon);
    enforce_prevalence(det, wb.src.eval, wb.tgt.eval, wb.cfg.epsilon);
    MceeResult mcee;
    if (!det.degenerate) {
        AggCovariateInputs in;
        in.h1 = det.evaluate(wb.tgt.eval);
        in.z0_1 = wb.z0_eval_tgt;
        in.h0 = det.evaluate(wb.src.eval);
        in.loss0 = wb.src.eval.loss;
        in.z0_0 = wb.z0_eval_src;
        in.pi0 = wb.pi_corr_eval_src;
        mcee = mcee_agg_covariate(in, wb.cfg.tau);
    } else {
        mcee.kind = DetectorKind::agg_covariate;
        mcee.degenerate = true;
        mcee.note = det.note;
    }
    TestResult tr = finish_test("H0_X", det, std::move(mcee), wb, 0x11);
    if (!det.degenerate) {
        tr.rules = summarize_subgroup(det, wb.tgt.eval, RuleCaps{});
        tr.stats = subgroup_stats(det, wb.src.eval, wb.tgt.eval);
    }
    return tr;
}

// ---- detailed outcome ------------------------------------------------------

// Precomputed per-row raw-score partials so mixed points (x_s from row i,
// x_complement from row j) evaluate in O(1) per pair.
struct OutcomeMachineData {
    int B = 40;
    double tau = 0;
    std::vector<int> bin;
    std::vector<int> y;
    std::vector<double> f_s, f_c, mu0_s, mu0_c, mu1_s, mu1_c, ps_s, piv_i, piv_c;
    std::vector<double> ps_mu;  // shifted-outcome mu-column contribution per bin value
    Model f, mu0, mu1, ps;
    PairRatio piv;

    // h, Zs, and the correction kernel at the mixed point (x_s,i ; x_c,j)
    struct Mixed {
        int h;
        double zs;
        double loss_obs_y;   // zero-one loss of y_i against the mixed prediction
        double zloss_exp;    // expected loss under p_s(y | x_s,i, bin_i)
        double piv_ratio;
    };
    Mixed mixed(std::size_t i, std::size_t j) const {
        Mixed m;
        int cls = predicted_class(f.link(f_s[i] + f_c[j]));
        int bmix = bin_index(mu0.link(mu0_s[i] + mu0_c[j]), B);
        double q_mix = ps.link(ps_s[i] + ps_mu[static_cast<std::size_t>(bmix)]);
        m.zs = z_from_mu(q_mix, cls);
        double z1 = z_from_mu(mu1.link(mu1_s[i] + mu1_c[j]), cls);
        m.h = (z1 - m.zs - tau > 0.0) ? 1 : 0;
        m.loss_obs_y = (y[i] != cls) ? 1.0 : 0.0;
        double q_own = ps.link(ps_s[i] + ps_mu[static_cast<std::size_t>(bin[i])]);
        m.zloss_exp = z_from_mu(q_own, cls);
        m.piv_ratio = piv.trivial
                          ? 1.0
                          : piv.ratio_from_prob(piv.clf.link(piv_i[i] + piv_c[j]));
        return m;
    }
    double kernel(std::size_t i, std::size_t j) const {
        Mixed m = mixed(i, j);
        if (!m.h) return 0.0;
        return m.piv_ratio * (m.loss_obs_y - m.zloss_exp);
    }
};

TestResult detailed_outcome_test(const Workbench& wb, const FeatureSubset& s,
                                 std::uint64_t salt) {
    const RunConfig& cfg = wb.cfg;
    if (s.column_indices.empty()) {
        // empty-subset convention: the detailed estimator degenerates to the
        // aggregate one (Zs -> Z0, pairwise ratio identically 1)
        Detector det = fit_agg_outcome_detector_reg(wb.z0fn(), cfg.tau, wb.tgt.train,
                                                    cv_for(cfg, 0x0d));
        det.kind = DetectorKind::detail_outcome;
        det.subset = s;
        enforce_prevalence(det, wb.src.eval, wb.tgt.eval, cfg.epsilon);
        MceeResult mcee;
        if (!det.degenerate) {
            DetailOutcomeInputs in;
            in.use_pairs = false;
            in.h = det.evaluate(wb.tgt.eval);
            in.loss = wb.tgt.eval.loss;
            in.zs = wb.z0_eval_tgt;
            in.h0 = det.evaluate(wb.src.eval);
            in.loss0 = wb.src.eval.loss;
            in.z0_0 = wb.z0_eval_src;
            in.pi0 = wb.pi_full_eval_src;
            mcee = mcee_detail_outcome(in, cfg.tau);
        } else {
            mcee.kind = DetectorKind::detail_outcome;
            mcee.degenerate = true;
            mcee.note = det.note;
        }
        return finish_test("H0s_YX(" + s.name + ")", det, std::move(mcee), wb, salt);
    }

    // train-side nuisances for this subset
    Model ps = fit_shifted_outcome(wb.tgt.train, s, wb.om.mu0, cfg.bins,
                                   cv_for(cfg, salt ^ 0x21));
    PairRatio piv = fit_vstat_density_ratio(wb.tgt.train, s, wb.om.mu0, cfg.bins, cfg.clip_delta,
                                            cv_for(cfg, salt ^ 0x22),
                                            substream(cfg.seed, salt ^ 0x23));

    // detector: plug-in indicator of Z1 - Zs - tau > 0, evaluable at any x
    const Model& mu0 = wb.om.mu0;
    const Model& mu1 = wb.om.mu1;
    const Model& f = wb.f;
    int B = cfg.bins;
    auto zs_at = [&ps, &mu0, &f, B, &s](std::span<const double> x) {
        std::vector<double> u(s.column_indices.size() + 1);
        for (std::size_t k = 0; k < s.column_indices.size(); ++k)
            u[k] = x[static_cast<std::size_t>(s.column_indices[k])];
        u.back() = bin_mu(mu0.predict_row(x), B);
        return z_from_mu(ps.predict_row(u), predicted_class(f.predict_row(x)));
    };
    RowFn zsfn = zs_at;
    Detector det = fit_detailed_outcome_detector(wb.z1fn(), zsfn, cfg.tau, wb.tgt.train, s);
    enforce_prevalence(det, wb.src.eval, wb.tgt.eval, cfg.epsilon);
    if (det.degenerate) {
        MceeResult mcee;
        mcee.kind = DetectorKind::detail_outcome;
        mcee.degenerate = true;
        mcee.note = det.note;
        return finish_test("H0s_YX(" + s.name + ")", det, std::move(mcee), wb, salt);
    }

    // evaluation-side machine
    const Dataset& ev = wb.tgt.eval;
    std::size_t n = ev.n();
    std::size_t d = ev.d();
    std::vector<std::uint8_t> mask_s(d, 0), mask_c(d, 0);
    for (int c : s.column_indices) mask_s[static_cast<std::size_t>(c)] = 1;
    for (std::size_t c = 0; c < d; ++c) mask_c[c] = mask_s[c] ? 0 : 1;

    auto data = std::make_shared<OutcomeMachineData>();
    data->B = B;
    data->tau = cfg.tau;
    data->f = f;
    data->mu0 = mu0;
    data->mu1 = mu1;
    data->ps = ps;
    data->piv = piv;
    data->y = ev.outcome;
    data->bin.resize(n);
    data->f_s.resize(n);
    data->f_c.resize(n);
    data->mu0_s.resize(n);
    data->mu0_c.resize(n);
    data->mu1_s.resize(n);
    data->mu1_c.resize(n);
    data->ps_s.resize(n);
    data->piv_i.resize(n);
    data->piv_c.resize(n);

    std::vector<double> bin_values(static_cast<std::size_t>(B) + 1);
    for (int k = 0; k <= B; ++k)
        bin_values[static_cast<std::size_t>(k)] = static_cast<double>(k) / static_cast<double>(B);
    data->ps_mu = ps.column_contrib_table(static_cast<int>(s.column_indices.size()), bin_values);

    // pairwise-ratio input layout: [subset cols..., complement cols..., mu_bin]
    std::size_t n_sub = s.column_indices.size();
    std::size_t n_comp = d - n_sub;
    std::vector<int> comp_cols;
    for (std::size_t c = 0; c < d; ++c)
        if (mask_c[c]) comp_cols.push_back(static_cast<int>(c));
    std::vector<std::uint8_t> piv_mask_i(n_sub + n_comp + 1, 0), piv_mask_c(n_sub + n_comp + 1, 0);
    for (std::size_t k = 0; k < n_sub; ++k) piv_mask_i[k] = 1;
    piv_mask_i[n_sub + n_comp] = 1;
    for (std::size_t k = 0; k < n_comp; ++k) piv_mask_c[n_sub + k] = 1;

    std::vector<double> ps_input(n_sub + 1), piv_input(n_sub + n_comp + 1);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = ev.features.row(i);
        data->f_s[i] = f.raw_partial(x, mask_s, true);
        data->f_c[i] = f.raw_partial(x, mask_c, false);
        data->mu0_s[i] = mu0.raw_partial(x, mask_s, true);
        data->mu0_c[i] = mu0.raw_partial(x, mask_c, false);
        data->mu1_s[i] = mu1.raw_partial(x, mask_s, true);
        data->mu1_c[i] = mu1.raw_partial(x, mask_c, false);
        data->bin[i] = bin_index(mu0.link(data->mu0_s[i] + data->mu0_c[i]), B);

        for (std::size_t k = 0; k < n_sub; ++k)
            ps_input[k] = x[static_cast<std::size_t>(s.column_indices[k])];
        ps_input[n_sub] = 0.0;  // contribution added via ps_mu table
        std::vector<std::uint8_t> ps_mask(n_sub + 1, 1);
        ps_mask[n_sub] = 0;
        data->ps_s[i] = ps.raw_partial(ps_input, ps_mask, true);

        if (!piv.trivial) {
            for (std::size_t k = 0; k < n_sub; ++k)
                piv_input[k] = x[static_cast<std::size_t>(s.column_indices[k])];
            for (std::size_t k = 0; k < n_comp; ++k)
                piv_input[n_sub + k] = x[static_cast<std::size_t>(comp_cols[k])];
            piv_input[n_sub + n_comp] =
                static_cast<double>(data->bin[i]) / static_cast<double>(B);
            data->piv_i[i] = piv.clf.raw_partial(piv_input, piv_mask_i, true);
            data->piv_c[i] = piv.clf.raw_partial(piv_input, piv_mask_c, false);
        }
    }

    DetailOutcomeInputs in;
    in.use_pairs = true;
    in.bin = data->bin;
    in.h.resize(n);
    in.loss.resize(n);
    in.zs.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto m = data->mixed(i, i);
        in.h[i] = static_cast<double>(m.h);
        in.loss[i] = m.loss_obs_y;
        in.zs[i] = m.zs;
    }
    in.pair_kernel = [data](std::size_t i, std::size_t j) { return data->kernel(i, j); };

    MceeResult mcee = mcee_detail_outcome(in, cfg.tau);
    return finish_test("H0s_YX(" + s.name + ")", det, std::move(mcee), wb, salt);
}

// ---- detailed covariate ----------------------------------------------------

TestResult detailed_covariate_test(const Workbench& wb, const FeatureSubset& s,
                                   std::uint64_t salt) {
    const RunConfig& cfg = wb.cfg;

    // subset density ratio; an empty subset yields the intercept-only
    // classifier whose ratio is identically 1
    DensityRatio pis = fit_density_ratio(wb.src.train.features.select_columns(s.column_indices),
                                         wb.tgt.train.features.select_columns(s.column_indices),
                                         cfg.clip_delta, cv_for(cfg, salt ^ 0x31));
    auto pis_fn = [&pis, &s](std::span<const double> x) {
        std::vector<double> buf(s.column_indices.size());
        for (std::size_t k = 0; k < buf.size(); ++k)
            buf[k] = x[static_cast<std::size_t>(s.column_indices[k])];
        return pis.eval(buf);
    };

    GridSpec grid =
        GridSpec::defaults(wb.z0_train_src, cfg.omega_grid_size, cfg.lambda_grid_size);
    Detector det =
        fit_detailed_covariate_detector(wb.z0fn(), wb.pi_corr_fn(), pis_fn, cfg.tau, grid,
                                        wb.src.train, wb.tgt.train, cfg.epsilon, s);
    enforce_prevalence(det, wb.src.eval, wb.tgt.eval, cfg.epsilon);
    if (det.degenerate) {
        MceeResult mcee;
        mcee.kind = DetectorKind::detail_covariate;
        mcee.degenerate = true;
        mcee.note = det.note;
        return finish_test("H0s_X(" + s.name + ")", det, std::move(mcee), wb, salt);
    }

    // regression adjustments on source training data
    std::vector<double> h_train_src = det.evaluate(wb.src.train);
    ConditionalLossModel z0s =
        fit_conditional_loss_subset(wb.src.train, s, h_train_src, cv_for(cfg, salt ^ 0x32));
    Matrix Xs_train = wb.src.train.features.select_columns(s.column_indices);
    Model mh = fit_regressor(Xs_train, h_train_src, cv_for(cfg, salt ^ 0x33));

    auto mg_mh_at = [&](const Dataset& ds, std::size_t i, double& mg, double& mhv) {
        std::vector<double> xs(s.column_indices.size());
        for (std::size_t k = 0; k < xs.size(); ++k)
            xs[k] = ds.features.at(i, static_cast<std::size_t>(s.column_indices[k]));
        mhv = mh.predict_row(xs);
        double z1v;
        if (z0s.used_h) {
            std::vector<double> u(xs.size() + 1);
            std::copy(xs.begin(), xs.end(), u.begin());
            u.back() = 1.0;
            z1v = z0s.model.predict_row(u);
        } else {
            z1v = z0s.model.predict_row(xs);
        }
        mg = z1v * mhv;
    };

    DetailCovariateInputs in;
    std::size_t n1 = wb.tgt.eval.n(), n0 = wb.src.eval.n();
    in.h1 = det.evaluate(wb.tgt.eval);
    in.z0_1 = wb.z0_eval_tgt;
    in.mg1.resize(n1);
    in.mh1.resize(n1);
    for (std::size_t i = 0; i < n1; ++i) mg_mh_at(wb.tgt.eval, i, in.mg1[i], in.mh1[i]);
    in.h0 = det.evaluate(wb.src.eval);
    in.loss0 = wb.src.eval.loss;
    in.z0_0 = wb.z0_eval_src;
    in.pi0 = wb.pi_corr_eval_src;
    in.pis0.resize(n0);
    in.mg0.resize(n0);
    in.mh0.resize(n0);
    for (std::size_t i = 0; i < n0; ++i) {
        in.pis0[i] = pis_fn(wb.src.eval.features.row(i));
        mg_mh_at(wb.src.eval, i, in.mg0[i], in.mh0[i]);
    }

    MceeResult mcee = mcee_detail_covariate(in, cfg.tau);
    return finish_test("H0s_X(" + s.name + ")", det, std::move(mcee), wb, salt);
}

}  // namespace

AggregateResults run_aggregate_tests(const SplitPair& source, const SplitPair& target,
                                     const RunConfig& cfg, const Model* study_model) {
    cfg.validate();
    Workbench wb(source, target, cfg, study_model);
    AggregateResults out;
    out.outcome = aggregate_outcome_test(wb);
    out.covariate = aggregate_covariate_test(wb);
    return out;
}

DetailedResults run_detailed_tests(const SplitPair& source, const SplitPair& target,
                                   const std::vector<FeatureSubset>& subsets, ShiftBranch branch,
                                   const RunConfig& cfg, const Model* study_model) {
    cfg.validate();
    Workbench wb(source, target, cfg, study_model);
    DetailedResults out;
    for (std::size_t k = 0; k < subsets.size(); ++k) {
        const FeatureSubset& s = subsets[k];
        std::uint64_t salt = 0x100 + 0x10 * k + (branch == ShiftBranch::outcome ? 1 : 2);
        TestResult tr;
        try {
            for (int c : s.column_indices)
                if (c < 0 || c >= static_cast<int>(source.train.d()))
                    throw InputError("subset '" + s.name + "' references a missing column");
            tr = (branch == ShiftBranch::outcome) ? detailed_outcome_test(wb, s, salt)
                                                  : detailed_covariate_test(wb, s, salt);
        } catch (const std::exception& e) {
            // per-subset failures isolate; the subset is reported degenerate
            tr.hypothesis = (branch == ShiftBranch::outcome ? "H0s_YX(" : "H0s_X(") + s.name + ")";
            tr.degenerate = true;
            tr.p_value = 1.0;
            tr.mcee.degenerate = true;
            tr.mcee.note = std::string("subset test failed: ") + e.what();
        }
        out.by_subset.emplace_back(s.name, std::move(tr));
    }
    for (const auto& [name, tr] : out.by_subset)
        if (tr.p_value > cfg.alpha) out.flags.push_back(name);
    return out;
}

nlohmann::json HierarchicalReport::to_json() const {
    auto test_json = [&](const TestResult& t) {
        nlohmann::json j;
        j["hypothesis"] = t.hypothesis;
        j["p_value"] = t.p_value;
        j["rejected"] = t.rejected;
        j["degenerate"] = t.degenerate;
        j["estimate"] = t.mcee.estimate;
        j["plugin_estimate"] = t.mcee.plugin_estimate;
        j["numerator"] = t.mcee.numerator;
        j["denominator"] = t.mcee.denominator;
        j["n_source"] = t.mcee.n_source;
        j["n_target"] = t.mcee.n_target;
        if (!t.mcee.note.empty()) j["note"] = t.mcee.note;
        j["detector"] = t.detector_info;
        if (t.rules) j["rules"] = t.rules->to_json(column_names);
        if (t.stats.available) {
            j["subgroup"] = {{"prevalence_source", t.stats.prevalence_source},
                             {"prevalence_target", t.stats.prevalence_target},
                             {"loss_source", t.stats.loss_source},
                             {"loss_target", t.stats.loss_target},
                             {"decay", t.stats.decay}};
        }
        return j;
    };

    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = config.to_json();
    j["column_names"] = column_names;
    j["decomposition"] = {{"total", decomposition.total},
                          {"covariate_term", decomposition.covariate_term},
                          {"outcome_term", decomposition.outcome_term}};
    j["aggregate"] = {{"covariate", test_json(agg_covariate)},
                      {"outcome", test_json(agg_outcome)}};
    j["forced_detailed"] = forced_detailed;

    auto branch_json = [&](const DetailedResults& d) {
        nlohmann::json b;
        nlohmann::json tests = nlohmann::json::object();
        for (const auto& [name, tr] : d.by_subset) tests[name] = test_json(tr);
        b["tests"] = tests;
        b["flags"] = d.flags;
        return b;
    };
    j["detailed"] = {{"covariate", branch_json(detail_covariate)},
                     {"outcome", branch_json(detail_outcome)}};

    // Bonferroni-adjusted p-values, advisory only
    nlohmann::json adv = nlohmann::json::object();
    auto add_adj = [&](const DetailedResults& d, const std::string& key) {
        nlohmann::json m = nlohmann::json::object();
        double k = static_cast<double>(d.by_subset.size());
        for (const auto& [name, tr] : d.by_subset)
            m[name] = std::min(1.0, tr.p_value * k);
        adv[key] = m;
    };
    add_adj(detail_covariate, "covariate");
    add_adj(detail_outcome, "outcome");
    j["bonferroni_adjusted"] = adv;
    return j;
}

HierarchicalReport run_hierarchy(const Dataset& source_raw, const Dataset& target_raw,
                                 const std::vector<FeatureSubset>& subsets, const RunConfig& cfg,
                                 const Model* study_model) {
    cfg.validate();
    source_raw.validate();
    target_raw.validate();
    for (const auto& s : subsets) {
        if (s.column_indices.empty()) throw InputError("subset '" + s.name + "' is empty");
        for (int c : s.column_indices)
            if (c < 0 || c >= static_cast<int>(source_raw.d()))
                throw InputError("subset '" + s.name + "' references a missing column");
    }

    Dataset src_l = source_raw.loss.empty() ? compute_loss(source_raw, LossKind::zero_one)
                                            : source_raw;
    Dataset tgt_l = target_raw.loss.empty() ? compute_loss(target_raw, LossKind::zero_one)
                                            : target_raw;

    SplitPair src = split(src_l, cfg.split_fraction, substream(cfg.seed, 0xa0));
    SplitPair tgt = split(tgt_l, cfg.split_fraction, substream(cfg.seed, 0xa1));

    HierarchicalReport rep;
    rep.config = cfg;
    rep.column_names = source_raw.column_names;
    rep.forced_detailed = cfg.force_detailed;

    Workbench wb(src, tgt, cfg, study_model);

    // plug-in two-way decomposition of the average change on evaluation data
    {
        Kahan z0t, lt, ls;
        for (double v : wb.z0_eval_tgt) z0t.add(v);
        for (double v : tgt.eval.loss) lt.add(v);
        for (double v : src.eval.loss) ls.add(v);
        double a = z0t.value() / static_cast<double>(tgt.eval.n());
        double b = lt.value() / static_cast<double>(tgt.eval.n());
        double c = ls.value() / static_cast<double>(src.eval.n());
        rep.decomposition.covariate_term = a - c;
        rep.decomposition.outcome_term = b - a;
        rep.decomposition.total = rep.decomposition.covariate_term + rep.decomposition.outcome_term;
    }

    rep.agg_outcome = aggregate_outcome_test(wb);
    rep.agg_covariate = aggregate_covariate_test(wb);

    if (!subsets.empty() && (rep.agg_outcome.rejected || cfg.force_detailed)) {
        for (std::size_t k = 0; k < subsets.size(); ++k) {
            std::uint64_t salt = 0x100 + 0x10 * k + 1;
            TestResult tr;
            try {
                tr = detailed_outcome_test(wb, subsets[k], salt);
            } catch (const std::exception& e) {
                tr.hypothesis = "H0s_YX(" + subsets[k].name + ")";
                tr.degenerate = true;
                tr.p_value = 1.0;
                tr.mcee.degenerate = true;
                tr.mcee.note = std::string("subset test failed: ") + e.what();
            }
            rep.detail_outcome.by_subset.emplace_back(subsets[k].name, std::move(tr));
        }
        for (const auto& [name, tr] : rep.detail_outcome.by_subset)
            if (tr.p_value > cfg.alpha) rep.detail_outcome.flags.push_back(name);
    }
    if (!subsets.empty() && (rep.agg_covariate.rejected || cfg.force_detailed)) {
        for (std::size_t k = 0; k < subsets.size(); ++k) {
            std::uint64_t salt = 0x100 + 0x10 * k + 2;
            TestResult tr;
            try {
                tr = detailed_covariate_test(wb, subsets[k], salt);
            } catch (const std::exception& e) {
                tr.hypothesis = "H0s_X(" + subsets[k].name + ")";
                tr.degenerate = true;
                tr.p_value = 1.0;
                tr.mcee.degenerate = true;
                tr.mcee.note = std::string("subset test failed: ") + e.what();
            }
            rep.detail_covariate.by_subset.emplace_back(subsets[k].name, std::move(tr));
        }
        for (const auto& [name, tr] : rep.detail_covariate.by_subset)
            if (tr.p_value > cfg.alpha) rep.detail_covariate.flags.push_back(name);
    }

    return rep;
}

}  // namespace driftdx
