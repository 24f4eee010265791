#include "driftdx/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "driftdx/stats.hpp"

namespace driftdx {

void SimSetupSpec::validate() const {
    std::size_t dd = m0.size();
    if (dd == 0) throw InputError("setup has no features");
    if (m1.size() != dd || sd0.size() != dd || sd1.size() != dd || phi0.size() != dd ||
        phi1.size() != dd)
        throw InputError("setup parameter dimensions disagree");
    for (double s : sd0)
        if (!(s > 0)) throw InputError("sd0 entries must be > 0");
    for (double s : sd1)
        if (!(s > 0)) throw InputError("sd1 entries must be > 0");
    if (subgroup_conditional && !subgroup_abs_cut)
        throw InputError("subgroup-conditional setup needs a subgroup cut");
    if (n_per_domain < 10) throw InputError("n_per_domain too small");
}

SimSetupSpec SimSetupSpec::preset(Id id) {
    SimSetupSpec s;
    s.id = id;
    auto fill = [&](std::size_t d, double mean0, double sd) {
        s.m0.assign(d, 0.0);
        s.m1.assign(d, 0.0);
        s.m0[0] = mean0;
        s.sd0.assign(d, sd);
        s.sd1.assign(d, sd);
    };
    switch (id) {
        case Id::setup_1a: {
            fill(10, 0.0, 2.0);
            s.phi0 = {0.8, 0.5, 1.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
            s.phi1 = s.phi0;
            s.phi1[0] = 0.2;
            s.subgroup_conditional = true;
            s.subgroup_abs_cut = 3.5;
            s.n_per_domain = 2000;
            s.default_split_fraction = 0.2;
            break;
        }
        case Id::setup_1b: {
            fill(10, 1.0, 2.0);
            s.phi0 = {0.8, 0.5, 1.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
            s.phi1 = s.phi0;
            s.subgroup_abs_cut = 4.0;
            s.n_per_domain = 2000;
            s.default_split_fraction = 0.2;
            break;
        }
        case Id::setup_2: {
            fill(4, 0.0, 2.0);
            s.phi0 = {0.8, 0.5, 1.0, 0.6};
            s.phi1 = {0.2, 0.4, 1.0, 0.6};
            s.n_per_domain = 8000;
            break;
        }
        case Id::setup_3: {
            fill(4, 1.0, 2.0);
            s.m0 = {1.0, 0.0, 0.0, 1.0};
            s.sd1 = {1.0, 2.0, 2.0, 2.0};
            s.phi0 = {2.5, 1.0, 0.5, 0.1};
            s.phi1 = s.phi0;
            s.n_per_domain = 8000;
            break;
        }
        case Id::null_variant: {
            fill(4, 0.0, 2.0);
            s.phi0 = {0.8, 0.5, 1.0, 0.6};
            s.phi1 = s.phi0;
            s.n_per_domain = 8000;
            break;
        }
    }
    s.validate();
    return s;
}

SimSetupSpec SimSetupSpec::preset(const std::string& name) {
    if (name == "setup_1a") return preset(Id::setup_1a);
    if (name == "setup_1b") return preset(Id::setup_1b);
    if (name == "setup_2") return preset(Id::setup_2);
    if (name == "setup_3") return preset(Id::setup_3);
    if (name == "null_variant") return preset(Id::null_variant);
    throw InputError("unknown setup '" + name + "'");
}

std::string SimSetupSpec::name() const {
    switch (id) {
        case Id::setup_1a: return "setup_1a";
        case Id::setup_1b: return "setup_1b";
        case Id::setup_2: return "setup_2";
        case Id::setup_3: return "setup_3";
        case Id::null_variant: return "null_variant";
    }
    return "?";
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool in_subgroup(const SimSetupSpec& spec, std::span<const double> x) {
    return spec.subgroup_abs_cut && std::fabs(x[0]) > *spec.subgroup_abs_cut;
}

Dataset draw_domain(const SimSetupSpec& spec, Domain dom, std::size_t n, Rng& rng) {
    std::size_t d = spec.d();
    const auto& m = dom == Domain::source ? spec.m0 : spec.m1;
    const auto& sd = dom == Domain::source ? spec.sd0 : spec.sd1;
    Dataset ds;
    ds.domain = dom;
    ds.features = Matrix(n, d);
    ds.outcome.resize(n);
    ds.column_names.resize(d);
    for (std::size_t c = 0; c < d; ++c) ds.column_names[c] = "x" + std::to_string(c + 1);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c)
            ds.features.at(i, c) = m[c] + sd[c] * gauss(rng);
        auto x = ds.features.row(i);
        const std::vector<double>* phi = &spec.phi0;
        if (dom == Domain::target) {
            if (spec.subgroup_conditional)
                phi = in_subgroup(spec, x) ? &spec.phi1 : &spec.phi0;
            else
                phi = &spec.phi1;
        }
        double z = 0;
        for (std::size_t c = 0; c < d; ++c) z += (*phi)[c] * x[c];
        ds.outcome[i] = unif(rng) < sigmoid(z) ? 1 : 0;
    }
    return ds;
}

}  // namespace

std::pair<Dataset, Dataset> generate_setup(const SimSetupSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng r0(substream(seed, 0x5150));
    Rng r1(substream(seed, 0x5151));
    Dataset src = draw_domain(spec, Domain::source, spec.n_per_domain, r0);
    Dataset tgt = draw_domain(spec, Domain::target, spec.n_per_domain, r1);
    return {std::move(src), std::move(tgt)};
}

Model train_study_model(const SimSetupSpec& spec, std::size_t n_train, std::uint64_t seed) {
    spec.validate();
    if (n_train < 100) throw InputError("study model needs >= 100 training points");
    Rng rng(substream(seed, 0x5152));
    Dataset train = draw_domain(spec, Domain::source, n_train, rng);

    std::size_t n = train.n(), d = train.d();
    Eigen::MatrixXd X(n, d + 1);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(static_cast<Eigen::Index>(i), 0) = 1.0;
        for (std::size_t c = 0; c < d; ++c)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c) + 1) =
                train.features.at(i, c);
        y(static_cast<Eigen::Index>(i)) = train.outcome[i];
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d) + 1);
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd eta = X * beta;
        Eigen::VectorXd p = eta.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        Eigen::VectorXd w = p.array() * (1.0 - p.array()) + 1e-10;
        Eigen::MatrixXd H = X.transpose() * w.asDiagonal() * X;
        H.diagonal().array() += 1e-8;
        Eigen::VectorXd g = X.transpose() * (y - p);
        Eigen::VectorXd step = H.ldlt().solve(g);
        beta += step;
        if (step.norm() < 1e-10) break;
    }

    Model m;
    m.kind = Model::Kind::linear;
    m.logistic = true;
    m.n_features = d;
    m.intercept = beta(0);
    m.weights.resize(d);
    for (std::size_t c = 0; c < d; ++c) m.weights[c] = beta(static_cast<Eigen::Index>(c) + 1);
    m.meta.chosen = "logistic regression (study model)";
    m.meta.seed = seed;
    return m;
}

void apply_study_model(Dataset& ds, const Model& model) {
    ds.predictions = model.predict(ds.features);
    ds = compute_loss(ds, LossKind::zero_one);
}

nlohmann::json StudyRun::to_json() const {
    nlohmann::json j;
    j["setup"] = setup;
    j["reps"] = reps;
    j["failures"] = failures;
    j["seed"] = seed;
    nlohmann::json rj = nlohmann::json::object();
    for (const auto& [h, r] : rates)
        rj[h] = {{"rejections", r.rejections}, {"n", r.n},       {"rate", r.rate},
                 {"ci_low", r.ci_low},         {"ci_high", r.ci_high}};
    j["rejection_rates"] = rj;
    nlohmann::json pj = nlohmann::json::object();
    for (const auto& [h, ps] : p_values) pj[h] = ps;
    j["p_values"] = pj;
    return j;
}

std::string StudyRun::to_csv() const {
    std::ostringstream out;
    out << "rep,hypothesis,p_value\n";
    for (const auto& [h, ps] : p_values)
        for (std::size_t r = 0; r < ps.size(); ++r) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", ps[r]);
            out << r << "," << h << "," << buf << "\n";
        }
    return out.str();
}

StudyRun run_power_study(const SimSetupSpec& spec, int reps, const RunConfig& cfg,
                         std::uint64_t seed) {
    spec.validate();
    cfg.validate();
    if (reps < 10) throw InputError("power study needs >= 10 reps");

    Model study = train_study_model(spec, spec.n_model_train, substream(seed, 0x90de));

    StudyRun out;
    out.setup = spec.name();
    out.reps = reps;
    out.seed = seed;

    std::map<std::string, std::vector<double>> pmap;
    std::map<std::string, std::pair<int, int>> counts;  // rejections, n

    for (int r = 0; r < reps; ++r) {
        std::uint64_t rep_seed = substream(seed, 0x2000 + static_cast<std::uint64_t>(r));
        try {
            auto [src, tgt] = generate_setup(spec, rep_seed);
            apply_study_model(src, study);
            apply_study_model(tgt, study);
            RunConfig rc = cfg;
            rc.seed = substream(rep_seed, 0x3);
            HierarchicalReport rep = run_hierarchy(src, tgt, cfg.subsets, rc, &study);

            auto record = [&](const TestResult& t) {
                pmap[t.hypothesis].push_back(t.p_value);
                auto& c = counts[t.hypothesis];
                c.first += t.rejected ? 1 : 0;
                c.second += 1;
            };
            record(rep.agg_covariate);
            record(rep.agg_outcome);
            for (const auto& [name, t] : rep.detail_covariate.by_subset) record(t);
            for (const auto& [name, t] : rep.detail_outcome.by_subset) record(t);
        } catch (const std::exception& e) {
            ++out.failures;
            std::cerr << "power study rep " << r << " failed: " << e.what() << "\n";
        }
    }

    for (const auto& [h, ps] : pmap) out.p_values.emplace_back(h, ps);
    for (const auto& [h, c] : counts) {
        StudyRun::Rate rate;
        rate.rejections = c.first;
        rate.n = c.second;
        rate.rate = c.second > 0 ? static_cast<double>(c.first) / c.second : 0.0;
        auto [lo, hi] = stats::clopper_pearson(static_cast<std::size_t>(c.first),
                                               static_cast<std::size_t>(c.second), 0.05);
        rate.ci_low = lo;
        rate.ci_high = hi;
        out.rates.emplace_back(h, rate);
    }
    return out;
}

double true_subgroup_overlap(const Detector& det, const SimSetupSpec& spec, std::size_t n_eval,
                             std::uint64_t seed) {
    spec.validate();
    if (!spec.subgroup_abs_cut)
        throw InputError("setup '" + spec.name() + "' has no true subgroup");
    if (!det.predicate) throw InputError("detector has no predicate");
    Rng rng(substream(seed, 0x0e4a));
    Dataset tgt = draw_domain(spec, Domain::target, n_eval, rng);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < tgt.n(); ++i) {
        auto x = tgt.features.row(i);
        int truth = in_subgroup(spec, x) ? 1 : 0;
        if (det.predicate(x) == truth) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(tgt.n());
}

// ---- finite-support oracle -------------------------------------------------

void OracleSpec::validate() const {
    std::size_t n = points.size();
    if (n == 0) throw InputError("oracle support is empty");
    if (n > 64) throw InputError("oracle support too large (max 64 points)");
    if (p0.size() != n || p1.size() != n || mu0.size() != n || mu1.size() != n ||
        pred_class.size() != n)
        throw InputError("oracle spec arrays disagree in length");
    Kahan s0, s1;
    for (std::size_t i = 0; i < n; ++i) {
        if (p0[i] < 0 || p1[i] < 0) throw InputError("oracle probabilities must be >= 0");
        if (mu0[i] < 0 || mu0[i] > 1 || mu1[i] < 0 || mu1[i] > 1)
            throw InputError("oracle mu values must be in [0,1]");
        s0.add(p0[i]);
        s1.add(p1[i]);
    }
    if (std::fabs(s0.value() - 1.0) > 1e-9 || std::fabs(s1.value() - 1.0) > 1e-9)
        throw InputError("oracle probabilities must sum to 1 per domain");
    std::size_t d = points[0].size();
    for (const auto& x : points)
        if (x.size() != d) throw InputError("oracle points disagree in dimension");
    for (int c : subset_cols)
        if (c < 0 || c >= static_cast<int>(d)) throw InputError("oracle subset column out of range");
}

namespace {

std::vector<double> subset_key(const OracleSpec& spec, std::size_t i) {
    std::vector<double> key;
    key.reserve(spec.subset_cols.size());
    for (int c : spec.subset_cols) key.push_back(spec.points[i][static_cast<std::size_t>(c)]);
    return key;
}

}  // namespace

double oracle_mcee(const OracleSpec& spec, DetectorKind kind, const std::vector<int>& h,
                   double tau) {
    spec.validate();
    std::size_t n = spec.size();
    if (h.size() != n) throw InputError("indicator length mismatch");
    for (int v : h)
        if (v != 0 && v != 1) throw InputError("indicator entries must be 0/1");

    std::vector<double> z0(n), z1(n);
    for (std::size_t i = 0; i < n; ++i) {
        z0[i] = z_from_mu(spec.mu0[i], spec.pred_class[i]);
        z1[i] = z_from_mu(spec.mu1[i], spec.pred_class[i]);
    }

    auto ratio = [&](const std::vector<double>& w, const std::vector<double>& num_terms) {
        Kahan num, den;
        for (std::size_t i = 0; i < n; ++i)
            if (h[i]) {
                num.add(w[i] * num_terms[i]);
                den.add(w[i]);
            }
        if (den.value() <= 0) throw InputError("indicator has zero prevalence");
        return num.value() / den.value();
    };

    switch (kind) {
        case DetectorKind::agg_outcome: {
            std::vector<double> gap(n);
            for (std::size_t i = 0; i < n; ++i) gap[i] = z1[i] - z0[i] - tau;
            return ratio(spec.p1, gap);
        }
        case DetectorKind::agg_covariate:
            return ratio(spec.p1, z0) - ratio(spec.p0, z0) - tau;
        case DetectorKind::detail_outcome: {
            // q(x_s, mu0) = P1(Y = 1 | x_s, mu0), exact grouping over the
            // support; Zs(x) = expected loss under q at x's predicted class
            std::map<std::pair<std::vector<double>, double>, std::pair<Kahan, Kahan>> groups;
            for (std::size_t i = 0; i < n; ++i) {
                auto& g = groups[{subset_key(spec, i), spec.mu0[i]}];
                g.first.add(spec.p1[i] * spec.mu1[i]);
                g.second.add(spec.p1[i]);
            }
            std::vector<double> gap(n);
            for (std::size_t i = 0; i < n; ++i) {
                auto& g = groups[{subset_key(spec, i), spec.mu0[i]}];
                double q = g.second.value() > 0 ? g.first.value() / g.second.value() : spec.mu1[i];
                gap[i] = z1[i] - z_from_mu(q, spec.pred_class[i]) - tau;
            }
            return ratio(spec.p1, gap);
        }
        case DetectorKind::detail_covariate: {
            // shifted distribution p_s(x) = p1(x_s) p0(x_{-s} | x_s)
            std::map<std::vector<double>, std::pair<Kahan, Kahan>> marg;  // (P1s, P0s)
            for (std::size_t i = 0; i < n; ++i) {
                auto& m = marg[subset_key(spec, i)];
                m.first.add(spec.p1[i]);
                m.second.add(spec.p0[i]);
            }
            std::vector<double> ps(n);
            for (std::size_t i = 0; i < n; ++i) {
                auto& m = marg[subset_key(spec, i)];
                if (m.second.value() <= 0) {
                    if (m.first.value() > 0)
                        throw InputError("shifted distribution undefined: target subset value "
                                         "unsupported in source");
                    ps[i] = 0;
                } else {
                    ps[i] = m.first.value() * spec.p0[i] / m.second.value();
                }
            }
            return ratio(spec.p1, z0) - ratio(ps, z0) - tau;
        }
    }
    throw RunError("unreachable");
}

double oracle_mcee_supremum(const OracleSpec& spec, DetectorKind kind, double tau, double eps,
                            std::vector<int>* argmax) {
    spec.validate();
    std::size_t n = spec.size();
    if (n > 20) throw InputError("supremum enumeration limited to 20 support points");
    if (!(eps > 0 && eps <= 0.5)) throw InputError("eps must be in (0, 0.5]");

    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> best_h;
    std::vector<int> h(n);
    for (std::uint64_t mask = 1; mask < (1ull << n); ++mask) {
        Kahan prev0, prev1;
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = (mask >> i) & 1ull ? 1 : 0;
            if (h[i]) {
                prev0.add(spec.p0[i]);
                prev1.add(spec.p1[i]);
            }
        }
        if (prev0.value() < eps || prev1.value() < eps) continue;
        double v;
        try {
            v = oracle_mcee(spec, kind, h, tau);
        } catch (const InputError&) {
            continue;
        }
        if (v > best) {
            best = v;
            best_h = h;
        }
    }
    if (best_h.empty()) throw InputError("no indicator satisfies the prevalence constraint");
    if (argmax) *argmax = best_h;
    return best;
}

}  // namespace driftdx
