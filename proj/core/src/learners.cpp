#include "driftdx/learners.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "driftdx/stats.hpp"

namespace driftdx {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

struct Standardizer {
    std::vector<double> mean, sd;
    void fit(const Matrix& X) {
        mean.assign(X.n_cols, 0.0);
        sd.assign(X.n_cols, 1.0);
        if (X.n_rows == 0) return;
        for (std::size_t c = 0; c < X.n_cols; ++c) {
            Kahan m;
            for (std::size_t r = 0; r < X.n_rows; ++r) m.add(X.at(r, c));
            mean[c] = m.value() / static_cast<double>(X.n_rows);
            Kahan v;
            for (std::size_t r = 0; r < X.n_rows; ++r) {
                double u = X.at(r, c) - mean[c];
                v.add(u * u);
            }
            double s = std::sqrt(v.value() / static_cast<double>(X.n_rows));
            sd[c] = (s > 0) ? s : 1.0;  // constant column: weight stays 0 anyway
        }
    }
};

// Ridge least squares on standardized features, intercept unpenalized.
// Objective: (1/n)||y - b0 - Xw||^2 + lambda ||w||^2.
Model fit_ridge_linear(const Matrix& X, const std::vector<double>& y, double lambda) {
    std::size_t n = X.n_rows, d = X.n_cols;
    Model m;
    m.kind = Model::Kind::linear;
    m.n_features = d;
    double ymean = stats::mean(y);
    if (d == 0) {
        m.intercept = ymean;
        return m;
    }
    Standardizer st;
    st.fit(X);
    Eigen::MatrixXd Z(n, d);
    Eigen::VectorXd r(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) Z(i, c) = (X.at(i, c) - st.mean[c]) / st.sd[c];
        r(i) = y[i] - ymean;
    }
    Eigen::MatrixXd A = Z.transpose() * Z;
    A.diagonal().array() += lambda * static_cast<double>(n);
    Eigen::VectorXd w = A.ldlt().solve(Z.transpose() * r);
    m.weights.assign(d, 0.0);
    m.intercept = ymean;
    for (std::size_t c = 0; c < d; ++c) {
        m.weights[c] = w(c) / st.sd[c];
        m.intercept -= m.weights[c] * st.mean[c];
    }
    return m;
}

// Ridge logistic regression by IRLS on standardized features.
Model fit_ridge_logistic(const Matrix& X, const std::vector<int>& y, double lambda) {
    std::size_t n = X.n_rows, d = X.n_cols;
    Model m;
    m.kind = Model::Kind::linear;
    m.logistic = true;
    m.n_features = d;
    double ybar = 0;
    for (int v : y) ybar += v;
    ybar /= static_cast<double>(n);
    ybar = std::clamp(ybar, 1e-6, 1.0 - 1e-6);
    if (d == 0) {
        m.intercept = std::log(ybar / (1.0 - ybar));
        return m;
    }
    Standardizer st;
    st.fit(X);
    Eigen::MatrixXd Z(n, d + 1);
    for (std::size_t i = 0; i < n; ++i) {
        Z(i, 0) = 1.0;
        for (std::size_t c = 0; c < d; ++c) Z(i, c + 1) = (X.at(i, c) - st.mean[c]) / st.sd[c];
    }
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
    beta(0) = std::log(ybar / (1.0 - ybar));
    double ridge_n = lambda * static_cast<double>(n);
    for (int iter = 0; iter < 60; ++iter) {
        Eigen::VectorXd eta = Z * beta;
        Eigen::VectorXd p(n), wdiag(n), z(n);
        for (std::size_t i = 0; i < n; ++i) {
            p(i) = sigmoid(eta(i));
            double w = std::max(p(i) * (1.0 - p(i)), 1e-6);
            wdiag(i) = w;
            z(i) = eta(i) + (y[i] - p(i)) / w;
        }
        Eigen::MatrixXd A = Z.transpose() * wdiag.asDiagonal() * Z;
        for (std::size_t c = 1; c <= d; ++c) A(c, c) += ridge_n;
        Eigen::VectorXd rhs = Z.transpose() * (wdiag.asDiagonal() * z);
        Eigen::VectorXd next = A.ldlt().solve(rhs);
        double step = (next - beta).lpNorm<Eigen::Infinity>();
        beta = next;
        if (step < 1e-9) break;
    }
    m.weights.assign(d, 0.0);
    m.intercept = beta(0);
    for (std::size_t c = 0; c < d; ++c) {
        m.weights[c] = beta(c + 1) / st.sd[c];
        m.intercept -= m.weights[c] * st.mean[c];
    }
    return m;
}

// Candidate split thresholds: distinct quantiles of the feature, capped.
std::vector<std::vector<double>> split_candidates(const Matrix& X) {
    constexpr int kMaxThresholds = 32;
    std::vector<std::vector<double>> out(X.n_cols);
    std::vector<double> col(X.n_rows);
    for (std::size_t c = 0; c < X.n_cols; ++c) {
        for (std::size_t r = 0; r < X.n_rows; ++r) col[r] = X.at(r, c);
        std::sort(col.begin(), col.end());
        std::vector<double>& t = out[c];
        for (int k = 1; k <= kMaxThresholds; ++k) {
            double q = static_cast<double>(k) / (kMaxThresholds + 1);
            double v = col[static_cast<std::size_t>(q * static_cast<double>(col.size() - 1))];
            if (t.empty() || v > t.back()) t.push_back(v);
        }
        // drop thresholds that put everything on one side
        std::erase_if(t, [&](double v) { return v <= col.front() || v > col.back(); });
    }
    return out;
}

struct StumpFit {
    Stump stump;
    double gain = -1;  // SSE reduction vs zero stump
};

// Best least-squares stump for targets g with optional curvature weights w
// (Newton denominators for logistic boosting; all-ones for regression).
StumpFit best_stump(const Matrix& X, const std::vector<double>& g, const std::vector<double>& w,
                    const std::vector<std::vector<double>>& thresholds) {
    StumpFit best;
    std::size_t n = X.n_rows;
    double gtot = 0, wtot = 0;
    for (std::size_t i = 0; i < n; ++i) {
        gtot += g[i];
        wtot += w[i];
    }
    for (std::size_t c = 0; c < X.n_cols; ++c) {
        for (double thr : thresholds[c]) {
            double gl = 0, wl = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (X.at(i, c) < thr) {
                    gl += g[i];
                    wl += w[i];
                }
            double gr = gtot - gl, wr = wtot - wl;
            if (wl < 1e-12 || wr < 1e-12) continue;
            double gain = gl * gl / wl + gr * gr / wr;
            if (gain > best.gain + 1e-15) {
                best.gain = gain;
                best.stump = {static_cast<int>(c), thr, gl / wl, gr / wr};
            }
        }
    }
    return best;
}

struct BoostCheckpointer {
    const std::vector<int>* checkpoints;  // ascending round counts
    std::vector<Model> snapshots;
};

// Gradient boosting with depth-1 trees. For logistic=false: least-squares
// residual fitting. For logistic=true: gradient g = y - p with Newton leaf
// values. Training loss is guarded to be non-increasing; a round that fails
// the guard is reverted and boosting stops.
void boost_stumps(const Matrix& X, const std::vector<double>& y, bool logistic, double shrinkage,
                  const std::vector<int>& checkpoints, std::vector<Model>& out_snapshots) {
    std::size_t n = X.n_rows;
    auto thresholds = split_candidates(X);
    Model m;
    m.kind = Model::Kind::boosted_stumps;
    m.logistic = logistic;
    m.n_features = X.n_cols;

    std::vector<double> score(n, 0.0);
    if (logistic) {
        double ybar = std::clamp(stats::mean(y), 1e-6, 1.0 - 1e-6);
        m.bias = std::log(ybar / (1.0 - ybar));
    } else {
        m.bias = stats::mean(y);
    }
    std::fill(score.begin(), score.end(), m.bias);

    auto train_loss = [&]() {
        Kahan k;
        for (std::size_t i = 0; i < n; ++i) {
            if (logistic) {
                double p = clamp_prob(sigmoid(score[i]));
                k.add(y[i] > 0.5 ? -std::log(p) : -std::log(1.0 - p));
            } else {
                double r = y[i] - score[i];
                k.add(r * r);
            }
        }
        return k.value() / static_cast<double>(n);
    };

    std::vector<double> g(n), w(n);
    int max_rounds = checkpoints.empty() ? 0 : checkpoints.back();
    double prev_loss = train_loss();
    std::size_t next_cp = 0;
    int round = 0;
    for (; round < max_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            if (logistic) {
                double p = sigmoid(score[i]);
                g[i] = y[i] - p;
                w[i] = std::max(p * (1.0 - p), 1e-6);
            } else {
                g[i] = y[i] - score[i];
                w[i] = 1.0;
            }
        }
        StumpFit fit = best_stump(X, g, w, thresholds);
        if (fit.gain <= 0) break;
        Stump s = fit.stump;
        s.left *= shrinkage;
        s.right *= shrinkage;
        for (std::size_t i = 0; i < n; ++i)
            score[i] += (X.at(i, static_cast<std::size_t>(s.feature)) >= s.threshold) ? s.right
                                                                                     : s.left;
        double loss = train_loss();
        if (loss > prev_loss + 1e-12) {
            // revert the round; training loss must not increase
            for (std::size_t i = 0; i < n; ++i)
                score[i] -= (X.at(i, static_cast<std::size_t>(s.feature)) >= s.threshold)
                                ? s.right
                                : s.left;
            break;
        }
        prev_loss = loss;
        m.stumps.push_back(s);
        while (next_cp < checkpoints.size() && round + 1 == checkpoints[next_cp]) {
            out_snapshots.push_back(m);
            ++next_cp;
        }
    }
    while (next_cp < checkpoints.size()) {
        out_snapshots.push_back(m);
        ++next_cp;
    }
}

struct FoldSplit {
    std::vector<int> fold_id;
};

FoldSplit assign_folds(const Matrix& X, const std::vector<double>& y, int folds,
                       std::uint64_t seed) {
    FoldSplit fs;
    fs.fold_id.resize(X.n_rows);
    for (std::size_t i = 0; i < X.n_rows; ++i)
        fs.fold_id[i] = fold_of_row(X.row(i), y[i], folds, seed);
    return fs;
}

Matrix rows_subset(const Matrix& X, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), X.n_cols);
    for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t c = 0; c < X.n_cols; ++c) out.at(k, c) = X.at(idx[k], c);
    return out;
}

}  // namespace

int fold_of_row(std::span<const double> x, double y, int folds, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
    auto mix = [&](double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h ^= bits;
        h *= 0x100000001b3ull;
    };
    for (double v : x) mix(v);
    mix(y);
    h = substream(h, 0x70105);
    return static_cast<int>(h % static_cast<std::uint64_t>(folds));
}

std::vector<CvCandidate> CvConfig::default_grid() {
    std::vector<CvCandidate> g;
    for (double ridge : {1e-4, 1e-2, 1.0})
        g.push_back({Model::Kind::linear, ridge, 0, 0.0});
    for (int rounds : {50, 200})
        for (double shr : {0.1, 0.3})
            g.push_back({Model::Kind::boosted_stumps, 0.0, rounds, shr});
    return g;
}

double Model::raw(std::span<const double> x) const {
    if (x.size() != n_features) throw RunError("predict: feature count mismatch");
    if (kind == Kind::linear) {
        double s = intercept;
        for (std::size_t c = 0; c < n_features; ++c) s += weights[c] * x[c];
        return s;
    }
    double s = bias;
    for (const Stump& st : stumps)
        s += (x[static_cast<std::size_t>(st.feature)] >= st.threshold) ? st.right : st.left;
    return s;
}

double Model::raw_partial(std::span<const double> x, const std::vector<std::uint8_t>& mask,
                          bool with_bias) const {
    if (x.size() != n_features || mask.size() != n_features)
        throw RunError("raw_partial: feature count mismatch");
    double s = with_bias ? (kind == Kind::linear ? intercept : bias) : 0.0;
    if (kind == Kind::linear) {
        for (std::size_t c = 0; c < n_features; ++c)
            if (mask[c]) s += weights[c] * x[c];
        return s;
    }
    for (const Stump& st : stumps) {
        std::size_t c = static_cast<std::size_t>(st.feature);
        if (mask[c]) s += (x[c] >= st.threshold) ? st.right : st.left;
    }
    return s;
}

std::vector<double> Model::column_contrib_table(int column, const std::vector<double>& values) const {
    std::vector<double> out(values.size(), 0.0);
    if (kind == Kind::linear) {
        for (std::size_t k = 0; k < values.size(); ++k)
            out[k] = weights[static_cast<std::size_t>(column)] * values[k];
        return out;
    }
    for (const Stump& st : stumps) {
        if (st.feature != column) continue;
        for (std::size_t k = 0; k < values.size(); ++k)
            out[k] += (values[k] >= st.threshold) ? st.right : st.left;
    }
    return out;
}

double Model::link(double score) const {
    if (!logistic) return score;
    double p = sigmoid(score);
    return std::clamp(p, 1e-6, 1.0 - 1e-6);
}

double Model::predict_row(std::span<const double> x) const { return link(raw(x)); }

std::vector<double> Model::predict(const Matrix& X) const {
    if (X.n_cols != n_features) throw RunError("predict: feature count mismatch");
    std::vector<double> out(X.n_rows);
    for (std::size_t i = 0; i < X.n_rows; ++i) out[i] = predict_row(X.row(i));
    return out;
}

nlohmann::json Model::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = (kind == Kind::linear) ? "linear" : "boosted_stumps";
    j["logistic"] = logistic;
    j["n_features"] = n_features;
    if (kind == Kind::linear) {
        j["intercept"] = intercept;
        j["weights"] = weights;
    } else {
        j["bias"] = bias;
        nlohmann::json arr = nlohmann::json::array();
        for (const Stump& s : stumps)
            arr.push_back({{"feature", s.feature},
                           {"threshold", s.threshold},
                           {"left", s.left},
                           {"right", s.right}});
        j["stumps"] = arr;
    }
    j["meta"] = {{"cv_score", meta.cv_score},
                 {"folds", meta.folds},
                 {"seed", meta.seed},
                 {"chosen", meta.chosen}};
    return j;
}

Model Model::from_json(const nlohmann::json& j) {
    if (j.at("format_version").get<int>() != 1)
        throw InputError("unsupported model format version");
    Model m;
    m.kind = (j.at("kind").get<std::string>() == "linear") ? Kind::linear : Kind::boosted_stumps;
    m.logistic = j.at("logistic").get<bool>();
    m.n_features = j.at("n_features").get<std::size_t>();
    if (m.kind == Kind::linear) {
        m.intercept = j.at("intercept").get<double>();
        m.weights = j.at("weights").get<std::vector<double>>();
    } else {
        m.bias = j.at("bias").get<double>();
        for (const auto& s : j.at("stumps"))
            m.stumps.push_back({s.at("feature").get<int>(), s.at("threshold").get<double>(),
                                s.at("left").get<double>(), s.at("right").get<double>()});
    }
    if (j.contains("meta")) {
        m.meta.cv_score = j["meta"].value("cv_score", 0.0);
        m.meta.folds = j["meta"].value("folds", 0);
        m.meta.seed = j["meta"].value("seed", std::uint64_t{0});
        m.meta.chosen = j["meta"].value("chosen", "");
    }
    return m;
}

namespace {

std::string describe(const CvCandidate& c) {
    if (c.kind == Model::Kind::linear) return "linear ridge=" + std::to_string(c.ridge);
    return "stumps rounds=" + std::to_string(c.rounds) + " shrinkage=" + std::to_string(c.shrinkage);
}

// Shared CV loop for both fit entry points. score_fn computes the held-out
// loss of a fitted model on one fold. Ties (within 1e-9) keep grid order.
Model cv_select_and_refit(const Matrix& X, const std::vector<double>& y, bool classify,
                          const CvConfig& cfg) {
    std::size_t n = X.n_rows;
    if (n < static_cast<std::size_t>(cfg.folds))
        throw InputError("fewer rows than CV folds");
    std::vector<CvCandidate> grid = cfg.grid.empty() ? CvConfig::default_grid() : cfg.grid;
    if (X.n_cols == 0)
        std::erase_if(grid, [](const CvCandidate& c) { return c.kind == Model::Kind::boosted_stumps; });
    if (grid.empty()) grid.push_back({Model::Kind::linear, 1e-2, 0, 0.0});

    FoldSplit folds = assign_folds(X, y, cfg.folds, cfg.seed);

    auto heldout_loss = [&](const Model& m, const std::vector<std::size_t>& idx) {
        Kahan k;
        for (std::size_t i : idx) {
            double p = m.predict_row(X.row(i));
            if (classify) {
                p = clamp_prob(p);
                k.add(y[i] > 0.5 ? -std::log(p) : -std::log(1.0 - p));
            } else {
                double r = y[i] - p;
                k.add(r * r);
            }
        }
        return k.value();
    };

    // stump candidates sharing a shrinkage are nested; train once per
    // (fold, shrinkage) and snapshot at each rounds checkpoint
    std::vector<double> cv_total(grid.size(), 0.0);
    for (int f = 0; f < cfg.folds; ++f) {
        std::vector<std::size_t> tr, ho;
        for (std::size_t i = 0; i < n; ++i) (folds.fold_id[i] == f ? ho : tr).push_back(i);
        if (tr.empty() || ho.empty()) continue;
        Matrix Xtr = rows_subset(X, tr);
        std::vector<double> ytr(tr.size());
        for (std::size_t k = 0; k < tr.size(); ++k) ytr[k] = y[tr[k]];
        bool fold_degenerate =
            classify && std::all_of(ytr.begin(), ytr.end(), [&](double v) { return v == ytr[0]; });

        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            const CvCandidate& c = grid[gi];
            if (c.kind != Model::Kind::linear) continue;
            if (classify && fold_degenerate) continue;
            Model m;
            if (classify) {
                std::vector<int> yi(ytr.size());
                for (std::size_t k = 0; k < ytr.size(); ++k) yi[k] = static_cast<int>(ytr[k]);
                m = fit_ridge_logistic(Xtr, yi, c.ridge);
            } else {
                m = fit_ridge_linear(Xtr, ytr, c.ridge);
            }
            cv_total[gi] += heldout_loss(m, ho);
        }

        std::vector<double> shrinkages;
        for (const auto& c : grid)
            if (c.kind == Model::Kind::boosted_stumps &&
                std::find(shrinkages.begin(), shrinkages.end(), c.shrinkage) == shrinkages.end())
                shrinkages.push_back(c.shrinkage);
        for (double shr : shrinkages) {
            if (classify && fold_degenerate) continue;
            std::vector<int> cps;
            std::vector<std::size_t> gidx;
            for (std::size_t gi = 0; gi < grid.size(); ++gi)
                if (grid[gi].kind == Model::Kind::boosted_stumps && grid[gi].shrinkage == shr) {
                    cps.push_back(grid[gi].rounds);
                    gidx.push_back(gi);
                }
            std::vector<int> order(cps.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int a, int b) { return cps[a] < cps[b]; });
            std::vector<int> sorted_cps;
            for (int o : order) sorted_cps.push_back(cps[o]);
            std::vector<Model> snaps;
            boost_stumps(Xtr, ytr, classify, shr, sorted_cps, snaps);
            for (std::size_t k = 0; k < order.size(); ++k)
                cv_total[gidx[order[k]]] += heldout_loss(snaps[k], ho);
        }
    }

    std::size_t best = 0;
    for (std::size_t gi = 1; gi < grid.size(); ++gi)
        if (cv_total[gi] < cv_total[best] - 1e-9) best = gi;

    const CvCandidate& c = grid[best];
    Model m;
    if (c.kind == Model::Kind::linear) {
        if (classify) {
            std::vector<int> yi(n);
            for (std::size_t i = 0; i < n; ++i) yi[i] = static_cast<int>(y[i]);
            m = fit_ridge_logistic(X, yi, c.ridge);
        } else {
            m = fit_ridge_linear(X, y, c.ridge);
        }
    } else {
        std::vector<Model> snaps;
        boost_stumps(X, y, classify, c.shrinkage, {c.rounds}, snaps);
        m = snaps.front();
    }
    m.meta.cv_score = cv_total[best] / static_cast<double>(n);
    m.meta.folds = cfg.folds;
    m.meta.seed = cfg.seed;
    m.meta.chosen = describe(c);
    return m;
}

}  // namespace

Model fit_regressor(const Matrix& X, const std::vector<double>& y, const CvConfig& cfg) {
    if (X.n_rows != y.size()) throw InputError("fit_regressor: row count mismatch");
    if (X.n_rows == 0) throw InputError("fit_regressor: empty input");
    for (double v : y)
        if (!std::isfinite(v)) throw InputError("fit_regressor: non-finite target");
    bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (constant) {
        Model m;
        m.kind = Model::Kind::linear;
        m.n_features = X.n_cols;
        m.weights.assign(X.n_cols, 0.0);
        m.intercept = y[0];
        m.meta.chosen = "constant";
        return m;
    }
    return cv_select_and_refit(X, y, false, cfg);
}

Model fit_prob_classifier(const Matrix& X, const std::vector<int>& labels, const CvConfig& cfg) {
    if (X.n_rows != labels.size()) throw InputError("fit_prob_classifier: row count mismatch");
    if (X.n_rows == 0) throw InputError("fit_prob_classifier: empty input");
    bool has0 = false, has1 = false;
    for (int v : labels) {
        if (v == 0) has0 = true;
        else if (v == 1) has1 = true;
        else throw InputError("fit_prob_classifier: labels must be 0/1");
    }
    if (!has0 || !has1) throw InputError("fit_prob_classifier: single-class labels");
    std::vector<double> y(labels.begin(), labels.end());
    return cv_select_and_refit(X, y, true, cfg);
}

}  // namespace driftdx
