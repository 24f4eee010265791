#include "driftdx/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "driftdx/stats.hpp"

namespace driftdx {

bool RuleClause::matches(std::span<const double> x) const {
    for (const RulePredicate& t : terms) {
        double v = x[static_cast<std::size_t>(t.feature)];
        if (t.greater ? !(v > t.cut) : !(v <= t.cut)) return false;
    }
    return true;
}

bool RuleSet::matches(std::span<const double> x) const {
    for (const RuleClause& c : clauses)
        if (c.matches(x)) return true;
    return false;
}

std::string RuleSet::to_text(const std::vector<std::string>& column_names) const {
    if (clauses.empty()) return "(empty)";
    std::string out;
    char buf[64];
    for (std::size_t ci = 0; ci < clauses.size(); ++ci) {
        if (ci) out += " OR ";
        if (clauses[ci].terms.empty()) {
            out += "(all)";
            continue;
        }
        out += "(";
        for (std::size_t ti = 0; ti < clauses[ci].terms.size(); ++ti) {
            const RulePredicate& t = clauses[ci].terms[ti];
            if (ti) out += " AND ";
            std::snprintf(buf, sizeof buf, "%.4g", t.cut);
            out += column_names[static_cast<std::size_t>(t.feature)];
            out += t.greater ? " > " : " <= ";
            out += buf;
        }
        out += ")";
    }
    return out;
}

nlohmann::json RuleSet::to_json(const std::vector<std::string>& column_names) const {
    nlohmann::json j;
    j["text"] = to_text(column_names);
    j["coverage"] = coverage;
    j["precision"] = precision;
    if (!note.empty()) j["note"] = note;
    nlohmann::json arr = nlohmann::json::array();
    for (const RuleClause& c : clauses) {
        nlohmann::json terms = nlohmann::json::array();
        for (const RulePredicate& t : c.terms)
            terms.push_back({{"feature", column_names[static_cast<std::size_t>(t.feature)]},
                             {"op", t.greater ? ">" : "<="},
                             {"cut", t.cut}});
        arr.push_back(terms);
    }
    j["clauses"] = arr;
    return j;
}

namespace {

struct Candidate {
    RulePredicate pred;
    double precision = 0;
    double covered = 0;  // detected points matched
};

}  // namespace

RuleSet summarize_subgroup(const Detector& det, const Dataset& data, const RuleCaps& caps) {
    RuleSet out;
    out.max_clauses = caps.max_clauses;
    out.max_terms = caps.max_terms;

    std::size_t n = data.n();
    std::vector<char> label(n);
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        label[i] = static_cast<char>(det.predicate(data.features.row(i)));
        n_pos += label[i];
    }
    if (det.degenerate || n_pos == 0) {
        out.note = "degenerate detector: no points to summarize";
        return out;
    }
    if (n_pos == n) {
        out.clauses.push_back(RuleClause{});
        out.coverage = 1.0;
        out.precision = 1.0;
        return out;
    }

    // decile cutpoints per feature
    std::vector<std::vector<double>> cuts(data.d());
    for (std::size_t c = 0; c < data.d(); ++c) {
        std::vector<double> col(n);
        for (std::size_t r = 0; r < n; ++r) col[r] = data.features.at(r, c);
        std::sort(col.begin(), col.end());
        for (int k = 1; k <= 9; ++k) {
            double v = col[static_cast<std::size_t>(0.1 * k * static_cast<double>(n - 1))];
            if (cuts[c].empty() || v > cuts[c].back()) cuts[c].push_back(v);
        }
    }

    std::vector<char> uncovered = label;  // detected points not yet covered
    std::size_t remaining = n_pos;
    double min_marginal = caps.min_marginal_coverage * static_cast<double>(n_pos);

    for (int clause_i = 0; clause_i < caps.max_clauses && remaining > 0; ++clause_i) {
        RuleClause clause;
        std::vector<char> in_clause(n, 1);
        for (int term_i = 0; term_i < caps.max_terms; ++term_i) {
            Candidate best;
            bool any = false;
            for (std::size_t c = 0; c < data.d(); ++c) {
                for (double cut : cuts[c]) {
                    for (int g = 0; g < 2; ++g) {
                        std::size_t match = 0, match_pos = 0, match_new = 0;
                        for (std::size_t i = 0; i < n; ++i) {
                            if (!in_clause[i]) continue;
                            double v = data.features.at(i, c);
                            bool ok = g ? (v > cut) : (v <= cut);
                            if (!ok) continue;
                            ++match;
                            match_pos += label[i];
                            match_new += uncovered[i];
                        }
                        if (match == 0) continue;
                        if (static_cast<double>(match_new) < min_marginal) continue;
                        double prec =
                            static_cast<double>(match_pos) / static_cast<double>(match);
                        if (!any || prec > best.precision + 1e-12 ||
                            (std::fabs(prec - best.precision) <= 1e-12 &&
                             static_cast<double>(match_new) > best.covered)) {
                            best.pred = {static_cast<int>(c), g == 1, cut};
                            best.precision = prec;
                            best.covered = static_cast<double>(match_new);
                            any = true;
                        }
                    }
                }
            }
            if (!any) break;
            clause.terms.push_back(best.pred);
            for (std::size_t i = 0; i < n; ++i)
                if (in_clause[i] && !RuleClause{{best.pred}}.matches(data.features.row(i)))
                    in_clause[i] = 0;
            if (best.precision >= 1.0 - 1e-12) break;
        }
        if (clause.terms.empty()) break;
        std::size_t newly = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (in_clause[i] && uncovered[i]) {
                uncovered[i] = 0;
                ++newly;
            }
        if (newly == 0) break;
        remaining -= newly;
        out.clauses.push_back(clause);
    }

    // stored fidelity must be reproducible by re-evaluating the rule set
    std::size_t matched = 0, matched_pos = 0, covered_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool m = out.matches(data.features.row(i));
        if (m) {
            ++matched;
            matched_pos += label[i];
            if (label[i]) ++covered_pos;
        }
    }
    out.coverage = n_pos ? static_cast<double>(covered_pos) / static_cast<double>(n_pos) : 0.0;
    out.precision = matched ? static_cast<double>(matched_pos) / static_cast<double>(matched) : 0.0;
    return out;
}

SubgroupStats subgroup_stats(const Detector& det, const Dataset& eval_source,
                             const Dataset& eval_target) {
    SubgroupStats st;
    Kahan l0, l1;
    std::size_t c0 = 0, c1 = 0;
    for (std::size_t i = 0; i < eval_source.n(); ++i)
        if (det.predicate(eval_source.features.row(i))) {
            ++c0;
            l0.add(eval_source.loss[i]);
        }
    for (std::size_t i = 0; i < eval_target.n(); ++i)
        if (det.predicate(eval_target.features.row(i))) {
            ++c1;
            l1.add(eval_target.loss[i]);
        }
    st.prevalence_source =
        eval_source.n() ? static_cast<double>(c0) / static_cast<double>(eval_source.n()) : 0.0;
    st.prevalence_target =
        eval_target.n() ? static_cast<double>(c1) / static_cast<double>(eval_target.n()) : 0.0;
    if (c0 == 0 || c1 == 0) {
        st.note = "zero prevalence in at least one domain";
        return st;
    }
    st.loss_source = l0.value() / static_cast<double>(c0);
    st.loss_target = l1.value() / static_cast<double>(c1);
    st.decay = st.loss_target - st.loss_source;
    st.available = true;
    return st;
}

}  // namespace driftdx
