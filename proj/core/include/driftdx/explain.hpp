#pragma once

#include <string>
#include <vector>

#include "driftdx/detectors.hpp"
#include "json.hpp"

namespace driftdx {

struct RulePredicate {
    int feature = 0;
    bool greater = false;  // false: x[feature] <= cut; true: x[feature] > cut
    double cut = 0;
};

struct RuleClause {
    std::vector<RulePredicate> terms;  // conjunction; empty = matches everything
    bool matches(std::span<const double> x) const;
};

struct RuleSet {
    std::vector<RuleClause> clauses;  // disjunction of conjunctions
    double coverage = 0;   // fraction of detected points matched by some clause
    double precision = 0;  // fraction of matched points that are detected
    int max_clauses = 3;
    int max_terms = 3;
    std::string note;

    bool matches(std::span<const double> x) const;
    std::string to_text(const std::vector<std::string>& column_names) const;
    nlohmann::json to_json(const std::vector<std::string>& column_names) const;
};

struct RuleCaps {
    int max_clauses = 3;
    int max_terms = 3;
    double min_marginal_coverage = 0.10;
};

// Greedy sequential covering against the detector's own labels on data:
// repeatedly grow the best conjunction by precision (cutpoints from deciles),
// requiring each clause to add at least min_marginal_coverage of the detected
// points, until the caps bind.
RuleSet summarize_subgroup(const Detector& det, const Dataset& data, const RuleCaps& caps);

struct SubgroupStats {
    double prevalence_source = 0, prevalence_target = 0;
    double loss_source = 0, loss_target = 0;
    double decay = 0;  // loss_target - loss_source within the subgroup
    bool available = false;
    std::string note;
};

SubgroupStats subgroup_stats(const Detector& det, const Dataset& eval_source,
                             const Dataset& eval_target);

}  // namespace driftdx
