#pragma once

#include <string>
#include <vector>

#include "droid/analysis.hpp"
#include "droid/corpus.hpp"

namespace droid::filter {

// Corpus quality rules; all bounds inclusive.
struct FilterRuleSet {
    int ast_depth_min = 2;
    int ast_depth_max = 31;
    uint64_t max_line_len_min = 12;
    uint64_t max_line_len_max = 400;
    double avg_line_len_min = 5.0;
    double avg_line_len_max = 140.0;
    uint64_t line_count_min = 6;
    uint64_t line_count_max = 300;
    double alnum_fraction_min = 0.2;
    double alnum_fraction_max = 0.75;
    double english_threshold = 0.99;

    void validate() const;  // each interval must be nonempty
};

struct FailedRule {
    std::string rule;       // e.g. "line_count"
    double observed = 0.0;
};

struct FilterVerdict {
    bool pass = false;
    std::vector<FailedRule> failed_rules;
};

// Checks every rule independently and lists all violations; a parse failure
// is itself a failed rule. Returns verdicts, never throws on rule breaches.
FilterVerdict apply_quality_rules(const corpus::CodeSample& sample,
                                  const analysis::AstSummary& ast,
                                  const analysis::LineMetrics& lm, double english,
                                  const FilterRuleSet& rules = FilterRuleSet{});

} // namespace droid::filter
