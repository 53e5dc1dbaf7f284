#include "droid/filter.hpp"

#include "droid/errors.hpp"

namespace droid::filter {

void FilterRuleSet::validate() const {
    if (ast_depth_min > ast_depth_max || max_line_len_min > max_line_len_max ||
        avg_line_len_min > avg_line_len_max || line_count_min > line_count_max ||
        alnum_fraction_min > alnum_fraction_max)
        throw ValidationError("filter rules: empty interval");
    if (english_threshold < 0.0 || english_threshold > 1.0)
        throw ValidationError("filter rules: english_threshold out of [0,1]");
}

FilterVerdict apply_quality_rules(const corpus::CodeSample& /*sample*/,
                                  const analysis::AstSummary& ast,
                                  const analysis::LineMetrics& lm, double english,
                                  const FilterRuleSet& rules) {
    rules.validate();
    FilterVerdict v;
    auto fail = [&](const std::string& rule, double observed) {
        v.failed_rules.push_back({rule, observed});
    };

    if (!ast.parse_ok) {
        fail("parse", 0.0);
    } else if (ast.depth < rules.ast_depth_min || ast.depth > rules.ast_depth_max) {
        fail("ast_depth", static_cast<double>(ast.depth));
    }
    if (lm.max_line_len < rules.max_line_len_min || lm.max_line_len > rules.max_line_len_max)
        fail("max_line_len", static_cast<double>(lm.max_line_len));
    if (lm.avg_line_len < rules.avg_line_len_min || lm.avg_line_len > rules.avg_line_len_max)
        fail("avg_line_len", lm.avg_line_len);
    if (lm.line_count < rules.line_count_min || lm.line_count > rules.line_count_max)
        fail("line_count", static_cast<double>(lm.line_count));
    if (lm.alnum_fraction < rules.alnum_fraction_min ||
        lm.alnum_fraction > rules.alnum_fraction_max)
        fail("alnum_fraction", lm.alnum_fraction);
    if (english < rules.english_threshold) fail("english", english);

    v.pass = v.failed_rules.empty();
    return v;
}

} // namespace droid::filter
