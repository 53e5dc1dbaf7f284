#include "droid/stats.hpp"

#include "droid/errors.hpp"

namespace droid::corpus {

StatsReport corpus_stats(const std::vector<CodeSample>& samples,
                         const std::vector<analysis::AstSummary>& asts) {
    if (samples.empty()) throw ValidationError("corpus_stats: empty input");
    if (asts.size() != samples.size())
        throw ValidationError("corpus_stats: ast list must align with samples");

    StatsReport report;
    report.sample_count = samples.size();

    std::vector<double> depths;
    std::vector<double> max_lines;
    depths.reserve(samples.size());
    max_lines.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        if (asts[i].parse_ok) depths.push_back(static_cast<double>(asts[i].depth));
        max_lines.push_back(
            static_cast<double>(analysis::line_metrics(samples[i].code).max_line_len));
    }
    for (int p : {75, 90, 99}) {
        if (!depths.empty())
            report.ast_depth_percentiles[p] = nearest_rank_percentile(depths, p);
        report.max_line_len_percentiles[p] = nearest_rank_percentile(max_lines, p);
    }

    std::map<std::string, uint64_t> label_counts;
    for (const auto& s : samples) {
        label_counts[to_string(s.label)]++;
        report.samples_per_language[to_string(s.language)]++;
        if (s.generator) report.samples_per_generator[*s.generator]++;
    }
    for (const auto& [label, count] : label_counts)
        report.class_distribution[label] =
            100.0 * static_cast<double>(count) / static_cast<double>(samples.size());

    if (!report.samples_per_language.empty()) {
        uint64_t total = 0;
        for (const auto& [k, v] : report.samples_per_language) total += v;
        report.avg_samples_per_language =
            static_cast<double>(total) / static_cast<double>(report.samples_per_language.size());
    }
    if (!report.samples_per_generator.empty()) {
        uint64_t total = 0;
        for (const auto& [k, v] : report.samples_per_generator) total += v;
        report.avg_samples_per_generator =
            static_cast<double>(total) / static_cast<double>(report.samples_per_generator.size());
    }
    return report;
}

} // namespace droid::corpus
