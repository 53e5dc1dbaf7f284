#pragma once

#include "droid/analysis.hpp"
#include "droid/corpus.hpp"

namespace droid::corpus {

// Corpus-level statistics: nearest-rank percentiles (75/90/99) of AST depth
// and maximum line length, class distribution percentages, and average
// samples per language and per generator. `asts` must align one-to-one with
// `samples`. Throws ValidationError on empty input.
StatsReport corpus_stats(const std::vector<CodeSample>& samples,
                         const std::vector<analysis::AstSummary>& asts);

} // namespace droid::corpus
