#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "droid/corpus.hpp"

namespace droid::analysis {

// Raw parse tree handle produced by a grammar adapter. Node types come from
// the adapter's vocabulary; spans are byte offsets into the source.
struct AstNode {
    std::string type;
    uint32_t begin = 0;
    uint32_t end = 0;
    std::vector<AstNode> children;
};

// How the adapter classifies its node types for downstream extraction.
struct NodeCategories {
    std::set<std::string> identifier_types;
    std::set<std::string> comment_types;    // includes doc comments
    std::set<std::string> docstring_types;
    std::set<std::string> branch_types;     // cyclomatic complexity contributors
};

// Halstead-style token classes: operators are punctuation and keywords,
// operands are identifiers and literals. Distinct counts are by token text.
struct TokenClassCounts {
    uint64_t operator_total = 0;
    uint64_t operator_distinct = 0;
    uint64_t operand_total = 0;
    uint64_t operand_distinct = 0;
};

enum class ParseMode {
    Strict,   // unterminated constructs are parse failures
    Lenient,  // constructs left open at end of input are closed implicitly
};

// Plug-in interface: (code, language) -> raw tree handle. Instances are not
// assumed shareable across threads; create one per worker.
class GrammarProvider {
public:
    virtual ~GrammarProvider() = default;
    virtual bool supports(corpus::Language lang) const = 0;
    // nullopt on parse failure. Throws UnsupportedLanguageError when the
    // language has no grammar, which is a different condition.
    virtual std::optional<AstNode> parse(std::string_view code, corpus::Language lang,
                                         ParseMode mode = ParseMode::Strict) = 0;
    virtual const NodeCategories& categories(corpus::Language lang) const = 0;
    virtual TokenClassCounts token_classes(std::string_view code, corpus::Language lang) = 0;
};

// Plug-in interface: text -> confidence that the text is English.
class LanguageIdProvider {
public:
    virtual ~LanguageIdProvider() = default;
    virtual double english_confidence(std::string_view text) = 0;
};

struct AstSummary {
    bool parse_ok = false;
    int depth = 0;            // nodes on the longest root-to-leaf path; >= 1 when parse_ok
    uint64_t node_count = 0;
    std::map<std::string, uint64_t> node_type_counts;
    std::vector<std::string> identifiers;
    std::vector<std::pair<uint32_t, uint32_t>> comment_spans;  // byte ranges [begin, end)
    std::vector<std::string> docstrings;
    double branching_mean = 0.0;  // mean children per internal node
    TokenClassCounts token_classes;
};

struct LineMetrics {
    uint64_t line_count = 0;
    uint64_t max_line_len = 0;      // characters (Unicode scalars)
    double avg_line_len = 0.0;
    uint64_t empty_line_count = 0;  // lines with zero characters after CR stripping
    double whitespace_ratio = 0.0;  // over the full text including newlines
    double alnum_fraction = 0.0;
};

// Summarizes a parse. On grammar rejection returns parse_ok=false with all
// other fields empty.
AstSummary parse_summary(std::string_view code, corpus::Language lang, GrammarProvider& grammar,
                         ParseMode mode = ParseMode::Strict);

// Walks an already-parsed tree (for callers holding a raw tree handle).
AstSummary summarize_tree(const AstNode& root, std::string_view code, const NodeCategories& cat);

// Lines split on LF with trailing CR stripped; a trailing newline does not
// create an extra empty line. Ratios are computed over the full text.
// Throws ValidationError on empty text.
LineMetrics line_metrics(std::string_view code);

// Confidence that the docstrings are English. An empty list vacuously passes
// with 1.0; otherwise the detector scores the concatenated docstrings.
double english_confidence(const std::vector<std::string>& docstrings, LanguageIdProvider& detector);

// Built-in fallback detector: stopword-and-ASCII heuristic calibrated so
// pure-stopword English scores >= 0.99 and non-Latin text scores <= 0.5.
class StopwordEnglishDetector final : public LanguageIdProvider {
public:
    double english_confidence(std::string_view text) override;
};

} // namespace droid::analysis
