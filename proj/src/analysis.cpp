#include "droid/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "droid/errors.hpp"
#include "droid/util.hpp"

namespace droid::analysis {

namespace {

void walk(const AstNode& node, int level, AstSummary& out, std::string_view code,
          const NodeCategories& cat, uint64_t& internal_nodes, uint64_t& child_edges) {
    out.node_count++;
    out.node_type_counts[node.type]++;
    out.depth = std::max(out.depth, level);
    if (cat.identifier_types.count(node.type))
        out.identifiers.emplace_back(code.substr(node.begin, node.end - node.begin));
    if (cat.comment_types.count(node.type)) out.comment_spans.emplace_back(node.begin, node.end);
    if (cat.docstring_types.count(node.type))
        out.docstrings.emplace_back(code.substr(node.begin, node.end - node.begin));
    if (!node.children.empty()) {
        internal_nodes++;
        child_edges += node.children.size();
    }
    for (const auto& child : node.children)
        walk(child, level + 1, out, code, cat, internal_nodes, child_edges);
}

} // namespace

AstSummary summarize_tree(const AstNode& root, std::string_view code, const NodeCategories& cat) {
    AstSummary out;
    out.parse_ok = true;
    uint64_t internal_nodes = 0;
    uint64_t child_edges = 0;
    walk(root, 1, out, code, cat, internal_nodes, child_edges);
    out.branching_mean = internal_nodes == 0
                             ? 0.0
                             : static_cast<double>(child_edges) / static_cast<double>(internal_nodes);
    return out;
}

AstSummary parse_summary(std::string_view code, corpus::Language lang, GrammarProvider& grammar,
                         ParseMode mode) {
    if (!grammar.supports(lang))
        throw UnsupportedLanguageError(std::string("no grammar for language ") +
                                       corpus::to_string(lang));
    auto tree = grammar.parse(code, lang, mode);
    if (!tree) return AstSummary{};  // parse failure: parse_ok=false, fields empty
    AstSummary out = summarize_tree(*tree, code, grammar.categories(lang));
    out.token_classes = grammar.token_classes(code, lang);
    return out;
}

LineMetrics line_metrics(std::string_view code) {
    if (code.empty()) throw ValidationError("line_metrics: empty text");

    LineMetrics m;

    // Whole-text character classes, counted over Unicode scalar values.
    uint64_t total_chars = 0, ws_chars = 0, alnum_chars = 0;
    for (size_t i = 0; i < code.size();) {
        uint32_t cp = util::utf8_next(code, i);
        total_chars++;
        if (util::is_ascii_space(cp)) ws_chars++;
        if (util::is_ascii_alnum(cp)) alnum_chars++;
    }
    m.whitespace_ratio = static_cast<double>(ws_chars) / static_cast<double>(total_chars);
    m.alnum_fraction = static_cast<double>(alnum_chars) / static_cast<double>(total_chars);

    // Per-line lengths: split on LF, strip one trailing CR per line, and do
    // not count the empty segment after a trailing newline as a line.
    uint64_t total_line_chars = 0;
    size_t start = 0;
    auto take_line = [&](size_t from, size_t to) {  // [from, to) without the LF
        std::string_view line = code.substr(from, to - from);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        uint64_t len = 0;
        for (size_t i = 0; i < line.size();) {
            util::utf8_next(line, i);
            len++;
        }
        m.line_count++;
        m.max_line_len = std::max(m.max_line_len, len);
        if (len == 0) m.empty_line_count++;
        total_line_chars += len;
    };
    for (size_t i = 0; i < code.size(); ++i) {
        if (code[i] == '\n') {
            take_line(start, i);
            start = i + 1;
        }
    }
    if (start < code.size()) take_line(start, code.size());
    m.avg_line_len = static_cast<double>(total_line_chars) / static_cast<double>(m.line_count);
    return m;
}

double english_confidence(const std::vector<std::string>& docstrings,
                          LanguageIdProvider& detector) {
    if (docstrings.empty()) return 1.0;
    std::string joined;
    for (const auto& d : docstrings) {
        joined += d;
        joined += ' ';
    }
    return detector.english_confidence(joined);
}

double StopwordEnglishDetector::english_confidence(std::string_view text) {
    static const std::set<std::string, std::less<>> kStopwords = {
        "the",  "a",     "an",    "of",    "to",    "and",   "in",    "is",     "it",
        "for",  "this",  "that",  "with",  "as",    "on",    "be",    "are",    "by",
        "or",   "if",    "from",  "at",    "not",   "we",    "you",   "was",    "but",
        "all",  "can",   "has",   "have",  "will",  "its",   "when",  "which",  "their",
        "each", "there", "then",  "them",  "these", "than",  "into",  "only",   "other",
        "some", "such",  "no",    "new",   "more",  "used",  "use",   "using",  "one",
        // Verbs and nouns common in code documentation.
        "returns", "return", "given",  "value",  "values", "function", "method", "computes",
        "compute", "gets",   "sets",   "number", "string", "list",     "true",   "false",
        "none",    "object", "result", "input",  "output", "default",
    };

    // Latin share: ASCII letters against non-ASCII characters; punctuation
    // and digits are neutral.
    uint64_t ascii_letters = 0, non_ascii = 0;
    for (size_t i = 0; i < text.size();) {
        uint32_t cp = util::utf8_next(text, i);
        if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z'))
            ascii_letters++;
        else if (cp >= 0x80)
            non_ascii++;
    }
    double ascii_fraction =
        ascii_letters + non_ascii == 0
            ? 1.0
            : static_cast<double>(ascii_letters) /
                  static_cast<double>(ascii_letters + non_ascii);

    // Word-level stopword hit rate over lowercased alphabetic runs.
    uint64_t words = 0, hits = 0;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        words++;
        if (kStopwords.count(word)) hits++;
        word.clear();
    };
    for (char ch : text) {
        if ((ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z'))
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        else
            flush();
    }
    flush();
    double hit_rate = words == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(words);

    // Saturating calibration: ordinary English prose (hit rate around 0.3+)
    // clears the 0.99 gate, identifier soup does not.
    return ascii_fraction * (1.0 - std::exp(-20.0 * hit_rate));
}

} // namespace droid::analysis
