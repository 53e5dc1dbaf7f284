#include "droid/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "droid/binio.hpp"
#include "droid/errors.hpp"
#include "droid/grammar.hpp"
#include "droid/util.hpp"

namespace droid::features {

namespace {

constexpr const char* kSchemaV1 = "droid.features.v1";

const std::set<std::string> kBranchTypes = {"if_stmt",     "for_stmt",    "while_stmt",
                                            "do_stmt",     "case_clause", "catch_clause"};

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double stddev(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

uint64_t utf8_len(std::string_view s) {
    uint64_t n = 0;
    for (size_t i = 0; i < s.size();) {
        util::utf8_next(s, i);
        n++;
    }
    return n;
}

// Ordered (name, value) catalog of every feature the extractor knows.
class Catalog {
public:
    void add(const std::string& name, double value) {
        if (!std::isfinite(value)) value = 0.0;  // sentinel, vectors stay dense
        order_.push_back(name);
        values_[name] = value;
    }
    std::optional<double> get(const std::string& name) const {
        auto it = values_.find(name);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }
    const std::vector<std::string>& order() const { return order_; }

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, double> values_;
};

struct LineShape {
    std::vector<double> lengths;   // per line, Unicode chars, CR stripped
    std::vector<double> indents;   // leading whitespace chars, nonempty lines
    uint64_t tab_lines = 0;
};

LineShape scan_lines(std::string_view code) {
    LineShape ls;
    size_t start = 0;
    auto take = [&](size_t from, size_t to) {
        std::string_view line = code.substr(from, to - from);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ls.lengths.push_back(static_cast<double>(utf8_len(line)));
        if (!line.empty() && line.front() == '\t') ls.tab_lines++;
        size_t i = 0;
        uint64_t indent = 0;
        bool all_ws = true;
        while (i < line.size()) {
            size_t prev = i;
            uint32_t cp = util::utf8_next(line, i);
            if (cp == ' ' || cp == '\t') {
                indent++;
            } else {
                all_ws = false;
                (void)prev;
                break;
            }
        }
        if (!all_ws) ls.indents.push_back(static_cast<double>(indent));
    };
    for (size_t i = 0; i < code.size(); ++i) {
        if (code[i] == '\n') {
            take(start, i);
            start = i + 1;
        }
    }
    if (start < code.size()) take(start, code.size());
    return ls;
}

Catalog build_catalog(const corpus::CodeSample& sample, const analysis::AstSummary& ast,
                      const analysis::LineMetrics& lm) {
    Catalog cat;
    const double lines = static_cast<double>(lm.line_count);
    auto count_of = [&](const std::string& t) -> double {
        auto it = ast.node_type_counts.find(t);
        return it == ast.node_type_counts.end() ? 0.0 : static_cast<double>(it->second);
    };

    // NODE_DENSITY
    const double nodes = static_cast<double>(ast.node_count);
    for (const auto& t : analysis::canonical_node_types()) {
        cat.add("node_density." + t, nodes > 0 ? count_of(t) / nodes : 0.0);
        cat.add("node_rate." + t, count_of(t) / lines);
    }

    // LINE_SHAPE
    LineShape ls = scan_lines(sample.code);
    cat.add("line_count", lines);
    cat.add("max_line_len", static_cast<double>(lm.max_line_len));
    cat.add("avg_line_len", lm.avg_line_len);
    cat.add("median_line_len", median(ls.lengths));
    cat.add("stddev_line_len", stddev(ls.lengths));
    cat.add("empty_line_count", static_cast<double>(lm.empty_line_count));
    cat.add("empty_line_fraction", static_cast<double>(lm.empty_line_count) / lines);
    cat.add("whitespace_ratio", lm.whitespace_ratio);
    cat.add("alnum_fraction", lm.alnum_fraction);
    cat.add("avg_indent", mean(ls.indents));
    cat.add("max_indent", ls.indents.empty()
                              ? 0.0
                              : *std::max_element(ls.indents.begin(), ls.indents.end()));
    cat.add("tab_line_fraction", static_cast<double>(ls.tab_lines) / lines);
    const double buckets[] = {10, 20, 40, 60, 80, 120, 200,
                              std::numeric_limits<double>::infinity()};
    const char* bucket_names[] = {"le10", "le20", "le40", "le60",
                                  "le80", "le120", "le200", "gt200"};
    for (int b = 0; b < 8; ++b) {
        double lo = b == 0 ? -1.0 : buckets[b - 1];
        uint64_t hits = 0;
        for (double len : ls.lengths)
            if (len > lo && len <= buckets[b]) hits++;
        cat.add(std::string("line_len_hist.") + bucket_names[b],
                static_cast<double>(hits) / lines);
    }

    // IDENTIFIER
    const auto& ids = ast.identifiers;
    const double idn = static_cast<double>(ids.size());
    std::vector<double> lens;
    lens.reserve(ids.size());
    std::unordered_set<std::string_view> distinct;
    uint64_t with_underscore = 0, camel = 0, all_upper = 0, all_lower = 0, single = 0,
             with_digit = 0, lead_underscore = 0, short_ids = 0, underscores = 0;
    for (const auto& id : ids) {
        lens.push_back(static_cast<double>(utf8_len(id)));
        distinct.insert(id);
        bool has_us = false, has_digit = false, has_alpha = false;
        bool any_upper = false, any_lower = false, has_camel = false;
        bool prev_lower = false;
        for (char c : id) {
            if (c == '_') { has_us = true; underscores++; }
            if (c >= '0' && c <= '9') has_digit = true;
            bool up = c >= 'A' && c <= 'Z';
            bool lo = c >= 'a' && c <= 'z';
            if (up || lo) has_alpha = true;
            if (up) { any_upper = true; if (prev_lower) has_camel = true; }
            if (lo) any_lower = true;
            prev_lower = lo;
        }
        if (has_us) with_underscore++;
        if (has_camel) camel++;
        if (has_alpha && any_upper && !any_lower) all_upper++;
        if (has_alpha && any_lower && !any_upper) all_lower++;
        if (utf8_len(id) == 1) single++;
        if (utf8_len(id) <= 2) short_ids++;
        if (has_digit) with_digit++;
        if (!id.empty() && id.front() == '_') lead_underscore++;
    }
    auto id_frac = [&](uint64_t c) { return idn > 0 ? static_cast<double>(c) / idn : 0.0; };
    cat.add("id_count", idn);
    cat.add("ids_per_line", idn / lines);
    cat.add("id_len_mean", mean(lens));
    cat.add("id_len_median", median(lens));
    cat.add("id_len_max", lens.empty() ? 0.0 : *std::max_element(lens.begin(), lens.end()));
    cat.add("id_len_stddev", stddev(lens));
    cat.add("id_len_min", lens.empty() ? 0.0 : *std::min_element(lens.begin(), lens.end()));
    cat.add("id_distinct_fraction", id_frac(distinct.size()));
    cat.add("id_underscore_fraction", id_frac(with_underscore));
    cat.add("id_camel_fraction", id_frac(camel));
    cat.add("id_upper_fraction", id_frac(all_upper));
    cat.add("id_lower_fraction", id_frac(all_lower));
    cat.add("id_single_char_fraction", id_frac(single));
    cat.add("id_digit_fraction", id_frac(with_digit));
    cat.add("id_leading_underscore_fraction", id_frac(lead_underscore));
    cat.add("id_avg_underscores", idn > 0 ? static_cast<double>(underscores) / idn : 0.0);
    cat.add("id_short_fraction", id_frac(short_ids));

    // COMMENT
    auto [char_frac, line_frac] = comment_density(sample.code, ast);
    uint64_t comment_bytes = 0;
    for (const auto& [b, e] : ast.comment_spans) comment_bytes += e - b;
    uint64_t doc_bytes = 0;
    for (const auto& d : ast.docstrings) doc_bytes += d.size();
    const double total_bytes = static_cast<double>(sample.code.size());
    cat.add("comment_char_fraction", char_frac);
    cat.add("comment_line_fraction", line_frac);
    cat.add("comment_count", static_cast<double>(ast.comment_spans.size()));
    cat.add("comments_per_line", static_cast<double>(ast.comment_spans.size()) / lines);
    cat.add("comment_avg_len",
            ast.comment_spans.empty()
                ? 0.0
                : static_cast<double>(comment_bytes) /
                      static_cast<double>(ast.comment_spans.size()));
    cat.add("docstring_count", static_cast<double>(ast.docstrings.size()));
    cat.add("docstring_char_fraction", total_bytes > 0 ? doc_bytes / total_bytes : 0.0);
    cat.add("comment_code_ratio",
            static_cast<double>(comment_bytes) /
                std::max(1.0, total_bytes - static_cast<double>(comment_bytes)));

    // COMPLEXITY
    double branch_count = 0;
    for (const auto& t : kBranchTypes) branch_count += count_of(t);
    const double cyclomatic = 1.0 + branch_count;
    const auto& tc = ast.token_classes;
    const double n1 = static_cast<double>(tc.operator_distinct);
    const double n2 = static_cast<double>(tc.operand_distinct);
    const double big_n1 = static_cast<double>(tc.operator_total);
    const double big_n2 = static_cast<double>(tc.operand_total);
    const double vocab = n1 + n2;
    const double length = big_n1 + big_n2;
    const double volume = vocab > 0 ? length * std::log2(std::max(vocab, 1.0)) : 0.0;
    const double difficulty = (n1 / 2.0) * (big_n2 / std::max(n2, 1.0));
    cat.add("ast_depth", static_cast<double>(ast.depth));
    cat.add("node_count", nodes);
    cat.add("nodes_per_line", nodes / lines);
    cat.add("branching_mean", ast.branching_mean);
    cat.add("cyclomatic", cyclomatic);
    cat.add("cyclomatic_per_line", cyclomatic / lines);
    cat.add("halstead_vocabulary", vocab);
    cat.add("halstead_length", length);
    cat.add("halstead_volume", volume);
    cat.add("halstead_difficulty", difficulty);
    cat.add("halstead_effort", difficulty * volume);
    cat.add("maintainability_index",
            maintainability_index(volume, static_cast<int>(cyclomatic), lm.line_count));
    cat.add("operators_per_line", big_n1 / lines);
    return cat;
}

std::string family_description(const std::string& name) {
    if (name.rfind("node_density.", 0) == 0)
        return "share of AST nodes of type " + name.substr(13);
    if (name.rfind("node_rate.", 0) == 0)
        return "AST nodes of type " + name.substr(10) + " per line";
    if (name.rfind("line_len_hist.", 0) == 0)
        return "fraction of lines in length bucket " + name.substr(14);
    return name;
}

} // namespace

const FeatureRegistry& FeatureRegistry::builtin() {
    static const FeatureRegistry reg = [] {
        FeatureRegistry r;
        r.schema_id_ = kSchemaV1;
        // The catalog of an arbitrary valid sample fixes both names and order.
        corpus::CodeSample probe;
        probe.id = "probe";
        probe.code = "x = 1\n";
        probe.language = corpus::Language::PYTHON;
        analysis::ReferenceGrammar g;
        analysis::AstSummary ast = analysis::parse_summary(probe.code, probe.language, g);
        Catalog cat = build_catalog(probe, ast, analysis::line_metrics(probe.code));
        for (const auto& name : cat.order()) {
            FeatureDescriptor d;
            d.name = name;
            if (name.rfind("node_density.", 0) == 0 || name.rfind("node_rate.", 0) == 0)
                d.family = FeatureFamily::NODE_DENSITY;
            else if (name.rfind("id_", 0) == 0 || name == "ids_per_line")
                d.family = FeatureFamily::IDENTIFIER;
            else if (name.rfind("comment", 0) == 0 || name.rfind("docstring", 0) == 0)
                d.family = FeatureFamily::COMMENT;
            else if (name == "ast_depth" || name == "node_count" || name == "nodes_per_line" ||
                     name == "branching_mean" || name.rfind("cyclomatic", 0) == 0 ||
                     name.rfind("halstead", 0) == 0 || name == "maintainability_index" ||
                     name == "operators_per_line")
                d.family = FeatureFamily::COMPLEXITY;
            else
                d.family = FeatureFamily::LINE_SHAPE;
            d.is_density = name.rfind("node_density.", 0) == 0 || name == "whitespace_ratio" ||
                           name == "alnum_fraction" || name == "empty_line_fraction" ||
                           name == "comment_char_fraction" || name == "comment_line_fraction";
            d.description = family_description(name);
            r.descriptors_.push_back(std::move(d));
        }
        return r;
    }();
    return reg;
}

FeatureRegistry FeatureRegistry::custom(std::vector<FeatureDescriptor> descriptors,
                                        std::string schema_id) {
    FeatureRegistry r;
    std::unordered_set<std::string> seen;
    for (const auto& d : descriptors)
        if (!seen.insert(d.name).second)
            throw ValidationError("registry: duplicate feature name " + d.name);
    r.descriptors_ = std::move(descriptors);
    r.schema_id_ = std::move(schema_id);
    return r;
}

std::vector<std::string> FeatureRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(descriptors_.size());
    for (const auto& d : descriptors_) out.push_back(d.name);
    return out;
}

FeatureVector featurize(const corpus::CodeSample& sample, const analysis::AstSummary& ast,
                        const analysis::LineMetrics& lm, const FeatureRegistry& registry) {
    if (!ast.parse_ok)
        throw ValidationError("featurize: sample '" + sample.id +
                              "' failed to parse; filter before featurizing");
    Catalog cat = build_catalog(sample, ast, lm);
    FeatureVector fv;
    fv.schema_id = registry.schema_id();
    fv.values.resize(static_cast<Eigen::Index>(registry.size()));
    Eigen::Index i = 0;
    for (const auto& d : registry.descriptors()) {
        auto v = cat.get(d.name);
        if (!v)
            throw ValidationError("featurize: registry names unknown feature " + d.name);
        fv.values[i++] = *v;
    }
    return fv;
}

double maintainability_index(double halstead_volume, int cyclomatic, double loc) {
    double v = std::max(halstead_volume, 1.0);
    double g = std::max(cyclomatic, 0);
    double l = std::max(loc, 1.0);
    double mi = (171.0 - 5.2 * std::log(v) - 0.23 * g - 16.2 * std::log(l)) * 100.0 / 171.0;
    return std::clamp(mi, 0.0, 100.0);
}

std::pair<double, double> comment_density(std::string_view code,
                                          const analysis::AstSummary& ast) {
    if (code.empty()) return {0.0, 0.0};
    uint64_t comment_bytes = 0;
    for (const auto& [b, e] : ast.comment_spans) comment_bytes += e - b;
    double char_fraction =
        static_cast<double>(comment_bytes) / static_cast<double>(code.size());

    // Line ranges under the same convention as line_metrics.
    std::vector<std::pair<size_t, size_t>> lines;
    size_t start = 0;
    for (size_t i = 0; i < code.size(); ++i) {
        if (code[i] == '\n') {
            lines.emplace_back(start, i);
            start = i + 1;
        }
    }
    if (start < code.size()) lines.emplace_back(start, code.size());
    if (lines.empty()) return {char_fraction, 0.0};

    uint64_t touched = 0;
    for (const auto& [lb, le] : lines) {
        bool hit = false;
        for (const auto& [cb, ce] : ast.comment_spans) {
            if (cb < le + 1 && ce > lb) {  // overlap of [cb,ce) with [lb,le]
                hit = true;
                break;
            }
        }
        if (hit) touched++;
    }
    return {char_fraction, static_cast<double>(touched) / static_cast<double>(lines.size())};
}

void FeatureMatrix::validate() const {
    const size_t n = ids.size();
    if (static_cast<size_t>(values.rows()) != n || labels.size() != n ||
        languages.size() != n || domains.size() != n || splits.size() != n ||
        scenarios.size() != n)
        throw ValidationError("feature matrix: column lengths disagree");
}

std::string serialize_matrix(const FeatureMatrix& m) {
    m.validate();
    binio::Writer w;
    w.magic("DDFM");
    w.u32(1);
    w.str(m.schema_id);
    w.u64(m.ids.size());
    w.u32(static_cast<uint32_t>(m.values.cols()));
    for (const auto& id : m.ids) w.str(id);
    for (size_t i = 0; i < m.ids.size(); ++i) {
        w.u8(static_cast<uint8_t>(m.labels[i]));
        w.u8(static_cast<uint8_t>(m.languages[i]));
        w.u8(static_cast<uint8_t>(m.domains[i]));
        w.u8(static_cast<uint8_t>(m.splits[i]));
        w.u8(static_cast<uint8_t>(m.scenarios[i]));
    }
    for (Eigen::Index c = 0; c < m.values.cols(); ++c)
        for (Eigen::Index r = 0; r < m.values.rows(); ++r) w.f64(m.values(r, c));
    return w.bytes();
}

FeatureMatrix deserialize_matrix(std::string_view bytes) {
    binio::Reader r(bytes, "feature matrix");
    r.expect_magic("DDFM");
    uint32_t version = r.u32();
    if (version != 1)
        throw ValidationError("feature matrix: unsupported version " + std::to_string(version));
    FeatureMatrix m;
    m.schema_id = r.str();
    uint64_t rows = r.u64();
    uint32_t cols = r.u32();
    m.ids.reserve(rows);
    for (uint64_t i = 0; i < rows; ++i) m.ids.push_back(r.str());
    m.labels.resize(rows);
    m.languages.resize(rows);
    m.domains.resize(rows);
    m.splits.resize(rows);
    m.scenarios.resize(rows);
    for (uint64_t i = 0; i < rows; ++i) {
        m.labels[i] = static_cast<corpus::ProvenanceLabel>(r.u8());
        m.languages[i] = static_cast<corpus::Language>(r.u8());
        m.domains[i] = static_cast<corpus::Domain>(r.u8());
        m.splits[i] = static_cast<corpus::Split>(r.u8());
        m.scenarios[i] = static_cast<int8_t>(r.u8());
    }
    m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < m.values.cols(); ++c)
        for (Eigen::Index rr = 0; rr < m.values.rows(); ++rr) m.values(rr, c) = r.f64();
    r.expect_end();
    return m;
}

void save_matrix(const FeatureMatrix& m, const std::string& path) {
    binio::write_binary_file(path, serialize_matrix(m));
}

FeatureMatrix load_matrix(const std::string& path) {
    return deserialize_matrix(binio::read_binary_file(path));
}

std::string matrix_to_csv(const FeatureMatrix& m, const FeatureRegistry& registry) {
    if (registry.schema_id() != m.schema_id)
        throw ValidationError("matrix_to_csv: schema mismatch: " + m.schema_id + " vs " +
                              registry.schema_id());
    if (static_cast<size_t>(m.values.cols()) != registry.size())
        throw ValidationError("matrix_to_csv: column count disagrees with registry size");
    std::string out = "sample_id";
    for (const auto& name : registry.names()) out += "," + name;
    out += "\r\n";
    char buf[64];
    for (size_t i = 0; i < m.ids.size(); ++i) {
        out += m.ids[i];
        for (Eigen::Index c = 0; c < m.values.cols(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.12g", m.values(static_cast<Eigen::Index>(i), c));
            out += ",";
            out += buf;
        }
        out += "\r\n";
    }
    return out;
}

} // namespace droid::features
