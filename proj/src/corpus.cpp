#include "droid/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "droid/errors.hpp"
#include "droid/util.hpp"

namespace droid::corpus {

namespace {

template <typename E>
E from_table(const std::string& s, const std::vector<std::pair<const char*, E>>& table,
             const char* field) {
    for (const auto& [name, value] : table)
        if (s == name) return value;
    throw ValidationError(std::string("unknown value '") + s + "' for field " + field);
}

const std::vector<std::pair<const char*, Language>> kLanguages = {
    {"C_CPP", Language::C_CPP},   {"CSHARP", Language::CSHARP},
    {"GO", Language::GO},         {"JAVA", Language::JAVA},
    {"JAVASCRIPT", Language::JAVASCRIPT}, {"PYTHON", Language::PYTHON}};

const std::vector<std::pair<const char*, ProvenanceLabel>> kLabels = {
    {"HUMAN", ProvenanceLabel::HUMAN},
    {"AI_GENERATED", ProvenanceLabel::AI_GENERATED},
    {"AI_REFINED", ProvenanceLabel::AI_REFINED},
    {"AI_ADVERSARIAL", ProvenanceLabel::AI_ADVERSARIAL}};

const std::vector<std::pair<const char*, Domain>> kDomains = {
    {"GENERAL", Domain::GENERAL},
    {"ALGORITHMIC", Domain::ALGORITHMIC},
    {"RESEARCH_DS", Domain::RESEARCH_DS}};

const std::vector<std::pair<const char*, Split>> kSplits = {
    {"TRAIN", Split::TRAIN}, {"VAL", Split::VAL}, {"TEST", Split::TEST}};

const std::vector<std::pair<const char*, DecodingStrategy>> kStrategies = {
    {"GREEDY", DecodingStrategy::GREEDY},
    {"SAMPLING", DecodingStrategy::SAMPLING},
    {"BEAM", DecodingStrategy::BEAM}};

const std::vector<std::pair<const char*, LabelScheme>> kSchemes = {
    {"TWO", LabelScheme::TWO}, {"THREE", LabelScheme::THREE}, {"FOUR", LabelScheme::FOUR}};

const std::vector<std::pair<const char*, RefinementScenario>> kScenarios = {
    {"CONTINUATION", RefinementScenario::CONTINUATION},
    {"GAP_FILL", RefinementScenario::GAP_FILL},
    {"REWRITE", RefinementScenario::REWRITE}};

bool close_to(double a, double b) { return std::fabs(a - b) < 1e-9; }

bool in_set(double v, std::initializer_list<double> allowed) {
    for (double a : allowed)
        if (close_to(v, a)) return true;
    return false;
}

bool in_set(int v, std::initializer_list<int> allowed) {
    for (int a : allowed)
        if (v == a) return true;
    return false;
}

// Splits code into lines that keep their terminators, so that concatenating
// the pieces reproduces the input byte for byte.
std::vector<std::string> split_lines_keep_ends(const std::string& code) {
    std::vector<std::string> lines;
    size_t start = 0;
    for (size_t i = 0; i < code.size(); ++i) {
        if (code[i] == '\n') {
            lines.push_back(code.substr(start, i - start + 1));
            start = i + 1;
        }
    }
    if (start < code.size()) lines.push_back(code.substr(start));
    return lines;
}

} // namespace

const char* to_string(Language v) {
    switch (v) {
        case Language::C_CPP: return "C_CPP";
        case Language::CSHARP: return "CSHARP";
        case Language::GO: return "GO";
        case Language::JAVA: return "JAVA";
        case Language::JAVASCRIPT: return "JAVASCRIPT";
        case Language::PYTHON: return "PYTHON";
    }
    return "?";
}

const char* to_string(ProvenanceLabel v) {
    switch (v) {
        case ProvenanceLabel::HUMAN: return "HUMAN";
        case ProvenanceLabel::AI_GENERATED: return "AI_GENERATED";
        case ProvenanceLabel::AI_REFINED: return "AI_REFINED";
        case ProvenanceLabel::AI_ADVERSARIAL: return "AI_ADVERSARIAL";
    }
    return "?";
}

const char* to_string(Domain v) {
    switch (v) {
        case Domain::GENERAL: return "GENERAL";
        case Domain::ALGORITHMIC: return "ALGORITHMIC";
        case Domain::RESEARCH_DS: return "RESEARCH_DS";
    }
    return "?";
}

const char* to_string(Split v) {
    switch (v) {
        case Split::TRAIN: return "TRAIN";
        case Split::VAL: return "VAL";
        case Split::TEST: return "TEST";
    }
    return "?";
}

const char* to_string(DecodingStrategy v) {
    switch (v) {
        case DecodingStrategy::GREEDY: return "GREEDY";
        case DecodingStrategy::SAMPLING: return "SAMPLING";
        case DecodingStrategy::BEAM: return "BEAM";
    }
    return "?";
}

const char* to_string(LabelScheme v) {
    switch (v) {
        case LabelScheme::TWO: return "TWO";
        case LabelScheme::THREE: return "THREE";
        case LabelScheme::FOUR: return "FOUR";
    }
    return "?";
}

const char* to_string(RefinementScenario v) {
    switch (v) {
        case RefinementScenario::CONTINUATION: return "CONTINUATION";
        case RefinementScenario::GAP_FILL: return "GAP_FILL";
        case RefinementScenario::REWRITE: return "REWRITE";
    }
    return "?";
}

Language language_from_string(const std::string& s) { return from_table(s, kLanguages, "language"); }
ProvenanceLabel label_from_string(const std::string& s) { return from_table(s, kLabels, "label"); }
Domain domain_from_string(const std::string& s) { return from_table(s, kDomains, "domain"); }
Split split_from_string(const std::string& s) { return from_table(s, kSplits, "split"); }
DecodingStrategy strategy_from_string(const std::string& s) {
    return from_table(s, kStrategies, "decoding.strategy");
}
LabelScheme scheme_from_string(const std::string& s) { return from_table(s, kSchemes, "scheme"); }
RefinementScenario scenario_from_string(const std::string& s) {
    return from_table(s, kScenarios, "scenario");
}

void DecodingConfig::validate() const {
    switch (strategy) {
        case DecodingStrategy::GREEDY:
            if (temperature || top_k || top_p || beam_width)
                throw ValidationError("decoding: GREEDY takes no attributes");
            break;
        case DecodingStrategy::SAMPLING:
            if (!temperature || !in_set(*temperature, {0.1, 0.4, 0.7, 1.0, 1.5, 2.0}))
                throw ValidationError("decoding: SAMPLING temperature must be one of "
                                      "{0.1,0.4,0.7,1.0,1.5,2.0}");
            if (!top_k || !in_set(*top_k, {10, 50, 100}))
                throw ValidationError("decoding: SAMPLING top_k must be one of {10,50,100}");
            if (!top_p || !in_set(*top_p, {1.0, 0.95, 0.9, 0.8}))
                throw ValidationError("decoding: SAMPLING top_p must be one of {1.0,0.95,0.9,0.8}");
            if (beam_width) throw ValidationError("decoding: SAMPLING takes no beam_width");
            break;
        case DecodingStrategy::BEAM:
            if (!beam_width || !in_set(*beam_width, {2, 4, 6, 8}))
                throw ValidationError("decoding: BEAM beam_width must be one of {2,4,6,8}");
            if (temperature || top_k || top_p)
                throw ValidationError("decoding: BEAM takes only beam_width");
            break;
    }
}

void CodeSample::validate() const {
    if (id.empty()) throw ValidationError("sample id must be nonempty");
    if (code.empty()) throw ValidationError("sample '" + id + "': code must be nonempty");
    if (label == ProvenanceLabel::HUMAN) {
        if (generator)
            throw ValidationError("sample '" + id + "': HUMAN samples cannot carry a generator");
        if (decoding)
            throw ValidationError("sample '" + id + "': HUMAN samples cannot carry decoding config");
    }
    if (decoding) decoding->validate();
}

int collapse_label(ProvenanceLabel label, LabelScheme scheme) {
    switch (scheme) {
        case LabelScheme::FOUR:
            return static_cast<int>(label);
        case LabelScheme::THREE:
            switch (label) {
                case ProvenanceLabel::HUMAN: return 0;
                case ProvenanceLabel::AI_GENERATED: return 1;
                case ProvenanceLabel::AI_REFINED: return 2;
                case ProvenanceLabel::AI_ADVERSARIAL: return 1;
            }
            break;
        case LabelScheme::TWO:
            return label == ProvenanceLabel::HUMAN ? 0 : 1;
    }
    throw ValidationError("collapse_label: bad scheme");
}

int num_classes(LabelScheme scheme) {
    switch (scheme) {
        case LabelScheme::TWO: return 2;
        case LabelScheme::THREE: return 3;
        case LabelScheme::FOUR: return 4;
    }
    return 0;
}

std::string class_name(int class_index, LabelScheme scheme) {
    switch (scheme) {
        case LabelScheme::TWO: {
            const char* names[] = {"human", "machine"};
            if (class_index >= 0 && class_index < 2) return names[class_index];
            break;
        }
        case LabelScheme::THREE: {
            const char* names[] = {"human", "ai_generated", "ai_refined"};
            if (class_index >= 0 && class_index < 3) return names[class_index];
            break;
        }
        case LabelScheme::FOUR: {
            const char* names[] = {"human", "ai_generated", "ai_refined", "ai_adversarial"};
            if (class_index >= 0 && class_index < 4) return names[class_index];
            break;
        }
    }
    throw ValidationError("class_name: index out of range for scheme");
}

SplitAssignment split_dataset(const std::vector<CodeSample>& samples,
                              const std::array<double, 3>& ratios, uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0)
        throw ValidationError("split ratios must be positive");
    if (std::fabs(sum - 1.0) > 1e-9)
        throw ValidationError("split ratios must sum to 1");

    SplitAssignment out;
    out.split_of.assign(samples.size(), Split::TRAIN);

    // Group by stratification cell; std::map keeps cell order stable.
    std::map<std::string, std::vector<size_t>> cells;
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        std::string key = std::string(to_string(s.label)) + "|" + to_string(s.language) + "|" +
                          to_string(s.domain);
        cells[key].push_back(i);
    }

    for (auto& [key, indices] : cells) {
        size_t n = indices.size();
        if (n < 3) {
            out.warnings.push_back("cell " + key + " has " + std::to_string(n) +
                                   " samples; all assigned to TRAIN");
            continue;
        }
        std::mt19937_64 rng(util::mix64(seed ^ util::fnv1a(key)));
        std::shuffle(indices.begin(), indices.end(), rng);

        // Largest-remainder allocation: each split gets floor or ceil of its quota.
        std::array<size_t, 3> counts{};
        std::array<double, 3> frac{};
        size_t assigned = 0;
        for (int k = 0; k < 3; ++k) {
            double quota = ratios[k] * static_cast<double>(n);
            counts[k] = static_cast<size_t>(std::floor(quota));
            frac[k] = quota - std::floor(quota);
            assigned += counts[k];
        }
        std::array<int, 3> order = {0, 1, 2};
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return frac[a] > frac[b]; });
        for (size_t r = 0; assigned < n; ++r, ++assigned) counts[order[r % 3]]++;

        size_t pos = 0;
        const Split split_order[3] = {Split::TRAIN, Split::VAL, Split::TEST};
        for (int k = 0; k < 3; ++k)
            for (size_t j = 0; j < counts[k]; ++j) out.split_of[indices[pos++]] = split_order[k];
    }
    return out;
}

RefinementTask prepare_refinement_task(const CodeSample& sample, RefinementScenario scenario,
                                       double preserve_fraction, uint64_t /*seed*/) {
    auto lines = split_lines_keep_ends(sample.code);
    if (lines.size() < 2)
        throw ValidationError("sample '" + sample.id + "': refinement needs at least 2 lines");

    RefinementTask task;
    task.source_id = sample.id;
    task.scenario = scenario;

    auto join = [&](size_t from, size_t to) {  // [from, to)
        std::string s;
        for (size_t i = from; i < to; ++i) s += lines[i];
        return s;
    };

    if (scenario == RefinementScenario::REWRITE) {
        task.prefix = sample.code;
        return task;
    }

    if (preserve_fraction < 0.10 || preserve_fraction > 0.85)
        throw ValidationError("preserve_fraction must lie in [0.10, 0.85]");
    task.preserve_fraction = preserve_fraction;

    size_t n = lines.size();
    auto preserved = static_cast<size_t>(
        util::round_half_away(preserve_fraction * static_cast<double>(n)));

    if (scenario == RefinementScenario::CONTINUATION) {
        // Keep prefix and masked region both nonempty.
        preserved = std::clamp<size_t>(preserved, 1, n - 1);
        task.prefix = join(0, preserved);
        task.masked_region = join(preserved, n);
        return task;
    }

    // GAP_FILL: preserved lines split evenly, odd remainder to the prefix.
    preserved = std::clamp<size_t>(preserved, 2, n - 1);
    size_t front = (preserved + 1) / 2;
    size_t back = preserved - front;
    task.prefix = join(0, front);
    task.masked_region = join(front, n - back);
    task.suffix = join(n - back, n);
    return task;
}

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of empty sequence");
    std::sort(values.begin(), values.end());
    double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
    size_t idx = rank < 1 ? 0 : static_cast<size_t>(rank) - 1;
    if (idx >= values.size()) idx = values.size() - 1;
    return values[idx];
}

} // namespace droid::corpus
