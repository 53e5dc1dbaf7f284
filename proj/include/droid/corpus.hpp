#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace droid::corpus {

enum class Language { C_CPP, CSHARP, GO, JAVA, JAVASCRIPT, PYTHON };
enum class ProvenanceLabel { HUMAN, AI_GENERATED, AI_REFINED, AI_ADVERSARIAL };
enum class Domain { GENERAL, ALGORITHMIC, RESEARCH_DS };
enum class Split { TRAIN, VAL, TEST };
enum class DecodingStrategy { GREEDY, SAMPLING, BEAM };
enum class LabelScheme { TWO, THREE, FOUR };
enum class RefinementScenario { CONTINUATION, GAP_FILL, REWRITE };

const char* to_string(Language v);
const char* to_string(ProvenanceLabel v);
const char* to_string(Domain v);
const char* to_string(Split v);
const char* to_string(DecodingStrategy v);
const char* to_string(LabelScheme v);
const char* to_string(RefinementScenario v);

// All throw ValidationError on unknown spellings; enum values are the
// uppercase strings used on the wire.
Language language_from_string(const std::string& s);
ProvenanceLabel label_from_string(const std::string& s);
Domain domain_from_string(const std::string& s);
Split split_from_string(const std::string& s);
DecodingStrategy strategy_from_string(const std::string& s);
LabelScheme scheme_from_string(const std::string& s);
RefinementScenario scenario_from_string(const std::string& s);

struct DecodingConfig {
    DecodingStrategy strategy = DecodingStrategy::GREEDY;
    std::optional<double> temperature;
    std::optional<int> top_k;
    std::optional<double> top_p;
    std::optional<int> beam_width;

    // GREEDY carries no attributes; SAMPLING requires temperature/top_k/top_p
    // from the released grids; BEAM requires beam_width in {2,4,6,8}.
    void validate() const;

    bool operator==(const DecodingConfig&) const = default;
};

struct CodeSample {
    std::string id;
    std::string code;
    Language language = Language::PYTHON;
    ProvenanceLabel label = ProvenanceLabel::HUMAN;
    std::optional<std::string> generator;
    std::optional<std::string> model_family;
    Domain domain = Domain::GENERAL;
    std::optional<DecodingConfig> decoding;
    bool suspicious = false;
    Split split = Split::TRAIN;

    // id/code nonempty; HUMAN samples carry no generator or decoding config.
    void validate() const;

    bool operator==(const CodeSample&) const = default;
};

struct RefinementTask {
    std::string source_id;
    RefinementScenario scenario = RefinementScenario::CONTINUATION;
    std::optional<double> preserve_fraction;
    std::string prefix;
    std::string suffix;
    std::string masked_region;
};

// Class index under a collapsing scheme. FOUR is the identity; THREE folds
// adversarial into the generated class; TWO folds every machine class to 1.
int collapse_label(ProvenanceLabel label, LabelScheme scheme);
int num_classes(LabelScheme scheme);

// Display name of a class index under a scheme (for reports).
std::string class_name(int class_index, LabelScheme scheme);

struct SplitAssignment {
    std::vector<Split> split_of;                 // aligned with input samples
    std::vector<std::string> warnings;           // cells too small to stratify
};

// Stratified split over (label, language, domain) cells. Per-cell counts
// deviate from the exact ratio by at most one; deterministic given seed.
// Cells with fewer samples than splits go wholly to TRAIN with a warning.
SplitAssignment split_dataset(const std::vector<CodeSample>& samples,
                              const std::array<double, 3>& ratios, uint64_t seed);

// Slices `sample` into a refinement task. CONTINUATION keeps the first
// round(N * lines) lines as prefix; GAP_FILL splits the preserved lines
// evenly between prefix and suffix (odd remainder to the prefix); REWRITE
// uses the whole code as prefix. prefix + masked_region + suffix always
// reconstructs the original code byte for byte.
RefinementTask prepare_refinement_task(const CodeSample& sample, RefinementScenario scenario,
                                       double preserve_fraction, uint64_t seed);

struct StatsReport {
    size_t sample_count = 0;
    // Nearest-rank percentiles at 75/90/99.
    std::map<int, double> ast_depth_percentiles;
    std::map<int, double> max_line_len_percentiles;
    std::map<std::string, double> class_distribution;   // percentages
    double avg_samples_per_language = 0.0;
    double avg_samples_per_generator = 0.0;
    std::map<std::string, uint64_t> samples_per_language;
    std::map<std::string, uint64_t> samples_per_generator;
};

// Nearest-rank percentile: the ceil(p/100 * N)-th smallest value.
double nearest_rank_percentile(std::vector<double> values, double p);

} // namespace droid::corpus
