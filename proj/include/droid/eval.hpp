#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "droid/corpus.hpp"
#include "droid/errors.hpp"

namespace droid::eval {

struct ConfusionMatrix {
    Eigen::MatrixXi counts;  // rows = gold class, cols = predicted class
    uint64_t total() const { return static_cast<uint64_t>(counts.sum()); }
};

ConfusionMatrix confusion_matrix(std::span<const int> gold, std::span<const int> pred,
                                 int num_classes);

// Support-weighted mean of per-class F1; classes with zero support carry no
// weight, and F1 is 0 where precision + recall is 0.
double weighted_f1(std::span<const int> gold, std::span<const int> pred, int num_classes);

double accuracy(std::span<const int> gold, std::span<const int> pred);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    uint64_t support = 0;
    bool undefined_recall = false;  // no gold samples of this class
};

std::vector<ClassMetrics> per_class_metrics(std::span<const int> gold, std::span<const int> pred,
                                            int num_classes);

// recall_c = correct_c / support_c, 0 with the undefined flag when support 0.
std::vector<double> per_class_recall(std::span<const int> gold, std::span<const int> pred,
                                     int num_classes,
                                     std::vector<bool>* undefined_flags = nullptr);

struct EvalReport {
    corpus::LabelScheme scheme = corpus::LabelScheme::TWO;
    double overall_weighted_f1 = 0.0;
    std::vector<ClassMetrics> per_class;
    ConfusionMatrix confusion;
    // Weighted F1 and sample count per group value.
    std::map<std::string, double> by_language;
    std::map<std::string, double> by_domain;
    std::map<std::string, double> by_scenario;  // decoding strategy, NONE for human code
    std::map<std::string, uint64_t> language_counts;
    std::map<std::string, uint64_t> domain_counts;
    std::map<std::string, uint64_t> scenario_counts;
    std::string model_digest;
    std::string dataset_digest;
    uint64_t seed = 0;
};

struct SampleGroups {
    std::vector<std::string> language;  // aligned with gold/pred
    std::vector<std::string> domain;
    std::vector<std::string> scenario;
};

EvalReport build_report(std::span<const int> gold, std::span<const int> pred,
                        corpus::LabelScheme scheme, const SampleGroups& groups,
                        const std::string& model_digest, const std::string& dataset_digest,
                        uint64_t seed);

enum class ReportFormat { JSON, CSV, MARKDOWN };

// Deterministic serialization. JSON uses canonically sorted keys; CSV is an
// RFC-4180 per-class metrics table (header plus one row per class); Markdown
// mirrors the grouped-table layout (rows = groups, columns = metrics).
std::string emit_report(const EvalReport& report, ReportFormat format);
EvalReport report_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Protocols
// ---------------------------------------------------------------------------

struct OodGroup {
    std::string key;
    Eigen::MatrixXd train_x;
    std::vector<int> train_y;
    Eigen::MatrixXd test_x;
    std::vector<int> test_y;
};

// Entry (g, h) holds the weighted F1 of the model trained only on group g
// and evaluated on group h's test data. Each group trains from scratch with
// its own seed offset. train_fn(group, seed) -> model;
// eval_fn(model, test_x, test_y) -> weighted F1.
template <typename TrainFn, typename EvalFn>
Eigen::MatrixXd ood_matrix(const std::vector<OodGroup>& groups, TrainFn&& train_fn,
                           EvalFn&& eval_fn, uint64_t seed) {
    if (groups.size() < 2) throw ValidationError("ood_matrix: need at least 2 groups");
    for (const auto& g : groups)
        if (g.train_x.rows() == 0 || g.test_x.rows() == 0)
            throw ValidationError("ood_matrix: group '" + g.key + "' has an empty split");
    const auto n = static_cast<Eigen::Index>(groups.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index g = 0; g < n; ++g) {
        auto model = train_fn(groups[static_cast<size_t>(g)], seed + static_cast<uint64_t>(g));
        for (Eigen::Index h = 0; h < n; ++h) {
            const auto& tg = groups[static_cast<size_t>(h)];
            out(g, h) = eval_fn(model, tg.test_x, tg.test_y);
        }
    }
    return out;
}

// First L whitespace-delimited tokens of `code`, byte-identical to the input
// when L covers every token (trailing bytes included in that case).
std::string truncate_tokens(const std::string& code, size_t max_tokens);

struct StressSample {
    std::string code;
    int label = 0;
};

using FeaturizeFn = std::function<Eigen::VectorXd(const std::string& code)>;
using PredictFn = std::function<int(const Eigen::VectorXd& features)>;

// Re-featurizes each sample truncated to L tokens and reports weighted F1
// per length, in ascending length order. SIZE_MAX (or any L beyond every
// sample) reproduces the untruncated pipeline exactly.
std::vector<std::pair<size_t, double>> truncation_stress(const PredictFn& predict,
                                                         const FeaturizeFn& featurize,
                                                         std::span<const StressSample> samples,
                                                         std::vector<size_t> lengths,
                                                         int num_classes);

struct AdversarialRecall {
    double human_recall = 0.0;        // human class recall on HUMAN samples
    double adversarial_recall = 0.0;  // machine class recall on AI_ADVERSARIAL samples
};

// Under the TWO scheme: predict(features row) -> class index in {0 human,
// 1 machine}. Throws when either population is missing.
AdversarialRecall adversarial_recall_table(const PredictFn& predict, const Eigen::MatrixXd& X,
                                           std::span<const corpus::ProvenanceLabel> labels);

} // namespace droid::eval
