#include "droid/eval.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

namespace droid::eval {

using nlohmann::json;

namespace {

void check_lengths(std::span<const int> gold, std::span<const int> pred, int num_classes) {
    if (gold.size() != pred.size())
        throw ValidationError("metric: gold and pred length mismatch");
    if (gold.empty()) throw ValidationError("metric: empty input");
    for (int g : gold)
        if (g < 0 || g >= num_classes) throw ValidationError("metric: gold label out of range");
    for (int p : pred)
        if (p < 0 || p >= num_classes) throw ValidationError("metric: prediction out of range");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

ConfusionMatrix confusion_matrix(std::span<const int> gold, std::span<const int> pred,
                                 int num_classes) {
    check_lengths(gold, pred, num_classes);
    ConfusionMatrix cm;
    cm.counts = Eigen::MatrixXi::Zero(num_classes, num_classes);
    for (size_t i = 0; i < gold.size(); ++i) cm.counts(gold[i], pred[i])++;
    return cm;
}

std::vector<ClassMetrics> per_class_metrics(std::span<const int> gold, std::span<const int> pred,
                                            int num_classes) {
    ConfusionMatrix cm = confusion_matrix(gold, pred, num_classes);
    std::vector<ClassMetrics> out(static_cast<size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        ClassMetrics& m = out[static_cast<size_t>(c)];
        double tp = cm.counts(c, c);
        double support = cm.counts.row(c).sum();
        double predicted = cm.counts.col(c).sum();
        m.support = static_cast<uint64_t>(support);
        m.undefined_recall = support == 0;
        m.precision = predicted > 0 ? tp / predicted : 0.0;
        m.recall = support > 0 ? tp / support : 0.0;
        double pr = m.precision + m.recall;
        m.f1 = pr > 0 ? 2.0 * m.precision * m.recall / pr : 0.0;
    }
    return out;
}

double weighted_f1(std::span<const int> gold, std::span<const int> pred, int num_classes) {
    auto metrics = per_class_metrics(gold, pred, num_classes);
    double total = static_cast<double>(gold.size());
    double sum = 0.0;
    for (const auto& m : metrics) sum += static_cast<double>(m.support) / total * m.f1;
    return sum;
}

double accuracy(std::span<const int> gold, std::span<const int> pred) {
    if (gold.size() != pred.size() || gold.empty())
        throw ValidationError("accuracy: bad input lengths");
    size_t correct = 0;
    for (size_t i = 0; i < gold.size(); ++i)
        if (gold[i] == pred[i]) correct++;
    return static_cast<double>(correct) / static_cast<double>(gold.size());
}

std::vector<double> per_class_recall(std::span<const int> gold, std::span<const int> pred,
                                     int num_classes, std::vector<bool>* undefined_flags) {
    auto metrics = per_class_metrics(gold, pred, num_classes);
    std::vector<double> out;
    out.reserve(metrics.size());
    if (undefined_flags) undefined_flags->clear();
    for (const auto& m : metrics) {
        out.push_back(m.recall);
        if (undefined_flags) undefined_flags->push_back(m.undefined_recall);
    }
    return out;
}

EvalReport build_report(std::span<const int> gold, std::span<const int> pred,
                        corpus::LabelScheme scheme, const SampleGroups& groups,
                        const std::string& model_digest, const std::string& dataset_digest,
                        uint64_t seed) {
    const int k = corpus::num_classes(scheme);
    EvalReport r;
    r.scheme = scheme;
    r.overall_weighted_f1 = weighted_f1(gold, pred, k);
    r.per_class = per_class_metrics(gold, pred, k);
    r.confusion = confusion_matrix(gold, pred, k);
    r.model_digest = model_digest;
    r.dataset_digest = dataset_digest;
    r.seed = seed;

    auto breakdown = [&](const std::vector<std::string>& key_of,
                         std::map<std::string, double>& f1s,
                         std::map<std::string, uint64_t>& counts) {
        if (key_of.empty()) return;
        if (key_of.size() != gold.size())
            throw ValidationError("report: group keys must align with samples");
        std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> buckets;
        for (size_t i = 0; i < gold.size(); ++i) {
            auto& b = buckets[key_of[i]];
            b.first.push_back(gold[i]);
            b.second.push_back(pred[i]);
        }
        for (const auto& [key, b] : buckets) {
            f1s[key] = weighted_f1(b.first, b.second, k);
            counts[key] = b.first.size();
        }
    };
    breakdown(groups.language, r.by_language, r.language_counts);
    breakdown(groups.domain, r.by_domain, r.domain_counts);
    breakdown(groups.scenario, r.by_scenario, r.scenario_counts);
    return r;
}

namespace {

json report_to_json(const EvalReport& r) {
    json obj;
    obj["scheme"] = corpus::to_string(r.scheme);
    obj["weighted_f1"] = r.overall_weighted_f1;
    obj["seed"] = r.seed;
    obj["model_digest"] = r.model_digest;
    obj["dataset_digest"] = r.dataset_digest;
    json per_class = json::array();
    for (size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        per_class.push_back({{"class", corpus::class_name(static_cast<int>(c), r.scheme)},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support},
                             {"undefined_recall", m.undefined_recall}});
    }
    obj["per_class"] = per_class;
    json conf = json::array();
    for (Eigen::Index i = 0; i < r.confusion.counts.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.confusion.counts.cols(); ++j)
            row.push_back(r.confusion.counts(i, j));
        conf.push_back(row);
    }
    obj["confusion"] = conf;
    auto group_json = [](const std::map<std::string, double>& f1s,
                         const std::map<std::string, uint64_t>& counts) {
        json g = json::object();
        for (const auto& [key, f1] : f1s)
            g[key] = {{"weighted_f1", f1}, {"count", counts.at(key)}};
        return g;
    };
    obj["by_language"] = group_json(r.by_language, r.language_counts);
    obj["by_domain"] = group_json(r.by_domain, r.domain_counts);
    obj["by_scenario"] = group_json(r.by_scenario, r.scenario_counts);
    return obj;
}

std::string report_to_csv(const EvalReport& r) {
    std::string out = "class,precision,recall,f1,support\r\n";
    for (size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        out += corpus::class_name(static_cast<int>(c), r.scheme) + "," + fmt(m.precision) + "," +
               fmt(m.recall) + "," + fmt(m.f1) + "," + std::to_string(m.support) + "\r\n";
    }
    return out;
}

void markdown_group_table(std::string& out, const std::string& title,
                          const std::map<std::string, double>& f1s,
                          const std::map<std::string, uint64_t>& counts) {
    if (f1s.empty()) return;
    out += "\n### Weighted F1 by " + title + "\n\n";
    out += "| " + title + " | weighted F1 | samples |\n";
    out += "| --- | --- | --- |\n";
    for (const auto& [key, f1] : f1s)
        out += "| " + key + " | " + fmt(f1) + " | " + std::to_string(counts.at(key)) + " |\n";
}

std::string report_to_markdown(const EvalReport& r) {
    std::string out = "# Evaluation report\n\n";
    out += "- scheme: " + std::string(corpus::to_string(r.scheme)) + "\n";
    out += "- weighted F1: " + fmt(r.overall_weighted_f1) + "\n";
    out += "- seed: " + std::to_string(r.seed) + "\n";
    if (!r.model_digest.empty()) out += "- model: " + r.model_digest + "\n";
    if (!r.dataset_digest.empty()) out += "- dataset: " + r.dataset_digest + "\n";
    out += "\n## Per-class metrics\n\n";
    out += "| class | precision | recall | F1 | support |\n";
    out += "| --- | --- | --- | --- | --- |\n";
    for (size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        out += "| " + corpus::class_name(static_cast<int>(c), r.scheme) + " | " +
               fmt(m.precision) + " | " + fmt(m.recall) + " | " + fmt(m.f1) + " | " +
               std::to_string(m.support) + " |\n";
    }
    out += "\n## Confusion matrix (rows = gold, columns = predicted)\n\n";
    out += "| |";
    for (Eigen::Index j = 0; j < r.confusion.counts.cols(); ++j)
        out += " " + corpus::class_name(static_cast<int>(j), r.scheme) + " |";
    out += "\n|";
    for (Eigen::Index j = 0; j <= r.confusion.counts.cols(); ++j) out += " --- |";
    out += "\n";
    for (Eigen::Index i = 0; i < r.confusion.counts.rows(); ++i) {
        out += "| " + corpus::class_name(static_cast<int>(i), r.scheme) + " |";
        for (Eigen::Index j = 0; j < r.confusion.counts.cols(); ++j)
            out += " " + std::to_string(r.confusion.counts(i, j)) + " |";
        out += "\n";
    }
    markdown_group_table(out, "language", r.by_language, r.language_counts);
    markdown_group_table(out, "domain", r.by_domain, r.domain_counts);
    markdown_group_table(out, "scenario", r.by_scenario, r.scenario_counts);
    return out;
}

} // namespace

std::string emit_report(const EvalReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::JSON: return report_to_json(report).dump(2) + "\n";
        case ReportFormat::CSV: return report_to_csv(report);
        case ReportFormat::MARKDOWN: return report_to_markdown(report);
    }
    throw ValidationError("emit_report: bad format");
}

EvalReport report_from_json(const std::string& text) {
    json obj = json::parse(text, nullptr, false);
    if (obj.is_discarded()) throw ValidationError("report: malformed JSON");
    EvalReport r;
    try {
        r.scheme = corpus::scheme_from_string(obj.at("scheme").get<std::string>());
        r.overall_weighted_f1 = obj.at("weighted_f1").get<double>();
        r.seed = obj.at("seed").get<uint64_t>();
        r.model_digest = obj.at("model_digest").get<std::string>();
        r.dataset_digest = obj.at("dataset_digest").get<std::string>();
        for (const auto& row : obj.at("per_class")) {
            ClassMetrics m;
            m.precision = row.at("precision").get<double>();
            m.recall = row.at("recall").get<double>();
            m.f1 = row.at("f1").get<double>();
            m.support = row.at("support").get<uint64_t>();
            m.undefined_recall = row.at("undefined_recall").get<bool>();
            r.per_class.push_back(m);
        }
        const auto& conf = obj.at("confusion");
        auto k = static_cast<Eigen::Index>(conf.size());
        r.confusion.counts = Eigen::MatrixXi::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = 0; j < k; ++j)
                r.confusion.counts(i, j) = conf.at(static_cast<size_t>(i))
                                               .at(static_cast<size_t>(j))
                                               .get<int>();
        auto parse_groups = [](const json& g, std::map<std::string, double>& f1s,
                               std::map<std::string, uint64_t>& counts) {
            for (auto it = g.begin(); it != g.end(); ++it) {
                f1s[it.key()] = it.value().at("weighted_f1").get<double>();
                counts[it.key()] = it.value().at("count").get<uint64_t>();
            }
        };
        parse_groups(obj.at("by_language"), r.by_language, r.language_counts);
        parse_groups(obj.at("by_domain"), r.by_domain, r.domain_counts);
        parse_groups(obj.at("by_scenario"), r.by_scenario, r.scenario_counts);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("report: ") + e.what());
    }
    return r;
}

std::string truncate_tokens(const std::string& code, size_t max_tokens) {
    if (max_tokens == 0) return std::string();
    size_t tokens = 0;
    bool in_token = false;
    for (size_t i = 0; i < code.size(); ++i) {
        bool ws = code[i] == ' ' || code[i] == '\t' || code[i] == '\n' || code[i] == '\r' ||
                  code[i] == '\f' || code[i] == '\v';
        if (!ws && !in_token) {
            in_token = true;
            tokens++;
        } else if (ws && in_token) {
            in_token = false;
            if (tokens == max_tokens) return code.substr(0, i);
        }
    }
    return code;  // fewer than max_tokens tokens: byte-identical
}

std::vector<std::pair<size_t, double>> truncation_stress(const PredictFn& predict,
                                                         const FeaturizeFn& featurize,
                                                         std::span<const StressSample> samples,
                                                         std::vector<size_t> lengths,
                                                         int num_classes) {
    if (samples.empty()) throw ValidationError("truncation_stress: empty dataset");
    std::sort(lengths.begin(), lengths.end());
    std::vector<std::pair<size_t, double>> out;
    std::vector<int> gold;
    gold.reserve(samples.size());
    for (const auto& s : samples) gold.push_back(s.label);
    for (size_t len : lengths) {
        std::vector<int> pred;
        pred.reserve(samples.size());
        for (const auto& s : samples) {
            std::string cut = len == SIZE_MAX ? s.code : truncate_tokens(s.code, len);
            pred.push_back(predict(featurize(cut)));
        }
        out.emplace_back(len, weighted_f1(gold, pred, num_classes));
    }
    return out;
}

AdversarialRecall adversarial_recall_table(const PredictFn& predict, const Eigen::MatrixXd& X,
                                           std::span<const corpus::ProvenanceLabel> labels) {
    if (static_cast<size_t>(X.rows()) != labels.size())
        throw ValidationError("adversarial_recall: features and labels misaligned");
    uint64_t human = 0, human_hit = 0, adv = 0, adv_hit = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        auto label = labels[static_cast<size_t>(i)];
        if (label != corpus::ProvenanceLabel::HUMAN &&
            label != corpus::ProvenanceLabel::AI_ADVERSARIAL)
            continue;
        int pred = predict(X.row(i).transpose());
        if (label == corpus::ProvenanceLabel::HUMAN) {
            human++;
            if (pred == 0) human_hit++;
        } else {
            adv++;
            if (pred == 1) adv_hit++;
        }
    }
    if (human == 0) throw ValidationError("adversarial_recall: no HUMAN samples");
    if (adv == 0) throw ValidationError("adversarial_recall: no AI_ADVERSARIAL samples");
    return {static_cast<double>(human_hit) / static_cast<double>(human),
            static_cast<double>(adv_hit) / static_cast<double>(adv)};
}

} // namespace droid::eval
