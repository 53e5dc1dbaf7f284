#include "droid/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "droid/digest.hpp"
#include "droid/errors.hpp"
#include "droid/eval.hpp"
#include "droid/features.hpp"
#include "droid/grammar.hpp"
#include "droid/jsonl.hpp"
#include "droid/stats.hpp"
#include "droid/util.hpp"

namespace droid::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Logging and manifests
// ---------------------------------------------------------------------------

void log_event(const std::string& event, json fields = json::object()) {
    fields["event"] = event;
    auto now = std::chrono::system_clock::now().time_since_epoch();
    fields["ts_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    std::cerr << fields.dump() << "\n";
}

// Reproducibility record: digests and config, never timestamps or absolute
// paths, so identical runs are byte-identical wherever they land.
class RunManifest {
public:
    RunManifest(std::string command, uint64_t seed) {
        doc_["command"] = std::move(command);
        doc_["tool_version"] = kToolVersion;
        doc_["seed"] = seed;
        doc_["inputs"] = json::array();
        doc_["outputs"] = json::array();
    }
    void add_input(const std::string& path) {
        doc_["inputs"].push_back({{"file", fs::path(path).filename().string()},
                                  {"sha256", digest::sha256_file_hex(path)}});
    }
    void add_output(const std::string& path) {
        doc_["outputs"].push_back({{"file", fs::path(path).filename().string()},
                                   {"sha256", digest::sha256_file_hex(path)}});
    }
    void set(const std::string& key, json value) { doc_[key] = std::move(value); }
    void write(const std::string& output_dir, const std::string& command) {
        std::string path = (fs::path(output_dir) / ("manifest." + command + ".json")).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write manifest: " + path);
        out << doc_.dump(2) << "\n";
    }

private:
    json doc_;
};

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.output_dir);
    return (fs::path(cfg.output_dir) / name).string();
}

// ---------------------------------------------------------------------------
// Shared pipeline stages
// ---------------------------------------------------------------------------

struct AnalyzedSample {
    analysis::AstSummary ast;
    analysis::LineMetrics lm;
    double english = 1.0;
};

std::vector<AnalyzedSample> analyze_corpus(const std::vector<corpus::CodeSample>& samples,
                                           unsigned parallelism,
                                           analysis::ParseMode mode = analysis::ParseMode::Strict) {
    std::vector<AnalyzedSample> out(samples.size());
    util::parallel_for(samples.size(), util::resolve_parallelism(parallelism), [&](size_t i) {
        analysis::ReferenceGrammar grammar;  // one per worker invocation
        analysis::StopwordEnglishDetector english;
        AnalyzedSample& a = out[i];
        a.ast = analysis::parse_summary(samples[i].code, samples[i].language, grammar, mode);
        a.lm = analysis::line_metrics(samples[i].code);
        a.english = analysis::english_confidence(a.ast.docstrings, english);
    });
    return out;
}

features::FeatureMatrix featurize_corpus(const std::vector<corpus::CodeSample>& samples,
                                         const std::vector<AnalyzedSample>& analyzed) {
    const auto& registry = features::FeatureRegistry::builtin();
    features::FeatureMatrix m;
    m.schema_id = registry.schema_id();
    m.values.resize(static_cast<Eigen::Index>(samples.size()),
                    static_cast<Eigen::Index>(registry.size()));
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!analyzed[i].ast.parse_ok)
            throw ValidationError("featurize: sample '" + s.id +
                                  "' does not parse; run filter first");
        auto fv = features::featurize(s, analyzed[i].ast, analyzed[i].lm, registry);
        m.values.row(static_cast<Eigen::Index>(i)) = fv.values.transpose();
        m.ids.push_back(s.id);
        m.labels.push_back(s.label);
        m.languages.push_back(s.language);
        m.domains.push_back(s.domain);
        m.splits.push_back(s.split);
        m.scenarios.push_back(s.decoding ? static_cast<int8_t>(s.decoding->strategy)
                                         : static_cast<int8_t>(-1));
    }
    return m;
}

std::vector<size_t> rows_for_split(const features::FeatureMatrix& m, const std::string& split) {
    std::vector<size_t> rows;
    if (split == "ALL") {
        rows.resize(m.ids.size());
        std::iota(rows.begin(), rows.end(), 0);
        return rows;
    }
    corpus::Split want = corpus::split_from_string(split);
    for (size_t i = 0; i < m.ids.size(); ++i)
        if (m.splits[i] == want) rows.push_back(i);
    return rows;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

std::string scenario_name(int8_t s) {
    if (s < 0) return "NONE";
    return corpus::to_string(static_cast<corpus::DecodingStrategy>(s));
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_ingest(const PipelineConfig& cfg) {
    auto samples = corpus::load_jsonl(cfg.input);
    log_event("ingest.loaded", {{"samples", samples.size()}});
    if (cfg.assign_splits) {
        auto assignment = corpus::split_dataset(samples, cfg.split_ratios, cfg.seed);
        for (size_t i = 0; i < samples.size(); ++i) samples[i].split = assignment.split_of[i];
        for (const auto& w : assignment.warnings) log_event("ingest.warning", {{"detail", w}});
    }
    std::string dataset = out_path(cfg, "dataset.jsonl");
    corpus::save_jsonl(samples, dataset);
    auto manifest = corpus::build_manifest(cfg.dataset_name, cfg.dataset_version, samples,
                                           dataset, cfg.seed);
    corpus::save_manifest(manifest, out_path(cfg, "dataset_manifest.json"));

    RunManifest run("ingest", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(dataset);
    run.add_output(out_path(cfg, "dataset_manifest.json"));
    run.set("assign_splits", cfg.assign_splits);
    run.write(cfg.output_dir, "ingest");
    std::cout << "ingested " << samples.size() << " samples -> " << dataset << "\n";
    return 0;
}

int cmd_stats(const PipelineConfig& cfg) {
    auto samples = corpus::load_jsonl(cfg.input);
    auto analyzed = analyze_corpus(samples, cfg.parallelism);
    std::vector<analysis::AstSummary> asts;
    asts.reserve(analyzed.size());
    for (auto& a : analyzed) asts.push_back(a.ast);
    auto report = corpus::corpus_stats(samples, asts);

    json doc;
    doc["sample_count"] = report.sample_count;
    for (const auto& [p, v] : report.ast_depth_percentiles)
        doc["ast_depth_percentiles"][std::to_string(p)] = v;
    for (const auto& [p, v] : report.max_line_len_percentiles)
        doc["max_line_len_percentiles"][std::to_string(p)] = v;
    doc["class_distribution"] = report.class_distribution;
    doc["avg_samples_per_language"] = report.avg_samples_per_language;
    doc["avg_samples_per_generator"] = report.avg_samples_per_generator;
    doc["samples_per_language"] = report.samples_per_language;
    doc["samples_per_generator"] = report.samples_per_generator;
    std::string path = out_path(cfg, "stats.json");
    write_text(path, doc.dump(2) + "\n");

    RunManifest run("stats", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(path);
    run.write(cfg.output_dir, "stats");
    std::cout << doc.dump(2) << "\n";
    return 0;
}

int cmd_slice(const PipelineConfig& cfg) {
    auto samples = corpus::load_jsonl(cfg.input);
    auto scenario = corpus::scenario_from_string(cfg.scenario);
    std::string out;
    size_t written = 0;
    for (const auto& s : samples) {
        auto task = corpus::prepare_refinement_task(s, scenario, cfg.preserve_fraction, cfg.seed);
        json obj;
        obj["source_id"] = task.source_id;
        obj["scenario"] = corpus::to_string(task.scenario);
        if (task.preserve_fraction) obj["preserve_fraction"] = *task.preserve_fraction;
        obj["prefix"] = task.prefix;
        if (!task.suffix.empty()) obj["suffix"] = task.suffix;
        if (!task.masked_region.empty()) obj["masked_region"] = task.masked_region;
        out += obj.dump() + "\n";
        written++;
    }
    std::string path = out_path(cfg, "tasks.jsonl");
    write_text(path, out);

    RunManifest run("slice", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(path);
    run.set("scenario", cfg.scenario);
    run.set("preserve_fraction", cfg.preserve_fraction);
    run.write(cfg.output_dir, "slice");
    std::cout << "sliced " << written << " refinement tasks -> " << path << "\n";
    return 0;
}

int cmd_filter(const PipelineConfig& cfg) {
    auto samples = corpus::load_jsonl(cfg.input);
    auto analyzed = analyze_corpus(samples, cfg.parallelism);
    std::vector<corpus::CodeSample> kept;
    std::string rejections = "id,failed_rules\r\n";
    for (size_t i = 0; i < samples.size(); ++i) {
        auto verdict = filter::apply_quality_rules(samples[i], analyzed[i].ast, analyzed[i].lm,
                                                   analyzed[i].english, cfg.rules);
        if (verdict.pass) {
            kept.push_back(samples[i]);
        } else {
            std::string reasons;
            for (const auto& f : verdict.failed_rules) {
                if (!reasons.empty()) reasons += ";";
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%s=%.4g", f.rule.c_str(), f.observed);
                reasons += buf;
            }
            rejections += csv_escape(samples[i].id) + "," + csv_escape(reasons) + "\r\n";
        }
    }
    std::string kept_path = out_path(cfg, "kept.jsonl");
    std::string rej_path = out_path(cfg, "rejections.csv");
    corpus::save_jsonl(kept, kept_path);
    write_text(rej_path, rejections);

    RunManifest run("filter", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(kept_path);
    run.add_output(rej_path);
    run.set("kept", kept.size());
    run.set("rejected", samples.size() - kept.size());
    run.write(cfg.output_dir, "filter");
    log_event("filter.done", {{"kept", kept.size()}, {"rejected", samples.size() - kept.size()}});
    std::cout << "kept " << kept.size() << " of " << samples.size() << " samples\n";
    return 0;
}

int cmd_dedup(const PipelineConfig& cfg) {
    auto samples = corpus::load_jsonl(cfg.input);
    auto result = dedup::dedup(samples, cfg.dedup, cfg.seed, cfg.parallelism);
    std::string kept_path = out_path(cfg, "kept.jsonl");
    std::string log_path = out_path(cfg, "removals.csv");
    corpus::save_jsonl(result.kept, kept_path);
    write_text(log_path, dedup::removal_log_csv(result.removed));

    RunManifest run("dedup", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(kept_path);
    run.add_output(log_path);
    run.set("kept", result.kept.size());
    run.set("removed", result.removed.size());
    run.write(cfg.output_dir, "dedup");
    std::cout << "kept " << result.kept.size() << ", removed " << result.removed.size()
              << " near-duplicates\n";
    return 0;
}

int cmd_featurize(const PipelineConfig& cfg) {
    auto samples = corpus::load_jsonl(cfg.input);
    auto analyzed = analyze_corpus(samples, cfg.parallelism);
    auto matrix = featurize_corpus(samples, analyzed);
    std::string path = out_path(cfg, "features.ddfm");
    features::save_matrix(matrix, path);

    RunManifest run("featurize", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(path);
    if (cfg.write_csv) {
        std::string csv_path = out_path(cfg, "features.csv");
        write_text(csv_path,
                   features::matrix_to_csv(matrix, features::FeatureRegistry::builtin()));
        run.add_output(csv_path);
    }
    run.set("rows", matrix.ids.size());
    run.set("schema_id", matrix.schema_id);
    run.write(cfg.output_dir, "featurize");
    std::cout << "featurized " << matrix.ids.size() << " samples (" << matrix.values.cols()
              << " features) -> " << path << "\n";
    return 0;
}

std::vector<int> collapsed_labels(const features::FeatureMatrix& m,
                                  const std::vector<size_t>& rows,
                                  corpus::LabelScheme scheme) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (size_t r : rows) out.push_back(corpus::collapse_label(m.labels[r], scheme));
    return out;
}

int cmd_train(const PipelineConfig& cfg) {
    auto matrix = features::load_matrix(cfg.input);
    auto scheme = corpus::scheme_from_string(cfg.scheme);
    auto rows = rows_for_split(matrix, cfg.split == "TEST" ? "TRAIN" : cfg.split);
    if (rows.empty()) throw ValidationError("train: no rows in requested split");
    detector::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.label_scheme = scheme;
    auto model = detector::train(take_rows(matrix.values, rows),
                                 collapsed_labels(matrix, rows, scheme), tc, matrix.schema_id);
    std::string path =
        cfg.model_path.empty() ? out_path(cfg, "model.ddtm") : cfg.model_path;
    detector::save_model(model, path);

    RunManifest run("train", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(path);
    run.set("scheme", cfg.scheme);
    run.set("rows", rows.size());
    run.set("final_train_loss", model.train_loss.empty() ? 0.0 : model.train_loss.back());
    run.write(cfg.output_dir, "train");
    std::cout << "trained " << cfg.scheme << "-scheme detector on " << rows.size()
              << " rows -> " << path << "\n";
    return 0;
}

int cmd_train_embedder(const PipelineConfig& cfg) {
    auto matrix = features::load_matrix(cfg.input);
    auto scheme = corpus::scheme_from_string(cfg.scheme);
    auto rows = rows_for_split(matrix, cfg.split == "TEST" ? "TRAIN" : cfg.split);
    if (rows.empty()) throw ValidationError("train-embedder: no rows in requested split");
    embedder::TripletConfig tc = cfg.triplet;
    tc.seed = cfg.seed;
    auto model = embedder::train_embedder(take_rows(matrix.values, rows),
                                          collapsed_labels(matrix, rows, scheme), tc,
                                          matrix.schema_id);
    std::string path =
        cfg.model_path.empty() ? out_path(cfg, "embedder.ddem") : cfg.model_path;
    embedder::save_embedder(model, path);

    RunManifest run("train-embedder", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(path);
    run.set("scheme", cfg.scheme);
    run.set("rows", rows.size());
    run.set("final_epoch_loss", model.epoch_loss.empty() ? 0.0 : model.epoch_loss.back());
    run.write(cfg.output_dir, "train-embedder");
    std::cout << "trained embedder on " << rows.size() << " rows -> " << path << "\n";
    return 0;
}

int cmd_predict(const PipelineConfig& cfg) {
    auto matrix = features::load_matrix(cfg.input);
    auto model = detector::load_model(cfg.model_path);
    if (model.schema_id != matrix.schema_id)
        throw ValidationError("predict: model schema '" + model.schema_id +
                              "' does not match features schema '" + matrix.schema_id + "'");
    std::string out = "sample_id";
    for (int k = 0; k < model.num_classes(); ++k)
        out += ",p_" + corpus::class_name(k, model.config.label_scheme);
    out += "\r\n";
    char buf[64];
    for (size_t i = 0; i < matrix.ids.size(); ++i) {
        Eigen::VectorXd p = model.predict_proba(matrix.values.row(static_cast<Eigen::Index>(i)));
        out += csv_escape(matrix.ids[i]);
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.9f", p[k]);
            out += ",";
            out += buf;
        }
        out += "\r\n";
    }
    std::string path = out_path(cfg, "predictions.csv");
    write_text(path, out);

    RunManifest run("predict", cfg.seed);
    run.add_input(cfg.input);
    run.add_input(cfg.model_path);
    run.add_output(path);
    run.write(cfg.output_dir, "predict");
    std::cout << "wrote " << matrix.ids.size() << " prediction rows -> " << path << "\n";
    return 0;
}

int cmd_evaluate(const PipelineConfig& cfg) {
    auto matrix = features::load_matrix(cfg.input);
    auto model = detector::load_model(cfg.model_path);
    if (model.schema_id != matrix.schema_id)
        throw ValidationError("evaluate: model/features schema mismatch");
    auto scheme = model.config.label_scheme;
    if (corpus::scheme_from_string(cfg.scheme) != scheme)
        throw ValidationError("evaluate: requested scheme " + cfg.scheme +
                              " but model was trained with scheme " +
                              corpus::to_string(scheme));
    auto rows = rows_for_split(matrix, cfg.split);
    if (rows.empty()) throw ValidationError("evaluate: no rows in requested split");

    Eigen::MatrixXd X = take_rows(matrix.values, rows);
    std::vector<int> gold = collapsed_labels(matrix, rows, scheme);
    std::vector<int> pred = model.predict_classes(X);
    eval::SampleGroups groups;
    for (size_t r : rows) {
        groups.language.emplace_back(corpus::to_string(matrix.languages[r]));
        groups.domain.emplace_back(corpus::to_string(matrix.domains[r]));
        groups.scenario.emplace_back(scenario_name(matrix.scenarios[r]));
    }
    auto report = eval::build_report(gold, pred, scheme, groups,
                                     digest::sha256_file_hex(cfg.model_path),
                                     digest::sha256_file_hex(cfg.input), cfg.seed);

    eval::ReportFormat fmt = cfg.format == "csv"        ? eval::ReportFormat::CSV
                             : cfg.format == "markdown" ? eval::ReportFormat::MARKDOWN
                                                        : eval::ReportFormat::JSON;
    std::string ext = cfg.format == "csv" ? ".csv" : cfg.format == "markdown" ? ".md" : ".json";
    std::string path = out_path(cfg, "report" + ext);
    write_text(path, eval::emit_report(report, fmt));

    RunManifest run("evaluate", cfg.seed);
    run.add_input(cfg.input);
    run.add_input(cfg.model_path);
    run.add_output(path);
    run.set("weighted_f1", report.overall_weighted_f1);
    run.set("split", cfg.split);
    run.write(cfg.output_dir, "evaluate");
    std::cout << "weighted F1 (" << cfg.split << ", " << corpus::to_string(scheme)
              << "): " << report.overall_weighted_f1 << " -> " << path << "\n";
    return 0;
}

int cmd_ood(const PipelineConfig& cfg) {
    auto matrix = features::load_matrix(cfg.input);
    auto scheme = corpus::scheme_from_string(cfg.scheme);
    if (cfg.group_by != "language" && cfg.group_by != "domain")
        throw ValidationError("ood: group-by must be 'language' or 'domain'");

    std::map<std::string, eval::OodGroup> grouped;
    for (size_t i = 0; i < matrix.ids.size(); ++i) {
        std::string key = cfg.group_by == "language"
                              ? corpus::to_string(matrix.languages[i])
                              : corpus::to_string(matrix.domains[i]);
        grouped.try_emplace(key).first->second.key = key;
    }
    auto fill = [&](const std::string& split, auto member_x, auto member_y) {
        corpus::Split want = corpus::split_from_string(split);
        for (size_t i = 0; i < matrix.ids.size(); ++i) {
            if (matrix.splits[i] != want) continue;
            std::string key = cfg.group_by == "language"
                                  ? corpus::to_string(matrix.languages[i])
                                  : corpus::to_string(matrix.domains[i]);
            auto& g = grouped.at(key);
            auto& X = g.*member_x;
            X.conservativeResize(X.rows() + 1, matrix.values.cols());
            X.row(X.rows() - 1) = matrix.values.row(static_cast<Eigen::Index>(i));
            (g.*member_y).push_back(corpus::collapse_label(matrix.labels[i], scheme));
        }
    };
    fill("TRAIN", &eval::OodGroup::train_x, &eval::OodGroup::train_y);
    fill("TEST", &eval::OodGroup::test_x, &eval::OodGroup::test_y);

    std::vector<eval::OodGroup> groups;
    for (auto& [key, g] : grouped) groups.push_back(std::move(g));

    detector::TrainConfig tc = cfg.train;
    tc.label_scheme = scheme;
    auto train_fn = [&](const eval::OodGroup& g, uint64_t seed) {
        detector::TrainConfig group_cfg = tc;
        group_cfg.seed = seed;
        return detector::train(g.train_x, g.train_y, group_cfg, matrix.schema_id);
    };
    auto eval_fn = [&](const detector::DetectorModel& m, const Eigen::MatrixXd& X,
                       const std::vector<int>& y) {
        return eval::weighted_f1(y, m.predict_classes(X), m.num_classes());
    };
    Eigen::MatrixXd f1 = eval::ood_matrix(groups, train_fn, eval_fn, cfg.seed);

    json doc;
    doc["group_by"] = cfg.group_by;
    doc["scheme"] = cfg.scheme;
    json keys = json::array();
    for (const auto& g : groups) keys.push_back(g.key);
    doc["groups"] = keys;
    json rows = json::array();
    for (Eigen::Index i = 0; i < f1.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < f1.cols(); ++j) row.push_back(f1(i, j));
        rows.push_back(row);
    }
    doc["weighted_f1"] = rows;
    std::string path = out_path(cfg, "ood.json");
    write_text(path, doc.dump(2) + "\n");

    RunManifest run("ood", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(path);
    run.set("group_by", cfg.group_by);
    run.write(cfg.output_dir, "ood");
    std::cout << "OOD matrix over " << groups.size() << " groups -> " << path << "\n";
    return 0;
}

int cmd_stress(const PipelineConfig& cfg) {
    auto samples = corpus::load_jsonl(cfg.input);
    auto model = detector::load_model(cfg.model_path);
    auto scheme = model.config.label_scheme;

    std::vector<eval::StressSample> stress;
    for (const auto& s : samples) {
        if (cfg.split != "ALL" && s.split != corpus::split_from_string(cfg.split)) continue;
        stress.push_back({s.code, corpus::collapse_label(s.label, scheme)});
    }
    if (stress.empty()) throw ValidationError("stress: no samples in requested split");

    // Language is needed to re-featurize truncated code; carry it alongside.
    std::vector<corpus::Language> langs;
    for (const auto& s : samples) {
        if (cfg.split != "ALL" && s.split != corpus::split_from_string(cfg.split)) continue;
        langs.push_back(s.language);
    }
    size_t cursor = 0;
    const auto& registry = features::FeatureRegistry::builtin();
    auto featurize_fn = [&](const std::string& code) {
        analysis::ReferenceGrammar grammar;
        corpus::Language lang = langs[cursor % langs.size()];
        corpus::CodeSample tmp;
        tmp.id = "stress";
        tmp.code = code.empty() ? "\n" : code;
        tmp.language = lang;
        auto ast = analysis::parse_summary(tmp.code, lang, grammar,
                                           analysis::ParseMode::Lenient);
        auto lm = analysis::line_metrics(tmp.code);
        cursor++;
        if (!ast.parse_ok) return Eigen::VectorXd(Eigen::VectorXd::Zero(registry.size()));
        return features::featurize(tmp, ast, lm, registry).values;
    };
    auto predict_fn = [&](const Eigen::VectorXd& fv) {
        return model.predict_class(fv.transpose());
    };
    auto results = eval::truncation_stress(predict_fn, featurize_fn, stress,
                                           cfg.stress_lengths, model.num_classes());

    json doc;
    doc["scheme"] = corpus::to_string(scheme);
    json rows = json::array();
    for (const auto& [len, f1] : results)
        rows.push_back({{"tokens", len}, {"weighted_f1", f1}});
    doc["truncation"] = rows;
    std::string path = out_path(cfg, "stress.json");
    write_text(path, doc.dump(2) + "\n");

    RunManifest run("stress", cfg.seed);
    run.add_input(cfg.input);
    run.add_input(cfg.model_path);
    run.add_output(path);
    run.write(cfg.output_dir, "stress");
    std::cout << "truncation stress over " << results.size() << " lengths -> " << path << "\n";
    return 0;
}

int cmd_adversarial_eval(const PipelineConfig& cfg) {
    auto matrix = features::load_matrix(cfg.input);
    auto model = detector::load_model(cfg.model_path);
    if (model.config.label_scheme != corpus::LabelScheme::TWO)
        throw ValidationError("adversarial-eval: model must use the TWO scheme");
    auto rows = rows_for_split(matrix, cfg.split);
    if (rows.empty()) throw ValidationError("adversarial-eval: no rows in requested split");
    Eigen::MatrixXd X = take_rows(matrix.values, rows);
    std::vector<corpus::ProvenanceLabel> labels;
    for (size_t r : rows) labels.push_back(matrix.labels[r]);
    auto predict_fn = [&](const Eigen::VectorXd& fv) {
        return model.predict_class(fv.transpose());
    };
    auto recall = eval::adversarial_recall_table(predict_fn, X, labels);

    json doc;
    doc["human_recall"] = recall.human_recall;
    doc["adversarial_recall"] = recall.adversarial_recall;
    std::string path = out_path(cfg, "adversarial.json");
    write_text(path, doc.dump(2) + "\n");

    RunManifest run("adversarial-eval", cfg.seed);
    run.add_input(cfg.input);
    run.add_input(cfg.model_path);
    run.add_output(path);
    run.write(cfg.output_dir, "adversarial-eval");
    std::cout << "recall human=" << recall.human_recall
              << " adversarial=" << recall.adversarial_recall << " -> " << path << "\n";
    return 0;
}

int cmd_resample(const PipelineConfig& cfg) {
    auto matrix = features::load_matrix(cfg.input);
    auto scheme = corpus::scheme_from_string(cfg.scheme);
    auto rows = rows_for_split(matrix, "TRAIN");
    if (rows.empty()) throw ValidationError("resample: no TRAIN rows");

    Eigen::MatrixXd X = take_rows(matrix.values, rows);
    std::vector<int> y = collapsed_labels(matrix, rows, scheme);
    std::vector<std::string> ids;
    std::vector<corpus::ProvenanceLabel> provenance;
    for (size_t r : rows) {
        ids.push_back(matrix.ids[r]);
        provenance.push_back(matrix.labels[r]);
    }
    detector::TrainConfig tc = cfg.train;
    tc.label_scheme = scheme;
    auto scores = detector::ensemble_uncertainty(X, y, ids, tc, cfg.members, cfg.seed);
    auto result = detector::resample_uncertain(ids, provenance, scores, cfg.resample_fraction);

    std::set<std::string> removed(result.removed_ids.begin(), result.removed_ids.end());
    features::FeatureMatrix reduced;
    reduced.schema_id = matrix.schema_id;
    std::vector<size_t> keep_rows;
    for (size_t i = 0; i < matrix.ids.size(); ++i)
        if (!removed.count(matrix.ids[i])) keep_rows.push_back(i);
    reduced.values = take_rows(matrix.values, keep_rows);
    for (size_t i : keep_rows) {
        reduced.ids.push_back(matrix.ids[i]);
        reduced.labels.push_back(matrix.labels[i]);
        reduced.languages.push_back(matrix.languages[i]);
        reduced.domains.push_back(matrix.domains[i]);
        reduced.splits.push_back(matrix.splits[i]);
        reduced.scenarios.push_back(matrix.scenarios[i]);
    }
    std::string matrix_path = out_path(cfg, "features_resampled.ddfm");
    features::save_matrix(reduced, matrix_path);

    std::string removed_csv = "removed_id,score\r\n";
    std::map<std::string, double> score_of;
    for (const auto& s : scores) score_of[s.sample_id] = s.score;
    char buf[64];
    for (const auto& id : result.removed_ids) {
        std::snprintf(buf, sizeof(buf), "%.9g", score_of[id]);
        removed_csv += csv_escape(id) + "," + buf + "\r\n";
    }
    std::string removed_path = out_path(cfg, "removed_ids.csv");
    write_text(removed_path, removed_csv);

    RunManifest run("resample", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(matrix_path);
    run.add_output(removed_path);
    run.set("removed", result.removed_ids.size());
    run.set("fraction", cfg.resample_fraction);
    run.set("members", cfg.members);

    if (!cfg.corpus_path.empty()) {
        auto samples = corpus::load_jsonl(cfg.corpus_path);
        std::vector<corpus::CodeSample> kept;
        for (auto& s : samples)
            if (!removed.count(s.id)) kept.push_back(std::move(s));
        std::string corpus_out = out_path(cfg, "corpus_resampled.jsonl");
        corpus::save_jsonl(kept, corpus_out);
        run.add_input(cfg.corpus_path);
        run.add_output(corpus_out);
    }
    run.write(cfg.output_dir, "resample");
    std::cout << "removed " << result.removed_ids.size() << " uncertain human samples -> "
              << matrix_path << "\n";
    return 0;
}

int cmd_report(const PipelineConfig& cfg) {
    auto report = eval::report_from_json(read_text(cfg.input));
    eval::ReportFormat fmt = cfg.format == "csv"        ? eval::ReportFormat::CSV
                             : cfg.format == "markdown" ? eval::ReportFormat::MARKDOWN
                                                        : eval::ReportFormat::JSON;
    std::string ext = cfg.format == "csv" ? ".csv" : cfg.format == "markdown" ? ".md" : ".json";
    std::string path = out_path(cfg, "report" + ext);
    write_text(path, eval::emit_report(report, fmt));

    RunManifest run("report", cfg.seed);
    run.add_input(cfg.input);
    run.add_output(path);
    run.write(cfg.output_dir, "report");
    std::cout << "converted report -> " << path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Option wiring
// ---------------------------------------------------------------------------

void add_common(CLI::App* cmd, PipelineConfig& cfg, bool needs_input = true) {
    cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    auto* in = cmd->add_option("--input,-i,--io.input", cfg.input, "input file");
    if (needs_input) in->required();
    cmd->add_option("--output-dir,-o,--io.output_dir", cfg.output_dir, "output directory");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("--parallelism", cfg.parallelism,
                    "worker count (0: DROID_PARALLELISM env, then hardware)");
    cmd->add_option("--config", cfg.config_file,
                    "config file: one dotted key = value per line, flags override");
}

// Reads a dotted key = value config file and injects the matching options
// ahead of the user's flags, so explicit flags always win.
std::vector<std::string> inject_config(const std::vector<std::string>& argv, CLI::App& app) {
    std::string config_path;
    for (size_t i = 0; i < argv.size(); ++i) {
        if (argv[i] == "--config" && i + 1 < argv.size()) config_path = argv[i + 1];
        else if (argv[i].rfind("--config=", 0) == 0) config_path = argv[i].substr(9);
    }
    if (config_path.empty() || argv.empty()) return argv;

    CLI::App* sub = app.get_subcommand_no_throw(argv[0]);
    if (!sub) return argv;

    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config file: " + config_path);
    std::vector<std::string> injected;
    injected.push_back(argv[0]);
    std::string line;
    auto trim = [](std::string s) {
        size_t b = s.find_first_not_of(" \t\r");
        size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: expected 'key = value', got: " + t);
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (sub->get_option_no_throw("--" + key))
            injected.push_back("--" + key + "=" + value);
        // keys for other subcommands are fine in a shared config file
    }
    injected.insert(injected.end(), argv.begin() + 1, argv.end());
    return injected;
}

void add_filter_opts(CLI::App* cmd, PipelineConfig& cfg) {
    cmd->add_option("--filter.ast_depth_min", cfg.rules.ast_depth_min, "");
    cmd->add_option("--filter.ast_depth_max", cfg.rules.ast_depth_max, "");
    cmd->add_option("--filter.max_line_len_min", cfg.rules.max_line_len_min, "");
    cmd->add_option("--filter.max_line_len_max", cfg.rules.max_line_len_max, "");
    cmd->add_option("--filter.avg_line_len_min", cfg.rules.avg_line_len_min, "");
    cmd->add_option("--filter.avg_line_len_max", cfg.rules.avg_line_len_max, "");
    cmd->add_option("--filter.line_count_min", cfg.rules.line_count_min, "");
    cmd->add_option("--filter.line_count_max", cfg.rules.line_count_max, "");
    cmd->add_option("--filter.alnum_fraction_min", cfg.rules.alnum_fraction_min, "");
    cmd->add_option("--filter.alnum_fraction_max", cfg.rules.alnum_fraction_max, "");
    cmd->add_option("--filter.english_threshold", cfg.rules.english_threshold, "");
}

void add_dedup_opts(CLI::App* cmd, PipelineConfig& cfg) {
    cmd->add_option("--dedup.shingle_size", cfg.dedup.shingle_size, "");
    cmd->add_option("--dedup.similarity_threshold", cfg.dedup.similarity_threshold, "");
    cmd->add_option("--dedup.num_hashes", cfg.dedup.num_hashes, "");
    cmd->add_option("--dedup.lsh_bands", cfg.dedup.lsh_bands, "");
    cmd->add_option("--dedup.rows_per_band", cfg.dedup.rows_per_band, "");
}

void add_train_opts(CLI::App* cmd, PipelineConfig& cfg) {
    cmd->add_option("--train.num_trees", cfg.train.num_trees, "boosting rounds");
    cmd->add_option("--train.max_depth", cfg.train.max_depth, "");
    cmd->add_option("--train.learning_rate", cfg.train.learning_rate, "");
    cmd->add_option("--train.min_samples_leaf", cfg.train.min_samples_leaf, "");
    cmd->add_option("--train.subsample", cfg.train.subsample, "");
    cmd->add_option("--scheme", cfg.scheme, "label scheme: TWO/THREE/FOUR");
}

void add_embedder_opts(CLI::App* cmd, PipelineConfig& cfg) {
    cmd->add_option("--embedder.margin", cfg.triplet.margin, "");
    cmd->add_option("--embedder.batch_size", cfg.triplet.batch_size, "");
    cmd->add_option("--embedder.epochs", cfg.triplet.epochs, "");
    cmd->add_option("--embedder.learning_rate", cfg.triplet.learning_rate, "");
    cmd->add_option("--embedder.hidden_dim", cfg.triplet.hidden_dim, "");
    cmd->add_option("--embedder.embedding_dim", cfg.triplet.embedding_dim, "");
    cmd->add_option_function<std::string>(
        "--embedder.mining",
        [&cfg](const std::string& v) {
            if (v == "BATCH_HARD") cfg.triplet.mining = embedder::Mining::BATCH_HARD;
            else if (v == "RANDOM") cfg.triplet.mining = embedder::Mining::RANDOM;
            else throw CLI::ValidationError("--embedder.mining", "must be BATCH_HARD or RANDOM");
        },
        "BATCH_HARD or RANDOM");
}

} // namespace

int run_subcommand(const std::vector<std::string>& argv) {
    PipelineConfig cfg;
    CLI::App app{"code provenance forensics toolkit"};
    app.require_subcommand(1);

    auto* ingest = app.add_subcommand("ingest", "validate a corpus and build its manifest");
    add_common(ingest, cfg);
    ingest->add_flag("--assign-splits", cfg.assign_splits, "stratified split assignment");
    ingest->add_option_function<std::string>(
        "--split-ratios",
        [&cfg](const std::string& v) {
            std::array<double, 3> r{};
            if (std::sscanf(v.c_str(), "%lf,%lf,%lf", &r[0], &r[1], &r[2]) != 3)
                throw CLI::ValidationError("--split-ratios", "expected three comma-separated reals");
            cfg.split_ratios = r;
        },
        "train,val,test ratios (default 0.8,0.1,0.1)");
    ingest->add_option("--name", cfg.dataset_name, "dataset name");
    ingest->add_option("--version", cfg.dataset_version, "dataset version");

    auto* stats = app.add_subcommand("stats", "corpus statistics (percentiles, distribution)");
    add_common(stats, cfg);

    auto* slice = app.add_subcommand("slice", "prepare machine-refinement tasks");
    add_common(slice, cfg);
    slice->add_option("--scenario", cfg.scenario, "CONTINUATION/GAP_FILL/REWRITE");
    slice->add_option("--preserve-fraction", cfg.preserve_fraction, "fraction in [0.10, 0.85]");

    auto* filter_cmd = app.add_subcommand("filter", "apply corpus quality rules");
    add_common(filter_cmd, cfg);
    add_filter_opts(filter_cmd, cfg);

    auto* dedup_cmd = app.add_subcommand("dedup", "remove near-duplicates (MinHash + LSH)");
    add_common(dedup_cmd, cfg);
    add_dedup_opts(dedup_cmd, cfg);

    auto* featurize_cmd = app.add_subcommand("featurize", "extract stylometric features");
    add_common(featurize_cmd, cfg);
    featurize_cmd->add_flag("--csv", cfg.write_csv, "also write features.csv");

    auto* train_cmd = app.add_subcommand("train", "train the tree-ensemble detector");
    add_common(train_cmd, cfg);
    add_train_opts(train_cmd, cfg);
    train_cmd->add_option("--model,-m", cfg.model_path, "model output path");
    train_cmd->add_option("--split", cfg.split, "training split (default TRAIN)");

    auto* train_emb = app.add_subcommand("train-embedder", "train the triplet-loss embedder");
    add_common(train_emb, cfg);
    add_embedder_opts(train_emb, cfg);
    train_emb->add_option("--scheme", cfg.scheme, "label scheme: TWO/THREE/FOUR");
    train_emb->add_option("--model,-m", cfg.model_path, "model output path");
    train_emb->add_option("--split", cfg.split, "training split (default TRAIN)");

    auto* predict = app.add_subcommand("predict", "per-sample class probabilities");
    add_common(predict, cfg);
    predict->add_option("--model,-m", cfg.model_path, "detector model")->required();

    auto* evaluate = app.add_subcommand("evaluate", "weighted F1 report with breakdowns");
    add_common(evaluate, cfg);
    evaluate->add_option("--model,-m", cfg.model_path, "detector model")->required();
    evaluate->add_option("--scheme", cfg.scheme, "label scheme (must match the model)");
    evaluate->add_option("--split", cfg.split, "TRAIN/VAL/TEST/ALL");
    evaluate->add_option("--format", cfg.format, "json/csv/markdown");

    auto* ood = app.add_subcommand("ood", "out-of-distribution F1 matrix");
    add_common(ood, cfg);
    add_train_opts(ood, cfg);
    ood->add_option("--group-by", cfg.group_by, "language or domain");

    auto* stress = app.add_subcommand("stress", "input-length truncation stress");
    add_common(stress, cfg);
    stress->add_option("--model,-m", cfg.model_path, "detector model")->required();
    stress->add_option("--lengths", cfg.stress_lengths, "token budgets (ascending)");
    stress->add_option("--split", cfg.split, "TRAIN/VAL/TEST/ALL");

    auto* adv = app.add_subcommand("adversarial-eval", "human vs adversarial recall");
    add_common(adv, cfg);
    adv->add_option("--model,-m", cfg.model_path, "TWO-scheme detector model")->required();
    adv->add_option("--split", cfg.split, "TRAIN/VAL/TEST/ALL");

    auto* resample = app.add_subcommand("resample",
                                        "drop the most uncertain human-labelled samples");
    add_common(resample, cfg);
    add_train_opts(resample, cfg);
    resample->add_option("--members", cfg.members, "ensemble size (>= 2)");
    resample->add_option("--fraction", cfg.resample_fraction, "removal fraction (default 0.07)");
    resample->add_option("--corpus", cfg.corpus_path, "also emit a reduced corpus JSONL");

    auto* report = app.add_subcommand("report", "convert a JSON report to CSV or Markdown");
    add_common(report, cfg);
    report->add_option("--format", cfg.format, "json/csv/markdown");

    try {
        std::vector<std::string> args = inject_config(argv, app);
        // CLI11 parses argv back to front.
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (app.got_subcommand(ingest)) return cmd_ingest(cfg);
        if (app.got_subcommand(stats)) return cmd_stats(cfg);
        if (app.got_subcommand(slice)) return cmd_slice(cfg);
        if (app.got_subcommand(filter_cmd)) return cmd_filter(cfg);
        if (app.got_subcommand(dedup_cmd)) return cmd_dedup(cfg);
        if (app.got_subcommand(featurize_cmd)) return cmd_featurize(cfg);
        if (app.got_subcommand(train_cmd)) return cmd_train(cfg);
        if (app.got_subcommand(train_emb)) return cmd_train_embedder(cfg);
        if (app.got_subcommand(predict)) return cmd_predict(cfg);
        if (app.got_subcommand(evaluate)) return cmd_evaluate(cfg);
        if (app.got_subcommand(ood)) return cmd_ood(cfg);
        if (app.got_subcommand(stress)) return cmd_stress(cfg);
        if (app.got_subcommand(adv)) return cmd_adversarial_eval(cfg);
        if (app.got_subcommand(resample)) return cmd_resample(cfg);
        if (app.got_subcommand(report)) return cmd_report(cfg);
        std::cerr << app.help();
        return 1;
    } catch (const IoError& e) {
        log_event("error", {{"kind", "io"}, {"detail", e.what()}});
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        log_event("error", {{"kind", "validation"}, {"detail", e.what()}});
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        log_event("error", {{"kind", "internal"}, {"detail", e.what()}});
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace droid::cli
