#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "droid/detector.hpp"
#include "droid/errors.hpp"
#include "droid/eval.hpp"

#include "helpers.hpp"

using namespace droid;
using namespace droid::eval;
using testutil::make_blobs;

namespace {

// Independent oracle: builds the confusion matrix naively and averages
// per-class F1 by gold support.
double oracle_weighted_f1(const std::vector<int>& gold, const std::vector<int>& pred, int k) {
    std::vector<std::vector<uint64_t>> cm(static_cast<size_t>(k),
                                          std::vector<uint64_t>(static_cast<size_t>(k), 0));
    for (size_t i = 0; i < gold.size(); ++i)
        cm[static_cast<size_t>(gold[i])][static_cast<size_t>(pred[i])]++;
    double total = static_cast<double>(gold.size());
    double result = 0.0;
    for (int c = 0; c < k; ++c) {
        uint64_t tp = cm[static_cast<size_t>(c)][static_cast<size_t>(c)];
        uint64_t support = 0, predicted = 0;
        for (int j = 0; j < k; ++j) {
            support += cm[static_cast<size_t>(c)][static_cast<size_t>(j)];
            predicted += cm[static_cast<size_t>(j)][static_cast<size_t>(c)];
        }
        if (support == 0) continue;
        double precision = predicted == 0 ? 0.0 : double(tp) / double(predicted);
        double recall = double(tp) / double(support);
        double f1 = precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
        result += double(support) / total * f1;
    }
    return result;
}

EvalReport fixed_report() {
    std::vector<int> gold = {0, 0, 0, 1, 1, 0, 1, 0};
    std::vector<int> pred = {0, 0, 1, 1, 1, 0, 0, 0};
    SampleGroups groups;
    groups.language = {"PYTHON", "PYTHON", "GO", "GO", "PYTHON", "GO", "PYTHON", "GO"};
    groups.domain = {"GENERAL", "GENERAL", "GENERAL", "ALGORITHMIC",
                     "ALGORITHMIC", "GENERAL", "GENERAL", "ALGORITHMIC"};
    groups.scenario = {"NONE", "NONE", "GREEDY", "BEAM", "BEAM", "NONE", "GREEDY", "NONE"};
    return build_report(gold, pred, corpus::LabelScheme::TWO, groups, "modeldigest",
                        "datadigest", 7);
}

} // namespace

TEST_CASE("weighted F1 hand cases") {
    std::vector<int> gold = {0, 0, 0, 1};
    std::vector<int> pred = {0, 0, 1, 1};
    CHECK(weighted_f1(gold, pred, 2) == doctest::Approx(0.766667).epsilon(1e-6));
    CHECK(weighted_f1(gold, gold, 2) == 1.0);
    std::vector<int> off = {2, 2, 2, 2};
    CHECK(weighted_f1(gold, off, 3) == 0.0);  // predicted class absent from gold
}

TEST_CASE("weighted F1 matches the confusion-matrix oracle on random vectors") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        int k = 2 + static_cast<int>(rng() % 4);
        size_t n = 1 + rng() % 200;
        std::vector<int> gold(n), pred(n);
        for (size_t i = 0; i < n; ++i) {
            gold[i] = static_cast<int>(rng() % static_cast<uint64_t>(k));
            pred[i] = static_cast<int>(rng() % static_cast<uint64_t>(k));
        }
        double ours = weighted_f1(gold, pred, k);
        double oracle = oracle_weighted_f1(gold, pred, k);
        CHECK(std::abs(ours - oracle) <= 1e-12);
    }
}

TEST_CASE("weighted F1 is invariant under consistent class relabeling") {
    std::mt19937_64 rng(321);
    for (int trial = 0; trial < 50; ++trial) {
        int k = 4;
        size_t n = 60;
        std::vector<int> gold(n), pred(n);
        for (size_t i = 0; i < n; ++i) {
            gold[i] = static_cast<int>(rng() % 4);
            pred[i] = static_cast<int>(rng() % 4);
        }
        std::vector<int> perm = {0, 1, 2, 3};
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> gold2(n), pred2(n);
        for (size_t i = 0; i < n; ++i) {
            gold2[i] = perm[static_cast<size_t>(gold[i])];
            pred2[i] = perm[static_cast<size_t>(pred[i])];
        }
        CHECK(std::abs(weighted_f1(gold, pred, k) - weighted_f1(gold2, pred2, k)) <= 1e-12);
    }
}

TEST_CASE("metric input validation") {
    std::vector<int> gold = {0, 1};
    std::vector<int> pred = {0};
    CHECK_THROWS_AS(weighted_f1(gold, pred, 2), ValidationError);
    std::vector<int> empty;
    CHECK_THROWS_AS(weighted_f1(empty, empty, 2), ValidationError);
    std::vector<int> bad = {0, 5};
    std::vector<int> ok = {0, 1};
    CHECK_THROWS_AS(weighted_f1(bad, ok, 2), ValidationError);
}

TEST_CASE("per-class recall hand cases") {
    std::vector<int> gold = {0, 0, 1};
    std::vector<int> pred = {0, 1, 1};
    auto r = per_class_recall(gold, pred, 2);
    CHECK(r[0] == doctest::Approx(0.5));
    CHECK(r[1] == doctest::Approx(1.0));

    auto perfect = per_class_recall(gold, gold, 2);
    CHECK(perfect[0] == 1.0);
    CHECK(perfect[1] == 1.0);

    // class 2 absent from gold: flagged undefined, reported 0
    std::vector<bool> flags;
    auto with_missing = per_class_recall(gold, pred, 3, &flags);
    CHECK(with_missing[2] == 0.0);
    CHECK(flags[2]);
    CHECK_FALSE(flags[0]);
}

TEST_CASE("confusion matrix totals") {
    std::vector<int> gold = {0, 1, 1, 2, 2, 2};
    std::vector<int> pred = {0, 1, 0, 2, 2, 1};
    auto cm = confusion_matrix(gold, pred, 3);
    CHECK(cm.total() == 6);
    CHECK(cm.counts(0, 0) == 1);
    CHECK(cm.counts(1, 0) == 1);
    CHECK(cm.counts(2, 1) == 1);
    CHECK(cm.counts(2, 2) == 2);
}

TEST_CASE("report breakdown totals equal the overall total") {
    auto r = fixed_report();
    uint64_t lang_total = 0, domain_total = 0, scenario_total = 0;
    for (const auto& [k, v] : r.language_counts) lang_total += v;
    for (const auto& [k, v] : r.domain_counts) domain_total += v;
    for (const auto& [k, v] : r.scenario_counts) scenario_total += v;
    CHECK(lang_total == r.confusion.total());
    CHECK(domain_total == r.confusion.total());
    CHECK(scenario_total == r.confusion.total());
}

TEST_CASE("JSON report round-trips") {
    auto r = fixed_report();
    auto text = emit_report(r, ReportFormat::JSON);
    auto back = report_from_json(text);
    CHECK(back.scheme == r.scheme);
    CHECK(back.overall_weighted_f1 == doctest::Approx(r.overall_weighted_f1));
    CHECK(back.per_class.size() == r.per_class.size());
    CHECK(back.confusion.counts == r.confusion.counts);
    CHECK(back.by_language == r.by_language);
    CHECK(back.by_domain == r.by_domain);
    CHECK(back.by_scenario == r.by_scenario);
    CHECK(back.model_digest == r.model_digest);
    // deterministic serialization
    CHECK(emit_report(back, ReportFormat::JSON) == text);
}

TEST_CASE("CSV per-class section is header plus one row per class") {
    auto r = fixed_report();
    auto csv = emit_report(r, ReportFormat::CSV);
    size_t rows = 0;
    std::istringstream ss(csv);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) rows++;
    CHECK(rows == r.per_class.size() + 1);
}

TEST_CASE("markdown report matches the golden file") {
    auto r = fixed_report();
    auto md = emit_report(r, ReportFormat::MARKDOWN);
    std::ifstream golden(std::string(DROID_GOLDEN_DIR) + "/report_fixture.md",
                         std::ios::binary);
    REQUIRE(golden.good());
    std::ostringstream expected;
    expected << golden.rdbuf();
    CHECK(md == expected.str());
}

TEST_CASE("truncate_tokens") {
    CHECK(truncate_tokens("a b c d", 2) == "a b");
    CHECK(truncate_tokens("a b c d", 10) == "a b c d");       // byte-identical
    CHECK(truncate_tokens("  a\n b\tc ", 100) == "  a\n b\tc ");
    CHECK(truncate_tokens("alpha\nbeta gamma", 2) == "alpha\nbeta");
    CHECK(truncate_tokens("a b", 0).empty());
}

TEST_CASE("truncation stress: identity at infinite length, ordered output") {
    // label = whether the late tokens say "one" or "zero"
    std::vector<StressSample> samples;
    for (int i = 0; i < 30; ++i) {
        std::string head = "common prefix tokens here";
        std::string tail = i % 2 ? " late marker one" : " late marker zero";
        samples.push_back({head + tail, i % 2});
    }
    auto featurize = [](const std::string& code) {
        Eigen::VectorXd v(1);
        v[0] = code.find("one") != std::string::npos ? 1.0 : 0.0;
        return v;
    };
    auto predict = [](const Eigen::VectorXd& v) { return v[0] > 0.5 ? 1 : 0; };

    auto res = truncation_stress(predict, featurize, samples, {SIZE_MAX, 3, 64}, 2);
    REQUIRE(res.size() == 3);
    CHECK(res[0].first == 3);        // ascending order
    CHECK(res[1].first == 64);
    CHECK(res[2].first == SIZE_MAX);
    CHECK(res[0].second < res[2].second);   // cutting the marker hurts
    CHECK(res[1].second == res[2].second);  // 64 tokens covers everything
    CHECK(res[2].second == 1.0);
}

TEST_CASE("adversarial recall on degenerate predictors") {
    Eigen::MatrixXd x(4, 2);
    x.setZero();
    std::vector<corpus::ProvenanceLabel> labels = {
        corpus::ProvenanceLabel::HUMAN, corpus::ProvenanceLabel::HUMAN,
        corpus::ProvenanceLabel::AI_ADVERSARIAL, corpus::ProvenanceLabel::AI_ADVERSARIAL};

    auto always_machine = [](const Eigen::VectorXd&) { return 1; };
    auto r1 = adversarial_recall_table(always_machine, x, labels);
    CHECK(r1.human_recall == 0.0);
    CHECK(r1.adversarial_recall == 1.0);

    auto always_human = [](const Eigen::VectorXd&) { return 0; };
    auto r2 = adversarial_recall_table(always_human, x, labels);
    CHECK(r2.human_recall == 1.0);
    CHECK(r2.adversarial_recall == 0.0);

    std::vector<corpus::ProvenanceLabel> no_adv = {corpus::ProvenanceLabel::HUMAN,
                                                   corpus::ProvenanceLabel::HUMAN,
                                                   corpus::ProvenanceLabel::AI_GENERATED,
                                                   corpus::ProvenanceLabel::AI_GENERATED};
    CHECK_THROWS_AS(adversarial_recall_table(always_human, x, no_adv), ValidationError);
}

TEST_CASE("ood matrix: matching groups transfer, inverted groups do not") {
    auto make_group = [](const std::string& key, bool inverted, uint64_t seed) {
        auto tr = make_blobs(2, 60, 4, 3.5, 1.0, seed);
        auto te = make_blobs(2, 30, 4, 3.5, 1.0, seed + 1);
        OodGroup g;
        g.key = key;
        g.train_x = tr.x;
        g.train_y = tr.y;
        g.test_x = te.x;
        g.test_y = te.y;
        if (inverted)
            for (auto* ys : {&g.train_y, &g.test_y})
                for (auto& y : *ys) y = 1 - y;
        return g;
    };
    auto train_fn = [](const OodGroup& g, uint64_t seed) {
        detector::TrainConfig cfg;
        cfg.num_trees = 40;
        cfg.seed = seed;
        cfg.label_scheme = corpus::LabelScheme::TWO;
        return detector::train(g.train_x, g.train_y, cfg);
    };
    auto eval_fn = [](const detector::DetectorModel& m, const Eigen::MatrixXd& x,
                      const std::vector<int>& y) {
        return weighted_f1(y, m.predict_classes(x), 2);
    };

    std::vector<OodGroup> same = {make_group("a", false, 10), make_group("b", false, 20)};
    auto f1_same = ood_matrix(same, train_fn, eval_fn, 99);
    CHECK(std::abs(f1_same(0, 1) - f1_same(0, 0)) <= 0.05);
    CHECK(std::abs(f1_same(1, 0) - f1_same(1, 1)) <= 0.05);

    std::vector<OodGroup> inverted = {make_group("a", false, 10), make_group("b", true, 20)};
    auto f1_inv = ood_matrix(inverted, train_fn, eval_fn, 99);
    CHECK(f1_inv(0, 1) <= f1_inv(0, 0) - 0.3);
    CHECK(f1_inv(1, 0) <= f1_inv(1, 1) - 0.3);

    // diagonal equals a direct train/eval run with the same seed
    auto direct = eval_fn(train_fn(same[0], 99), same[0].test_x, same[0].test_y);
    CHECK(f1_same(0, 0) == direct);
}

TEST_CASE("ood matrix input validation") {
    auto train_fn = [](const OodGroup&, uint64_t) { return 0; };
    auto eval_fn = [](int, const Eigen::MatrixXd&, const std::vector<int>&) { return 0.0; };
    std::vector<OodGroup> single(1);
    single[0].key = "only";
    single[0].train_x.resize(1, 1);
    single[0].test_x.resize(1, 1);
    CHECK_THROWS_AS(ood_matrix(single, train_fn, eval_fn, 1), ValidationError);

    std::vector<OodGroup> with_empty(2);
    with_empty[0].key = "ok";
    with_empty[0].train_x.resize(1, 1);
    with_empty[0].test_x.resize(1, 1);
    with_empty[1].key = "empty";
    CHECK_THROWS_WITH_AS(ood_matrix(with_empty, train_fn, eval_fn, 1),
                         doctest::Contains("empty"), ValidationError);
}
