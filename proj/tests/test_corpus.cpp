#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include "droid/corpus.hpp"
#include "droid/errors.hpp"
#include "droid/jsonl.hpp"

using namespace droid;
using namespace droid::corpus;

namespace {

CodeSample sample(const std::string& id, const std::string& code,
                  ProvenanceLabel label = ProvenanceLabel::HUMAN,
                  Language lang = Language::PYTHON, Domain domain = Domain::GENERAL) {
    CodeSample s;
    s.id = id;
    s.code = code;
    s.language = lang;
    s.label = label;
    s.domain = domain;
    if (label != ProvenanceLabel::HUMAN) s.generator = "lm";
    return s;
}

std::string lines(int n) {
    std::string out;
    for (int i = 0; i < n; ++i) out += "line_" + std::to_string(i) + "\n";
    return out;
}

} // namespace

TEST_CASE("jsonl round-trip preserves order and content") {
    std::vector<CodeSample> in = {sample("a", "x = 1\n"), sample("b", "y = 2\n")};
    auto out = parse_jsonl(to_jsonl(in));
    REQUIRE(out.size() == 2);
    CHECK(out[0] == in[0]);
    CHECK(out[1] == in[1]);
}

TEST_CASE("jsonl missing field errors name the line") {
    std::string text = R"({"id":"a","language":"PYTHON","label":"HUMAN","domain":"GENERAL","split":"TRAIN"})";
    CHECK_THROWS_WITH_AS(parse_jsonl(text), doctest::Contains("line 1: missing field code"),
                         ValidationError);
}

TEST_CASE("jsonl duplicate ids name both occurrences") {
    std::vector<CodeSample> in = {sample("dup", "x\n"), sample("dup", "y\n")};
    CHECK_THROWS_WITH_AS(parse_jsonl(to_jsonl(in)),
                         doctest::Contains("duplicate id 'dup' at lines 1 and 2"),
                         ValidationError);
}

TEST_CASE("jsonl unknown enum value names the field") {
    std::string text =
        R"({"id":"a","code":"x","language":"COBOL","label":"HUMAN","domain":"GENERAL","split":"TRAIN"})";
    CHECK_THROWS_WITH_AS(parse_jsonl(text), doctest::Contains("language"), ValidationError);
}

TEST_CASE("jsonl malformed line is rejected with its number") {
    CHECK_THROWS_WITH_AS(parse_jsonl("{not json}\n"), doctest::Contains("line 1"),
                         ValidationError);
}

TEST_CASE("human samples reject generator and decoding") {
    CodeSample s = sample("a", "x\n");
    s.generator = "lm";
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.generator.reset();
    DecodingConfig d;
    d.strategy = DecodingStrategy::BEAM;
    d.beam_width = 4;
    s.decoding = d;
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("decoding grids are enforced") {
    DecodingConfig d;
    d.strategy = DecodingStrategy::BEAM;
    d.beam_width = 4;
    CHECK_NOTHROW(d.validate());
    d.beam_width = 5;
    CHECK_THROWS_AS(d.validate(), ValidationError);
    d = DecodingConfig{};
    d.strategy = DecodingStrategy::SAMPLING;
    d.temperature = 0.7;
    d.top_k = 50;
    d.top_p = 0.95;
    CHECK_NOTHROW(d.validate());
    d.temperature = 0.65;
    CHECK_THROWS_AS(d.validate(), ValidationError);
    d = DecodingConfig{};
    d.strategy = DecodingStrategy::GREEDY;
    CHECK_NOTHROW(d.validate());
    d.top_k = 10;
    CHECK_THROWS_AS(d.validate(), ValidationError);
}

TEST_CASE("round-trip property over random valid samples") {
    std::mt19937_64 rng(7);
    std::vector<CodeSample> in;
    const Language langs[] = {Language::C_CPP, Language::CSHARP, Language::GO,
                              Language::JAVA,  Language::JAVASCRIPT, Language::PYTHON};
    const ProvenanceLabel labels[] = {ProvenanceLabel::HUMAN, ProvenanceLabel::AI_GENERATED,
                                      ProvenanceLabel::AI_REFINED,
                                      ProvenanceLabel::AI_ADVERSARIAL};
    for (int i = 0; i < 100; ++i) {
        std::string code;
        int len = 1 + static_cast<int>(rng() % 200);
        for (int j = 0; j < len; ++j) {
            char c = static_cast<char>(32 + rng() % 95);
            code.push_back(c);
            if (rng() % 17 == 0) code.push_back('\n');
        }
        CodeSample s = sample("id-" + std::to_string(i), code, labels[rng() % 4],
                              langs[rng() % 6], static_cast<Domain>(rng() % 3));
        s.suspicious = rng() % 2 == 0;
        s.split = static_cast<Split>(rng() % 3);
        if (s.label != ProvenanceLabel::HUMAN && rng() % 2 == 0) {
            DecodingConfig d;
            d.strategy = DecodingStrategy::SAMPLING;
            d.temperature = 1.5;
            d.top_k = 100;
            d.top_p = 0.8;
            s.decoding = d;
        }
        in.push_back(std::move(s));
    }
    auto out = parse_jsonl(to_jsonl(in));
    REQUIRE(out.size() == in.size());
    for (size_t i = 0; i < in.size(); ++i) CHECK(out[i] == in[i]);
}

TEST_CASE("collapse_label tables") {
    CHECK(collapse_label(ProvenanceLabel::AI_REFINED, LabelScheme::TWO) == 1);
    CHECK(collapse_label(ProvenanceLabel::HUMAN, LabelScheme::THREE) == 0);
    CHECK(collapse_label(ProvenanceLabel::AI_ADVERSARIAL, LabelScheme::THREE) == 1);
    CHECK(collapse_label(ProvenanceLabel::AI_GENERATED, LabelScheme::THREE) == 1);
    CHECK(collapse_label(ProvenanceLabel::AI_REFINED, LabelScheme::THREE) == 2);
    for (int i = 0; i < 4; ++i)
        CHECK(collapse_label(static_cast<ProvenanceLabel>(i), LabelScheme::FOUR) == i);
}

TEST_CASE("collapse_label: human is 0 in every scheme, machines never are") {
    for (int i = 0; i < 4; ++i) {
        auto label = static_cast<ProvenanceLabel>(i);
        bool two_zero = collapse_label(label, LabelScheme::TWO) == 0;
        bool three_zero = collapse_label(label, LabelScheme::THREE) == 0;
        CHECK(two_zero == three_zero);
        CHECK(two_zero == (label == ProvenanceLabel::HUMAN));
    }
}

TEST_CASE("split_dataset: exact division on one cell") {
    std::vector<CodeSample> samples;
    for (int i = 0; i < 100; ++i) samples.push_back(sample("s" + std::to_string(i), "x\n"));
    auto a = split_dataset(samples, {0.8, 0.1, 0.1}, 17);
    int train = 0, val = 0, test = 0;
    for (auto s : a.split_of) {
        if (s == Split::TRAIN) train++;
        if (s == Split::VAL) val++;
        if (s == Split::TEST) test++;
    }
    CHECK(train == 80);
    CHECK(val == 10);
    CHECK(test == 10);
    CHECK(a.warnings.empty());
}

TEST_CASE("split_dataset: deterministic given seed") {
    std::vector<CodeSample> samples;
    for (int i = 0; i < 57; ++i)
        samples.push_back(sample("s" + std::to_string(i), "x\n",
                                 static_cast<ProvenanceLabel>(i % 4)));
    auto a = split_dataset(samples, {0.8, 0.1, 0.1}, 99);
    auto b = split_dataset(samples, {0.8, 0.1, 0.1}, 99);
    CHECK(a.split_of == b.split_of);
}

TEST_CASE("split_dataset: ten cells of ten split 8/1/1 each") {
    std::vector<CodeSample> samples;
    const Language langs[] = {Language::C_CPP, Language::CSHARP, Language::GO,
                              Language::JAVA, Language::JAVASCRIPT};
    int id = 0;
    for (int cell = 0; cell < 10; ++cell)
        for (int i = 0; i < 10; ++i)
            samples.push_back(sample("s" + std::to_string(id++), "x\n",
                                     cell < 5 ? ProvenanceLabel::HUMAN
                                              : ProvenanceLabel::AI_GENERATED,
                                     langs[cell % 5]));
    auto a = split_dataset(samples, {0.8, 0.1, 0.1}, 3);
    // enumerate cells and verify each is 8/1/1
    for (int cell = 0; cell < 10; ++cell) {
        int train = 0, val = 0, test = 0;
        for (int i = 0; i < 10; ++i) {
            Split s = a.split_of[static_cast<size_t>(cell * 10 + i)];
            if (s == Split::TRAIN) train++;
            if (s == Split::VAL) val++;
            if (s == Split::TEST) test++;
        }
        CHECK(train == 8);
        CHECK(val == 1);
        CHECK(test == 1);
    }
}

TEST_CASE("split_dataset: undersized cell goes to TRAIN with a warning") {
    std::vector<CodeSample> samples = {sample("a", "x\n"), sample("b", "x\n")};
    auto a = split_dataset(samples, {0.8, 0.1, 0.1}, 5);
    CHECK(a.split_of[0] == Split::TRAIN);
    CHECK(a.split_of[1] == Split::TRAIN);
    REQUIRE(a.warnings.size() == 1);
    CHECK(a.warnings[0].find("HUMAN|PYTHON|GENERAL") != std::string::npos);
}

TEST_CASE("split_dataset is a partition") {
    std::vector<CodeSample> samples;
    for (int i = 0; i < 83; ++i)
        samples.push_back(sample("s" + std::to_string(i), "x\n",
                                 static_cast<ProvenanceLabel>(i % 3)));
    auto a = split_dataset(samples, {0.6, 0.2, 0.2}, 11);
    CHECK(a.split_of.size() == samples.size());  // exactly one split per sample
}

TEST_CASE("split_dataset rejects bad ratios") {
    std::vector<CodeSample> samples = {sample("a", "x\n")};
    CHECK_THROWS_AS(split_dataset(samples, {0.8, 0.1, 0.2}, 1), ValidationError);
    CHECK_THROWS_AS(split_dataset(samples, {1.0, 0.0, 0.0}, 1), ValidationError);
}

TEST_CASE("nearest-rank percentiles") {
    std::vector<double> depths;
    for (int i = 1; i <= 100; ++i) depths.push_back(i);
    CHECK(nearest_rank_percentile(depths, 75) == 75);
    CHECK(nearest_rank_percentile(depths, 90) == 90);
    CHECK(nearest_rank_percentile(depths, 99) == 99);
}

TEST_CASE("percentiles match a sort-based oracle") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        size_t n = 1 + rng() % 2000;
        std::vector<double> values(n);
        for (auto& v : values) v = static_cast<double>(rng() % 10000) / 10.0;
        for (double p : {75.0, 90.0, 99.0}) {
            std::vector<double> sorted = values;
            std::sort(sorted.begin(), sorted.end());
            size_t rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
            double expected = sorted[std::min(n - 1, rank == 0 ? 0 : rank - 1)];
            CHECK(nearest_rank_percentile(values, p) == expected);
        }
    }
}

TEST_CASE("refinement: continuation keeps the first half") {
    auto s = sample("a", lines(20));
    auto t = prepare_refinement_task(s, RefinementScenario::CONTINUATION, 0.50, 1);
    std::string expected_prefix;
    for (int i = 0; i < 10; ++i) expected_prefix += "line_" + std::to_string(i) + "\n";
    CHECK(t.prefix == expected_prefix);
    CHECK(t.suffix.empty());
    CHECK(t.prefix + t.masked_region + t.suffix == s.code);
}

TEST_CASE("refinement: gap fill splits preserved lines evenly") {
    auto s = sample("a", lines(20));
    auto t = prepare_refinement_task(s, RefinementScenario::GAP_FILL, 0.50, 1);
    // preserved = 10 lines: 5 front, 5 back; mask = lines 6..15
    CHECK(t.prefix == lines(5));
    std::string back;
    for (int i = 15; i < 20; ++i) back += "line_" + std::to_string(i) + "\n";
    CHECK(t.suffix == back);
    CHECK(t.prefix + t.masked_region + t.suffix == s.code);
}

TEST_CASE("refinement: rounding on a 7-line sample") {
    auto s = sample("a", lines(7));
    auto t = prepare_refinement_task(s, RefinementScenario::GAP_FILL, 0.30, 1);
    // round(2.1) = 2 preserved lines -> 1 front, 1 back
    CHECK(t.prefix == "line_0\n");
    CHECK(t.suffix == "line_6\n");
    CHECK(t.prefix + t.masked_region + t.suffix == s.code);
}

TEST_CASE("refinement: rewrite keeps whole code as prefix") {
    auto s = sample("a", lines(4));
    auto t = prepare_refinement_task(s, RefinementScenario::REWRITE, 0.5, 1);
    CHECK(t.prefix == s.code);
    CHECK_FALSE(t.preserve_fraction.has_value());
    CHECK(t.prefix + t.masked_region + t.suffix == s.code);
}

TEST_CASE("refinement: reconstruction is byte-exact for odd terminators") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::string code;
        int n = 2 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            code += "w" + std::to_string(rng() % 1000);
            if (rng() % 5 == 0) code += "\r";
            if (i + 1 < n || rng() % 2 == 0) code += "\n";  // maybe no trailing newline
        }
        auto s = sample("a", code);
        for (auto scenario : {RefinementScenario::CONTINUATION, RefinementScenario::GAP_FILL}) {
            double frac = 0.10 + 0.75 * static_cast<double>(rng() % 100) / 100.0;
            auto t = prepare_refinement_task(s, scenario, frac, 1);
            CHECK(t.prefix + t.masked_region + t.suffix == code);
        }
    }
}

TEST_CASE("refinement: errors on range and line count") {
    auto s = sample("a", lines(10));
    CHECK_THROWS_AS(prepare_refinement_task(s, RefinementScenario::CONTINUATION, 0.05, 1),
                    ValidationError);
    CHECK_THROWS_AS(prepare_refinement_task(s, RefinementScenario::GAP_FILL, 0.90, 1),
                    ValidationError);
    auto one = sample("b", "only line\n");
    CHECK_THROWS_AS(prepare_refinement_task(one, RefinementScenario::CONTINUATION, 0.5, 1),
                    ValidationError);
}

TEST_CASE("manifest round-trip and verification") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "droid_manifest_test";
    fs::create_directories(dir);
    std::vector<CodeSample> samples = {sample("a", "x = 1\n"),
                                       sample("b", "y = 2\n", ProvenanceLabel::AI_GENERATED)};
    std::string dataset = (dir / "data.jsonl").string();
    save_jsonl(samples, dataset);
    auto manifest = build_manifest("demo", "1", samples, dataset, 42);
    std::string mpath = (dir / "manifest.json").string();
    save_manifest(manifest, mpath);
    CHECK_NOTHROW(verify_manifest(mpath));
    auto loaded = load_manifest(mpath);
    CHECK(loaded.name == "demo");
    CHECK(loaded.counts.at("HUMAN|PYTHON|GENERAL") == 1);

    // tampering breaks verification
    save_jsonl({sample("a", "x = 1\n")}, dataset);
    CHECK_THROWS_AS(verify_manifest(mpath), ValidationError);
    fs::remove_all(dir);
}
