#pragma once

#include <array>
#include <string>
#include <vector>

#include "droid/corpus.hpp"
#include "droid/detector.hpp"
#include "droid/embedder.hpp"
#include "droid/filter.hpp"
#include "droid/minhash.hpp"

namespace droid::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Every field except the input path has a default; flags mirror config-file
// keys one to one with dotted names (e.g. train.num_trees).
struct PipelineConfig {
    std::string input;
    std::string output_dir = ".";
    std::string model_path;
    std::string corpus_path;  // optional secondary input (resample)

    filter::FilterRuleSet rules;
    dedup::DedupConfig dedup;
    detector::TrainConfig train;
    embedder::TripletConfig triplet;

    std::string scheme = "TWO";
    std::string split = "TEST";          // evaluation split: TRAIN/VAL/TEST/ALL
    std::string group_by = "language";   // ood partition key
    std::vector<size_t> stress_lengths = {128, 256, 512};
    int members = 5;                     // uncertainty ensemble size
    double resample_fraction = 0.07;
    std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
    bool assign_splits = false;
    std::string scenario = "CONTINUATION";
    double preserve_fraction = 0.5;
    std::string format = "json";         // report format: json/csv/markdown
    bool write_csv = false;              // featurize: also emit CSV
    std::string dataset_name = "dataset";
    std::string dataset_version = "1";

    uint64_t seed = 0;
    unsigned parallelism = 0;  // 0: DROID_PARALLELISM env, then hardware
    std::string config_file;
};

// Entry point behind the `droid` binary: argv without the program name,
// e.g. {"filter", "--input", "corpus.jsonl"}. Returns the process exit
// code: 0 success, 1 validation error, 2 I/O error.
int run_subcommand(const std::vector<std::string>& argv);

} // namespace droid::cli
