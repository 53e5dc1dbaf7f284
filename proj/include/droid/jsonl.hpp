#pragma once

#include <map>
#include <string>
#include <vector>

#include "droid/corpus.hpp"

namespace droid::corpus {

// Reads a JSONL dataset: one sample object per line, field names and enum
// spellings exactly as in CodeSample. Preserves file order. Errors name the
// offending line ("line 3: missing field code"); duplicate ids name both
// occurrences.
std::vector<CodeSample> load_jsonl(const std::string& path);

// Parses JSONL from a string (same contract; `source` names the input in
// error messages).
std::vector<CodeSample> parse_jsonl(const std::string& text, const std::string& source = "input");

// One sample per line, UTF-8, optional fields omitted when absent.
void save_jsonl(const std::vector<CodeSample>& samples, const std::string& path);
std::string to_jsonl(const std::vector<CodeSample>& samples);

struct ManifestEntry {
    std::string file;    // basename, so manifests are location-independent
    std::string sha256;
    uint64_t records = 0;
};

struct DatasetManifest {
    std::string name;
    std::string version;
    std::map<std::string, uint64_t> counts;  // "LABEL|LANGUAGE|DOMAIN" -> count
    std::vector<ManifestEntry> files;
    uint64_t seed = 0;
};

DatasetManifest build_manifest(const std::string& name, const std::string& version,
                               const std::vector<CodeSample>& samples,
                               const std::string& dataset_path, uint64_t seed);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Re-reads every referenced file (resolved against the manifest's directory)
// and checks digests and record counts. Throws ValidationError on mismatch.
void verify_manifest(const std::string& manifest_path);

} // namespace droid::corpus
