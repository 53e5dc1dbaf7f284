#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "droid/corpus.hpp"

namespace droid::dedup {

struct DedupConfig {
    size_t shingle_size = 8;          // character 8-grams
    double similarity_threshold = 0.8;
    size_t num_hashes = 256;
    size_t lsh_bands = 16;
    size_t rows_per_band = 16;        // bands * rows == num_hashes; (1/b)^(1/r) ~ 0.84

    void validate() const;
};

using Signature = std::vector<uint64_t>;

// Collapses every whitespace run to a single space and trims the ends;
// shingles are drawn from this normalized text.
std::string normalize_whitespace(std::string_view code);

// MinHash signature over the character shingle set of the normalized text.
// Deterministic given (cfg, seed). Throws ValidationError when the
// normalized text is shorter than the shingle size.
Signature minhash_signature(std::string_view code, const DedupConfig& cfg, uint64_t seed);

// Fraction of coordinate-wise equal entries; signatures must share length
// (and, for the estimate to mean anything, seed and config).
double estimate_jaccard(const Signature& a, const Signature& b);

// Exact Jaccard over shingle sets of the normalized texts (reference oracle;
// quadratic in text size, fine at corpus scale).
double exact_jaccard(std::string_view a, std::string_view b, size_t shingle_size);

struct Removal {
    std::string removed_id;
    std::string kept_id;
    double estimated_similarity = 0.0;
};

struct DedupResult {
    std::vector<corpus::CodeSample> kept;   // input order
    std::vector<Removal> removed;           // input order of removed samples
};

// LSH-banded near-duplicate removal: candidate pairs from band collisions,
// verified against the similarity threshold, clustered by union-find. The
// earliest sample in input order survives its cluster.
DedupResult dedup(const std::vector<corpus::CodeSample>& samples, const DedupConfig& cfg,
                  uint64_t seed, unsigned parallelism = 0);

// Removal log as CSV: removed_id,kept_id,estimated_similarity.
std::string removal_log_csv(const std::vector<Removal>& removals);

} // namespace droid::dedup
