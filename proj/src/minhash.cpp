#include "droid/minhash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "droid/errors.hpp"
#include "droid/util.hpp"

namespace droid::dedup {

void DedupConfig::validate() const {
    if (shingle_size == 0) throw ValidationError("dedup: shingle_size must be positive");
    if (similarity_threshold <= 0.0 || similarity_threshold > 1.0)
        throw ValidationError("dedup: similarity_threshold must lie in (0,1]");
    if (num_hashes == 0) throw ValidationError("dedup: num_hashes must be positive");
    if (lsh_bands * rows_per_band != num_hashes)
        throw ValidationError("dedup: lsh_bands * rows_per_band must equal num_hashes");
}

std::string normalize_whitespace(std::string_view code) {
    std::string out;
    out.reserve(code.size());
    bool in_ws = false;
    for (char c : code) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (ws) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out.push_back(' ');
            out.push_back(c);
            in_ws = false;
        }
    }
    return out;
}

namespace {

// Base hashes of all shingles; per-permutation values derive from these.
std::vector<uint64_t> shingle_hashes(std::string_view normalized, size_t k) {
    std::unordered_set<uint64_t> seen;
    seen.reserve(normalized.size());
    for (size_t i = 0; i + k <= normalized.size(); ++i)
        seen.insert(util::fnv1a(normalized.substr(i, k)));
    return {seen.begin(), seen.end()};
}

std::vector<uint64_t> permutation_salts(size_t num_hashes, uint64_t seed) {
    std::mt19937_64 rng(util::mix64(seed ^ 0x6d696e68617368ULL));
    std::vector<uint64_t> salts(num_hashes);
    for (auto& s : salts) s = rng();
    return salts;
}

} // namespace

Signature minhash_signature(std::string_view code, const DedupConfig& cfg, uint64_t seed) {
    cfg.validate();
    std::string normalized = normalize_whitespace(code);
    if (normalized.size() < cfg.shingle_size)
        throw ValidationError("minhash: text shorter than shingle size after normalization");

    auto base = shingle_hashes(normalized, cfg.shingle_size);
    auto salts = permutation_salts(cfg.num_hashes, seed);

    Signature sig(cfg.num_hashes, std::numeric_limits<uint64_t>::max());
    for (uint64_t h : base)
        for (size_t i = 0; i < cfg.num_hashes; ++i)
            sig[i] = std::min(sig[i], util::mix64(h ^ salts[i]));
    return sig;
}

double estimate_jaccard(const Signature& a, const Signature& b) {
    if (a.size() != b.size() || a.empty())
        throw ValidationError("estimate_jaccard: signature length mismatch");
    size_t equal = 0;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] == b[i]) equal++;
    return static_cast<double>(equal) / static_cast<double>(a.size());
}

double exact_jaccard(std::string_view a, std::string_view b, size_t shingle_size) {
    std::string na = normalize_whitespace(a);
    std::string nb = normalize_whitespace(b);
    std::unordered_set<std::string_view> sa, sb;
    for (size_t i = 0; i + shingle_size <= na.size(); ++i)
        sa.insert(std::string_view(na).substr(i, shingle_size));
    for (size_t i = 0; i + shingle_size <= nb.size(); ++i)
        sb.insert(std::string_view(nb).substr(i, shingle_size));
    if (sa.empty() && sb.empty()) return 1.0;
    size_t inter = 0;
    for (auto s : sa)
        if (sb.count(s)) inter++;
    size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct UnionFind {
    std::vector<size_t> parent;
    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    size_t find(size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(size_t a, size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a > b) std::swap(a, b);  // keep the smaller input index as root
        parent[b] = a;
    }
};

uint64_t band_key(const Signature& sig, size_t band, size_t rows) {
    uint64_t h = 0xcbf29ce484222325ULL ^ (band * 0x9e3779b97f4a7c15ULL);
    for (size_t r = 0; r < rows; ++r) {
        h ^= sig[band * rows + r];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

DedupResult dedup(const std::vector<corpus::CodeSample>& samples, const DedupConfig& cfg,
                  uint64_t seed, unsigned parallelism) {
    cfg.validate();
    DedupResult result;
    const size_t n = samples.size();
    if (n == 0) return result;

    std::vector<Signature> sigs(n);
    std::vector<std::exception_ptr> sig_errors(n);
    util::parallel_for(n, util::resolve_parallelism(parallelism), [&](size_t i) {
        try {
            sigs[i] = minhash_signature(samples[i].code, cfg, seed);
        } catch (...) {
            sig_errors[i] = std::current_exception();
        }
    });
    for (size_t i = 0; i < n; ++i) {
        if (sig_errors[i]) {
            try {
                std::rethrow_exception(sig_errors[i]);
            } catch (const ValidationError& e) {
                throw ValidationError("dedup: sample '" + samples[i].id + "': " + e.what());
            }
        }
    }

    // Band buckets -> candidate pairs -> verified clusters.
    UnionFind uf(n);
    for (size_t band = 0; band < cfg.lsh_bands; ++band) {
        std::unordered_map<uint64_t, std::vector<size_t>> buckets;
        for (size_t i = 0; i < n; ++i)
            buckets[band_key(sigs[i], band, cfg.rows_per_band)].push_back(i);
        for (const auto& [key, members] : buckets) {
            if (members.size() < 2) continue;
            for (size_t a = 0; a < members.size(); ++a) {
                for (size_t b = a + 1; b < members.size(); ++b) {
                    size_t i = members[a], j = members[b];
                    if (uf.find(i) == uf.find(j)) continue;
                    if (estimate_jaccard(sigs[i], sigs[j]) >= cfg.similarity_threshold)
                        uf.unite(i, j);
                }
            }
        }
    }

    // The union-find root is always the smallest input index in the cluster,
    // so keep-first falls out directly.
    for (size_t i = 0; i < n; ++i) {
        size_t root = uf.find(i);
        if (root == i) {
            result.kept.push_back(samples[i]);
        } else {
            Removal r;
            r.removed_id = samples[i].id;
            r.kept_id = samples[root].id;
            r.estimated_similarity = estimate_jaccard(sigs[i], sigs[root]);
            result.removed.push_back(std::move(r));
        }
    }
    return result;
}

std::string removal_log_csv(const std::vector<Removal>& removals) {
    std::string out = "removed_id,kept_id,estimated_similarity\r\n";
    char buf[64];
    for (const auto& r : removals) {
        std::snprintf(buf, sizeof(buf), "%.6f", r.estimated_similarity);
        out += r.removed_id + "," + r.kept_id + "," + buf + "\r\n";
    }
    return out;
}

} // namespace droid::dedup
