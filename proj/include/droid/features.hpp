#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "droid/analysis.hpp"
#include "droid/corpus.hpp"

namespace droid::features {

enum class FeatureFamily { NODE_DENSITY, LINE_SHAPE, IDENTIFIER, COMMENT, COMPLEXITY };

struct FeatureDescriptor {
    std::string name;
    FeatureFamily family;
    std::string description;
    bool is_density = false;  // invariant under proportional input scaling
};

// Ordered, named feature schema. The built-in registry covers the five
// stylometric families over the canonical node-type table; the schema_id
// binds a vector's element order to a registry version.
class FeatureRegistry {
public:
    static const FeatureRegistry& builtin();  // schema "droid.features.v1"

    // A reordered or restricted view of known features under a new schema id.
    static FeatureRegistry custom(std::vector<FeatureDescriptor> descriptors,
                                  std::string schema_id);

    size_t size() const { return descriptors_.size(); }
    const std::vector<FeatureDescriptor>& descriptors() const { return descriptors_; }
    const std::string& schema_id() const { return schema_id_; }
    std::vector<std::string> names() const;

private:
    FeatureRegistry() = default;
    std::vector<FeatureDescriptor> descriptors_;
    std::string schema_id_;
};

struct FeatureVector {
    Eigen::VectorXd values;
    std::string schema_id;
};

// Computes the registry's features for one sample. Requires ast.parse_ok
// (filter first); throws ValidationError otherwise, or when the registry
// names a feature the extractor does not know. Degenerate inputs (no
// identifiers, no comments) produce 0 sentinels, never NaN.
FeatureVector featurize(const corpus::CodeSample& sample, const analysis::AstSummary& ast,
                        const analysis::LineMetrics& lm,
                        const FeatureRegistry& registry = FeatureRegistry::builtin());

// Classic maintainability index, clamped to [0, 100]:
// (171 - 5.2 ln(max(V,1)) - 0.23 G - 16.2 ln(LOC)) * 100 / 171.
// LOC is a count in practice but accepted as a real for algebraic checks.
double maintainability_index(double halstead_volume, int cyclomatic, double loc);

// (comment bytes / total bytes, lines touching a comment span / line count).
std::pair<double, double> comment_density(std::string_view code,
                                          const analysis::AstSummary& ast);

// Feature matrix with per-row join metadata, the unit of exchange between
// the featurize, train and evaluate stages.
struct FeatureMatrix {
    std::string schema_id;
    std::vector<std::string> ids;
    Eigen::MatrixXd values;  // rows = samples, cols = registry size
    std::vector<corpus::ProvenanceLabel> labels;
    std::vector<corpus::Language> languages;
    std::vector<corpus::Domain> domains;
    std::vector<corpus::Split> splits;
    std::vector<int8_t> scenarios;  // decoding strategy ordinal, -1 when absent

    void validate() const;
};

// Binary columnar container (magic "DDFM", little-endian) with the schema_id
// embedded. Refuses future versions and foreign files.
std::string serialize_matrix(const FeatureMatrix& m);
FeatureMatrix deserialize_matrix(std::string_view bytes);
void save_matrix(const FeatureMatrix& m, const std::string& path);
FeatureMatrix load_matrix(const std::string& path);

// RFC-4180 CSV with header sample_id,<feature names...>.
std::string matrix_to_csv(const FeatureMatrix& m, const FeatureRegistry& registry);

} // namespace droid::features
