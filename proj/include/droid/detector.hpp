#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "droid/corpus.hpp"
#include "droid/features.hpp"

namespace droid::detector {

struct TrainConfig {
    int num_trees = 300;  // boosting rounds; each round fits one tree per class
    int max_depth = 6;
    double learning_rate = 0.1;
    int min_samples_leaf = 5;
    double subsample = 0.8;  // row fraction per round, without replacement
    uint64_t seed = 0;
    corpus::LabelScheme label_scheme = corpus::LabelScheme::FOUR;

    void validate() const;
};

struct TreeNode {
    int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int32_t left = -1;
    int32_t right = -1;
    double value = 0.0;  // leaf contribution, learning rate baked in
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

// Additive regression trees per class under a softmax objective.
class DetectorModel {
public:
    std::string schema_id;
    TrainConfig config;
    std::string data_digest;                // sha256 of the training inputs
    std::vector<std::vector<Tree>> rounds;  // [round][class]
    std::vector<double> train_loss;         // log-loss after each round

    int num_classes() const { return corpus::num_classes(config.label_scheme); }
    int num_features() const { return num_features_; }
    void set_num_features(int n) { num_features_ = n; }

    // Probabilities sum to 1 within 1e-9; deterministic.
    Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    Eigen::VectorXd predict_proba(const features::FeatureVector& fv) const;  // schema-checked
    Eigen::MatrixXd predict_proba_matrix(const Eigen::MatrixXd& X) const;
    int predict_class(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
    std::vector<int> predict_classes(const Eigen::MatrixXd& X) const;

private:
    int num_features_ = 0;
};

// Greedy variance-reduction splits, ties broken by lowest feature index then
// lowest threshold; training softmax loss is checked non-increasing per
// round. Identical (data, config, seed) reproduce identical model bytes.
DetectorModel train(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                    const TrainConfig& cfg, const std::string& schema_id = "");

// Versioned container, magic "DDTM", little-endian. Refuses foreign bytes,
// truncated files and future versions.
std::string serialize(const DetectorModel& model);
DetectorModel deserialize(std::string_view bytes);
void save_model(const DetectorModel& model, const std::string& path);
DetectorModel load_model(const std::string& path);

struct UncertaintyScore {
    std::string sample_id;
    double score = 0.0;  // variance across members of p(recorded label)
};

// Variance across already-trained ensemble members, in input row order.
std::vector<double> uncertainty_from_members(const std::vector<DetectorModel>& members,
                                             const Eigen::MatrixXd& X,
                                             const std::vector<int>& labels);

// Trains `members` models on bootstrap resamples (seeded) and scores each
// row by the variance of the probability its members assign to its recorded
// label. Requires members >= 2.
std::vector<UncertaintyScore> ensemble_uncertainty(const Eigen::MatrixXd& X,
                                                   const std::vector<int>& labels,
                                                   const std::vector<std::string>& ids,
                                                   const TrainConfig& cfg, int members,
                                                   uint64_t seed);

struct ResampleResult {
    std::vector<size_t> kept_indices;        // input order
    std::vector<std::string> removed_ids;    // highest score first
};

// Removes exactly ceil(fraction * count(target)) target-labelled samples
// with the highest scores (ties by ascending id). Other labels untouched.
ResampleResult resample_uncertain(const std::vector<std::string>& ids,
                                  const std::vector<corpus::ProvenanceLabel>& labels,
                                  const std::vector<UncertaintyScore>& scores,
                                  double fraction = 0.07,
                                  corpus::ProvenanceLabel target = corpus::ProvenanceLabel::HUMAN);

enum class ImportanceMetric { WEIGHTED_F1, ACCURACY };

struct FeatureImportance {
    int feature = 0;
    double importance = 0.0;  // metric drop after shuffling the column
};

// Single seeded permutation per feature; descending importance, ties by
// feature index.
std::vector<FeatureImportance> permutation_importance(const DetectorModel& model,
                                                      const Eigen::MatrixXd& X,
                                                      const std::vector<int>& labels,
                                                      ImportanceMetric metric, uint64_t seed);

} // namespace droid::detector
