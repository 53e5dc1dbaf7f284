#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "droid/corpus.hpp"

namespace droid::embedder {

enum class Mining { BATCH_HARD, RANDOM };

struct TripletConfig {
    double margin = 1.0;
    int batch_size = 32;
    int epochs = 30;
    double learning_rate = 1e-3;
    Mining mining = Mining::BATCH_HARD;
    uint64_t seed = 0;
    int hidden_dim = 64;
    int embedding_dim = 32;

    void validate() const;
};

// Two-layer feed-forward embedder: rectifier hidden layer, identity output,
// unit-normalized embeddings.
struct MlpEmbedder {
    Eigen::MatrixXd w1;  // hidden x input
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // embedding x hidden
    Eigen::VectorXd b2;
    std::string schema_id;
    std::vector<double> epoch_loss;  // mean triplet loss per training epoch

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    int embedding_dim() const { return static_cast<int>(w2.rows()); }

    // Unit-norm embedding (within 1e-6); deterministic.
    Eigen::VectorXd embed(const Eigen::VectorXd& x) const;
    // Row-wise embedding; computed one sample at a time, so batch and
    // one-by-one paths agree bit for bit.
    Eigen::MatrixXd embed_batch(const Eigen::MatrixXd& rows) const;
};

// Seeded parameter initialization (no training).
MlpEmbedder init_embedder(int input_dim, const TripletConfig& cfg,
                          const std::string& schema_id = "");

// max(0, d(a,p) - d(a,n) + margin) with d the squared Euclidean distance.
double triplet_loss(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                    const Eigen::VectorXd& negative, double margin);

struct Triplet {
    int anchor = 0;
    int positive = 0;
    int negative = 0;
};

// Triplets over a batch: hardest positive and hardest negative per anchor
// for BATCH_HARD (ties to the lowest index); seeded choices for RANDOM.
// Anchors without a positive or negative in the batch are skipped.
std::vector<Triplet> mine_triplets(const Eigen::MatrixXd& embeddings,
                                   const std::vector<int>& labels, Mining mining,
                                   uint64_t seed);

struct Gradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
};

// Mean triplet loss over fixed triplets, with analytic parameter gradients
// by backpropagation when `grads` is non-null. X holds one sample per row.
double triplet_loss_and_grad(const MlpEmbedder& model, const Eigen::MatrixXd& X,
                             const std::vector<Triplet>& triplets, double margin,
                             Gradients* grads);

// Mini-batch gradient descent on the mean triplet loss. Deterministic given
// the seed; requires at least two classes with two samples each.
MlpEmbedder train_embedder(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                           const TripletConfig& cfg, const std::string& schema_id = "");

// Class of the nearest class centroid in embedding space, ties to the lower
// class index. Throws on an empty training set.
int centroid_classify(const MlpEmbedder& model, const Eigen::MatrixXd& train_X,
                      const std::vector<int>& train_y, const Eigen::VectorXd& query);

// Versioned container, magic "DDEM", shared layout conventions with the
// detector model file.
std::string serialize(const MlpEmbedder& model);
MlpEmbedder deserialize(std::string_view bytes);
void save_embedder(const MlpEmbedder& model, const std::string& path);
MlpEmbedder load_embedder(const std::string& path);

} // namespace droid::embedder
