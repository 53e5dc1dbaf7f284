#include "droid/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "droid/binio.hpp"
#include "droid/errors.hpp"
#include "droid/util.hpp"

namespace droid::embedder {

namespace {

constexpr double kNormFloor = 1e-12;

struct Forward {
    Eigen::VectorXd h_pre;
    Eigen::VectorXd h;
    Eigen::VectorXd u;  // pre-normalization embedding
    Eigen::VectorXd e;  // unit embedding
    double norm = 0.0;
};

Forward forward_one(const MlpEmbedder& m, const Eigen::VectorXd& x) {
    Forward f;
    f.h_pre = m.w1 * x + m.b1;
    f.h = f.h_pre.cwiseMax(0.0);
    f.u = m.w2 * f.h + m.b2;
    f.norm = std::max(f.u.norm(), kNormFloor);
    f.e = f.u / f.norm;
    return f;
}

double sq_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).squaredNorm();
}

} // namespace

void TripletConfig::validate() const {
    if (margin <= 0.0) throw ValidationError("triplet config: margin must be positive");
    if (batch_size <= 1) throw ValidationError("triplet config: batch_size must exceed 1");
    if (epochs <= 0 || learning_rate <= 0.0 || hidden_dim <= 0)
        throw ValidationError("triplet config: values must be positive");
    if (embedding_dim < 2) throw ValidationError("triplet config: embedding_dim must be >= 2");
}

Eigen::VectorXd MlpEmbedder::embed(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim())
        throw ValidationError("embed: expected " + std::to_string(input_dim()) +
                              " inputs, got " + std::to_string(x.size()));
    return forward_one(*this, x).e;
}

Eigen::MatrixXd MlpEmbedder::embed_batch(const Eigen::MatrixXd& rows) const {
    Eigen::MatrixXd out(rows.rows(), embedding_dim());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        out.row(i) = embed(rows.row(i).transpose()).transpose();
    return out;
}

MlpEmbedder init_embedder(int input_dim, const TripletConfig& cfg,
                          const std::string& schema_id) {
    cfg.validate();
    if (input_dim <= 0) throw ValidationError("init_embedder: input_dim must be positive");
    MlpEmbedder m;
    m.schema_id = schema_id;
    std::mt19937_64 rng(util::mix64(cfg.seed ^ 0x454d4245ULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](Eigen::MatrixXd& w, double scale) {
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = normal(rng) * scale;
    };
    m.w1.resize(cfg.hidden_dim, input_dim);
    fill(m.w1, std::sqrt(2.0 / static_cast<double>(input_dim)));
    m.b1 = Eigen::VectorXd::Zero(cfg.hidden_dim);
    m.w2.resize(cfg.embedding_dim, cfg.hidden_dim);
    fill(m.w2, std::sqrt(1.0 / static_cast<double>(cfg.hidden_dim)));
    m.b2 = Eigen::VectorXd::Zero(cfg.embedding_dim);
    return m;
}

double triplet_loss(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                    const Eigen::VectorXd& negative, double margin) {
    if (anchor.size() != positive.size() || anchor.size() != negative.size())
        throw ValidationError("triplet_loss: dimension mismatch");
    return std::max(0.0, sq_dist(anchor, positive) - sq_dist(anchor, negative) + margin);
}

std::vector<Triplet> mine_triplets(const Eigen::MatrixXd& embeddings,
                                   const std::vector<int>& labels, Mining mining,
                                   uint64_t seed) {
    const auto n = embeddings.rows();
    if (static_cast<size_t>(n) != labels.size())
        throw ValidationError("mine_triplets: embeddings and labels misaligned");
    std::vector<Triplet> out;
    std::mt19937_64 rng(util::mix64(seed ^ 0x4d494e45ULL));
    for (Eigen::Index a = 0; a < n; ++a) {
        std::vector<int> positives, negatives;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == a) continue;
            (labels[static_cast<size_t>(j)] == labels[static_cast<size_t>(a)] ? positives
                                                                              : negatives)
                .push_back(static_cast<int>(j));
        }
        if (positives.empty() || negatives.empty()) continue;
        int p, g;
        if (mining == Mining::BATCH_HARD) {
            auto dist = [&](int j) {
                return (embeddings.row(a) - embeddings.row(j)).squaredNorm();
            };
            p = positives[0];
            for (int j : positives)
                if (dist(j) > dist(p)) p = j;
            g = negatives[0];
            for (int j : negatives)
                if (dist(j) < dist(g)) g = j;
        } else {
            p = positives[std::uniform_int_distribution<size_t>(0, positives.size() - 1)(rng)];
            g = negatives[std::uniform_int_distribution<size_t>(0, negatives.size() - 1)(rng)];
        }
        out.push_back({static_cast<int>(a), p, g});
    }
    return out;
}

double triplet_loss_and_grad(const MlpEmbedder& model, const Eigen::MatrixXd& X,
                             const std::vector<Triplet>& triplets, double margin,
                             Gradients* grads) {
    const auto n = X.rows();
    std::vector<Forward> fwd(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        fwd[static_cast<size_t>(i)] = forward_one(model, X.row(i).transpose());

    if (triplets.empty()) {
        if (grads) {
            grads->w1 = Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols());
            grads->b1 = Eigen::VectorXd::Zero(model.b1.size());
            grads->w2 = Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols());
            grads->b2 = Eigen::VectorXd::Zero(model.b2.size());
        }
        return 0.0;
    }

    const double inv_t = 1.0 / static_cast<double>(triplets.size());
    double loss = 0.0;
    // Accumulated gradient on each sample's unit embedding.
    Eigen::MatrixXd g_e = Eigen::MatrixXd::Zero(n, model.embedding_dim());
    for (const auto& t : triplets) {
        const auto& ea = fwd[static_cast<size_t>(t.anchor)].e;
        const auto& ep = fwd[static_cast<size_t>(t.positive)].e;
        const auto& en = fwd[static_cast<size_t>(t.negative)].e;
        double hinge = sq_dist(ea, ep) - sq_dist(ea, en) + margin;
        if (hinge <= 0.0) continue;
        loss += hinge;
        if (!grads) continue;
        g_e.row(t.anchor) += 2.0 * inv_t * (en - ep).transpose();
        g_e.row(t.positive) += -2.0 * inv_t * (ea - ep).transpose();
        g_e.row(t.negative) += 2.0 * inv_t * (ea - en).transpose();
    }
    loss *= inv_t;
    if (!grads) return loss;

    grads->w1 = Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols());
    grads->b1 = Eigen::VectorXd::Zero(model.b1.size());
    grads->w2 = Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols());
    grads->b2 = Eigen::VectorXd::Zero(model.b2.size());

    for (Eigen::Index i = 0; i < n; ++i) {
        const Forward& f = fwd[static_cast<size_t>(i)];
        Eigen::VectorXd ge = g_e.row(i).transpose();
        if (ge.isZero(0.0)) continue;
        // Through e = u / ||u||.
        Eigen::VectorXd gu = (ge - ge.dot(f.e) * f.e) / f.norm;
        grads->w2 += gu * f.h.transpose();
        grads->b2 += gu;
        Eigen::VectorXd gh = model.w2.transpose() * gu;
        Eigen::VectorXd gh_pre =
            (f.h_pre.array() > 0.0).select(gh.array(), 0.0).matrix();
        grads->w1 += gh_pre * X.row(i);
        grads->b1 += gh_pre;
    }
    return loss;
}

MlpEmbedder train_embedder(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                           const TripletConfig& cfg, const std::string& schema_id) {
    cfg.validate();
    const auto n = X.rows();
    if (static_cast<size_t>(n) != labels.size())
        throw ValidationError("train_embedder: features and labels misaligned");
    std::map<int, int> class_counts;
    for (int y : labels) class_counts[y]++;
    if (class_counts.size() < 2)
        throw ValidationError("train_embedder: need at least 2 classes");
    for (const auto& [cls, count] : class_counts)
        if (count < 2)
            throw ValidationError("train_embedder: class " + std::to_string(cls) +
                                  " has fewer than 2 samples (no positive available)");

    MlpEmbedder model = init_embedder(static_cast<int>(X.cols()), cfg, schema_id);

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(util::mix64(cfg.seed ^ (0x45504f43ULL + (uint64_t)epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += (size_t)cfg.batch_size) {
            size_t end = std::min(order.size(), start + (size_t)cfg.batch_size);
            if (end - start < 2) continue;
            Eigen::MatrixXd bx(static_cast<Eigen::Index>(end - start), X.cols());
            std::vector<int> by(end - start);
            for (size_t i = start; i < end; ++i) {
                bx.row(static_cast<Eigen::Index>(i - start)) = X.row(order[i]);
                by[i - start] = labels[static_cast<size_t>(order[i])];
            }
            Eigen::MatrixXd emb = model.embed_batch(bx);
            auto triplets = mine_triplets(
                emb, by, cfg.mining,
                util::mix64(cfg.seed ^ ((uint64_t)epoch << 20) ^ (uint64_t)start));
            Gradients g;
            double loss = triplet_loss_and_grad(model, bx, triplets, cfg.margin, &g);
            model.w1 -= cfg.learning_rate * g.w1;
            model.b1 -= cfg.learning_rate * g.b1;
            model.w2 -= cfg.learning_rate * g.w2;
            model.b2 -= cfg.learning_rate * g.b2;
            epoch_sum += loss;
            batches++;
        }
        model.epoch_loss.push_back(batches > 0 ? epoch_sum / static_cast<double>(batches) : 0.0);
    }
    return model;
}

int centroid_classify(const MlpEmbedder& model, const Eigen::MatrixXd& train_X,
                      const std::vector<int>& train_y, const Eigen::VectorXd& query) {
    if (train_X.rows() == 0) throw ValidationError("centroid_classify: empty training set");
    if (static_cast<size_t>(train_X.rows()) != train_y.size())
        throw ValidationError("centroid_classify: features and labels misaligned");
    Eigen::MatrixXd emb = model.embed_batch(train_X);
    std::map<int, std::pair<Eigen::VectorXd, int>> sums;
    for (Eigen::Index i = 0; i < emb.rows(); ++i) {
        auto [it, fresh] = sums.try_emplace(
            train_y[static_cast<size_t>(i)],
            Eigen::VectorXd::Zero(model.embedding_dim()), 0);
        it->second.first += emb.row(i).transpose();
        it->second.second++;
    }
    Eigen::VectorXd q = model.embed(query);
    int best_class = -1;
    double best_dist = 0.0;
    for (const auto& [cls, sum_count] : sums) {  // ascending class order fixes ties
        Eigen::VectorXd centroid = sum_count.first / static_cast<double>(sum_count.second);
        double d = (q - centroid).squaredNorm();
        if (best_class < 0 || d < best_dist) {
            best_class = cls;
            best_dist = d;
        }
    }
    return best_class;
}

std::string serialize(const MlpEmbedder& model) {
    binio::Writer w;
    w.magic("DDEM");
    w.u32(1);
    w.str(model.schema_id);
    w.i32(model.input_dim());
    w.i32(model.hidden_dim());
    w.i32(model.embedding_dim());
    auto put = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
    };
    put(model.w1);
    put(model.b1);
    put(model.w2);
    put(model.b2);
    w.u32(static_cast<uint32_t>(model.epoch_loss.size()));
    for (double l : model.epoch_loss) w.f64(l);
    return w.bytes();
}

MlpEmbedder deserialize(std::string_view bytes) {
    binio::Reader r(bytes, "embedder model");
    r.expect_magic("DDEM");
    uint32_t version = r.u32();
    if (version != 1)
        throw ValidationError("embedder model: unsupported version " + std::to_string(version));
    MlpEmbedder m;
    m.schema_id = r.str();
    int input = r.i32(), hidden = r.i32(), emb = r.i32();
    if (input <= 0 || hidden <= 0 || emb < 2)
        throw ValidationError("embedder model: bad dimensions");
    auto get = [&](Eigen::MatrixXd& mat, Eigen::Index rows, Eigen::Index cols) {
        mat.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) mat(i, j) = r.f64();
    };
    Eigen::MatrixXd b1, b2;
    get(m.w1, hidden, input);
    get(b1, hidden, 1);
    get(m.w2, emb, hidden);
    get(b2, emb, 1);
    m.b1 = b1.col(0);
    m.b2 = b2.col(0);
    uint32_t losses = r.u32();
    m.epoch_loss.resize(losses);
    for (auto& l : m.epoch_loss) l = r.f64();
    r.expect_end();
    return m;
}

void save_embedder(const MlpEmbedder& model, const std::string& path) {
    binio::write_binary_file(path, serialize(model));
}

MlpEmbedder load_embedder(const std::string& path) {
    return deserialize(binio::read_binary_file(path));
}

} // namespace droid::embedder
