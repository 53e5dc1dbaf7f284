#include "droid/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "droid/binio.hpp"
#include "droid/digest.hpp"
#include "droid/errors.hpp"
#include "droid/eval.hpp"
#include "droid/util.hpp"

namespace droid::detector {

namespace {

constexpr double kLeafClamp = 10.0;
constexpr double kMinGain = 1e-12;

Eigen::VectorXd softmax(const Eigen::VectorXd& raw) {
    Eigen::VectorXd shifted = raw.array() - raw.maxCoeff();
    Eigen::VectorXd ex = shifted.array().exp();
    return ex / ex.sum();
}

double log_loss(const Eigen::MatrixXd& raw, const std::vector<int>& y) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        Eigen::VectorXd p = softmax(raw.row(i).transpose());
        loss -= std::log(std::max(p[y[static_cast<size_t>(i)]], 1e-15));
    }
    return loss / static_cast<double>(raw.rows());
}

// Per-(node, feature) scan state for the level-wise split search.
struct ScanState {
    int64_t seen = 0;
    double sum_seen = 0.0;
    double prev_value = 0.0;
    bool has_prev = false;
};

struct NodeStats {
    int64_t count = 0;
    double sum = 0.0;
    double best_gain = 0.0;
    int32_t best_feature = -1;
    double best_threshold = 0.0;
};

Tree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& residual,
              const Eigen::VectorXd& prob, const std::vector<char>& in_bag,
              const std::vector<std::vector<int32_t>>& sorted_by_feature,
              const TrainConfig& cfg, int num_classes) {
    const auto n = X.rows();
    const auto num_features = X.cols();

    Tree tree;
    tree.nodes.push_back(TreeNode{});
    std::vector<int32_t> node_of(static_cast<size_t>(n), -1);
    NodeStats root_stats;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!in_bag[static_cast<size_t>(i)]) continue;
        node_of[static_cast<size_t>(i)] = 0;
        root_stats.count++;
        root_stats.sum += residual[i];
    }

    std::vector<int32_t> active = {0};
    std::vector<NodeStats> stats = {root_stats};

    for (int depth = 0; depth < cfg.max_depth && !active.empty(); ++depth) {
        // node id -> index into stats/active bookkeeping
        std::vector<int32_t> slot(tree.nodes.size(), -1);
        for (size_t a = 0; a < active.size(); ++a) slot[static_cast<size_t>(active[a])] = (int32_t)a;

        std::vector<ScanState> scan(active.size());
        for (Eigen::Index f = 0; f < num_features; ++f) {
            std::fill(scan.begin(), scan.end(), ScanState{});
            for (int32_t idx : sorted_by_feature[static_cast<size_t>(f)]) {
                int32_t node = node_of[static_cast<size_t>(idx)];
                if (node < 0 || slot[static_cast<size_t>(node)] < 0) continue;
                ScanState& st = scan[static_cast<size_t>(slot[static_cast<size_t>(node)])];
                NodeStats& ns = stats[static_cast<size_t>(slot[static_cast<size_t>(node)])];
                double v = X(idx, f);
                if (st.has_prev && v > st.prev_value) {
                    int64_t n_left = st.seen;
                    int64_t n_right = ns.count - n_left;
                    if (n_left >= cfg.min_samples_leaf && n_right >= cfg.min_samples_leaf) {
                        double sum_right = ns.sum - st.sum_seen;
                        double gain = st.sum_seen * st.sum_seen / static_cast<double>(n_left) +
                                      sum_right * sum_right / static_cast<double>(n_right) -
                                      ns.sum * ns.sum / static_cast<double>(ns.count);
                        if (gain > ns.best_gain + kMinGain) {
                            ns.best_gain = gain;
                            ns.best_feature = static_cast<int32_t>(f);
                            ns.best_threshold = 0.5 * (st.prev_value + v);
                        }
                    }
                }
                st.seen++;
                st.sum_seen += residual[idx];
                st.prev_value = v;
                st.has_prev = true;
            }
        }

        // Apply winning splits and prepare the next level.
        std::vector<int32_t> next_active;
        std::vector<NodeStats> next_stats;
        bool any_split = false;
        for (size_t a = 0; a < active.size(); ++a) {
            NodeStats& ns = stats[a];
            if (ns.best_feature < 0) continue;
            TreeNode& node = tree.nodes[static_cast<size_t>(active[a])];
            node.feature = ns.best_feature;
            node.threshold = ns.best_threshold;
            node.left = static_cast<int32_t>(tree.nodes.size());
            node.right = node.left + 1;
            tree.nodes.push_back(TreeNode{});
            tree.nodes.push_back(TreeNode{});
            next_active.push_back(node.left);
            next_active.push_back(node.right);
            next_stats.push_back(NodeStats{});
            next_stats.push_back(NodeStats{});
            any_split = true;
        }
        if (!any_split) break;

        std::vector<int32_t> next_slot(tree.nodes.size(), -1);
        for (size_t a = 0; a < next_active.size(); ++a)
            next_slot[static_cast<size_t>(next_active[a])] = (int32_t)a;
        for (Eigen::Index i = 0; i < n; ++i) {
            int32_t cur = node_of[static_cast<size_t>(i)];
            if (cur < 0) continue;
            const TreeNode& node = tree.nodes[static_cast<size_t>(cur)];
            if (node.feature < 0) continue;
            int32_t child = X(i, node.feature) <= node.threshold ? node.left : node.right;
            node_of[static_cast<size_t>(i)] = child;
            int32_t s = next_slot[static_cast<size_t>(child)];
            next_stats[static_cast<size_t>(s)].count++;
            next_stats[static_cast<size_t>(s)].sum += residual[i];
        }
        active = std::move(next_active);
        stats = std::move(next_stats);
    }

    // Friedman multi-class leaf values with the learning rate baked in.
    std::vector<double> numer(tree.nodes.size(), 0.0), denom(tree.nodes.size(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        int32_t leaf = node_of[static_cast<size_t>(i)];
        if (leaf < 0) continue;
        numer[static_cast<size_t>(leaf)] += residual[i];
        denom[static_cast<size_t>(leaf)] += prob[i] * (1.0 - prob[i]);
    }
    const double k = static_cast<double>(num_classes);
    for (size_t j = 0; j < tree.nodes.size(); ++j) {
        if (tree.nodes[j].feature >= 0) continue;
        double gamma = (k - 1.0) / k * numer[j] / std::max(denom[j], 1e-12);
        tree.nodes[j].value = cfg.learning_rate * std::clamp(gamma, -kLeafClamp, kLeafClamp);
    }
    return tree;
}

} // namespace

void TrainConfig::validate() const {
    if (num_trees <= 0 || max_depth <= 0 || min_samples_leaf <= 0)
        throw ValidationError("train config: counts must be positive");
    if (learning_rate <= 0.0) throw ValidationError("train config: learning_rate must be positive");
    if (subsample <= 0.0 || subsample > 1.0)
        throw ValidationError("train config: subsample must lie in (0,1]");
}

double Tree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int32_t at = 0;
    while (nodes[static_cast<size_t>(at)].feature >= 0) {
        const TreeNode& node = nodes[static_cast<size_t>(at)];
        at = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    return nodes[static_cast<size_t>(at)].value;
}

Eigen::VectorXd DetectorModel::predict_proba(
    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != num_features_)
        throw ValidationError("predict: expected " + std::to_string(num_features_) +
                              " features, got " + std::to_string(row.size()));
    Eigen::VectorXd raw = Eigen::VectorXd::Zero(num_classes());
    for (const auto& round : rounds)
        for (int k = 0; k < num_classes(); ++k) raw[k] += round[static_cast<size_t>(k)].predict(row);
    return softmax(raw);
}

Eigen::VectorXd DetectorModel::predict_proba(const features::FeatureVector& fv) const {
    if (fv.schema_id != schema_id)
        throw ValidationError("predict: feature schema '" + fv.schema_id +
                              "' does not match model schema '" + schema_id + "'");
    return predict_proba(fv.values.transpose());
}

Eigen::MatrixXd DetectorModel::predict_proba_matrix(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd out(X.rows(), num_classes());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = predict_proba(X.row(i)).transpose();
    return out;
}

int DetectorModel::predict_class(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    Eigen::VectorXd p = predict_proba(row);
    Eigen::Index best = 0;
    p.maxCoeff(&best);
    return static_cast<int>(best);
}

std::vector<int> DetectorModel::predict_classes(const Eigen::MatrixXd& X) const {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back(predict_class(X.row(i)));
    return out;
}

DetectorModel train(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                    const TrainConfig& cfg, const std::string& schema_id) {
    cfg.validate();
    const auto n = X.rows();
    if (n == 0) throw ValidationError("train: empty input");
    if (static_cast<size_t>(n) != labels.size())
        throw ValidationError("train: features and labels misaligned");
    const int num_classes = corpus::num_classes(cfg.label_scheme);
    for (int y : labels)
        if (y < 0 || y >= num_classes)
            throw ValidationError("train: label out of range for scheme");

    DetectorModel model;
    model.schema_id = schema_id;
    model.config = cfg;
    model.set_num_features(static_cast<int>(X.cols()));
    {
        std::string blob(reinterpret_cast<const char*>(X.data()),
                         sizeof(double) * static_cast<size_t>(X.size()));
        blob.append(reinterpret_cast<const char*>(labels.data()),
                    sizeof(int) * labels.size());
        model.data_digest = digest::sha256_hex(blob);
    }

    // Pre-sorted row indices per feature, stable on (value, index).
    std::vector<std::vector<int32_t>> sorted_by_feature(static_cast<size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        auto& order = sorted_by_feature[static_cast<size_t>(f)];
        order.resize(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int32_t a, int32_t b) { return X(a, f) < X(b, f); });
    }

    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(n, num_classes);
    double prev_loss = log_loss(raw, labels);
    model.train_loss.reserve(static_cast<size_t>(cfg.num_trees));

    std::vector<char> in_bag(static_cast<size_t>(n), 1);
    std::vector<int32_t> bag_pool(static_cast<size_t>(n));
    std::iota(bag_pool.begin(), bag_pool.end(), 0);

    for (int round = 0; round < cfg.num_trees; ++round) {
        if (cfg.subsample < 1.0) {
            std::fill(in_bag.begin(), in_bag.end(), 0);
            std::mt19937_64 rng(util::mix64(cfg.seed ^ (0x5347424dULL + (uint64_t)round)));
            std::shuffle(bag_pool.begin(), bag_pool.end(), rng);
            auto take = std::max<int64_t>(
                1, static_cast<int64_t>(std::llround(cfg.subsample * static_cast<double>(n))));
            for (int64_t i = 0; i < take; ++i) in_bag[static_cast<size_t>(bag_pool[i])] = 1;
        }

        Eigen::MatrixXd prob(n, num_classes);
        for (Eigen::Index i = 0; i < n; ++i)
            prob.row(i) = softmax(raw.row(i).transpose()).transpose();

        std::vector<Tree> class_trees;
        class_trees.reserve(static_cast<size_t>(num_classes));
        Eigen::MatrixXd delta(n, num_classes);
        for (int k = 0; k < num_classes; ++k) {
            Eigen::VectorXd residual(n);
            for (Eigen::Index i = 0; i < n; ++i)
                residual[i] = (labels[static_cast<size_t>(i)] == k ? 1.0 : 0.0) - prob(i, k);
            Tree tree = fit_tree(X, residual, prob.col(k), in_bag, sorted_by_feature, cfg,
                                 num_classes);
            for (Eigen::Index i = 0; i < n; ++i) delta(i, k) = tree.predict(X.row(i));
            class_trees.push_back(std::move(tree));
        }

        // Step acceptance: a round fitted on a subsample may not lower the
        // full-set loss near convergence. Halve its contribution until it
        // does, or drop it, keeping the loss sequence non-increasing.
        raw += delta;
        double scale = 1.0;
        double loss = log_loss(raw, labels);
        for (int halvings = 0; loss > prev_loss && halvings < 6; ++halvings) {
            scale *= 0.5;
            raw -= scale * delta;
            loss = log_loss(raw, labels);
        }
        if (loss > prev_loss) {
            raw -= scale * delta;  // reject the round outright
            loss = prev_loss;
        } else {
            if (scale != 1.0)
                for (auto& tree : class_trees)
                    for (auto& node : tree.nodes)
                        if (node.feature < 0) node.value *= scale;
            model.rounds.push_back(std::move(class_trees));
        }
        if (loss > prev_loss + 1e-12)
            throw std::logic_error("train: softmax loss increased at round " +
                                   std::to_string(round));
        model.train_loss.push_back(loss);
        prev_loss = loss;
    }
    return model;
}

std::string serialize(const DetectorModel& model) {
    binio::Writer w;
    w.magic("DDTM");
    w.u32(1);
    w.str(model.schema_id);
    w.u8(static_cast<uint8_t>(model.config.label_scheme));
    w.i32(model.config.num_trees);
    w.i32(model.config.max_depth);
    w.f64(model.config.learning_rate);
    w.i32(model.config.min_samples_leaf);
    w.f64(model.config.subsample);
    w.u64(model.config.seed);
    w.str(model.data_digest);
    w.i32(model.num_features());
    w.u32(static_cast<uint32_t>(model.rounds.size()));
    w.u32(static_cast<uint32_t>(model.num_classes()));
    for (const auto& round : model.rounds) {
        for (const auto& tree : round) {
            w.u32(static_cast<uint32_t>(tree.nodes.size()));
            for (const auto& node : tree.nodes) {
                w.i32(node.feature);
                w.f64(node.threshold);
                w.i32(node.left);
                w.i32(node.right);
                w.f64(node.value);
            }
        }
    }
    w.u32(static_cast<uint32_t>(model.train_loss.size()));
    for (double loss : model.train_loss) w.f64(loss);
    return w.bytes();
}

DetectorModel deserialize(std::string_view bytes) {
    binio::Reader r(bytes, "detector model");
    r.expect_magic("DDTM");
    uint32_t version = r.u32();
    if (version != 1)
        throw ValidationError("detector model: unsupported version " + std::to_string(version));
    DetectorModel model;
    model.schema_id = r.str();
    model.config.label_scheme = static_cast<corpus::LabelScheme>(r.u8());
    model.config.num_trees = r.i32();
    model.config.max_depth = r.i32();
    model.config.learning_rate = r.f64();
    model.config.min_samples_leaf = r.i32();
    model.config.subsample = r.f64();
    model.config.seed = r.u64();
    model.data_digest = r.str();
    model.set_num_features(r.i32());
    uint32_t rounds = r.u32();
    uint32_t classes = r.u32();
    if (classes != static_cast<uint32_t>(model.num_classes()))
        throw ValidationError("detector model: class count disagrees with scheme");
    model.rounds.resize(rounds);
    for (auto& round : model.rounds) {
        round.resize(classes);
        for (auto& tree : round) {
            uint32_t count = r.u32();
            tree.nodes.resize(count);
            for (uint32_t idx = 0; idx < count; ++idx) {
                TreeNode& node = tree.nodes[idx];
                node.feature = r.i32();
                node.threshold = r.f64();
                node.left = r.i32();
                node.right = r.i32();
                node.value = r.f64();
                if (node.feature >= model.num_features())
                    throw ValidationError("detector model: node references missing feature");
                // children must point forward, which also rules out cycles
                if (node.feature >= 0 &&
                    (node.left <= static_cast<int32_t>(idx) ||
                     node.right <= static_cast<int32_t>(idx) ||
                     static_cast<uint32_t>(node.left) >= count ||
                     static_cast<uint32_t>(node.right) >= count))
                    throw ValidationError("detector model: node child out of range");
            }
        }
    }
    uint32_t losses = r.u32();
    model.train_loss.resize(losses);
    for (auto& loss : model.train_loss) loss = r.f64();
    r.expect_end();
    return model;
}

void save_model(const DetectorModel& model, const std::string& path) {
    binio::write_binary_file(path, serialize(model));
}

DetectorModel load_model(const std::string& path) {
    return deserialize(binio::read_binary_file(path));
}

std::vector<double> uncertainty_from_members(const std::vector<DetectorModel>& members,
                                             const Eigen::MatrixXd& X,
                                             const std::vector<int>& labels) {
    if (members.size() < 2) throw ValidationError("uncertainty: need at least 2 members");
    if (static_cast<size_t>(X.rows()) != labels.size())
        throw ValidationError("uncertainty: features and labels misaligned");
    const auto n = X.rows();
    const auto m = static_cast<double>(members.size());
    std::vector<double> scores(static_cast<size_t>(n), 0.0);
    std::vector<double> probs(members.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (size_t j = 0; j < members.size(); ++j)
            probs[j] = members[j].predict_proba(X.row(i))[labels[static_cast<size_t>(i)]];
        double mean = std::accumulate(probs.begin(), probs.end(), 0.0) / m;
        double var = 0.0;
        for (double p : probs) var += (p - mean) * (p - mean);
        scores[static_cast<size_t>(i)] = var / m;
    }
    return scores;
}

std::vector<UncertaintyScore> ensemble_uncertainty(const Eigen::MatrixXd& X,
                                                   const std::vector<int>& labels,
                                                   const std::vector<std::string>& ids,
                                                   const TrainConfig& cfg, int members,
                                                   uint64_t seed) {
    if (members < 2) throw ValidationError("ensemble_uncertainty: members must be >= 2");
    if (ids.size() != labels.size() || static_cast<size_t>(X.rows()) != ids.size())
        throw ValidationError("ensemble_uncertainty: misaligned inputs");
    const auto n = X.rows();
    std::vector<DetectorModel> ensemble;
    ensemble.reserve(static_cast<size_t>(members));
    for (int m = 0; m < members; ++m) {
        std::mt19937_64 rng(util::mix64(seed ^ (0xB007ULL + (uint64_t)m)));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        Eigen::MatrixXd bx(n, X.cols());
        std::vector<int> by(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index j = pick(rng);
            bx.row(i) = X.row(j);
            by[static_cast<size_t>(i)] = labels[static_cast<size_t>(j)];
        }
        TrainConfig member_cfg = cfg;
        member_cfg.seed = util::mix64(seed + static_cast<uint64_t>(m));
        ensemble.push_back(train(bx, by, member_cfg));
    }
    auto variances = uncertainty_from_members(ensemble, X, labels);
    std::vector<UncertaintyScore> out;
    out.reserve(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], variances[i]});
    return out;
}

ResampleResult resample_uncertain(const std::vector<std::string>& ids,
                                  const std::vector<corpus::ProvenanceLabel>& labels,
                                  const std::vector<UncertaintyScore>& scores, double fraction,
                                  corpus::ProvenanceLabel target) {
    if (ids.size() != labels.size())
        throw ValidationError("resample: ids and labels misaligned");
    if (fraction <= 0.0 || fraction >= 1.0)
        throw ValidationError("resample: fraction must lie in (0,1)");
    std::map<std::string, double> score_of;
    for (const auto& s : scores) score_of[s.sample_id] = s.score;

    struct Candidate {
        double score;
        std::string id;
        size_t index;
    };
    std::vector<Candidate> targets;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (labels[i] != target) continue;
        auto it = score_of.find(ids[i]);
        if (it == score_of.end())
            throw ValidationError("resample: no uncertainty score for sample '" + ids[i] + "'");
        targets.push_back({it->second, ids[i], i});
    }
    // epsilon guards the exact-product case (0.07 * 100 is 7 + 1 ulp)
    auto to_remove = static_cast<size_t>(
        std::ceil(fraction * static_cast<double>(targets.size()) - 1e-9));
    std::sort(targets.begin(), targets.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });

    std::vector<char> removed(ids.size(), 0);
    ResampleResult result;
    for (size_t r = 0; r < to_remove && r < targets.size(); ++r) {
        removed[targets[r].index] = 1;
        result.removed_ids.push_back(targets[r].id);
    }
    for (size_t i = 0; i < ids.size(); ++i)
        if (!removed[i]) result.kept_indices.push_back(i);
    return result;
}

std::vector<FeatureImportance> permutation_importance(const DetectorModel& model,
                                                      const Eigen::MatrixXd& X,
                                                      const std::vector<int>& labels,
                                                      ImportanceMetric metric, uint64_t seed) {
    auto score = [&](const Eigen::MatrixXd& features) {
        auto pred = model.predict_classes(features);
        return metric == ImportanceMetric::WEIGHTED_F1
                   ? eval::weighted_f1(labels, pred, model.num_classes())
                   : eval::accuracy(labels, pred);
    };
    const double baseline = score(X);
    const auto n = X.rows();
    std::vector<FeatureImportance> out;
    out.reserve(static_cast<size_t>(X.cols()));
    std::vector<Eigen::Index> perm(static_cast<size_t>(n));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        std::iota(perm.begin(), perm.end(), 0);
        std::mt19937_64 rng(util::mix64(seed ^ (0x9E37ULL + (uint64_t)f)));
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::MatrixXd shuffled = X;
        for (Eigen::Index i = 0; i < n; ++i)
            shuffled(i, f) = X(perm[static_cast<size_t>(i)], f);
        out.push_back({static_cast<int>(f), baseline - score(shuffled)});
    }
    std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a,
                                                const FeatureImportance& b) {
        return a.importance > b.importance;
    });
    return out;
}

} // namespace droid::detector
