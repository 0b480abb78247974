#include "obfugraph/trees.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "obfugraph/rng.hpp"

namespace obfugraph {

namespace {

struct Dataset {
    const std::vector<std::vector<double>>* x;
    const std::vector<double>* target;   // regression targets (boosting)
    const std::vector<int>* labels;      // class labels (forest)
    const std::vector<double>* weights;  // per-sample weights
    size_t n_classes = 0;
};

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // impurity decrease; must be > 0 to split
};

double gini_from_counts(const std::vector<double>& counts, double total) {
    if (total <= 0.0) return 0.0;
    double sum_sq = 0.0;
    for (double c : counts) sum_sq += c * c;
    return 1.0 - sum_sq / (total * total);
}

// Weighted Gini impurity decrease for the best threshold of one feature.
SplitChoice best_split_gini(const Dataset& data, const std::vector<size_t>& indices,
                            int feature, int min_leaf) {
    std::vector<size_t> order(indices);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return (*data.x)[a][static_cast<size_t>(feature)] <
               (*data.x)[b][static_cast<size_t>(feature)];
    });

    std::vector<double> left(data.n_classes, 0.0), right(data.n_classes, 0.0);
    double wl = 0.0, wr = 0.0;
    for (size_t i : order) {
        right[static_cast<size_t>((*data.labels)[i])] += (*data.weights)[i];
        wr += (*data.weights)[i];
    }
    double parent = gini_from_counts(right, wr) * wr;

    SplitChoice best;
    best.feature = feature;
    size_t n = order.size();
    for (size_t pos = 0; pos + 1 < n; ++pos) {
        size_t i = order[pos];
        double w = (*data.weights)[i];
        size_t cls = static_cast<size_t>((*data.labels)[i]);
        left[cls] += w;
        right[cls] -= w;
        wl += w;
        wr -= w;
        double v = (*data.x)[i][static_cast<size_t>(feature)];
        double v_next = (*data.x)[order[pos + 1]][static_cast<size_t>(feature)];
        if (v == v_next) continue;
        if (pos + 1 < static_cast<size_t>(min_leaf) || n - pos - 1 < static_cast<size_t>(min_leaf))
            continue;
        double score = parent - (gini_from_counts(left, wl) * wl +
                                 gini_from_counts(right, wr) * wr);
        if (score > best.score) {
            best.score = score;
            best.threshold = (v + v_next) / 2.0;
        }
    }
    return best;
}

// Weighted SSE decrease for the best threshold of one feature.
SplitChoice best_split_sse(const Dataset& data, const std::vector<size_t>& indices,
                           int feature, int min_leaf) {
    std::vector<size_t> order(indices);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return (*data.x)[a][static_cast<size_t>(feature)] <
               (*data.x)[b][static_cast<size_t>(feature)];
    });

    double wsum = 0.0, ysum = 0.0;
    for (size_t i : order) {
        wsum += (*data.weights)[i];
        ysum += (*data.weights)[i] * (*data.target)[i];
    }

    SplitChoice best;
    best.feature = feature;
    double wl = 0.0, yl = 0.0;
    size_t n = order.size();
    for (size_t pos = 0; pos + 1 < n; ++pos) {
        size_t i = order[pos];
        wl += (*data.weights)[i];
        yl += (*data.weights)[i] * (*data.target)[i];
        double v = (*data.x)[i][static_cast<size_t>(feature)];
        double v_next = (*data.x)[order[pos + 1]][static_cast<size_t>(feature)];
        if (v == v_next) continue;
        if (pos + 1 < static_cast<size_t>(min_leaf) || n - pos - 1 < static_cast<size_t>(min_leaf))
            continue;
        double wr = wsum - wl, yr = ysum - yl;
        // SSE decrease = (sum y)^2/w terms; constant parent part omitted.
        double score = (wl > 0.0 ? yl * yl / wl : 0.0) + (wr > 0.0 ? yr * yr / wr : 0.0) -
                       (wsum > 0.0 ? ysum * ysum / wsum : 0.0);
        if (score > best.score + 1e-12) {
            best.score = score;
            best.threshold = (v + v_next) / 2.0;
        }
    }
    return best;
}

struct TreeBuilder {
    const Dataset& data;
    const TreeConfig& config;
    bool regression;
    Rng* feature_rng;  // non-null enables sqrt(d) feature subsetting
    DecisionTree tree;

    std::vector<int> candidate_features() {
        size_t d = (*data.x)[0].size();
        std::vector<int> features(d);
        for (size_t i = 0; i < d; ++i) features[i] = static_cast<int>(i);
        if (!feature_rng) return features;
        size_t k = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
        feature_rng->shuffle(features);
        features.resize(std::min(k, d));
        std::sort(features.begin(), features.end());
        return features;
    }

    std::vector<double> make_leaf(const std::vector<size_t>& indices) {
        if (regression) {
            double wsum = 0.0, ysum = 0.0;
            for (size_t i : indices) {
                wsum += (*data.weights)[i];
                ysum += (*data.weights)[i] * (*data.target)[i];
            }
            return {wsum > 0.0 ? ysum / wsum : 0.0};
        }
        std::vector<double> counts(data.n_classes, 0.0);
        double total = 0.0;
        for (size_t i : indices) {
            counts[static_cast<size_t>((*data.labels)[i])] += (*data.weights)[i];
            total += (*data.weights)[i];
        }
        if (total > 0.0)
            for (double& c : counts) c /= total;
        return counts;
    }

    bool is_pure(const std::vector<size_t>& indices) const {
        if (regression) {
            double first = (*data.target)[indices[0]];
            for (size_t i : indices)
                if ((*data.target)[i] != first) return false;
            return true;
        }
        int first = (*data.labels)[indices[0]];
        for (size_t i : indices)
            if ((*data.labels)[i] != first) return false;
        return true;
    }

    int build(std::vector<size_t> indices, int depth) {
        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        bool at_depth_limit = config.max_depth > 0 && depth >= config.max_depth;
        if (indices.size() < 2 * static_cast<size_t>(config.min_samples_leaf) ||
            at_depth_limit || is_pure(indices)) {
            tree.nodes[static_cast<size_t>(node_id)].leaf = make_leaf(indices);
            return node_id;
        }

        SplitChoice best;
        for (int feature : candidate_features()) {
            SplitChoice candidate =
                regression ? best_split_sse(data, indices, feature, config.min_samples_leaf)
                           : best_split_gini(data, indices, feature, config.min_samples_leaf);
            if (candidate.score > best.score) best = candidate;
        }
        if (best.feature < 0 || best.score <= 0.0) {
            tree.nodes[static_cast<size_t>(node_id)].leaf = make_leaf(indices);
            return node_id;
        }

        std::vector<size_t> left_idx, right_idx;
        for (size_t i : indices) {
            if ((*data.x)[i][static_cast<size_t>(best.feature)] <= best.threshold)
                left_idx.push_back(i);
            else
                right_idx.push_back(i);
        }
        indices.clear();
        indices.shrink_to_fit();

        int left = build(std::move(left_idx), depth + 1);
        int right = build(std::move(right_idx), depth + 1);
        TreeNode& node = tree.nodes[static_cast<size_t>(node_id)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        return node_id;
    }
};

void check_matrix(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                  size_t n_classes, const char* op) {
    if (x.empty() || x.size() != y.size())
        throw std::invalid_argument(std::string(op) + ": empty or mismatched X/y");
    size_t d = x[0].size();
    if (d == 0) throw std::invalid_argument(std::string(op) + ": zero feature dimension");
    for (const auto& row : x)
        if (row.size() != d)
            throw std::invalid_argument(std::string(op) + ": inconsistent feature dimensions");
    for (int label : y)
        if (label < 0 || static_cast<size_t>(label) >= n_classes)
            throw std::invalid_argument(std::string(op) + ": label outside [0, n_classes)");
}

void softmax_rows(std::vector<double>& logits, size_t n, size_t k) {
    for (size_t i = 0; i < n; ++i) {
        double* row = logits.data() + i * k;
        double m = row[0];
        for (size_t c = 1; c < k; ++c) m = std::max(m, row[c]);
        double sum = 0.0;
        for (size_t c = 0; c < k; ++c) {
            row[c] = std::exp(row[c] - m);
            sum += row[c];
        }
        for (size_t c = 0; c < k; ++c) row[c] /= sum;
    }
}

}  // namespace

const std::vector<double>& DecisionTree::predict(const std::vector<double>& x) const {
    size_t node = 0;
    while (!nodes[node].is_leaf()) {
        const TreeNode& n = nodes[node];
        node = static_cast<size_t>(x[static_cast<size_t>(n.feature)] <= n.threshold ? n.left
                                                                                    : n.right);
    }
    return nodes[node].leaf;
}

std::vector<double> class_balanced_weights(const std::vector<int>& y, size_t n_classes,
                                           bool enabled) {
    std::vector<double> weights(y.size(), 1.0);
    if (!enabled || y.empty()) return weights;
    std::vector<double> counts(n_classes, 0.0);
    for (int label : y) counts[static_cast<size_t>(label)] += 1.0;
    double raw_sum = 0.0;
    for (int label : y) raw_sum += 1.0 / counts[static_cast<size_t>(label)];
    double scale = static_cast<double>(y.size()) / raw_sum;
    for (size_t i = 0; i < y.size(); ++i)
        weights[i] = scale / counts[static_cast<size_t>(y[i])];
    return weights;
}

TreeEnsembleModel train_random_forest(const std::vector<std::vector<double>>& x,
                                      const std::vector<int>& y, size_t n_classes,
                                      const TreeConfig& config, uint64_t seed) {
    check_matrix(x, y, n_classes, "train_random_forest");

    TreeEnsembleModel model;
    model.kind = "random_forest";
    model.n_classes = n_classes;
    model.feature_dim = x[0].size();
    model.config = config;
    model.seed = seed;
    model.constant_warning =
        std::all_of(y.begin(), y.end(), [&](int label) { return label == y[0]; });

    auto weights = class_balanced_weights(y, n_classes, config.class_weights);
    Dataset data{&x, nullptr, &y, &weights, n_classes};

    for (int t = 0; t < config.n_trees; ++t) {
        Rng rng(derive_seed(seed, static_cast<uint64_t>(t)));
        std::vector<size_t> bootstrap(x.size());
        for (auto& i : bootstrap) i = rng.index(x.size());
        std::sort(bootstrap.begin(), bootstrap.end());

        TreeBuilder builder{data, config, false, &rng, {}};
        builder.build(std::move(bootstrap), 0);
        model.trees.push_back(std::move(builder.tree));
    }
    return model;
}

TreeEnsembleModel train_gradient_boosting(const std::vector<std::vector<double>>& x,
                                          const std::vector<int>& y, size_t n_classes,
                                          const TreeConfig& config, uint64_t seed) {
    check_matrix(x, y, n_classes, "train_gradient_boosting");
    if (config.subsample <= 0.0 || config.subsample > 1.0)
        throw std::invalid_argument("train_gradient_boosting: subsample out of (0,1]");

    TreeEnsembleModel model;
    model.kind = "gradient_boosting";
    model.n_classes = n_classes;
    model.feature_dim = x[0].size();
    model.config = config;
    model.seed = seed;
    model.constant_warning =
        std::all_of(y.begin(), y.end(), [&](int label) { return label == y[0]; });

    const size_t n = x.size();
    auto weights = class_balanced_weights(y, n_classes, config.class_weights);
    double weight_sum = 0.0;
    for (double w : weights) weight_sum += w;

    // Init logits at weighted log-priors.
    std::vector<double> prior(n_classes, 0.0);
    for (size_t i = 0; i < n; ++i) prior[static_cast<size_t>(y[i])] += weights[i];
    model.base_logits.resize(n_classes);
    for (size_t c = 0; c < n_classes; ++c)
        model.base_logits[c] = std::log(std::max(prior[c] / weight_sum, 1e-12));

    std::vector<double> logits(n * n_classes);
    for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < n_classes; ++c) logits[i * n_classes + c] = model.base_logits[c];

    std::vector<double> probs, residual(n);
    for (int round = 0; round < config.n_trees; ++round) {
        probs = logits;
        softmax_rows(probs, n, n_classes);

        std::vector<size_t> rows(n);
        for (size_t i = 0; i < n; ++i) rows[i] = i;
        if (config.subsample < 1.0) {
            Rng rng(derive_seed(seed, static_cast<uint64_t>(round), 0x5b5a));
            rng.shuffle(rows);
            rows.resize(std::max<size_t>(1, static_cast<size_t>(
                                                std::floor(config.subsample *
                                                           static_cast<double>(n)))));
            std::sort(rows.begin(), rows.end());
        }

        for (size_t c = 0; c < n_classes; ++c) {
            for (size_t i = 0; i < n; ++i) {
                double target = (static_cast<size_t>(y[i]) == c ? 1.0 : 0.0);
                residual[i] = target - probs[i * n_classes + c];
            }
            Dataset data{&x, &residual, nullptr, &weights, n_classes};
            TreeBuilder builder{data, config, true, nullptr, {}};
            builder.build(rows, 0);

            // Shrink leaf values so prediction is base + sum of stored trees.
            for (auto& node : builder.tree.nodes)
                if (node.is_leaf()) node.leaf[0] *= config.learning_rate;
            for (size_t i = 0; i < n; ++i)
                logits[i * n_classes + c] += builder.tree.predict(x[i])[0];
            model.trees.push_back(std::move(builder.tree));
        }

        // Weighted train cross-entropy after this round.
        probs = logits;
        softmax_rows(probs, n, n_classes);
        double ce = 0.0;
        for (size_t i = 0; i < n; ++i)
            ce -= weights[i] *
                  std::log(std::max(probs[i * n_classes + static_cast<size_t>(y[i])], 1e-300));
        model.training_loss.push_back(ce / weight_sum);
    }
    return model;
}

std::vector<std::vector<double>> predict_scores(const TreeEnsembleModel& model,
                                                const std::vector<std::vector<double>>& x) {
    std::vector<std::vector<double>> scores;
    scores.reserve(x.size());
    for (const auto& row : x) {
        if (row.size() != model.feature_dim)
            throw std::invalid_argument("predict: feature dimension mismatch");
        std::vector<double> s(model.n_classes, 0.0);
        if (model.kind == "random_forest") {
            for (const auto& tree : model.trees) {
                const auto& leaf = tree.predict(row);
                size_t vote = 0;
                for (size_t c = 1; c < leaf.size(); ++c)
                    if (leaf[c] > leaf[vote]) vote = c;
                s[vote] += 1.0;
            }
            double total = static_cast<double>(model.trees.size());
            for (double& v : s) v /= total;
        } else {
            s = model.base_logits;
            size_t k = model.n_classes;
            for (size_t t = 0; t < model.trees.size(); ++t)
                s[t % k] += model.trees[t].predict(row)[0];
            std::vector<double> flat = s;
            softmax_rows(flat, 1, k);
            s = flat;
        }
        scores.push_back(std::move(s));
    }
    return scores;
}

std::vector<int> predict(const TreeEnsembleModel& model,
                         const std::vector<std::vector<double>>& x) {
    auto scores = predict_scores(model, x);
    std::vector<int> labels;
    labels.reserve(scores.size());
    for (const auto& s : scores) {
        size_t best = 0;
        for (size_t c = 1; c < s.size(); ++c)
            if (s[c] > s[best]) best = c;
        labels.push_back(static_cast<int>(best));
    }
    return labels;
}

GridSearchResult grid_search_trees(const std::string& kind,
                                   const std::vector<TreeConfig>& grid,
                                   const std::vector<std::vector<double>>& x_train,
                                   const std::vector<int>& y_train,
                                   const std::vector<std::vector<double>>& x_val,
                                   const std::vector<int>& y_val, size_t n_classes,
                                   uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("grid_search_trees: empty grid");

    auto balanced = [&](const std::vector<int>& pred, const std::vector<int>& truth) {
        std::vector<double> support(n_classes, 0.0), hits(n_classes, 0.0);
        for (size_t i = 0; i < truth.size(); ++i) {
            support[static_cast<size_t>(truth[i])] += 1.0;
            if (pred[i] == truth[i]) hits[static_cast<size_t>(truth[i])] += 1.0;
        }
        double total = 0.0;
        size_t present = 0;
        for (size_t c = 0; c < n_classes; ++c) {
            if (support[c] == 0.0) continue;
            total += hits[c] / support[c];
            ++present;
        }
        return present == 0 ? 0.0 : total / static_cast<double>(present);
    };

    GridSearchResult result;
    size_t best_index = 0;
    bool have_best = false;
    for (size_t g = 0; g < grid.size(); ++g) {
        auto start = std::chrono::steady_clock::now();
        TreeEnsembleModel model =
            kind == "random_forest"
                ? train_random_forest(x_train, y_train, n_classes, grid[g], seed)
                : train_gradient_boosting(x_train, y_train, n_classes, grid[g], seed);
        auto pred = predict(model, x_val);
        double score = balanced(pred, y_val);
        double runtime =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.table.push_back({grid[g], score, runtime});

        auto depth_rank = [](const TreeConfig& c) {
            return c.max_depth == 0 ? std::numeric_limits<int>::max() : c.max_depth;
        };
        bool better = !have_best;
        if (have_best) {
            const auto& cur = result.table[best_index];
            if (score > cur.validation_score)
                better = true;
            else if (score == cur.validation_score) {
                if (grid[g].n_trees < cur.config.n_trees)
                    better = true;
                else if (grid[g].n_trees == cur.config.n_trees &&
                         depth_rank(grid[g]) < depth_rank(cur.config))
                    better = true;
            }
        }
        if (better) {
            best_index = g;
            have_best = true;
        }
    }
    result.best = result.table[best_index].config;
    result.best_score = result.table[best_index].validation_score;
    return result;
}

std::vector<TreeConfig> default_tree_grid(const std::string& kind) {
    std::vector<TreeConfig> grid;
    for (int n_trees : {100, 300}) {
        for (int depth : {8, 16, 0}) {
            if (kind == "gradient_boosting") {
                for (double lr : {0.05, 0.1}) {
                    TreeConfig c;
                    c.n_trees = n_trees;
                    c.max_depth = depth;
                    c.learning_rate = lr;
                    grid.push_back(c);
                }
            } else {
                TreeConfig c;
                c.n_trees = n_trees;
                c.max_depth = depth;
                grid.push_back(c);
            }
        }
    }
    return grid;
}

namespace {

nlohmann::ordered_json config_to_json(const TreeConfig& config) {
    nlohmann::ordered_json j;
    j["n_trees"] = config.n_trees;
    j["max_depth"] = config.max_depth;
    j["learning_rate"] = config.learning_rate;
    j["subsample"] = config.subsample;
    j["class_weights"] = config.class_weights;
    j["min_samples_leaf"] = config.min_samples_leaf;
    return j;
}

TreeConfig config_from_json(const nlohmann::json& j) {
    TreeConfig config;
    config.n_trees = j.at("n_trees").get<int>();
    config.max_depth = j.at("max_depth").get<int>();
    config.learning_rate = j.at("learning_rate").get<double>();
    config.subsample = j.at("subsample").get<double>();
    config.class_weights = j.at("class_weights").get<bool>();
    config.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    return config;
}

}  // namespace

void write_tree_model_json(std::ostream& out, const TreeEnsembleModel& model) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["kind"] = model.kind;
    j["n_classes"] = model.n_classes;
    j["feature_dim"] = model.feature_dim;
    j["feature_scheme"] = model.feature_scheme;
    j["config"] = config_to_json(model.config);
    j["seed"] = model.seed;
    j["base_logits"] = model.base_logits;
    j["training_loss"] = model.training_loss;
    j["constant_warning"] = model.constant_warning;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : model.trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& node : tree.nodes) {
            nlohmann::ordered_json nj;
            if (node.is_leaf()) {
                nj["leaf"] = node.leaf;
            } else {
                nj["feat"] = node.feature;
                nj["thr"] = node.threshold;
                nj["left"] = node.left;
                nj["right"] = node.right;
            }
            nodes.push_back(std::move(nj));
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    out << j.dump() << '\n';
}

TreeEnsembleModel read_tree_model_json(std::istream& in) {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported tree model format version");
    TreeEnsembleModel model;
    model.kind = j.at("kind").get<std::string>();
    model.n_classes = j.at("n_classes").get<size_t>();
    model.feature_dim = j.at("feature_dim").get<size_t>();
    model.feature_scheme = j.at("feature_scheme").get<std::string>();
    model.config = config_from_json(j.at("config"));
    model.seed = j.at("seed").get<uint64_t>();
    model.base_logits = j.at("base_logits").get<std::vector<double>>();
    model.training_loss = j.at("training_loss").get<std::vector<double>>();
    model.constant_warning = j.at("constant_warning").get<bool>();
    for (const auto& tj : j.at("trees")) {
        DecisionTree tree;
        for (const auto& nj : tj) {
            TreeNode node;
            if (nj.contains("leaf")) {
                node.leaf = nj["leaf"].get<std::vector<double>>();
            } else {
                node.feature = nj.at("feat").get<int>();
                node.threshold = nj.at("thr").get<double>();
                node.left = nj.at("left").get<int>();
                node.right = nj.at("right").get<int>();
            }
            tree.nodes.push_back(std::move(node));
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace obfugraph
