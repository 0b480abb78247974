#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

// From-scratch tree ensembles over graph-level feature vectors: CART
// random forest (Gini, bootstrap + sqrt(d) feature subsetting, majority
// vote) and multiclass gradient boosting (softmax loss, one squared-error
// residual tree per class per round, shrinkage). Deterministic in
// (data, config, seed).

namespace obfugraph {

struct TreeNode {
    int feature = -1;        // internal: feature index; -1 for leaves
    double threshold = 0.0;  // go left when x[feature] <= threshold
    int left = -1;
    int right = -1;
    std::vector<double> leaf;  // class scores (forest) or residual value (boosting, size 1)

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] = root

    const std::vector<double>& predict(const std::vector<double>& x) const;
};

struct TreeConfig {
    int n_trees = 100;
    int max_depth = 16;          // 0 = unlimited
    double learning_rate = 0.1;  // boosting only
    double subsample = 1.0;      // boosting row subsample per round
    bool class_weights = true;   // inverse-frequency sample weights
    int min_samples_leaf = 1;
};

struct TreeEnsembleModel {
    std::string kind;  // "random_forest" | "gradient_boosting"
    size_t n_classes = 0;
    size_t feature_dim = 0;
    std::string feature_scheme;
    TreeConfig config;
    uint64_t seed = 0;
    std::vector<DecisionTree> trees;  // boosting: round-major, n_classes per round
    std::vector<double> base_logits;  // boosting init (log priors); empty for forest
    std::vector<double> training_loss;  // boosting: per-round train cross-entropy
    bool constant_warning = false;      // single-class training set
};

TreeEnsembleModel train_random_forest(const std::vector<std::vector<double>>& x,
                                      const std::vector<int>& y, size_t n_classes,
                                      const TreeConfig& config, uint64_t seed);

TreeEnsembleModel train_gradient_boosting(const std::vector<std::vector<double>>& x,
                                          const std::vector<int>& y, size_t n_classes,
                                          const TreeConfig& config, uint64_t seed);

// Per-sample class scores summing to 1 (vote fractions / softmax).
std::vector<std::vector<double>> predict_scores(const TreeEnsembleModel& model,
                                                const std::vector<std::vector<double>>& x);
std::vector<int> predict(const TreeEnsembleModel& model,
                         const std::vector<std::vector<double>>& x);

struct GridSearchRow {
    TreeConfig config;
    double validation_score = 0.0;
    double runtime_s = 0.0;
};

struct GridSearchResult {
    TreeConfig best;
    double best_score = 0.0;
    std::vector<GridSearchRow> table;  // grid order
};

// Exhaustive search maximizing validation balanced accuracy. Ties break by
// fewer trees, then shallower depth (unlimited = deepest), then grid order.
GridSearchResult grid_search_trees(const std::string& kind,
                                   const std::vector<TreeConfig>& grid,
                                   const std::vector<std::vector<double>>& x_train,
                                   const std::vector<int>& y_train,
                                   const std::vector<std::vector<double>>& x_val,
                                   const std::vector<int>& y_val, size_t n_classes,
                                   uint64_t seed);

std::vector<TreeConfig> default_tree_grid(const std::string& kind);

void write_tree_model_json(std::ostream& out, const TreeEnsembleModel& model);
TreeEnsembleModel read_tree_model_json(std::istream& in);

// Inverse-frequency sample weights normalized to mean 1; uniform when off.
std::vector<double> class_balanced_weights(const std::vector<int>& y, size_t n_classes,
                                           bool enabled);

}  // namespace obfugraph
