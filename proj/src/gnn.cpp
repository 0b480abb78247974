#include "obfugraph/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "obfugraph/rng.hpp"

namespace obfugraph {

namespace {

const std::string kArchNames[3] = {"gcn", "sage", "gin"};
const std::string kReadoutNames[2] = {"sum", "mean"};

}  // namespace

const std::string& to_string(GnnArch arch) { return kArchNames[static_cast<size_t>(arch)]; }
const std::string& to_string(Readout readout) {
    return kReadoutNames[static_cast<size_t>(readout)];
}

std::optional<GnnArch> gnn_arch_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (kArchNames[i] == s) return static_cast<GnnArch>(i);
    return std::nullopt;
}

LayerStructure build_layer_structure(
    size_t n_nodes, const std::vector<std::pair<uint32_t, uint32_t>>& directed_edges,
    bool symmetrize) {
    LayerStructure s;
    s.n_nodes = n_nodes;

    // Neighbor relation: ordered set keeps aggregation order reproducible.
    std::set<std::pair<uint32_t, uint32_t>> relation;
    for (const auto& [u, v] : directed_edges) {
        if (u >= n_nodes || v >= n_nodes)
            throw std::invalid_argument("build_layer_structure: edge index out of range");
        if (u == v) continue;  // self influence is handled per layer kind
        relation.insert({u, v});
        if (symmetrize) relation.insert({v, u});
    }

    std::vector<double> degree(n_nodes, 0.0);  // incoming neighbor count
    for (const auto& [u, v] : relation) {
        (void)u;
        degree[v] += 1.0;
    }

    for (const auto& [u, v] : relation) {
        s.sum.src.push_back(u);
        s.sum.dst.push_back(v);
        s.sum.coeff.push_back(1.0);
        s.mean.src.push_back(u);
        s.mean.dst.push_back(v);
        s.mean.coeff.push_back(1.0 / degree[v]);
    }

    // GCN: A_hat = relation + self loops, D^-1/2 A_hat D^-1/2.
    std::vector<double> dhat(n_nodes, 1.0);
    for (const auto& [u, v] : relation) {
        (void)u;
        dhat[v] += 1.0;
    }
    for (const auto& [u, v] : relation) {
        s.gcn.src.push_back(u);
        s.gcn.dst.push_back(v);
        s.gcn.coeff.push_back(1.0 / std::sqrt(dhat[u] * dhat[v]));
    }
    for (uint32_t v = 0; v < n_nodes; ++v) {
        s.gcn.src.push_back(v);
        s.gcn.dst.push_back(v);
        s.gcn.coeff.push_back(1.0 / dhat[v]);
    }
    return s;
}

GnnBatch build_batch(const std::vector<const GraphData*>& graphs, bool symmetrize) {
    if (graphs.empty()) throw std::invalid_argument("build_batch: empty batch");
    GnnBatch batch;
    batch.n_graphs = graphs.size();
    batch.dim = graphs[0]->dim;

    size_t total_nodes = 0;
    for (const auto* g : graphs) {
        if (g->dim != batch.dim)
            throw std::invalid_argument("build_batch: inconsistent feature dims");
        if (g->n_nodes == 0) throw std::invalid_argument("build_batch: empty graph");
        total_nodes += g->n_nodes;
    }

    batch.x.reserve(total_nodes * batch.dim);
    batch.membership.reserve(total_nodes);
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    uint32_t offset = 0;
    for (size_t gi = 0; gi < graphs.size(); ++gi) {
        const auto* g = graphs[gi];
        batch.x.insert(batch.x.end(), g->x.begin(), g->x.end());
        for (size_t r = 0; r < g->n_nodes; ++r)
            batch.membership.push_back(static_cast<uint32_t>(gi));
        for (const auto& [u, v] : g->edges) edges.emplace_back(u + offset, v + offset);
        batch.labels.push_back(g->label);
        offset += static_cast<uint32_t>(g->n_nodes);
    }
    batch.structure = build_layer_structure(total_nodes, edges, symmetrize);
    return batch;
}

Tensor layer_forward_gcn(const Tensor& h, const LayerStructure& s, const Tensor& w) {
    Tensor agg = edge_aggregate(h, s.gcn, s.n_nodes);
    return relu(matmul(agg, w));
}

Tensor layer_forward_sage(const Tensor& h, const LayerStructure& s, const Tensor& w_self,
                          const Tensor& w_neigh) {
    Tensor neigh = edge_aggregate(h, s.mean, s.n_nodes);
    return relu(add(matmul(h, w_self), matmul(neigh, w_neigh)));
}

Tensor layer_forward_gin(const Tensor& h, const LayerStructure& s, const Tensor& eps,
                         const Tensor& w1, const Tensor& b1, const Tensor& w2,
                         const Tensor& b2) {
    Tensor combined = add(scale_shift(h, eps), edge_aggregate(h, s.sum, s.n_nodes));
    Tensor hidden = relu(add_rowvec(matmul(combined, w1), b1));
    return add_rowvec(matmul(hidden, w2), b2);
}

Tensor readout(const Tensor& h, const std::vector<uint32_t>& membership, size_t n_graphs,
               Readout method) {
    return segment_reduce(h, membership, n_graphs, method == Readout::mean);
}

std::vector<std::pair<size_t, size_t>> parameter_shapes(const GnnConfig& config,
                                                        size_t in_dim, size_t n_classes) {
    if (config.n_layers < 1) throw std::invalid_argument("gnn: n_layers must be >= 1");
    size_t h = static_cast<size_t>(config.hidden);
    std::vector<std::pair<size_t, size_t>> shapes;
    size_t d = in_dim;
    for (int layer = 0; layer < config.n_layers; ++layer) {
        switch (config.arch) {
            case GnnArch::gcn:
                shapes.push_back({d, h});
                break;
            case GnnArch::sage:
                shapes.push_back({d, h});  // w_self
                shapes.push_back({d, h});  // w_neigh
                break;
            case GnnArch::gin:
                shapes.push_back({1, 1});  // eps
                shapes.push_back({d, h});  // w1
                shapes.push_back({1, h});  // b1
                shapes.push_back({h, h});  // w2
                shapes.push_back({1, h});  // b2
                break;
        }
        d = h;
    }
    // Head: 2-layer perceptron.
    shapes.push_back({h, h});
    shapes.push_back({1, h});
    shapes.push_back({h, n_classes});
    shapes.push_back({1, n_classes});
    return shapes;
}

GnnModel init_gnn_model(const GnnConfig& config, size_t in_dim, size_t n_classes) {
    GnnModel model;
    model.config = config;
    model.in_dim = in_dim;
    model.n_classes = n_classes;

    Rng rng(derive_seed(config.seed, 0x1217));
    auto shapes = parameter_shapes(config, in_dim, n_classes);
    size_t index = 0;
    size_t per_layer = config.arch == GnnArch::gin ? 5 : (config.arch == GnnArch::sage ? 2 : 1);
    size_t layer_params = per_layer * static_cast<size_t>(config.n_layers);
    for (const auto& [rows, cols] : shapes) {
        std::vector<double> values(rows * cols, 0.0);
        bool is_gin_eps = config.arch == GnnArch::gin && index < layer_params &&
                          index % 5 == 0;
        if (!is_gin_eps) {
            // Uniform fan-in scaling; bias rows use the fan-in of their layer.
            double fan_in = static_cast<double>(rows == 1 ? cols : rows);
            double bound = 1.0 / std::sqrt(fan_in);
            for (double& v : values) v = rng.range(-bound, bound);
        }
        model.weights.push_back(std::move(values));
        ++index;
    }
    return model;
}

std::vector<Tensor> materialize_params(const GnnModel& model, bool requires_grad) {
    auto shapes = parameter_shapes(model.config, model.in_dim, model.n_classes);
    if (shapes.size() != model.weights.size())
        throw std::invalid_argument("gnn model: weight count does not match architecture");
    std::vector<Tensor> params;
    params.reserve(shapes.size());
    for (size_t i = 0; i < shapes.size(); ++i) {
        if (model.weights[i].size() != shapes[i].first * shapes[i].second)
            throw std::invalid_argument("gnn model: weight shape mismatch at index " +
                                        std::to_string(i));
        params.push_back(
            make_tensor(shapes[i].first, shapes[i].second, model.weights[i], requires_grad));
    }
    return params;
}

Tensor gnn_forward(const GnnConfig& config, const std::vector<Tensor>& params,
                   const GnnBatch& batch) {
    size_t total_nodes = batch.membership.size();
    Tensor h = make_tensor(total_nodes, batch.dim, batch.x, false);
    size_t p = 0;
    for (int layer = 0; layer < config.n_layers; ++layer) {
        switch (config.arch) {
            case GnnArch::gcn:
                h = layer_forward_gcn(h, batch.structure, params[p]);
                p += 1;
                break;
            case GnnArch::sage:
                h = layer_forward_sage(h, batch.structure, params[p], params[p + 1]);
                p += 2;
                break;
            case GnnArch::gin:
                h = layer_forward_gin(h, batch.structure, params[p], params[p + 1],
                                      params[p + 2], params[p + 3], params[p + 4]);
                p += 5;
                break;
        }
    }
    Tensor g = readout(h, batch.membership, batch.n_graphs, config.readout);
    Tensor z = relu(add_rowvec(matmul(g, params[p]), params[p + 1]));
    return add_rowvec(matmul(z, params[p + 2]), params[p + 3]);
}

std::vector<int> gnn_predict(const GnnModel& model, const std::vector<GraphData>& graphs) {
    auto params = materialize_params(model, false);
    std::vector<int> out;
    out.reserve(graphs.size());
    size_t batch_size = static_cast<size_t>(std::max(1, model.config.batch_size));
    for (size_t start = 0; start < graphs.size(); start += batch_size) {
        std::vector<const GraphData*> chunk;
        for (size_t i = start; i < std::min(graphs.size(), start + batch_size); ++i)
            chunk.push_back(&graphs[i]);
        GnnBatch batch = build_batch(chunk, model.config.symmetrize);
        Tensor logits = gnn_forward(model.config, params, batch);
        const auto& v = logits.values();
        for (size_t i = 0; i < chunk.size(); ++i) {
            size_t best = 0;
            for (size_t c = 1; c < model.n_classes; ++c)
                if (v[i * model.n_classes + c] > v[i * model.n_classes + best]) best = c;
            out.push_back(static_cast<int>(best));
        }
    }
    return out;
}

TrainingFault::TrainingFault(int epoch, int batch, const std::string& what)
    : std::runtime_error("training fault at epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch) + ": " + what),
      epoch_(epoch),
      batch_(batch) {}

std::vector<double> gnn_class_weights(const std::vector<int>& labels, size_t n_classes,
                                      bool enabled) {
    std::vector<double> weights(n_classes, 1.0);
    if (!enabled || labels.empty()) return weights;
    std::vector<double> counts(n_classes, 0.0);
    for (int label : labels) counts[static_cast<size_t>(label)] += 1.0;
    // Inverse frequency, normalized so the mean sample weight is 1.
    double raw_sum = 0.0;
    for (int label : labels) raw_sum += 1.0 / counts[static_cast<size_t>(label)];
    double scale = static_cast<double>(labels.size()) / raw_sum;
    for (size_t c = 0; c < n_classes; ++c)
        weights[c] = counts[c] > 0.0 ? scale / counts[c] : 1.0;
    return weights;
}

namespace {

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    int t = 0;

    explicit AdamState(const std::vector<Tensor>& params) {
        for (const auto& p : params) {
            m.emplace_back(p.size(), 0.0);
            v.emplace_back(p.size(), 0.0);
        }
    }

    void step(std::vector<Tensor>& params, double lr) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        ++t;
        double bc1 = 1.0 - std::pow(beta1, t);
        double bc2 = 1.0 - std::pow(beta2, t);
        for (size_t i = 0; i < params.size(); ++i) {
            auto& values = params[i].values();
            auto& grad = params[i].grad();
            for (size_t j = 0; j < values.size(); ++j) {
                m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * grad[j];
                v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * grad[j] * grad[j];
                values[j] -= lr * (m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps);
            }
        }
    }
};

double balanced_accuracy_simple(const std::vector<int>& pred, const std::vector<int>& truth,
                                size_t n_classes) {
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
}

}  // namespace

TrainedGnn train_gnn(const std::vector<GraphData>& train,
                     const std::vector<GraphData>& validation, const GnnConfig& config,
                     size_t n_classes) {
    if (train.empty()) throw std::invalid_argument("train_gnn: empty training set");
    if (config.batch_size < 1) throw std::invalid_argument("train_gnn: batch_size must be >= 1");
    size_t in_dim = train[0].dim;
    for (const auto& g : train)
        if (g.dim != in_dim)
            throw std::invalid_argument("train_gnn: inconsistent feature dimensions");

    TrainedGnn result;
    result.model = init_gnn_model(config, in_dim, n_classes);
    if (config.epochs == 0) return result;

    auto params = materialize_params(result.model, true);
    AdamState adam(params);

    std::vector<int> train_labels;
    for (const auto& g : train) train_labels.push_back(g.label);
    auto class_weights = gnn_class_weights(train_labels, n_classes, config.class_weights);

    std::vector<int> val_truth;
    for (const auto& g : validation) val_truth.push_back(g.label);

    std::vector<std::vector<double>> best_weights;
    double best_val = -1.0;
    int best_epoch = -1;

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    size_t batch_size = static_cast<size_t>(config.batch_size);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, static_cast<uint64_t>(epoch), 0xe90c));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        size_t n_batches = 0;
        for (size_t start = 0; start < order.size(); start += batch_size) {
            std::vector<const GraphData*> chunk;
            std::vector<int> labels;
            for (size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
                chunk.push_back(&train[order[i]]);
                labels.push_back(train[order[i]].label);
            }
            GnnBatch batch = build_batch(chunk, config.symmetrize);
            Tensor logits = gnn_forward(config, params, batch);
            Tensor loss = softmax_cross_entropy(logits, labels, class_weights);
            double value = loss.values()[0];
            if (!std::isfinite(value))
                throw TrainingFault(epoch, static_cast<int>(n_batches),
                                    "non-finite loss value");
            for (auto& p : params) p.zero_grad();
            backward(loss);
            adam.step(params, config.learning_rate);
            epoch_loss += value;
            ++n_batches;
        }
        epoch_loss /= static_cast<double>(n_batches);

        // Validation balanced accuracy under the current weights.
        for (size_t i = 0; i < params.size(); ++i)
            result.model.weights[i] = params[i].values();
        double val_score = 0.0;
        if (!validation.empty()) {
            auto pred = gnn_predict(result.model, validation);
            val_score = balanced_accuracy_simple(pred, val_truth, n_classes);
        }
        result.log.push_back({epoch, epoch_loss, val_score});
        // Without a validation set there is nothing to checkpoint against;
        // the final weights win.
        if (val_score > best_val || validation.empty()) {
            best_val = val_score;
            best_epoch = epoch;
            best_weights = result.model.weights;
        }
    }

    if (!best_weights.empty()) result.model.weights = std::move(best_weights);
    result.best_val_balanced_accuracy = best_val;
    result.best_epoch = best_epoch;
    return result;
}

TuneResult tune_gnn(const GnnSearchSpace& space, GnnArch arch,
                    const std::vector<GraphData>& train,
                    const std::vector<GraphData>& validation, size_t n_classes,
                    int n_trials, int n_seeds, uint64_t meta_seed) {
    if (space.n_layers.empty() || space.hidden.empty() || space.batch_size.empty() ||
        space.readouts.empty())
        throw std::invalid_argument("tune_gnn: empty search space");

    TuneResult result;
    bool have_best = false;
    for (int seed_index = 0; seed_index < n_seeds; ++seed_index) {
        Rng rng(derive_seed(meta_seed, static_cast<uint64_t>(seed_index), 0x0b71));
        for (int trial = 0; trial < n_trials; ++trial) {
            GnnConfig config;
            config.arch = arch;
            config.n_layers = space.n_layers[rng.index(space.n_layers.size())];
            config.hidden = space.hidden[rng.index(space.hidden.size())];
            config.learning_rate = rng.log_range(space.lr_min, space.lr_max);
            config.batch_size = space.batch_size[rng.index(space.batch_size.size())];
            config.readout = space.readouts[rng.index(space.readouts.size())];
            config.epochs = space.epochs;
            config.seed = derive_seed(meta_seed, static_cast<uint64_t>(seed_index), 0x5eed);

            TrainedGnn run = train_gnn(train, validation, config, n_classes);
            result.table.push_back(
                {seed_index, trial, config, run.best_val_balanced_accuracy});
            if (!have_best || run.best_val_balanced_accuracy > result.best_score) {
                have_best = true;
                result.best_score = run.best_val_balanced_accuracy;
                result.best = config;
                result.best_run = std::move(run);
            }
        }
    }
    return result;
}

double gradient_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor>& params,
                      double step) {
    Tensor loss = loss_fn();
    for (auto& p : params) p.zero_grad();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(p.grad());

    double max_rel = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        auto& values = params[i].values();
        for (size_t j = 0; j < values.size(); ++j) {
            double original = values[j];
            values[j] = original + step;
            double up = loss_fn().values()[0];
            values[j] = original - step;
            double down = loss_fn().values()[0];
            values[j] = original;
            double numeric = (up - down) / (2.0 * step);
            double denom = std::max({std::abs(numeric), std::abs(analytic[i][j]), 1e-4});
            max_rel = std::max(max_rel, std::abs(numeric - analytic[i][j]) / denom);
        }
    }
    return max_rel;
}

namespace {

nlohmann::ordered_json gnn_config_to_json(const GnnConfig& config) {
    nlohmann::ordered_json j;
    j["arch"] = to_string(config.arch);
    j["n_layers"] = config.n_layers;
    j["hidden"] = config.hidden;
    j["readout"] = to_string(config.readout);
    j["learning_rate"] = config.learning_rate;
    j["epochs"] = config.epochs;
    j["batch_size"] = config.batch_size;
    j["class_weights"] = config.class_weights;
    j["symmetrize"] = config.symmetrize;
    j["seed"] = config.seed;
    return j;
}

GnnConfig gnn_config_from_json(const nlohmann::json& j) {
    GnnConfig config;
    auto arch = gnn_arch_from_string(j.at("arch").get<std::string>());
    if (!arch) throw std::runtime_error("gnn model: unknown arch");
    config.arch = *arch;
    config.n_layers = j.at("n_layers").get<int>();
    config.hidden = j.at("hidden").get<int>();
    config.readout =
        j.at("readout").get<std::string>() == "mean" ? Readout::mean : Readout::sum;
    config.learning_rate = j.at("learning_rate").get<double>();
    config.epochs = j.at("epochs").get<int>();
    config.batch_size = j.at("batch_size").get<int>();
    config.class_weights = j.at("class_weights").get<bool>();
    config.symmetrize = j.at("symmetrize").get<bool>();
    config.seed = j.at("seed").get<uint64_t>();
    return config;
}

}  // namespace

void write_gnn_model_json(std::ostream& out, const GnnModel& model) {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["kind"] = "gnn";
    j["config"] = gnn_config_to_json(model.config);
    j["in_dim"] = model.in_dim;
    j["n_classes"] = model.n_classes;
    j["feature_scheme"] = model.feature_scheme;
    j["class_names"] = model.class_names;
    j["weights"] = model.weights;  // row-major flat arrays, parameter order
    out << j.dump() << '\n';
}

GnnModel read_gnn_model_json(std::istream& in) {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported gnn model format version");
    GnnModel model;
    model.config = gnn_config_from_json(j.at("config"));
    model.in_dim = j.at("in_dim").get<size_t>();
    model.n_classes = j.at("n_classes").get<size_t>();
    model.feature_scheme = j.at("feature_scheme").get<std::string>();
    model.class_names = j.at("class_names").get<std::vector<std::string>>();
    model.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    materialize_params(model, false);  // shape check
    return model;
}

void write_training_log_csv(std::ostream& out, const std::vector<TrainLogRow>& log) {
    out << "epoch,train_loss,val_balanced_accuracy\n";
    for (const auto& row : log)
        out << row.epoch << ',' << row.train_loss << ',' << row.val_balanced_accuracy << '\n';
}

}  // namespace obfugraph
