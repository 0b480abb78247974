#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "obfugraph/tensor.hpp"

// Message-passing GNNs (GCN, SAGE, GIN) over attributed CFGs, with a
// sum/mean readout and a 2-layer perceptron head. Training minimizes
// class-weighted softmax cross-entropy with Adam; runs are deterministic
// in (data, config, seed) on a fixed kernel ISA.

namespace obfugraph {

enum class GnnArch { gcn, sage, gin };
enum class Readout { sum, mean };

const std::string& to_string(GnnArch arch);
const std::string& to_string(Readout readout);
std::optional<GnnArch> gnn_arch_from_string(const std::string& s);

struct GnnConfig {
    GnnArch arch = GnnArch::gin;
    int n_layers = 3;
    int hidden = 64;
    Readout readout = Readout::sum;
    double learning_rate = 3e-3;
    int epochs = 50;
    int batch_size = 32;
    bool class_weights = true;
    bool symmetrize = true;  // message passing over A union A^T
    uint64_t seed = 0;
};

// One graph ready for batching: features are row-major (n_nodes x dim);
// edges use node row indices.
struct GraphData {
    size_t n_nodes = 0;
    size_t dim = 0;
    std::vector<double> x;
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    int label = 0;
};

// Precomputed aggregation edge lists for the three layer kinds.
struct LayerStructure {
    size_t n_nodes = 0;
    EdgeList gcn;   // symmetrized + self loops, D^-1/2 (A+I) D^-1/2 coefficients
    EdgeList mean;  // neighbor mean (1/deg(dst)), no self loops
    EdgeList sum;   // neighbor sum (coeff 1), no self loops
};

LayerStructure build_layer_structure(
    size_t n_nodes, const std::vector<std::pair<uint32_t, uint32_t>>& directed_edges,
    bool symmetrize);

struct GnnBatch {
    size_t n_graphs = 0;
    size_t dim = 0;
    std::vector<double> x;  // (total nodes x dim)
    std::vector<uint32_t> membership;
    std::vector<int> labels;
    LayerStructure structure;
};

GnnBatch build_batch(const std::vector<const GraphData*>& graphs, bool symmetrize);

// Single message-passing layers (also used directly by tests).
Tensor layer_forward_gcn(const Tensor& h, const LayerStructure& s, const Tensor& w);
Tensor layer_forward_sage(const Tensor& h, const LayerStructure& s, const Tensor& w_self,
                          const Tensor& w_neigh);
Tensor layer_forward_gin(const Tensor& h, const LayerStructure& s, const Tensor& eps,
                         const Tensor& w1, const Tensor& b1, const Tensor& w2,
                         const Tensor& b2);
Tensor readout(const Tensor& h, const std::vector<uint32_t>& membership, size_t n_graphs,
               Readout method);

// Serializable model: flat weight arrays in a fixed parameter order.
struct GnnModel {
    GnnConfig config;
    size_t in_dim = 0;
    size_t n_classes = 0;
    std::string feature_scheme;
    std::vector<std::string> class_names;
    std::vector<std::vector<double>> weights;
};

// Parameter shapes in serialization order for (config, in_dim, n_classes).
std::vector<std::pair<size_t, size_t>> parameter_shapes(const GnnConfig& config,
                                                        size_t in_dim, size_t n_classes);
// Seeded uniform fan-in initialization (GIN eps starts at 0).
GnnModel init_gnn_model(const GnnConfig& config, size_t in_dim, size_t n_classes);
std::vector<Tensor> materialize_params(const GnnModel& model, bool requires_grad);

Tensor gnn_forward(const GnnConfig& config, const std::vector<Tensor>& params,
                   const GnnBatch& batch);
std::vector<int> gnn_predict(const GnnModel& model, const std::vector<GraphData>& graphs);

class TrainingFault : public std::runtime_error {
public:
    TrainingFault(int epoch, int batch, const std::string& what);
    int epoch() const { return epoch_; }
    int batch() const { return batch_; }

private:
    int epoch_;
    int batch_;
};

struct TrainLogRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_balanced_accuracy = 0.0;
};

struct TrainedGnn {
    GnnModel model;  // best-validation checkpoint
    std::vector<TrainLogRow> log;
    double best_val_balanced_accuracy = 0.0;
    int best_epoch = -1;
};

TrainedGnn train_gnn(const std::vector<GraphData>& train,
                     const std::vector<GraphData>& validation, const GnnConfig& config,
                     size_t n_classes);

struct GnnSearchSpace {
    std::vector<int> n_layers = {2, 3, 4, 5};
    std::vector<int> hidden = {32, 64, 128, 256};
    double lr_min = 1e-4;
    double lr_max = 1e-2;
    std::vector<int> batch_size = {16, 32, 64};
    std::vector<Readout> readouts = {Readout::sum, Readout::mean};
    int epochs = 100;
};

struct TuneTrialRow {
    int seed_index = 0;
    int trial = 0;
    GnnConfig config;
    double val_balanced_accuracy = 0.0;
};

struct TuneResult {
    GnnConfig best;
    double best_score = 0.0;
    TrainedGnn best_run;
    std::vector<TuneTrialRow> table;
};

// Random search: n_trials configs sampled independently per seed; best
// (config, seed) by validation balanced accuracy wins.
TuneResult tune_gnn(const GnnSearchSpace& space, GnnArch arch,
                    const std::vector<GraphData>& train,
                    const std::vector<GraphData>& validation, size_t n_classes,
                    int n_trials, int n_seeds, uint64_t meta_seed);

// Central finite differences (step h) against reverse-mode gradients for
// the loss produced by loss_fn, over every element of params. Returns the
// max relative error (denominator floored at 1e-4).
double gradient_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor>& params,
                      double step = 1e-5);

void write_gnn_model_json(std::ostream& out, const GnnModel& model);
GnnModel read_gnn_model_json(std::istream& in);
void write_training_log_csv(std::ostream& out, const std::vector<TrainLogRow>& log);

std::vector<double> gnn_class_weights(const std::vector<int>& labels, size_t n_classes,
                                      bool enabled);

}  // namespace obfugraph
