#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "obfugraph/cfg.hpp"
#include "obfugraph/dataset.hpp"
#include "obfugraph/features.hpp"
#include "obfugraph/gnn.hpp"
#include "obfugraph/metrics.hpp"
#include "obfugraph/trees.hpp"

// End-to-end benchmark harness: trains one model per (features, algorithm)
// cell on the manifest's train split (validation used for checkpoint/model
// selection), evaluates on test, and emits a machine-readable table.
// Per-cell failures are recorded in the table and the run continues.

namespace obfugraph {

struct BenchmarkCell {
    std::string features;   // graph23|tfidf128|identity|mclass27|pcode_sem|asm_sem
    std::string algorithm;  // rf|gb|gcn|sage|gin (gat|unet recorded unimplemented)
    std::string task;       // binary|multiclass
    std::string mode = "obfuscated_only";  // multiclass scoring mode
};

struct BenchmarkSpec {
    std::string dataset_id = "dataset";
    uint64_t seed = 0;
    std::vector<BenchmarkCell> cells;
    TreeConfig tree_config;
    bool tree_grid_search = false;
    GnnConfig gnn_config;  // arch is overridden per cell
    // Train each GNN cell with this many derived seeds and keep the run
    // with the best validation balanced accuracy.
    int gnn_seeds = 1;
    // When > 0, each GNN cell runs a budgeted random hyperparameter search
    // (gnn_trials per seed, gnn_seeds seeds) instead of the fixed config.
    int gnn_trials = 0;
    bool exclude_degenerate = true;
};

struct BenchmarkRow {
    BenchmarkCell cell;
    size_t dim = 0;
    std::string dataset_id;
    double balanced_accuracy = 0.0;
    double runtime_s = 0.0;
    std::string status;  // "ok" | "failed" | "unimplemented"
    std::string error;
    std::optional<EvalReport> report;
};

BenchmarkSpec load_benchmark_spec(std::istream& in);
void write_benchmark_spec(std::ostream& out, const BenchmarkSpec& spec);

std::vector<BenchmarkRow> run_benchmark(const std::vector<FunctionSample>& corpus,
                                        const SplitManifest& manifest,
                                        const BenchmarkSpec& spec);

// CSV columns: features,dim,algorithm,dataset,task,balanced_accuracy,runtime_s
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows);
void write_benchmark_json(std::ostream& out, const std::vector<BenchmarkRow>& rows);

// ---- shared pipeline pieces (also used by the CLI) ----

// Class list for a task/mode; multiclass obfuscated_only excludes None.
std::vector<std::string> task_class_names(const std::string& task, const std::string& mode);
// Label index of a sample under a task/mode; nullopt = not eligible.
std::optional<int> task_label(const FunctionSample& sample, const std::string& task,
                              const std::string& mode);

struct SplitIndices {
    std::vector<size_t> train, validation, test;
};
SplitIndices split_indices(const std::vector<FunctionSample>& corpus,
                           const SplitManifest& manifest, bool exclude_degenerate);

// Node features + edge list keyed to node rows, ready for GNN batching.
GraphData graph_data_for(const FunctionSample& sample, const std::string& scheme,
                         const FeatureContext& context, int label);

// Serialized trained model plus its bound feature context.
struct ModelFile {
    std::string family;  // "trees" | "gnn"
    std::string task;
    std::string mode;
    std::vector<std::string> class_names;
    TreeEnsembleModel tree;
    GnnModel gnn;
    TfidfModel tfidf;                    // tfidf128 binding
    MnemonicVocabulary vocabulary;       // pcode_sem/asm_sem binding
};

void write_model_file(std::ostream& out, const ModelFile& model);
ModelFile read_model_file(std::istream& in);

struct TrainOutcome {
    ModelFile model;
    std::vector<TrainLogRow> log;  // per-epoch log (GNN only)
    size_t feature_dim = 0;
};

// Trains one (features, algorithm, task, mode) cell on the manifest's
// train split; validation drives checkpointing / grid selection. Feature
// contexts (TF-IDF, vocabularies) are fitted on the train split only and
// embedded in the returned model.
TrainOutcome train_cell_model(const std::vector<FunctionSample>& corpus,
                              const SplitManifest& manifest, const BenchmarkCell& cell,
                              const BenchmarkSpec& spec);

// Featurize + predict with a loaded model over arbitrary samples.
std::vector<int> model_predict(const ModelFile& model,
                               const std::vector<FunctionSample>& samples);

const std::string& model_feature_scheme(const ModelFile& model);

}  // namespace obfugraph
