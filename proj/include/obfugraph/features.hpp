#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "obfugraph/cfg.hpp"
#include "obfugraph/taxonomy.hpp"

// Feature extraction: graph-level vectors for the tree baselines and
// per-node matrices for the GNNs. All featurizers are pure and
// deterministic; node matrices carry the block order they were built in.

namespace obfugraph {

inline constexpr int kGraphFeatureDim = 23;
inline constexpr int kTfidfDim = 128;
inline constexpr int kStructuralDim = 11;

struct GraphFeatureVector {
    std::string scheme;          // "graph23" | "tfidf128"
    std::vector<double> values;  // finite, length fixed by scheme
};

struct NodeFeatureMatrix {
    std::string scheme;  // "identity" | "mclass27" | "pcode_sem" | "asm_sem"
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> values;           // row-major, rows*cols
    std::vector<std::string> node_order;  // block id per row

    double at(size_t r, size_t c) const { return values[r * cols + c]; }
    double& at(size_t r, size_t c) { return values[r * cols + c]; }
};

struct TfidfModel {
    std::vector<std::string> tokens;  // <= 128, vocabulary order
    std::vector<double> idf;          // parallel, finite, >= 0
    size_t fitted_corpus_size = 0;
};

// Context a node-feature scheme may need. identity needs nothing; mclass27
// needs the taxonomy; pcode_sem/asm_sem need their vocabulary (plus the
// taxonomy for the structural slice).
struct FeatureContext {
    const MnemonicClassTaxonomy* taxonomy = nullptr;
    const MnemonicVocabulary* pcode_vocab = nullptr;
    const MnemonicVocabulary* asm_vocab = nullptr;
};

// Fixed 23-component graph-level vector, in order:
//   [0] n_nodes                [1] n_edges
//   [2] cyclomatic complexity  [3] density
//   [4] mean out-degree        [5] max out-degree
//   [6] mean in-degree         [7] max in-degree
//   [8] n weakly-connected components
//   [9] n leaf nodes (out-degree 0)
//   [10] n branch nodes (out-degree >= 2)
//   [11] longest path length on the SCC condensation (edges)
//   [12] n back edges (DFS from entry, successors in edge order)
//   [13] total instructions    [14] mean instructions per block
//   [15] max instructions per block
//   [16..22] whole-function mnemonic counts per broad category:
//            data-movement, arithmetic, logic/bitwise, shift/rotate,
//            control-transfer, compare/test, other
GraphFeatureVector graph_level_features(const ControlFlowGraph& cfg,
                                        const MnemonicClassTaxonomy& taxonomy);

// E - N + 2P with P = number of weakly-connected components.
int cyclomatic_complexity(const ControlFlowGraph& cfg);

// Top-128 mnemonics by total count; idf = ln((1+N)/(1+df)) + 1.
TfidfModel tfidf_fit(const std::vector<FunctionSample>& corpus);
// Component i = raw count of token i in the function times idf(i);
// zero-padded to 128.
GraphFeatureVector tfidf_transform(const TfidfModel& model, const ControlFlowGraph& cfg);

NodeFeatureMatrix node_features(const ControlFlowGraph& cfg, const std::string& scheme,
                                const FeatureContext& context);

// Pcode-token vocabulary over effective pcode ops (record pcode when
// present, fallback table otherwise).
MnemonicVocabulary build_pcode_vocabulary(const std::vector<FunctionSample>& corpus,
                                          size_t max_size = 0);

size_t node_feature_dim(const std::string& scheme, const FeatureContext& context);

// Debug export: one JSON line per function,
// {function_id, scheme, node_order, rows}.
void write_feature_matrix_jsonl(std::ostream& out, const std::string& function_id,
                                const NodeFeatureMatrix& matrix);

}  // namespace obfugraph
