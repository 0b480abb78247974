#include "obfugraph/features.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace obfugraph {

namespace {

// Index-based view of a CFG for graph computations. Successor lists keep
// edge-list order so DFS-based metrics are reproducible.
struct GraphIndex {
    std::unordered_map<std::string, size_t> id_to_index;
    std::vector<std::vector<size_t>> succ;
    std::vector<size_t> in_degree;
    std::vector<size_t> out_degree;
    size_t entry = 0;

    explicit GraphIndex(const ControlFlowGraph& cfg) {
        size_t n = cfg.blocks.size();
        succ.resize(n);
        in_degree.assign(n, 0);
        out_degree.assign(n, 0);
        for (size_t i = 0; i < n; ++i) id_to_index[cfg.blocks[i].id] = i;
        for (const auto& [src, dst] : cfg.edges) {
            size_t s = id_to_index.at(src), d = id_to_index.at(dst);
            succ[s].push_back(d);
            ++out_degree[s];
            ++in_degree[d];
        }
        entry = id_to_index.at(cfg.entry);
    }
};

// Iterative Tarjan SCC; returns component id per node.
std::vector<size_t> strongly_connected_components(const GraphIndex& g, size_t& n_comps) {
    size_t n = g.succ.size();
    std::vector<size_t> index(n, SIZE_MAX), lowlink(n, 0), comp(n, SIZE_MAX);
    std::vector<bool> on_stack(n, false);
    std::vector<size_t> stack;
    size_t counter = 0;
    n_comps = 0;

    struct Frame {
        size_t v;
        size_t child;
    };
    for (size_t root = 0; root < n; ++root) {
        if (index[root] != SIZE_MAX) continue;
        std::vector<Frame> call;
        call.push_back({root, 0});
        index[root] = lowlink[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.child < g.succ[f.v].size()) {
                size_t w = g.succ[f.v][f.child++];
                if (index[w] == SIZE_MAX) {
                    index[w] = lowlink[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    lowlink[f.v] = std::min(lowlink[f.v], index[w]);
                }
            } else {
                if (lowlink[f.v] == index[f.v]) {
                    while (true) {
                        size_t w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp[w] = n_comps;
                        if (w == f.v) break;
                    }
                    ++n_comps;
                }
                size_t v = f.v;
                call.pop_back();
                if (!call.empty())
                    lowlink[call.back().v] = std::min(lowlink[call.back().v], lowlink[v]);
            }
        }
    }
    return comp;
}

// Longest path (in edges) of the SCC condensation DAG.
size_t longest_condensation_path(const GraphIndex& g) {
    size_t n_comps = 0;
    auto comp = strongly_connected_components(g, n_comps);
    if (n_comps == 0) return 0;

    std::vector<std::unordered_set<size_t>> dag(n_comps);
    std::vector<size_t> indeg(n_comps, 0);
    for (size_t v = 0; v < g.succ.size(); ++v) {
        for (size_t w : g.succ[v]) {
            if (comp[v] != comp[w] && dag[comp[v]].insert(comp[w]).second)
                ++indeg[comp[w]];
        }
    }
    // Kahn topological order + DP.
    std::vector<size_t> order;
    order.reserve(n_comps);
    for (size_t c = 0; c < n_comps; ++c)
        if (indeg[c] == 0) order.push_back(c);
    std::vector<size_t> dist(n_comps, 0);
    size_t best = 0;
    for (size_t i = 0; i < order.size(); ++i) {
        size_t c = order[i];
        for (size_t d : dag[c]) {
            dist[d] = std::max(dist[d], dist[c] + 1);
            best = std::max(best, dist[d]);
            if (--indeg[d] == 0) order.push_back(d);
        }
    }
    return best;
}

// Back edges under DFS from entry, successors visited in edge-list order.
// Edges among blocks unreachable from entry are not classified.
size_t count_back_edges(const GraphIndex& g) {
    size_t n = g.succ.size();
    enum : uint8_t { white, gray, black };
    std::vector<uint8_t> color(n, white);
    size_t back = 0;

    struct Frame {
        size_t v;
        size_t child;
    };
    std::vector<Frame> stack;
    stack.push_back({g.entry, 0});
    color[g.entry] = gray;
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.child < g.succ[f.v].size()) {
            size_t w = g.succ[f.v][f.child++];
            if (color[w] == white) {
                color[w] = gray;
                stack.push_back({w, 0});
            } else if (color[w] == gray) {
                ++back;
            }
        } else {
            color[f.v] = black;
            stack.pop_back();
        }
    }
    return back;
}

void require_valid(const ControlFlowGraph& cfg, const char* op) {
    auto violations = validate_cfg(cfg);
    if (!violations.empty())
        throw std::invalid_argument(std::string(op) + ": invalid cfg: " + violations.front());
}

}  // namespace

int cyclomatic_complexity(const ControlFlowGraph& cfg) {
    require_valid(cfg, "cyclomatic_complexity");
    size_t p = weakly_connected_components(cfg);
    return static_cast<int>(cfg.n_edges()) - static_cast<int>(cfg.n_nodes()) +
           2 * static_cast<int>(p);
}

GraphFeatureVector graph_level_features(const ControlFlowGraph& cfg,
                                        const MnemonicClassTaxonomy& taxonomy) {
    require_valid(cfg, "graph_level_features");
    GraphIndex g(cfg);
    const size_t n = cfg.n_nodes();
    const size_t e = cfg.n_edges();

    GraphFeatureVector out;
    out.scheme = "graph23";
    out.values.assign(kGraphFeatureDim, 0.0);
    auto& v = out.values;

    v[0] = static_cast<double>(n);
    v[1] = static_cast<double>(e);
    v[2] = static_cast<double>(cyclomatic_complexity(cfg));
    v[3] = n > 1 ? static_cast<double>(e) / (static_cast<double>(n) * (n - 1)) : 0.0;
    v[4] = static_cast<double>(e) / static_cast<double>(n);
    v[5] = static_cast<double>(*std::max_element(g.out_degree.begin(), g.out_degree.end()));
    v[6] = static_cast<double>(e) / static_cast<double>(n);
    v[7] = static_cast<double>(*std::max_element(g.in_degree.begin(), g.in_degree.end()));
    v[8] = static_cast<double>(weakly_connected_components(cfg));
    size_t leaves = 0, branches = 0;
    for (size_t d : g.out_degree) {
        if (d == 0) ++leaves;
        if (d >= 2) ++branches;
    }
    v[9] = static_cast<double>(leaves);
    v[10] = static_cast<double>(branches);
    v[11] = static_cast<double>(longest_condensation_path(g));
    v[12] = static_cast<double>(count_back_edges(g));

    size_t total_insns = 0, max_insns = 0;
    std::vector<double> category(kNumBroadCategories, 0.0);
    for (const auto& block : cfg.blocks) {
        total_insns += block.insns.size();
        max_insns = std::max(max_insns, block.insns.size());
        for (const auto& insn : block.insns)
            category[static_cast<size_t>(taxonomy.broad_of(insn.mnemonic))] += 1.0;
    }
    v[13] = static_cast<double>(total_insns);
    v[14] = static_cast<double>(total_insns) / static_cast<double>(n);
    v[15] = static_cast<double>(max_insns);
    for (int c = 0; c < kNumBroadCategories; ++c) v[16 + c] = category[static_cast<size_t>(c)];
    return out;
}

TfidfModel tfidf_fit(const std::vector<FunctionSample>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("tfidf_fit: empty corpus");
    MnemonicVocabulary vocab = build_vocabulary(corpus, kTfidfDim);
    TfidfModel model;
    model.fitted_corpus_size = corpus.size();
    const double n = static_cast<double>(corpus.size());
    for (const auto& entry : vocab.entries) {
        model.tokens.push_back(entry.token);
        model.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(entry.doc_freq))) +
                            1.0);
    }
    return model;
}

GraphFeatureVector tfidf_transform(const TfidfModel& model, const ControlFlowGraph& cfg) {
    if (model.tokens.empty() && model.fitted_corpus_size == 0)
        throw std::invalid_argument("tfidf_transform: model not fitted");
    std::unordered_map<std::string, size_t> token_index;
    for (size_t i = 0; i < model.tokens.size(); ++i) token_index[model.tokens[i]] = i;

    GraphFeatureVector out;
    out.scheme = "tfidf128";
    out.values.assign(kTfidfDim, 0.0);
    for (const auto& block : cfg.blocks) {
        for (const auto& insn : block.insns) {
            auto it = token_index.find(insn.mnemonic);
            if (it != token_index.end()) out.values[it->second] += 1.0;
        }
    }
    for (size_t i = 0; i < model.tokens.size(); ++i) out.values[i] *= model.idf[i];
    return out;
}

MnemonicVocabulary build_pcode_vocabulary(const std::vector<FunctionSample>& corpus,
                                          size_t max_size) {
    if (corpus.empty()) throw std::invalid_argument("build_pcode_vocabulary: empty corpus");
    std::unordered_map<std::string, MnemonicVocabulary::Entry> stats;
    for (const auto& sample : corpus) {
        std::unordered_set<std::string> in_function;
        for (const auto& block : sample.cfg.blocks) {
            for (const auto& insn : block.insns) {
                for (const auto& op : effective_pcode_ops(insn)) {
                    auto& e = stats[op];
                    e.token = op;
                    ++e.total_count;
                    in_function.insert(op);
                }
            }
        }
        for (const auto& token : in_function) ++stats[token].doc_freq;
    }
    MnemonicVocabulary vocab;
    vocab.entries.reserve(stats.size());
    for (auto& [token, entry] : stats) vocab.entries.push_back(std::move(entry));
    std::sort(vocab.entries.begin(), vocab.entries.end(), [](const auto& a, const auto& b) {
        if (a.total_count != b.total_count) return a.total_count > b.total_count;
        return a.token < b.token;
    });
    if (max_size != 0 && vocab.entries.size() > max_size) vocab.entries.resize(max_size);
    return vocab;
}

size_t node_feature_dim(const std::string& scheme, const FeatureContext& context) {
    if (scheme == "identity") return 1;
    if (scheme == "mclass27") return kNumMnemonicClasses;
    if (scheme == "pcode_sem") {
        if (!context.pcode_vocab)
            throw std::invalid_argument("node_feature_dim: pcode_sem needs a pcode vocabulary");
        return kStructuralDim + context.pcode_vocab->size();
    }
    if (scheme == "asm_sem") {
        if (!context.asm_vocab)
            throw std::invalid_argument("node_feature_dim: asm_sem needs an assembly vocabulary");
        return kStructuralDim + context.asm_vocab->size();
    }
    throw std::invalid_argument("unknown node feature scheme \"" + scheme + "\"");
}

namespace {

// The 11 structural per-block features shared by pcode_sem and asm_sem:
// [n_instructions, in_degree, out_degree, is_entry, is_exit, n_call_like,
//  n_ret_like, n_cond_branch, n_uncond_branch, n_arithmetic, n_load_store]
void fill_structural(const ControlFlowGraph& cfg, const GraphIndex& g,
                     const MnemonicClassTaxonomy& taxonomy, NodeFeatureMatrix& m) {
    for (size_t r = 0; r < cfg.blocks.size(); ++r) {
        const auto& block = cfg.blocks[r];
        m.at(r, 0) = static_cast<double>(block.insns.size());
        m.at(r, 1) = static_cast<double>(g.in_degree[r]);
        m.at(r, 2) = static_cast<double>(g.out_degree[r]);
        m.at(r, 3) = r == g.entry ? 1.0 : 0.0;
        m.at(r, 4) = g.out_degree[r] == 0 ? 1.0 : 0.0;
        for (const auto& insn : block.insns) {
            const auto& t = taxonomy.traits_of(insn.mnemonic);
            if (t.call_like) m.at(r, 5) += 1.0;
            if (t.ret_like) m.at(r, 6) += 1.0;
            if (t.cond_branch) m.at(r, 7) += 1.0;
            if (t.uncond_branch) m.at(r, 8) += 1.0;
            if (t.arithmetic) m.at(r, 9) += 1.0;
            if (t.load_store) m.at(r, 10) += 1.0;
        }
    }
}

}  // namespace

NodeFeatureMatrix node_features(const ControlFlowGraph& cfg, const std::string& scheme,
                                const FeatureContext& context) {
    require_valid(cfg, "node_features");
    NodeFeatureMatrix m;
    m.scheme = scheme;
    m.rows = cfg.n_nodes();
    m.cols = node_feature_dim(scheme, context);
    m.values.assign(m.rows * m.cols, 0.0);
    for (const auto& block : cfg.blocks) m.node_order.push_back(block.id);

    if (scheme == "identity") {
        std::fill(m.values.begin(), m.values.end(), 1.0);
        return m;
    }

    if (scheme == "mclass27") {
        if (!context.taxonomy)
            throw std::invalid_argument("node_features: mclass27 needs a taxonomy");
        for (size_t r = 0; r < cfg.blocks.size(); ++r)
            for (const auto& insn : cfg.blocks[r].insns)
                m.at(r, static_cast<size_t>(context.taxonomy->class_of(insn.mnemonic))) += 1.0;
        return m;
    }

    const MnemonicClassTaxonomy& taxonomy =
        context.taxonomy ? *context.taxonomy : default_taxonomy();
    GraphIndex g(cfg);
    fill_structural(cfg, g, taxonomy, m);

    if (scheme == "pcode_sem") {
        std::unordered_map<std::string, size_t> token_index;
        for (size_t i = 0; i < context.pcode_vocab->entries.size(); ++i)
            token_index[context.pcode_vocab->entries[i].token] = i;
        for (size_t r = 0; r < cfg.blocks.size(); ++r) {
            for (const auto& insn : cfg.blocks[r].insns) {
                for (const auto& op : effective_pcode_ops(insn)) {
                    auto it = token_index.find(op);
                    if (it != token_index.end())
                        m.at(r, kStructuralDim + it->second) += 1.0;
                }
            }
        }
    } else {  // asm_sem
        std::unordered_map<std::string, size_t> token_index;
        for (size_t i = 0; i < context.asm_vocab->entries.size(); ++i)
            token_index[context.asm_vocab->entries[i].token] = i;
        for (size_t r = 0; r < cfg.blocks.size(); ++r) {
            for (const auto& insn : cfg.blocks[r].insns) {
                auto it = token_index.find(insn.mnemonic);
                if (it != token_index.end()) m.at(r, kStructuralDim + it->second) += 1.0;
            }
        }
    }
    return m;
}

void write_feature_matrix_jsonl(std::ostream& out, const std::string& function_id,
                                const NodeFeatureMatrix& matrix) {
    nlohmann::ordered_json j;
    j["function_id"] = function_id;
    j["scheme"] = matrix.scheme;
    j["node_order"] = matrix.node_order;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (size_t r = 0; r < matrix.rows; ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (size_t c = 0; c < matrix.cols; ++c) row.push_back(matrix.at(r, c));
        rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    out << j.dump() << '\n';
}

}  // namespace obfugraph
