#include "obfugraph/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "obfugraph/rng.hpp"

namespace obfugraph {

namespace {

using json = nlohmann::ordered_json;

bool is_tree_algorithm(const std::string& a) { return a == "rf" || a == "gb"; }
bool is_gnn_algorithm(const std::string& a) {
    return a == "gcn" || a == "sage" || a == "gin";
}
bool is_unimplemented_algorithm(const std::string& a) { return a == "gat" || a == "unet"; }

std::string tree_kind(const std::string& a) {
    return a == "rf" ? "random_forest" : "gradient_boosting";
}

}  // namespace

std::vector<std::string> task_class_names(const std::string& task, const std::string& mode) {
    if (task == "binary") return {"unobfuscated", "obfuscated"};
    if (task != "multiclass") throw std::invalid_argument("unknown task \"" + task + "\"");
    const auto& names = obfuscation_kind_names();
    if (mode == "all") return names;
    if (mode == "obfuscated_only")
        return std::vector<std::string>(names.begin() + 1, names.end());
    throw std::invalid_argument("unknown multiclass mode \"" + mode + "\"");
}

std::optional<int> task_label(const FunctionSample& sample, const std::string& task,
                              const std::string& mode) {
    if (task == "binary") return sample.obfuscation.is_obfuscated() ? 1 : 0;
    int kind = static_cast<int>(sample.obfuscation.kind);
    if (mode == "all") return kind;
    if (!sample.obfuscation.is_obfuscated()) return std::nullopt;
    return kind - 1;
}

SplitIndices split_indices(const std::vector<FunctionSample>& corpus,
                           const SplitManifest& manifest, bool exclude_degenerate) {
    SplitIndices out;
    for (size_t i = 0; i < corpus.size(); ++i) {
        if (exclude_degenerate && corpus[i].obfuscation.degenerate) continue;
        auto it = manifest.assignment.find(corpus[i].function_id);
        if (it == manifest.assignment.end())
            throw std::invalid_argument("manifest does not cover function " +
                                        corpus[i].function_id);
        switch (it->second) {
            case SplitSet::train: out.train.push_back(i); break;
            case SplitSet::validation: out.validation.push_back(i); break;
            case SplitSet::test: out.test.push_back(i); break;
        }
    }
    return out;
}

GraphData graph_data_for(const FunctionSample& sample, const std::string& scheme,
                         const FeatureContext& context, int label) {
    NodeFeatureMatrix m = node_features(sample.cfg, scheme, context);
    GraphData g;
    g.n_nodes = m.rows;
    g.dim = m.cols;
    g.x = std::move(m.values);
    g.label = label;
    std::unordered_map<std::string, uint32_t> row_of;
    for (uint32_t r = 0; r < m.node_order.size(); ++r) row_of[m.node_order[r]] = r;
    for (const auto& [src, dst] : sample.cfg.edges)
        g.edges.emplace_back(row_of.at(src), row_of.at(dst));
    return g;
}

namespace {

struct CellData {
    std::vector<size_t> train, validation, test;  // corpus indices, eligible only
    std::vector<int> y_train, y_val, y_test;
    std::vector<std::string> class_names;
};

CellData collect_cell_data(const std::vector<FunctionSample>& corpus,
                           const SplitIndices& splits, const BenchmarkCell& cell) {
    CellData data;
    data.class_names = task_class_names(cell.task, cell.mode);
    auto fill = [&](const std::vector<size_t>& src, std::vector<size_t>& idx,
                    std::vector<int>& labels) {
        for (size_t i : src) {
            auto label = task_label(corpus[i], cell.task, cell.mode);
            if (!label) continue;
            idx.push_back(i);
            labels.push_back(*label);
        }
    };
    fill(splits.train, data.train, data.y_train);
    fill(splits.validation, data.validation, data.y_val);
    fill(splits.test, data.test, data.y_test);
    if (data.train.empty()) throw std::runtime_error("no eligible training samples");
    if (data.test.empty()) throw std::runtime_error("no eligible test samples");
    return data;
}

}  // namespace

TrainOutcome train_cell_model(const std::vector<FunctionSample>& corpus,
                              const SplitManifest& manifest, const BenchmarkCell& cell,
                              const BenchmarkSpec& spec) {
    SplitIndices splits = split_indices(corpus, manifest, spec.exclude_degenerate);
    CellData data = collect_cell_data(corpus, splits, cell);
    size_t n_classes = data.class_names.size();

    TrainOutcome outcome;
    outcome.model.task = cell.task;
    outcome.model.mode = cell.mode;
    outcome.model.class_names = data.class_names;

    if (is_tree_algorithm(cell.algorithm)) {
        outcome.model.family = "trees";
        const MnemonicClassTaxonomy& taxonomy = default_taxonomy();
        if (cell.features == "tfidf128") {
            std::vector<FunctionSample> train_samples;
            for (size_t i : data.train) train_samples.push_back(corpus[i]);
            outcome.model.tfidf = tfidf_fit(train_samples);
            outcome.feature_dim = kTfidfDim;
        } else if (cell.features == "graph23") {
            outcome.feature_dim = kGraphFeatureDim;
        } else {
            throw std::runtime_error("tree baselines need graph23 or tfidf128 features, got " +
                                     cell.features);
        }
        auto featurize_one = [&](size_t i) {
            if (cell.features == "graph23")
                return graph_level_features(corpus[i].cfg, taxonomy).values;
            return tfidf_transform(outcome.model.tfidf, corpus[i].cfg).values;
        };
        std::vector<std::vector<double>> x_train, x_val;
        for (size_t i : data.train) x_train.push_back(featurize_one(i));
        for (size_t i : data.validation) x_val.push_back(featurize_one(i));

        TreeConfig config = spec.tree_config;
        if (spec.tree_grid_search && !x_val.empty()) {
            auto grid = default_tree_grid(tree_kind(cell.algorithm));
            auto search = grid_search_trees(tree_kind(cell.algorithm), grid, x_train,
                                            data.y_train, x_val, data.y_val, n_classes,
                                            spec.seed);
            config = search.best;
        }
        outcome.model.tree =
            cell.algorithm == "rf"
                ? train_random_forest(x_train, data.y_train, n_classes, config, spec.seed)
                : train_gradient_boosting(x_train, data.y_train, n_classes, config,
                                          spec.seed);
        outcome.model.tree.feature_scheme = cell.features;
        return outcome;
    }

    if (!is_gnn_algorithm(cell.algorithm))
        throw std::runtime_error("unknown algorithm \"" + cell.algorithm + "\"");

    outcome.model.family = "gnn";
    FeatureContext context;
    context.taxonomy = &default_taxonomy();
    if (cell.features == "pcode_sem" || cell.features == "asm_sem") {
        std::vector<FunctionSample> train_samples;
        for (size_t i : data.train) train_samples.push_back(corpus[i]);
        outcome.model.vocabulary = cell.features == "pcode_sem"
                                       ? build_pcode_vocabulary(train_samples)
                                       : build_vocabulary(train_samples);
        if (cell.features == "pcode_sem")
            context.pcode_vocab = &outcome.model.vocabulary;
        else
            context.asm_vocab = &outcome.model.vocabulary;
    }
    outcome.feature_dim = node_feature_dim(cell.features, context);

    auto build_set = [&](const std::vector<size_t>& idx, const std::vector<int>& labels) {
        std::vector<GraphData> out;
        out.reserve(idx.size());
        for (size_t k = 0; k < idx.size(); ++k)
            out.push_back(graph_data_for(corpus[idx[k]], cell.features, context, labels[k]));
        return out;
    };
    auto train_graphs = build_set(data.train, data.y_train);
    auto val_graphs = build_set(data.validation, data.y_val);

    GnnConfig config = spec.gnn_config;
    config.arch = *gnn_arch_from_string(cell.algorithm);

    TrainedGnn best;
    if (spec.gnn_trials > 0) {
        GnnSearchSpace space;
        space.epochs = spec.gnn_config.epochs;
        TuneResult tuned =
            tune_gnn(space, config.arch, train_graphs, val_graphs, n_classes,
                     spec.gnn_trials, std::max(1, spec.gnn_seeds), spec.seed);
        best = std::move(tuned.best_run);
    } else {
        int n_seeds = std::max(1, spec.gnn_seeds);
        for (int s = 0; s < n_seeds; ++s) {
            config.seed = n_seeds == 1
                              ? spec.seed
                              : derive_seed(spec.seed, static_cast<uint64_t>(s), 0x6d);
            TrainedGnn trained = train_gnn(train_graphs, val_graphs, config, n_classes);
            if (s == 0 ||
                trained.best_val_balanced_accuracy > best.best_val_balanced_accuracy)
                best = std::move(trained);
        }
    }
    best.model.feature_scheme = cell.features;
    best.model.class_names = data.class_names;
    outcome.model.gnn = std::move(best.model);
    outcome.log = std::move(best.log);
    return outcome;
}

std::vector<BenchmarkRow> run_benchmark(const std::vector<FunctionSample>& corpus,
                                        const SplitManifest& manifest,
                                        const BenchmarkSpec& spec) {
    if (spec.cells.empty()) throw std::invalid_argument("run_benchmark: no cells");
    SplitIndices splits = split_indices(corpus, manifest, spec.exclude_degenerate);

    std::vector<BenchmarkRow> rows;
    rows.reserve(spec.cells.size());
    for (const auto& cell : spec.cells) {
        auto start = std::chrono::steady_clock::now();
        BenchmarkRow row;
        row.cell = cell;
        row.dataset_id = spec.dataset_id;
        try {
            if (is_unimplemented_algorithm(cell.algorithm)) {
                row.status = "unimplemented";
                row.error = "architecture " + cell.algorithm + " is not part of this build";
            } else {
                TrainOutcome outcome = train_cell_model(corpus, manifest, cell, spec);
                row.dim = outcome.feature_dim;

                CellData data = collect_cell_data(corpus, splits, cell);
                std::vector<FunctionSample> test_samples;
                for (size_t i : data.test) test_samples.push_back(corpus[i]);
                auto predictions = model_predict(outcome.model, test_samples);

                EvalReport report = make_eval_report(cell.task, cell.mode, data.class_names,
                                                     predictions, data.y_test);
                report.dataset_id = spec.dataset_id;
                report.model_id = cell.algorithm;
                report.feature_scheme = cell.features;
                row.balanced_accuracy = report.balanced_acc;
                row.report = std::move(report);
                row.status = "ok";
            }
        } catch (const std::exception& e) {
            row.status = "failed";
            row.error = e.what();
        }
        row.runtime_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    out << "features,dim,algorithm,dataset,task,balanced_accuracy,runtime_s\n";
    for (const auto& row : rows) {
        out << row.cell.features << ',' << row.dim << ',' << row.cell.algorithm << ','
            << row.dataset_id << ',' << row.cell.task << ',';
        if (row.status == "ok") out << row.balanced_accuracy;
        out << ',' << row.runtime_s << '\n';
    }
}

void write_benchmark_json(std::ostream& out, const std::vector<BenchmarkRow>& rows) {
    json table = json::array();
    for (const auto& row : rows) {
        json j;
        j["features"] = row.cell.features;
        j["dim"] = row.dim;
        j["algorithm"] = row.cell.algorithm;
        j["dataset"] = row.dataset_id;
        j["task"] = row.cell.task;
        j["mode"] = row.cell.mode;
        j["status"] = row.status;
        if (row.status == "ok")
            j["balanced_accuracy"] = row.balanced_accuracy;
        else
            j["error"] = row.error;
        j["runtime_s"] = row.runtime_s;
        if (row.report) {
            json r;
            r["per_class_recall"] = row.report->per_class_recall;
            r["class_names"] = row.report->class_names;
            r["sample_count"] = row.report->sample_count;
            j["report"] = std::move(r);
        }
        table.push_back(std::move(j));
    }
    out << table.dump(2) << '\n';
}

BenchmarkSpec load_benchmark_spec(std::istream& in) {
    nlohmann::json j = nlohmann::json::parse(in);
    BenchmarkSpec spec;
    if (j.contains("dataset_id")) spec.dataset_id = j["dataset_id"].get<std::string>();
    if (j.contains("seed")) spec.seed = j["seed"].get<uint64_t>();
    if (j.contains("exclude_degenerate"))
        spec.exclude_degenerate = j["exclude_degenerate"].get<bool>();
    if (j.contains("tree_grid_search"))
        spec.tree_grid_search = j["tree_grid_search"].get<bool>();
    if (j.contains("gnn_seeds")) spec.gnn_seeds = j["gnn_seeds"].get<int>();
    if (j.contains("gnn_trials")) spec.gnn_trials = j["gnn_trials"].get<int>();
    if (j.contains("tree_config")) {
        const auto& t = j["tree_config"];
        if (t.contains("n_trees")) spec.tree_config.n_trees = t["n_trees"].get<int>();
        if (t.contains("max_depth")) spec.tree_config.max_depth = t["max_depth"].get<int>();
        if (t.contains("learning_rate"))
            spec.tree_config.learning_rate = t["learning_rate"].get<double>();
        if (t.contains("subsample")) spec.tree_config.subsample = t["subsample"].get<double>();
        if (t.contains("class_weights"))
            spec.tree_config.class_weights = t["class_weights"].get<bool>();
    }
    if (j.contains("gnn_config")) {
        const auto& g = j["gnn_config"];
        if (g.contains("n_layers")) spec.gnn_config.n_layers = g["n_layers"].get<int>();
        if (g.contains("hidden")) spec.gnn_config.hidden = g["hidden"].get<int>();
        if (g.contains("readout"))
            spec.gnn_config.readout =
                g["readout"].get<std::string>() == "mean" ? Readout::mean : Readout::sum;
        if (g.contains("learning_rate"))
            spec.gnn_config.learning_rate = g["learning_rate"].get<double>();
        if (g.contains("epochs")) spec.gnn_config.epochs = g["epochs"].get<int>();
        if (g.contains("batch_size")) spec.gnn_config.batch_size = g["batch_size"].get<int>();
        if (g.contains("class_weights"))
            spec.gnn_config.class_weights = g["class_weights"].get<bool>();
        if (g.contains("symmetrize"))
            spec.gnn_config.symmetrize = g["symmetrize"].get<bool>();
    }
    if (!j.contains("cells") || !j["cells"].is_array())
        throw std::runtime_error("benchmark spec: missing cells array");
    for (const auto& c : j["cells"]) {
        BenchmarkCell cell;
        cell.features = c.at("features").get<std::string>();
        cell.algorithm = c.at("algorithm").get<std::string>();
        cell.task = c.at("task").get<std::string>();
        if (c.contains("mode")) cell.mode = c["mode"].get<std::string>();
        if (cell.mode == "obfuscated-only") cell.mode = "obfuscated_only";
        if (cell.features == "pcode-sem") cell.features = "pcode_sem";
        if (cell.features == "asm-sem") cell.features = "asm_sem";
        spec.cells.push_back(std::move(cell));
    }
    return spec;
}

void write_benchmark_spec(std::ostream& out, const BenchmarkSpec& spec) {
    json j;
    j["dataset_id"] = spec.dataset_id;
    j["seed"] = spec.seed;
    j["exclude_degenerate"] = spec.exclude_degenerate;
    j["tree_grid_search"] = spec.tree_grid_search;
    j["gnn_seeds"] = spec.gnn_seeds;
    j["gnn_trials"] = spec.gnn_trials;
    json t;
    t["n_trees"] = spec.tree_config.n_trees;
    t["max_depth"] = spec.tree_config.max_depth;
    t["learning_rate"] = spec.tree_config.learning_rate;
    t["subsample"] = spec.tree_config.subsample;
    t["class_weights"] = spec.tree_config.class_weights;
    j["tree_config"] = std::move(t);
    json g;
    g["n_layers"] = spec.gnn_config.n_layers;
    g["hidden"] = spec.gnn_config.hidden;
    g["readout"] = to_string(spec.gnn_config.readout);
    g["learning_rate"] = spec.gnn_config.learning_rate;
    g["epochs"] = spec.gnn_config.epochs;
    g["batch_size"] = spec.gnn_config.batch_size;
    g["class_weights"] = spec.gnn_config.class_weights;
    g["symmetrize"] = spec.gnn_config.symmetrize;
    j["gnn_config"] = std::move(g);
    json cells = json::array();
    for (const auto& cell : spec.cells) {
        json c;
        c["features"] = cell.features;
        c["algorithm"] = cell.algorithm;
        c["task"] = cell.task;
        c["mode"] = cell.mode;
        cells.push_back(std::move(c));
    }
    j["cells"] = std::move(cells);
    out << j.dump(2) << '\n';
}

namespace {

json vocabulary_to_json(const MnemonicVocabulary& vocab) {
    json entries = json::array();
    for (const auto& e : vocab.entries) {
        json ej;
        ej["token"] = e.token;
        ej["count"] = e.total_count;
        ej["df"] = e.doc_freq;
        entries.push_back(std::move(ej));
    }
    return entries;
}

MnemonicVocabulary vocabulary_from_json(const nlohmann::json& j) {
    MnemonicVocabulary vocab;
    for (const auto& ej : j) {
        MnemonicVocabulary::Entry e;
        e.token = ej.at("token").get<std::string>();
        e.total_count = ej.at("count").get<uint64_t>();
        e.doc_freq = ej.at("df").get<uint64_t>();
        vocab.entries.push_back(std::move(e));
    }
    return vocab;
}

}  // namespace

void write_model_file(std::ostream& out, const ModelFile& model) {
    json j;
    j["format_version"] = 1;
    j["family"] = model.family;
    j["task"] = model.task;
    j["mode"] = model.mode;
    j["class_names"] = model.class_names;
    if (model.family == "trees") {
        std::ostringstream inner;
        write_tree_model_json(inner, model.tree);
        j["model"] = nlohmann::ordered_json::parse(inner.str());
    } else {
        std::ostringstream inner;
        write_gnn_model_json(inner, model.gnn);
        j["model"] = nlohmann::ordered_json::parse(inner.str());
    }
    json ctx;
    ctx["tfidf_tokens"] = model.tfidf.tokens;
    ctx["tfidf_idf"] = model.tfidf.idf;
    ctx["tfidf_corpus_size"] = model.tfidf.fitted_corpus_size;
    ctx["vocabulary"] = vocabulary_to_json(model.vocabulary);
    j["feature_context"] = std::move(ctx);
    out << j.dump() << '\n';
}

ModelFile read_model_file(std::istream& in) {
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format_version").get<int>() != 1)
        throw std::runtime_error("unsupported model file version");
    ModelFile model;
    model.family = j.at("family").get<std::string>();
    model.task = j.at("task").get<std::string>();
    model.mode = j.at("mode").get<std::string>();
    model.class_names = j.at("class_names").get<std::vector<std::string>>();
    std::istringstream inner(j.at("model").dump());
    if (model.family == "trees")
        model.tree = read_tree_model_json(inner);
    else if (model.family == "gnn")
        model.gnn = read_gnn_model_json(inner);
    else
        throw std::runtime_error("unknown model family \"" + model.family + "\"");
    const auto& ctx = j.at("feature_context");
    model.tfidf.tokens = ctx.at("tfidf_tokens").get<std::vector<std::string>>();
    model.tfidf.idf = ctx.at("tfidf_idf").get<std::vector<double>>();
    model.tfidf.fitted_corpus_size = ctx.at("tfidf_corpus_size").get<size_t>();
    model.vocabulary = vocabulary_from_json(ctx.at("vocabulary"));
    return model;
}

const std::string& model_feature_scheme(const ModelFile& model) {
    return model.family == "trees" ? model.tree.feature_scheme : model.gnn.feature_scheme;
}

std::vector<int> model_predict(const ModelFile& model,
                               const std::vector<FunctionSample>& samples) {
    const std::string& scheme = model_feature_scheme(model);
    if (model.family == "trees") {
        std::vector<std::vector<double>> x;
        x.reserve(samples.size());
        for (const auto& sample : samples) {
            if (scheme == "graph23")
                x.push_back(graph_level_features(sample.cfg, default_taxonomy()).values);
            else
                x.push_back(tfidf_transform(model.tfidf, sample.cfg).values);
        }
        return predict(model.tree, x);
    }
    FeatureContext context;
    context.taxonomy = &default_taxonomy();
    if (scheme == "pcode_sem") context.pcode_vocab = &model.vocabulary;
    if (scheme == "asm_sem") context.asm_vocab = &model.vocabulary;
    std::vector<GraphData> graphs;
    graphs.reserve(samples.size());
    for (const auto& sample : samples)
        graphs.push_back(graph_data_for(sample, scheme, context, 0));
    return gnn_predict(model.gnn, graphs);
}

}  // namespace obfugraph
