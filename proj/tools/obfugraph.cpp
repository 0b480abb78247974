// obfugraph - CFG obfuscation detection toolkit CLI.
//
// Subcommands: synth, split, featurize, train, eval, benchmark.
// Every run writes a fully-resolved <out>.runconfig.json next to its
// outputs so published numbers can be reproduced from flags alone.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "obfugraph/benchmark.hpp"
#include "obfugraph/cfg.hpp"
#include "obfugraph/dataset.hpp"
#include "obfugraph/features.hpp"
#include "obfugraph/gnn.hpp"
#include "obfugraph/metrics.hpp"
#include "obfugraph/synthgen.hpp"
#include "obfugraph/trees.hpp"

namespace og = obfugraph;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "obfugraph 0.1.0";

void emit_runconfig(const std::string& out_path, const std::string& subcommand,
                    const ojson& resolved) {
    ojson j;
    j["tool"] = kVersion;
    j["subcommand"] = subcommand;
    j["config"] = resolved;
    std::ofstream out(out_path + ".runconfig.json");
    if (out) out << j.dump(2) << '\n';
}

// CLI feature tokens use hyphens; internal scheme tokens use underscores.
std::string scheme_from_flag(const std::string& flag) {
    if (flag == "pcode-sem") return "pcode_sem";
    if (flag == "asm-sem") return "asm_sem";
    return flag;
}

std::string strategy_from_flag(const std::string& flag) {
    if (flag == "per-function") return "per_function";
    if (flag == "per-binary") return "per_binary";
    return flag;
}

std::string mode_from_flag(const std::string& flag) {
    return flag == "obfuscated-only" ? "obfuscated_only" : flag;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_synth(const std::string& config_path, uint64_t seed, const std::string& out_path) {
    std::ifstream in(config_path);
    if (!in) {
        std::cerr << "error: cannot open config file: " << config_path << "\n";
        return 1;
    }
    og::GeneratorConfig config = og::load_generator_config(in);
    config.seed = seed;

    auto corpus = og::gen_corpus(config, og::all_obfuscation_kinds());
    og::save_corpus(out_path, corpus);

    ojson resolved;
    {
        std::ostringstream cfg;
        og::write_generator_config(cfg, config);
        resolved = ojson::parse(cfg.str());
    }
    resolved["out"] = out_path;
    emit_runconfig(out_path, "synth", resolved);
    std::cout << "wrote " << corpus.size() << " samples to " << out_path << "\n";
    return 0;
}

int cmd_split(const std::string& corpus_path, const std::string& strategy_flag,
              uint64_t seed, const std::string& out_path, const std::string& ratios_csv,
              size_t bins, const std::string& train_projects_csv,
              const std::string& test_projects_csv, double val_ratio, bool dedupe) {
    auto corpus = og::load_corpus(corpus_path);
    if (dedupe) {
        auto result = og::dedupe_shared_functions(corpus);
        std::cout << "dedupe removed " << result.removed_samples << " samples ("
                  << result.removed_symbols.size() << " shared symbols)\n";
        corpus = std::move(result.corpus);
    }

    std::string strategy = strategy_from_flag(strategy_flag);
    og::SplitManifest manifest;
    if (strategy == "per_function") {
        auto parts = split_csv(ratios_csv);
        if (parts.size() != 3) {
            std::cerr << "error: --ratios must be three comma-separated values\n";
            return 1;
        }
        std::array<double, 3> ratios = {std::stod(parts[0]), std::stod(parts[1]),
                                        std::stod(parts[2])};
        manifest = og::split_per_function(corpus, ratios, seed, bins);
    } else if (strategy == "per_binary") {
        manifest = og::split_per_binary(corpus, split_csv(train_projects_csv),
                                        split_csv(test_projects_csv), val_ratio, seed, bins);
    } else {
        std::cerr << "error: unknown strategy \"" << strategy_flag << "\"\n";
        return 1;
    }

    auto violations = og::audit_leakage(manifest, corpus);
    if (!violations.empty()) {
        std::cerr << "error: split produced " << violations.size() << " leakage violations\n";
        for (const auto& v : violations) std::cerr << "  " << v << "\n";
        return 1;
    }
    og::save_manifest(out_path, manifest);

    auto report = og::class_ratio_report(manifest, corpus);
    ojson resolved;
    resolved["corpus"] = corpus_path;
    resolved["strategy"] = strategy;
    resolved["seed"] = seed;
    resolved["ratios"] = manifest.ratios;
    resolved["bins"] = bins;
    resolved["dedupe"] = dedupe;
    if (strategy == "per_binary") {
        resolved["train_projects"] = split_csv(train_projects_csv);
        resolved["test_projects"] = split_csv(test_projects_csv);
        resolved["val_ratio"] = val_ratio;
    }
    resolved["out"] = out_path;
    emit_runconfig(out_path, "split", resolved);

    const char* names[3] = {"train", "validation", "test"};
    for (int s = 0; s < 3; ++s) {
        const auto& per_set = report.sets[static_cast<size_t>(s)];
        std::cout << names[s] << ": " << per_set.base_functions << " functions / "
                  << per_set.samples << " samples, ratio binary "
                  << per_set.ratio_binary << "\n";
    }
    return 0;
}

int cmd_featurize(const std::string& corpus_path, const std::string& features_flag,
                  const std::string& manifest_path, const std::string& taxonomy_path,
                  const std::string& out_path) {
    auto corpus = og::load_corpus(corpus_path);
    std::string scheme = scheme_from_flag(features_flag);

    og::MnemonicClassTaxonomy taxonomy = og::default_taxonomy();
    if (!taxonomy_path.empty()) {
        std::ifstream tin(taxonomy_path);
        if (!tin) {
            std::cerr << "error: cannot open taxonomy file: " << taxonomy_path << "\n";
            return 1;
        }
        taxonomy = og::load_taxonomy(tin);
    }

    // Vocabulary context comes from the train split when a manifest is
    // given, otherwise from the whole corpus.
    std::vector<og::FunctionSample> fit_samples;
    if (!manifest_path.empty()) {
        auto manifest = og::load_manifest(manifest_path);
        for (const auto& sample : corpus) {
            auto it = manifest.assignment.find(sample.function_id);
            if (it != manifest.assignment.end() && it->second == og::SplitSet::train)
                fit_samples.push_back(sample);
        }
    } else {
        fit_samples = corpus;
    }

    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot open output file: " << out_path << "\n";
        return 1;
    }

    if (scheme == "graph23" || scheme == "tfidf128") {
        og::TfidfModel tfidf;
        if (scheme == "tfidf128") tfidf = og::tfidf_fit(fit_samples);
        for (const auto& sample : corpus) {
            og::GraphFeatureVector v =
                scheme == "graph23"
                    ? og::graph_level_features(sample.cfg, og::default_taxonomy())
                    : og::tfidf_transform(tfidf, sample.cfg);
            ojson j;
            j["function_id"] = sample.function_id;
            j["scheme"] = v.scheme;
            j["values"] = v.values;
            out << j.dump() << '\n';
        }
    } else {
        og::MnemonicVocabulary vocab;
        og::FeatureContext context;
        context.taxonomy = &taxonomy;
        if (scheme == "pcode_sem") {
            vocab = og::build_pcode_vocabulary(fit_samples);
            context.pcode_vocab = &vocab;
        } else if (scheme == "asm_sem") {
            vocab = og::build_vocabulary(fit_samples);
            context.asm_vocab = &vocab;
        }
        for (const auto& sample : corpus) {
            auto matrix = og::node_features(sample.cfg, scheme, context);
            og::write_feature_matrix_jsonl(out, sample.function_id, matrix);
        }
    }

    ojson resolved;
    resolved["corpus"] = corpus_path;
    resolved["features"] = scheme;
    resolved["manifest"] = manifest_path;
    resolved["taxonomy"] = taxonomy_path;
    resolved["out"] = out_path;
    emit_runconfig(out_path, "featurize", resolved);
    std::cout << "wrote features for " << corpus.size() << " functions to " << out_path
              << "\n";
    return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& manifest_path,
              const std::string& model_flag, const std::string& features_flag,
              const std::string& task, const std::string& mode_flag, uint64_t seed,
              const std::string& out_path, const std::string& log_path, bool grid_search,
              int epochs, int hidden, int layers, int batch_size, double lr,
              const std::string& readout, int n_trees, int max_depth) {
    auto corpus = og::load_corpus(corpus_path);
    auto manifest = og::load_manifest(manifest_path);

    og::BenchmarkCell cell;
    cell.features = scheme_from_flag(features_flag);
    cell.algorithm = model_flag;
    cell.task = task;
    cell.mode = mode_from_flag(mode_flag);

    og::BenchmarkSpec spec;
    spec.seed = seed;
    spec.tree_grid_search = grid_search;
    spec.tree_config.n_trees = n_trees;
    spec.tree_config.max_depth = max_depth;
    spec.gnn_config.epochs = epochs;
    spec.gnn_config.hidden = hidden;
    spec.gnn_config.n_layers = layers;
    spec.gnn_config.batch_size = batch_size;
    spec.gnn_config.learning_rate = lr;
    spec.gnn_config.readout = readout == "mean" ? og::Readout::mean : og::Readout::sum;

    og::TrainOutcome outcome = og::train_cell_model(corpus, manifest, cell, spec);

    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot open output file: " << out_path << "\n";
        return 1;
    }
    og::write_model_file(out, outcome.model);

    if (!log_path.empty()) {
        std::ofstream log(log_path);
        og::write_training_log_csv(log, outcome.log);
    }

    ojson resolved;
    resolved["corpus"] = corpus_path;
    resolved["manifest"] = manifest_path;
    resolved["model"] = model_flag;
    resolved["features"] = cell.features;
    resolved["task"] = task;
    resolved["mode"] = cell.mode;
    resolved["seed"] = seed;
    resolved["grid_search"] = grid_search;
    resolved["epochs"] = epochs;
    resolved["hidden"] = hidden;
    resolved["layers"] = layers;
    resolved["batch_size"] = batch_size;
    resolved["learning_rate"] = lr;
    resolved["readout"] = readout;
    resolved["n_trees"] = n_trees;
    resolved["max_depth"] = max_depth;
    resolved["out"] = out_path;
    emit_runconfig(out_path, "train", resolved);
    std::cout << "trained " << model_flag << " (" << cell.features << ", dim "
              << outcome.feature_dim << ") -> " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_path,
             const std::string& manifest_path, const std::string& set_name,
             const std::string& mode_flag, const std::string& out_path) {
    std::ifstream min(model_path);
    if (!min) {
        std::cerr << "error: cannot open model file: " << model_path << "\n";
        return 1;
    }
    og::ModelFile model = og::read_model_file(min);
    auto corpus = og::load_corpus(corpus_path);
    auto manifest = og::load_manifest(manifest_path);

    auto set = og::split_set_from_string(set_name);
    if (!set) {
        std::cerr << "error: unknown set \"" << set_name << "\"\n";
        return 1;
    }
    std::string mode = mode_flag.empty() ? model.mode : mode_from_flag(mode_flag);

    std::vector<og::FunctionSample> samples;
    std::vector<int> truth;
    for (const auto& sample : corpus) {
        auto it = manifest.assignment.find(sample.function_id);
        if (it == manifest.assignment.end() || it->second != *set) continue;
        if (sample.obfuscation.degenerate) continue;
        auto label = og::task_label(sample, model.task, mode);
        if (!label) continue;
        samples.push_back(sample);
        truth.push_back(*label);
    }
    if (samples.empty()) {
        std::cerr << "error: no eligible samples in set \"" << set_name << "\" for task "
                  << model.task << " mode " << mode << "\n";
        return 1;
    }

    auto predictions = og::model_predict(model, samples);
    og::EvalReport report = og::make_eval_report(model.task, mode, model.class_names,
                                                 predictions, truth);
    report.dataset_id = set_name;
    report.model_id = model.family == "trees" ? model.tree.kind : "gnn";
    report.feature_scheme = og::model_feature_scheme(model);

    {
        std::ofstream out(out_path + ".json");
        og::write_report_json(out, report);
    }
    {
        std::ofstream out(out_path + ".csv");
        og::write_report_csv(out, report);
    }

    ojson resolved;
    resolved["model"] = model_path;
    resolved["corpus"] = corpus_path;
    resolved["manifest"] = manifest_path;
    resolved["set"] = set_name;
    resolved["task"] = model.task;
    resolved["mode"] = mode;
    resolved["out"] = out_path;
    emit_runconfig(out_path, "eval", resolved);

    std::cout << "balanced accuracy (" << model.task << ", " << mode
              << "): " << report.balanced_acc << " over " << report.sample_count
              << " samples\n";
    return 0;
}

int cmd_benchmark(const std::string& corpus_path, const std::string& manifest_path,
                  const std::string& spec_path, const std::string& out_dir) {
    auto corpus = og::load_corpus(corpus_path);
    auto manifest = og::load_manifest(manifest_path);
    std::ifstream sin(spec_path);
    if (!sin) {
        std::cerr << "error: cannot open benchmark spec: " << spec_path << "\n";
        return 1;
    }
    og::BenchmarkSpec spec = og::load_benchmark_spec(sin);

    std::filesystem::create_directories(out_dir);
    auto rows = og::run_benchmark(corpus, manifest, spec);

    {
        std::ofstream out(out_dir + "/benchmark.csv");
        og::write_benchmark_csv(out, rows);
    }
    {
        std::ofstream out(out_dir + "/benchmark.json");
        og::write_benchmark_json(out, rows);
    }

    ojson resolved;
    resolved["corpus"] = corpus_path;
    resolved["manifest"] = manifest_path;
    resolved["spec"] = spec_path;
    resolved["out"] = out_dir;
    emit_runconfig(out_dir + "/benchmark", "benchmark", resolved);

    int failures = 0;
    for (const auto& row : rows) {
        std::cout << row.cell.features << " x " << row.cell.algorithm << " ("
                  << row.cell.task << "): ";
        if (row.status == "ok")
            std::cout << row.balanced_accuracy;
        else
            std::cout << row.status << " (" << row.error << ")";
        std::cout << " [" << row.runtime_s << "s]\n";
        if (row.status != "ok") ++failures;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CFG obfuscation detection toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    std::string synth_config, synth_out;
    uint64_t synth_seed = 0;
    synth->add_option("--config", synth_config, "generator config JSON")->required();
    synth->add_option("--seed", synth_seed, "generator seed")->required();
    synth->add_option("--out", synth_out, "output corpus (JSON-Lines)")->required();

    // split
    auto* split = app.add_subcommand("split", "build a train/validation/test manifest");
    std::string split_corpus, split_strategy, split_out, split_ratios = "0.64,0.16,0.20";
    std::string split_train_projects, split_test_projects;
    uint64_t split_seed = 0;
    size_t split_bins = 10;
    double split_val_ratio = 0.20;
    bool split_dedupe = false;
    split->add_option("--corpus", split_corpus)->required();
    split->add_option("--strategy", split_strategy, "per-function | per-binary")->required();
    split->add_option("--seed", split_seed)->required();
    split->add_option("--out", split_out)->required();
    split->add_option("--ratios", split_ratios, "train,val,test (per-function)");
    split->add_option("--bins", split_bins, "stratification quantile bins");
    split->add_option("--train-projects", split_train_projects, "csv (per-binary)");
    split->add_option("--test-projects", split_test_projects, "csv (per-binary)");
    split->add_option("--val-ratio", split_val_ratio, "validation share (per-binary)");
    split->add_flag("--dedupe", split_dedupe, "remove cross-project shared functions first");

    // featurize
    auto* featurize = app.add_subcommand("featurize", "export feature vectors/matrices");
    std::string feat_corpus, feat_features, feat_manifest, feat_taxonomy, feat_out;
    featurize->add_option("--corpus", feat_corpus)->required();
    featurize
        ->add_option("--features", feat_features,
                     "graph23|tfidf128|identity|mclass27|pcode-sem|asm-sem")
        ->required();
    featurize->add_option("--manifest", feat_manifest, "fit vocabularies on its train split");
    featurize->add_option("--taxonomy", feat_taxonomy, "custom mnemonic class table");
    featurize->add_option("--out", feat_out)->required();

    // train
    auto* train = app.add_subcommand("train", "train one model");
    std::string train_corpus, train_manifest, train_model, train_features;
    std::string train_task = "binary", train_mode = "obfuscated-only";
    std::string train_out, train_log, train_readout = "sum";
    uint64_t train_seed = 0;
    bool train_grid = false;
    int train_epochs = 50, train_hidden = 64, train_layers = 3, train_batch = 32;
    int train_n_trees = 100, train_max_depth = 16;
    double train_lr = 3e-3;
    train->add_option("--corpus", train_corpus)->required();
    train->add_option("--manifest", train_manifest)->required();
    train->add_option("--model", train_model, "rf|gb|gcn|sage|gin")->required();
    train->add_option("--features", train_features)->required();
    train->add_option("--task", train_task, "binary|multiclass");
    train->add_option("--mode", train_mode, "all|obfuscated-only");
    train->add_option("--seed", train_seed)->required();
    train->add_option("--out", train_out)->required();
    train->add_option("--log", train_log, "training log CSV (GNN)");
    train->add_flag("--grid-search", train_grid, "grid search on validation (trees)");
    train->add_option("--epochs", train_epochs);
    train->add_option("--hidden", train_hidden);
    train->add_option("--layers", train_layers);
    train->add_option("--batch-size", train_batch);
    train->add_option("--lr", train_lr);
    train->add_option("--readout", train_readout, "sum|mean");
    train->add_option("--n-trees", train_n_trees);
    train->add_option("--max-depth", train_max_depth, "0 = unlimited");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a trained model");
    std::string eval_model, eval_corpus, eval_manifest, eval_set = "test", eval_mode,
                eval_out;
    eval->add_option("--model", eval_model)->required();
    eval->add_option("--corpus", eval_corpus)->required();
    eval->add_option("--manifest", eval_manifest)->required();
    eval->add_option("--set", eval_set, "train|validation|test");
    eval->add_option("--mode", eval_mode, "override the model's multiclass mode");
    eval->add_option("--out", eval_out, "report path stem (.json/.csv appended)")->required();

    // benchmark
    auto* benchmark = app.add_subcommand("benchmark", "run a (features x algorithm) table");
    std::string bench_corpus, bench_manifest, bench_spec, bench_out;
    benchmark->add_option("--corpus", bench_corpus)->required();
    benchmark->add_option("--manifest", bench_manifest)->required();
    benchmark->add_option("--spec", bench_spec, "benchmark spec JSON")->required();
    benchmark->add_option("--out", bench_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_config, synth_seed, synth_out);
        if (split->parsed())
            return cmd_split(split_corpus, split_strategy, split_seed, split_out,
                             split_ratios, split_bins, split_train_projects,
                             split_test_projects, split_val_ratio, split_dedupe);
        if (featurize->parsed())
            return cmd_featurize(feat_corpus, feat_features, feat_manifest, feat_taxonomy,
                                 feat_out);
        if (train->parsed())
            return cmd_train(train_corpus, train_manifest, train_model, train_features,
                             train_task, train_mode, train_seed, train_out, train_log,
                             train_grid, train_epochs, train_hidden, train_layers,
                             train_batch, train_lr, train_readout, train_n_trees,
                             train_max_depth);
        if (eval->parsed())
            return cmd_eval(eval_model, eval_corpus, eval_manifest, eval_set, eval_mode,
                            eval_out);
        if (benchmark->parsed())
            return cmd_benchmark(bench_corpus, bench_manifest, bench_spec, bench_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
