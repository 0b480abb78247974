#include "obfugraph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "obfugraph/rng.hpp"

namespace obfugraph {

namespace {

const std::string kSetNames[3] = {"train", "validation", "test"};

// (project, symbol) grouping with corpus-order provenance.
struct BaseGroup {
    std::string project;
    std::string symbol;
    std::vector<size_t> sample_indices;
    size_t bb_count = 0;  // of the unobfuscated version
    bool has_base = false;

    std::string key() const { return project + "\x1f" + symbol; }
};

std::vector<BaseGroup> collect_groups(const std::vector<FunctionSample>& corpus) {
    std::map<std::string, size_t> by_key;
    std::vector<BaseGroup> groups;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const auto& sample = corpus[i];
        std::string key = sample.project + "\x1f" + sample.symbol();
        auto it = by_key.find(key);
        if (it == by_key.end()) {
            it = by_key.emplace(key, groups.size()).first;
            groups.push_back({sample.project, sample.symbol(), {}, 0, false});
        }
        BaseGroup& group = groups[it->second];
        group.sample_indices.push_back(i);
        if (!sample.obfuscation.is_obfuscated() && !group.has_base) {
            group.has_base = true;
            group.bb_count = sample.cfg.n_nodes();
        }
    }
    return groups;
}

// Stratified seeded assignment of groups to the three sets. Bins are
// rank-based quantiles over base BB count; within each bin, groups are
// shuffled and apportioned by largest remainder.
void assign_stratified(const std::vector<FunctionSample>& corpus,
                       std::vector<BaseGroup>& groups, std::array<double, 3> ratios,
                       uint64_t seed, size_t n_bins, SplitManifest& manifest) {
    for (const auto& group : groups) {
        if (!group.has_base)
            throw std::invalid_argument(
                "split: base function group without an unobfuscated version: " +
                group.project + "/" + group.symbol);
    }

    // Deterministic rank order: BB count, then group key.
    std::vector<size_t> order(groups.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (groups[a].bb_count != groups[b].bb_count)
            return groups[a].bb_count < groups[b].bb_count;
        return groups[a].key() < groups[b].key();
    });

    size_t bins = std::min(n_bins == 0 ? size_t{1} : n_bins, groups.size());
    std::vector<std::vector<size_t>> bin_members(bins);
    for (size_t rank = 0; rank < order.size(); ++rank) {
        size_t b = rank * bins / order.size();
        bin_members[b].push_back(order[rank]);
    }
    manifest.bin_edges.clear();
    for (const auto& members : bin_members)
        if (!members.empty())
            manifest.bin_edges.push_back(static_cast<double>(groups[members.back()].bb_count));

    std::vector<double> ratio_vec(ratios.begin(), ratios.end());
    for (size_t b = 0; b < bins; ++b) {
        auto& members = bin_members[b];
        if (members.empty()) continue;
        Rng rng(derive_seed(seed, b));
        rng.shuffle(members);
        auto sizes = largest_remainder_split(members.size(), ratio_vec);
        size_t cursor = 0;
        for (int s = 0; s < 3; ++s) {
            for (size_t i = 0; i < sizes[static_cast<size_t>(s)]; ++i) {
                const BaseGroup& group = groups[members[cursor++]];
                for (size_t idx : group.sample_indices)
                    manifest.assignment[corpus[idx].function_id] = static_cast<SplitSet>(s);
            }
        }
    }
}

}  // namespace

const std::string& to_string(SplitSet s) { return kSetNames[static_cast<size_t>(s)]; }

std::optional<SplitSet> split_set_from_string(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (kSetNames[i] == s) return static_cast<SplitSet>(i);
    return std::nullopt;
}

std::vector<size_t> largest_remainder_split(size_t n, const std::vector<double>& ratios) {
    std::vector<size_t> sizes(ratios.size(), 0);
    std::vector<double> remainders(ratios.size(), 0.0);
    size_t assigned = 0;
    for (size_t i = 0; i < ratios.size(); ++i) {
        double exact = static_cast<double>(n) * ratios[i];
        sizes[i] = static_cast<size_t>(std::floor(exact));
        remainders[i] = exact - std::floor(exact);
        assigned += sizes[i];
    }
    // Distribute leftovers by descending remainder; ties favor earlier sets.
    std::vector<size_t> idx(ratios.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return remainders[a] > remainders[b]; });
    for (size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[idx[k % idx.size()]];
    return sizes;
}

DedupeResult dedupe_shared_functions(const std::vector<FunctionSample>& corpus) {
    std::unordered_map<std::string, std::set<std::string>> base_projects;
    for (const auto& sample : corpus)
        if (!sample.obfuscation.is_obfuscated())
            base_projects[sample.symbol()].insert(sample.project);

    std::set<std::string> shared;
    for (const auto& [symbol, projects] : base_projects)
        if (projects.size() >= 2) shared.insert(symbol);

    DedupeResult result;
    for (const auto& sample : corpus) {
        if (shared.count(sample.symbol()))
            ++result.removed_samples;
        else
            result.corpus.push_back(sample);
    }
    result.removed_symbols.assign(shared.begin(), shared.end());
    return result;
}

SplitManifest split_per_function(const std::vector<FunctionSample>& corpus,
                                 std::array<double, 3> ratios, uint64_t seed,
                                 size_t n_bins) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_per_function: ratios must sum to 1, got " +
                                    std::to_string(sum));
    if (corpus.empty()) throw std::invalid_argument("split_per_function: empty corpus");

    SplitManifest manifest;
    manifest.strategy = "per_function";
    manifest.seed = seed;
    manifest.ratios = ratios;
    auto groups = collect_groups(corpus);
    assign_stratified(corpus, groups, ratios, seed, n_bins, manifest);
    return manifest;
}

SplitManifest split_per_binary(const std::vector<FunctionSample>& corpus,
                               const std::vector<std::string>& train_projects,
                               const std::vector<std::string>& test_projects,
                               double val_ratio, uint64_t seed, size_t n_bins) {
    if (train_projects.empty() || test_projects.empty())
        throw std::invalid_argument("split_per_binary: project lists must be non-empty");
    std::set<std::string> train_set(train_projects.begin(), train_projects.end());
    std::set<std::string> test_set(test_projects.begin(), test_projects.end());
    for (const auto& p : train_set)
        if (test_set.count(p))
            throw std::invalid_argument("split_per_binary: project \"" + p +
                                        "\" appears in both train and test lists");
    if (val_ratio < 0.0 || val_ratio >= 1.0)
        throw std::invalid_argument("split_per_binary: val_ratio out of [0,1)");

    std::set<std::string> corpus_projects;
    for (const auto& sample : corpus) corpus_projects.insert(sample.project);
    for (const auto& p : train_set)
        if (!corpus_projects.count(p))
            throw std::invalid_argument("split_per_binary: unknown train project \"" + p + "\"");
    for (const auto& p : test_set)
        if (!corpus_projects.count(p))
            throw std::invalid_argument("split_per_binary: unknown test project \"" + p + "\"");
    for (const auto& p : corpus_projects)
        if (!train_set.count(p) && !test_set.count(p))
            throw std::invalid_argument("split_per_binary: project \"" + p +
                                        "\" assigned to neither train nor test");

    SplitManifest manifest;
    manifest.strategy = "per_binary";
    manifest.seed = seed;
    manifest.ratios = {1.0 - val_ratio, val_ratio, 0.0};

    std::vector<FunctionSample> train_samples;
    for (const auto& sample : corpus) {
        if (test_set.count(sample.project))
            manifest.assignment[sample.function_id] = SplitSet::test;
        else
            train_samples.push_back(sample);
    }
    if (!train_samples.empty()) {
        auto groups = collect_groups(train_samples);
        SplitManifest inner;
        assign_stratified(train_samples, groups, manifest.ratios, seed, n_bins, inner);
        manifest.bin_edges = inner.bin_edges;
        for (const auto& [fid, set] : inner.assignment) manifest.assignment[fid] = set;
    }
    return manifest;
}

std::vector<std::string> audit_leakage(const SplitManifest& manifest,
                                       const std::vector<FunctionSample>& corpus) {
    std::vector<std::string> violations;

    std::set<std::string> corpus_ids;
    for (const auto& sample : corpus) {
        if (!corpus_ids.insert(sample.function_id).second)
            violations.push_back("duplicate function_id in corpus: " + sample.function_id);
        if (!manifest.assignment.count(sample.function_id))
            violations.push_back("function not assigned to any set: " + sample.function_id);
    }
    for (const auto& [fid, set] : manifest.assignment) {
        (void)set;
        if (!corpus_ids.count(fid))
            violations.push_back("assignment references unknown function: " + fid);
    }

    // Base-function inheritance: a (project, symbol) group must live in one set.
    std::map<std::string, std::set<SplitSet>> group_sets;
    std::map<std::string, std::map<std::string, std::set<SplitSet>>> symbol_project_sets;
    std::map<std::string, std::set<SplitSet>> project_sets;
    for (const auto& sample : corpus) {
        auto it = manifest.assignment.find(sample.function_id);
        if (it == manifest.assignment.end()) continue;
        group_sets[sample.project + "/" + sample.symbol()].insert(it->second);
        symbol_project_sets[sample.symbol()][sample.project].insert(it->second);
        project_sets[sample.project].insert(it->second);
    }

    if (manifest.strategy == "per_function") {
        for (const auto& [group, sets] : group_sets)
            if (sets.size() > 1)
                violations.push_back("base function straddles sets: " + group);
    } else if (manifest.strategy == "per_binary") {
        for (const auto& [project, sets] : project_sets) {
            bool in_trainval = sets.count(SplitSet::train) || sets.count(SplitSet::validation);
            if (in_trainval && sets.count(SplitSet::test))
                violations.push_back("project straddles train/validation and test: " + project);
        }
    }

    // Cross-project duplicates: the same symbol in two projects must not
    // land in different sets (shared functions should have been deduped).
    for (const auto& [symbol, per_project] : symbol_project_sets) {
        if (per_project.size() < 2) continue;
        std::set<SplitSet> all;
        for (const auto& [project, sets] : per_project) {
            (void)project;
            all.insert(sets.begin(), sets.end());
        }
        if (all.size() > 1)
            violations.push_back("cross-project duplicate symbol straddles sets: " + symbol);
    }
    return violations;
}

ClassRatioReport class_ratio_report(const SplitManifest& manifest,
                                    const std::vector<FunctionSample>& corpus) {
    ClassRatioReport report;
    std::array<std::set<std::string>, 3> base_seen;
    for (const auto& sample : corpus) {
        auto it = manifest.assignment.find(sample.function_id);
        if (it == manifest.assignment.end())
            throw std::invalid_argument("class_ratio_report: manifest does not cover " +
                                        sample.function_id);
        auto& per_set = report.sets[static_cast<size_t>(it->second)];
        ++per_set.samples;
        if (!sample.obfuscation.is_obfuscated()) ++per_set.unobfuscated;
        ++per_set.per_class[to_string(sample.obfuscation.kind)];
        base_seen[static_cast<size_t>(it->second)].insert(sample.project + "/" +
                                                          sample.symbol());
    }
    for (int s = 0; s < 3; ++s) {
        auto& per_set = report.sets[static_cast<size_t>(s)];
        per_set.base_functions = base_seen[static_cast<size_t>(s)].size();
        per_set.ratio_binary =
            per_set.samples == 0
                ? 0.0
                : static_cast<double>(per_set.unobfuscated) / static_cast<double>(per_set.samples);
    }
    return report;
}

void write_manifest(std::ostream& out, const SplitManifest& manifest) {
    nlohmann::ordered_json j;
    j["strategy"] = manifest.strategy;
    j["seed"] = manifest.seed;
    j["ratios"] = manifest.ratios;
    j["bins"] = manifest.bin_edges;
    nlohmann::ordered_json assignment;
    for (const auto& [fid, set] : manifest.assignment) assignment[fid] = to_string(set);
    j["assignment"] = std::move(assignment);
    out << j.dump(2) << '\n';
}

SplitManifest read_manifest(std::istream& in) {
    nlohmann::json j = nlohmann::json::parse(in);
    SplitManifest manifest;
    manifest.strategy = j.at("strategy").get<std::string>();
    manifest.seed = j.at("seed").get<uint64_t>();
    auto ratios = j.at("ratios").get<std::vector<double>>();
    if (ratios.size() != 3) throw std::runtime_error("manifest: ratios must have 3 entries");
    std::copy(ratios.begin(), ratios.end(), manifest.ratios.begin());
    manifest.bin_edges = j.at("bins").get<std::vector<double>>();
    for (const auto& [fid, set_name] : j.at("assignment").items()) {
        auto set = split_set_from_string(set_name.get<std::string>());
        if (!set) throw std::runtime_error("manifest: unknown set \"" +
                                           set_name.get<std::string>() + "\"");
        manifest.assignment[fid] = *set;
    }
    return manifest;
}

void save_manifest(const std::string& path, const SplitManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open manifest output: " + path);
    write_manifest(out, manifest);
}

SplitManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    return read_manifest(in);
}

}  // namespace obfugraph
