#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "obfugraph/dataset.hpp"
#include "obfugraph/synthgen.hpp"

using namespace obfugraph;

namespace {

FunctionSample make_sample(const std::string& project, const std::string& binary,
                           const std::string& symbol, ObfuscationKind kind,
                           size_t n_blocks = 1) {
    FunctionSample s;
    s.project = project;
    s.binary = binary;
    s.function_id = project + "/" + binary + "/" + symbol;
    s.opt_level = "O0";
    s.obfuscation.kind = kind;
    s.obfuscation.tool = kind == ObfuscationKind::None ? ObfuscatorTag::none
                                                       : ObfuscatorTag::tigress;
    for (size_t i = 0; i < n_blocks; ++i)
        s.cfg.blocks.push_back({"b" + std::to_string(i), {{"ret", 0, std::nullopt}}});
    s.cfg.entry = "b0";
    return s;
}

std::vector<FunctionSample> synthetic_split_corpus(uint64_t seed, size_t bases,
                                                   std::vector<std::string> projects = {
                                                       "p0"}) {
    GeneratorConfig config;
    config.seed = seed;
    config.n_functions = bases;
    config.projects = std::move(projects);
    return gen_corpus(config, all_obfuscation_kinds());
}

std::array<size_t, 3> set_sizes(const SplitManifest& manifest) {
    std::array<size_t, 3> sizes = {0, 0, 0};
    for (const auto& [fid, set] : manifest.assignment) {
        (void)fid;
        ++sizes[static_cast<size_t>(set)];
    }
    return sizes;
}

}  // namespace

TEST_CASE("dedupe removes cross-project shared symbols with all variants") {
    std::vector<FunctionSample> corpus = {
        make_sample("A", "base", "memcpy", ObfuscationKind::None),
        make_sample("A", "base-Flatten", "memcpy", ObfuscationKind::Flatten),
        make_sample("B", "base", "memcpy", ObfuscationKind::None),
        make_sample("A", "base", "only_in_a", ObfuscationKind::None),
    };
    auto result = dedupe_shared_functions(corpus);
    CHECK(result.removed_samples == 3);
    REQUIRE(result.removed_symbols.size() == 1);
    CHECK(result.removed_symbols[0] == "memcpy");
    REQUIRE(result.corpus.size() == 1);
    CHECK(result.corpus[0].symbol() == "only_in_a");
}

TEST_CASE("dedupe keeps functions unique to one project") {
    std::vector<FunctionSample> corpus = {
        make_sample("A", "base", "f1", ObfuscationKind::None),
        make_sample("B", "base", "f2", ObfuscationKind::None),
    };
    auto result = dedupe_shared_functions(corpus);
    CHECK(result.corpus.size() == 2);
    CHECK(result.removed_symbols.empty());
}

TEST_CASE("dedupe removes exactly the planted duplicates") {
    auto corpus = synthetic_split_corpus(5, 40, {"pa", "pb"});
    // Plant 5 symbols that exist in both projects.
    std::vector<FunctionSample> planted = corpus;
    std::set<std::string> expected_removed;
    for (int i = 0; i < 5; ++i) {
        std::string symbol = "shared_" + std::to_string(i);
        planted.push_back(make_sample("pa", "base", symbol, ObfuscationKind::None));
        planted.push_back(make_sample("pb", "base", symbol, ObfuscationKind::None));
        planted.push_back(make_sample("pb", "base-Copy", symbol, ObfuscationKind::Copy));
        expected_removed.insert(symbol);
    }
    auto result = dedupe_shared_functions(planted);
    CHECK(result.removed_samples == 15);
    CHECK(std::set<std::string>(result.removed_symbols.begin(),
                                result.removed_symbols.end()) == expected_removed);
    CHECK(result.corpus.size() == corpus.size());
}

TEST_CASE("per-function split sizes follow largest-remainder rounding") {
    // 10 base functions in a single bin: 6.4/1.6/2.0 -> {6,2,2}.
    auto corpus = synthetic_split_corpus(11, 10);
    auto manifest = split_per_function(corpus, {0.64, 0.16, 0.20}, 42, 1);

    std::map<std::string, std::set<SplitSet>> per_symbol;
    for (const auto& sample : corpus)
        per_symbol[sample.symbol()].insert(manifest.assignment.at(sample.function_id));
    std::array<size_t, 3> function_counts = {0, 0, 0};
    for (const auto& [symbol, sets] : per_symbol) {
        (void)symbol;
        REQUIRE(sets.size() == 1);  // inheritance
        ++function_counts[static_cast<size_t>(*sets.begin())];
    }
    CHECK(function_counts[0] == 6);
    CHECK(function_counts[1] == 2);
    CHECK(function_counts[2] == 2);
}

TEST_CASE("largest remainder apportionment") {
    CHECK(largest_remainder_split(10, {0.64, 0.16, 0.20}) ==
          std::vector<size_t>{6, 2, 2});
    CHECK(largest_remainder_split(0, {0.64, 0.16, 0.20}) ==
          std::vector<size_t>{0, 0, 0});
    CHECK(largest_remainder_split(1, {0.64, 0.16, 0.20}) ==
          std::vector<size_t>{1, 0, 0});
    auto sizes = largest_remainder_split(97, {0.64, 0.16, 0.20});
    CHECK(sizes[0] + sizes[1] + sizes[2] == 97);
}

TEST_CASE("variants inherit their base function's set") {
    auto corpus = synthetic_split_corpus(13, 25);
    auto manifest = split_per_function(corpus, {0.64, 0.16, 0.20}, 7, 5);
    std::map<std::string, SplitSet> base_set;
    for (const auto& sample : corpus)
        if (!sample.obfuscation.is_obfuscated())
            base_set[sample.symbol()] = manifest.assignment.at(sample.function_id);
    for (const auto& sample : corpus)
        CHECK(manifest.assignment.at(sample.function_id) == base_set.at(sample.symbol()));
}

TEST_CASE("split determinism: same seed identical, different seed differs") {
    auto corpus = synthetic_split_corpus(17, 60);
    auto m1 = split_per_function(corpus, {0.64, 0.16, 0.20}, 1001, 10);
    auto m2 = split_per_function(corpus, {0.64, 0.16, 0.20}, 1001, 10);
    std::ostringstream s1, s2;
    write_manifest(s1, m1);
    write_manifest(s2, m2);
    CHECK(s1.str() == s2.str());  // bitwise

    auto m3 = split_per_function(corpus, {0.64, 0.16, 0.20}, 1002, 10);
    CHECK(m3.assignment != m1.assignment);
    CHECK(set_sizes(m3) == set_sizes(m1));  // same per-bin sizes, different membership
}

TEST_CASE("ratios must sum to one") {
    auto corpus = synthetic_split_corpus(19, 5);
    CHECK_THROWS(split_per_function(corpus, {0.5, 0.2, 0.2}, 1, 5));
}

TEST_CASE("per-binary split keeps test projects out of train and validation") {
    auto corpus = synthetic_split_corpus(23, 50, {"zlib", "lz4", "minilua", "sqlite",
                                                  "freetype"});
    auto manifest =
        split_per_binary(corpus, {"zlib", "lz4", "minilua"}, {"sqlite", "freetype"}, 0.20,
                         99);
    for (const auto& sample : corpus) {
        auto set = manifest.assignment.at(sample.function_id);
        if (sample.project == "sqlite" || sample.project == "freetype")
            CHECK(set == SplitSet::test);
        else
            CHECK(set != SplitSet::test);
    }
    CHECK(audit_leakage(manifest, corpus).empty());
}

TEST_CASE("per-binary split rejects bad project lists") {
    auto corpus = synthetic_split_corpus(29, 10, {"a", "b"});
    CHECK_THROWS(split_per_binary(corpus, {"a"}, {}, 0.2, 1));
    CHECK_THROWS(split_per_binary(corpus, {"a"}, {"a"}, 0.2, 1));
    CHECK_THROWS(split_per_binary(corpus, {"a"}, {"nonexistent"}, 0.2, 1));
    CHECK_THROWS(split_per_binary(corpus, {"a", "b"}, {"b"}, 0.2, 1));
}

TEST_CASE("audit passes on a clean split and catches a corrupted manifest") {
    auto corpus = synthetic_split_corpus(31, 30);
    auto manifest = split_per_function(corpus, {0.64, 0.16, 0.20}, 3, 5);
    CHECK(audit_leakage(manifest, corpus).empty());

    // Move one obfuscated variant to test: exactly one straddle violation.
    SplitManifest corrupted = manifest;
    for (const auto& sample : corpus) {
        if (sample.obfuscation.is_obfuscated() &&
            corrupted.assignment.at(sample.function_id) == SplitSet::train) {
            corrupted.assignment[sample.function_id] = SplitSet::test;
            break;
        }
    }
    auto violations = audit_leakage(corrupted, corpus);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("straddles") != std::string::npos);
}

TEST_CASE("audit reports planted cross-project duplicates in a per-binary split") {
    auto corpus = synthetic_split_corpus(37, 20, {"ta", "tb"});
    // Plant the same symbol in a train project and a test project.
    corpus.push_back(make_sample("ta", "base", "dup_fn", ObfuscationKind::None));
    corpus.push_back(make_sample("tb", "base", "dup_fn", ObfuscationKind::None));
    auto manifest = split_per_binary(corpus, {"ta"}, {"tb"}, 0.2, 5);
    auto violations = audit_leakage(manifest, corpus);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("dup_fn") != std::string::npos);
    CHECK(violations[0].find("duplicate") != std::string::npos);
}

TEST_CASE("audit catches coverage gaps") {
    auto corpus = synthetic_split_corpus(41, 5);
    auto manifest = split_per_function(corpus, {0.64, 0.16, 0.20}, 3, 2);
    SplitManifest missing = manifest;
    missing.assignment.erase(corpus[0].function_id);
    auto violations = audit_leakage(missing, corpus);
    bool found = false;
    for (const auto& v : violations)
        if (v.find("not assigned") != std::string::npos) found = true;
    CHECK(found);

    SplitManifest extra = manifest;
    extra.assignment["ghost/ghost/fn"] = SplitSet::train;
    violations = audit_leakage(extra, corpus);
    found = false;
    for (const auto& v : violations)
        if (v.find("unknown function") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("class ratio report counts full variant sets as 1/12 unobfuscated") {
    auto corpus = synthetic_split_corpus(43, 24);
    auto manifest = split_per_function(corpus, {0.64, 0.16, 0.20}, 9, 4);
    auto report = class_ratio_report(manifest, corpus);
    size_t total = 0;
    for (int s = 0; s < 3; ++s) {
        const auto& per_set = report.sets[static_cast<size_t>(s)];
        total += per_set.samples;
        if (per_set.samples > 0)
            CHECK(per_set.ratio_binary == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
    }
    CHECK(total == corpus.size());

    // All-unobfuscated corpus: ratio 1.0.
    auto bases_only = synthetic_split_corpus(47, 10);
    std::vector<FunctionSample> bases;
    for (const auto& s : bases_only)
        if (!s.obfuscation.is_obfuscated()) bases.push_back(s);
    auto manifest2 = split_per_function(bases, {0.64, 0.16, 0.20}, 2, 2);
    auto report2 = class_ratio_report(manifest2, bases);
    for (int s = 0; s < 3; ++s)
        if (report2.sets[static_cast<size_t>(s)].samples > 0)
            CHECK(report2.sets[static_cast<size_t>(s)].ratio_binary == 1.0);
}

TEST_CASE("class ratios match a direct recount with variant dropout") {
    auto corpus = synthetic_split_corpus(53, 30);
    // Drop a third of the obfuscated variants to shift ratios upward.
    std::vector<FunctionSample> dropped;
    size_t k = 0;
    for (const auto& sample : corpus) {
        if (sample.obfuscation.is_obfuscated() && (k++ % 3 == 0)) continue;
        dropped.push_back(sample);
    }
    auto manifest = split_per_function(dropped, {0.64, 0.16, 0.20}, 77, 5);
    auto report = class_ratio_report(manifest, dropped);

    std::array<size_t, 3> samples = {0, 0, 0}, unobf = {0, 0, 0};
    for (const auto& sample : dropped) {
        auto set = static_cast<size_t>(manifest.assignment.at(sample.function_id));
        ++samples[set];
        if (!sample.obfuscation.is_obfuscated()) ++unobf[set];
    }
    for (int s = 0; s < 3; ++s) {
        const auto& per_set = report.sets[static_cast<size_t>(s)];
        CHECK(per_set.samples == samples[static_cast<size_t>(s)]);
        CHECK(per_set.unobfuscated == unobf[static_cast<size_t>(s)]);
        if (per_set.samples > 0)
            CHECK(per_set.ratio_binary ==
                  doctest::Approx(static_cast<double>(unobf[static_cast<size_t>(s)]) /
                                  static_cast<double>(samples[static_cast<size_t>(s)])));
    }
}

TEST_CASE("per-bin proportions deviate at most one function from targets") {
    auto corpus = synthetic_split_corpus(59, 200);
    size_t n_bins = 10;
    auto manifest = split_per_function(corpus, {0.64, 0.16, 0.20}, 4, n_bins);

    // Recover bin membership: groups sorted by (bb_count, key), rank bins.
    std::map<std::string, std::pair<size_t, SplitSet>> groups;  // symbol -> (bb, set)
    for (const auto& sample : corpus)
        if (!sample.obfuscation.is_obfuscated())
            groups[sample.project + "\x1f" + sample.symbol()] = {
                sample.cfg.n_nodes(), manifest.assignment.at(sample.function_id)};
    std::vector<std::pair<size_t, SplitSet>> ordered;
    {
        std::vector<std::pair<std::string, std::pair<size_t, SplitSet>>> rows(
            groups.begin(), groups.end());
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            if (a.second.first != b.second.first) return a.second.first < b.second.first;
            return a.first < b.first;
        });
        for (auto& r : rows) ordered.push_back(r.second);
    }
    double ratios[3] = {0.64, 0.16, 0.20};
    for (size_t b = 0; b < n_bins; ++b) {
        std::array<double, 3> counts = {0, 0, 0};
        size_t members = 0;
        for (size_t rank = 0; rank < ordered.size(); ++rank) {
            if (rank * n_bins / ordered.size() != b) continue;
            ++members;
            ++counts[static_cast<size_t>(ordered[rank].second)];
        }
        for (int s = 0; s < 3; ++s)
            CHECK(std::abs(counts[static_cast<size_t>(s)] -
                           ratios[s] * static_cast<double>(members)) <= 1.0 + 1e-9);
    }
}

TEST_CASE("manifest round-trips through JSON") {
    auto corpus = synthetic_split_corpus(61, 8);
    auto manifest = split_per_function(corpus, {0.64, 0.16, 0.20}, 5, 3);
    std::ostringstream out;
    write_manifest(out, manifest);
    std::istringstream in(out.str());
    auto reread = read_manifest(in);
    CHECK(reread.strategy == manifest.strategy);
    CHECK(reread.seed == manifest.seed);
    CHECK(reread.ratios == manifest.ratios);
    CHECK(reread.assignment == manifest.assignment);
}

TEST_CASE("split requires every group to have an unobfuscated base") {
    std::vector<FunctionSample> corpus = {
        make_sample("p", "base-Flatten", "orphan", ObfuscationKind::Flatten)};
    CHECK_THROWS(split_per_function(corpus, {0.64, 0.16, 0.20}, 1, 1));
}
