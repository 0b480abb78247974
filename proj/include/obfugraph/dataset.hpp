#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "obfugraph/cfg.hpp"

// Leakage-controlled dataset splitting. A base function is identified by
// (project, symbol); its obfuscated variants share the symbol and differ in
// binary. The per-function strategy keeps a base function and all its
// variants in one set; the per-binary strategy keeps whole projects on one
// side of the train/test divide.

namespace obfugraph {

enum class SplitSet { train = 0, validation = 1, test = 2 };
const std::string& to_string(SplitSet s);
std::optional<SplitSet> split_set_from_string(const std::string& s);

struct SplitManifest {
    std::string strategy;  // "per_function" | "per_binary"
    uint64_t seed = 0;
    std::array<double, 3> ratios = {0.64, 0.16, 0.20};
    std::vector<double> bin_edges;  // BB-count quantile bin edges used
    std::map<std::string, SplitSet> assignment;  // function_id -> set (sorted keys)
};

struct DedupeResult {
    std::vector<FunctionSample> corpus;        // retained samples, input order
    std::vector<std::string> removed_symbols;  // base names removed (sorted)
    size_t removed_samples = 0;
};

// Removes every base function whose symbol appears (as an unobfuscated
// sample) in two or more projects, together with all its variants.
DedupeResult dedupe_shared_functions(const std::vector<FunctionSample>& corpus);

SplitManifest split_per_function(const std::vector<FunctionSample>& corpus,
                                 std::array<double, 3> ratios, uint64_t seed,
                                 size_t n_bins = 10);

SplitManifest split_per_binary(const std::vector<FunctionSample>& corpus,
                               const std::vector<std::string>& train_projects,
                               const std::vector<std::string>& test_projects,
                               double val_ratio, uint64_t seed, size_t n_bins = 10);

// Empty result = no leakage. Checks set inheritance per base function,
// project separation (per_binary), cross-project symbol straddles, and
// exact corpus coverage.
std::vector<std::string> audit_leakage(const SplitManifest& manifest,
                                       const std::vector<FunctionSample>& corpus);

struct ClassRatioReport {
    struct PerSet {
        size_t samples = 0;
        size_t base_functions = 0;
        size_t unobfuscated = 0;
        double ratio_binary = 0.0;  // unobfuscated / samples
        std::map<std::string, size_t> per_class;
    };
    std::array<PerSet, 3> sets;  // train, validation, test
};

ClassRatioReport class_ratio_report(const SplitManifest& manifest,
                                    const std::vector<FunctionSample>& corpus);

void write_manifest(std::ostream& out, const SplitManifest& manifest);
SplitManifest read_manifest(std::istream& in);
void save_manifest(const std::string& path, const SplitManifest& manifest);
SplitManifest load_manifest(const std::string& path);

// Largest-remainder apportionment of n into parts proportional to ratios.
std::vector<size_t> largest_remainder_split(size_t n, const std::vector<double>& ratios);

}  // namespace obfugraph
