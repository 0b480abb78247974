#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "obfugraph/cfg.hpp"

// Synthetic CFG corpus generation. Base functions are random reducible
// CFGs grown from a sequence/branch/loop grammar; transforms imitate the
// structural and statistical signatures of real obfuscation passes (not
// their semantics). Degenerate applications (preconditions unmet, or a
// degraded-mode injection) return a sample with the degenerate flag set
// rather than being dropped.

namespace obfugraph {

struct MnemonicProfile {
    std::vector<std::pair<std::string, double>> weights;  // body instructions
};
MnemonicProfile default_mnemonic_profile();

struct GeneratorConfig {
    uint64_t seed = 0;
    size_t n_functions = 100;
    int min_blocks = 1;
    int max_blocks = 32;
    double block_shape = 1.8;  // >1 skews small; u^shape draw over the range
    int min_insns = 1;
    int max_insns = 10;
    double insn_shape = 1.4;
    MnemonicProfile profile;  // empty = default
    std::vector<std::string> projects = {"proj0"};
    // Per-project perturbation of profile weights and size shapes in
    // [0,1]; 0 makes all pseudo-projects statistically identical.
    double project_jitter = 0.0;
    std::string opt_level = "O0";
};

void validate_config(const GeneratorConfig& config);  // throws on bad values
GeneratorConfig load_generator_config(std::istream& in);  // strict: unknown keys error
void write_generator_config(std::ostream& out, const GeneratorConfig& config);

// Deterministic in (config.seed, index). Label None / synthetic.
FunctionSample gen_base_function(const GeneratorConfig& config, size_t index);

FunctionSample apply_flatten(const FunctionSample& f, uint64_t seed);
FunctionSample apply_opaque_predicates(const FunctionSample& f, uint64_t seed, double rate);
FunctionSample apply_encode_arithmetic(const FunctionSample& f, uint64_t seed, int depth);
FunctionSample apply_encode_literals(const FunctionSample& f, uint64_t seed);
FunctionSample apply_split(const FunctionSample& f, uint64_t seed);
FunctionSample apply_merge(const FunctionSample& f, const FunctionSample& donor, uint64_t seed);
FunctionSample apply_copy(const FunctionSample& f, uint64_t seed);
FunctionSample apply_virtualize(const FunctionSample& f, uint64_t seed);
FunctionSample apply_substitution(const FunctionSample& f, uint64_t seed);
FunctionSample apply_mix1(const FunctionSample& f, uint64_t seed);
FunctionSample apply_mix2(const FunctionSample& f, uint64_t seed);

// Dispatch by label kind; donor is required for Merge and ignored
// otherwise. rate/depth defaults match gen_corpus.
FunctionSample apply_transform(ObfuscationKind kind, const FunctionSample& f,
                               const FunctionSample* donor, uint64_t seed,
                               double opaque_rate = 0.5, int encode_depth = 1);

const std::vector<ObfuscationKind>& all_obfuscation_kinds();  // the 11 non-None kinds

// Base + one variant per requested kind for every function index.
std::vector<FunctionSample> gen_corpus(const GeneratorConfig& config,
                                       const std::vector<ObfuscationKind>& variant_set);

}  // namespace obfugraph
