#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Attributed control-flow graph data model and the JSON-Lines interchange
// format. One line = one function record:
//
//   {"function_id": "...", "project": "...", "binary": "...",
//    "opt_level": "O0"|"O2",
//    "obfuscation": {"label": "...", "obfuscator": "..."},
//    "entry": "...",
//    "blocks": [{"id": "...", "insns": [{"m": "...", "nops": 0,
//                                        "pcode": ["..."]?}]}],
//    "edges": [["src","dst"], ...]}
//
// Field names are normative. Unknown extra keys are ignored on input.
// function_id is expected to be "project/binary/symbol"; the text after the
// last '/' is the symbol name used for base-function grouping and
// cross-project deduplication.

namespace obfugraph {

struct Instruction {
    std::string mnemonic;   // lower-cased, non-empty, no whitespace
    int operand_count = 0;  // 0..8
    std::optional<std::vector<std::string>> pcode_ops;
};

struct BasicBlock {
    std::string id;
    std::vector<Instruction> insns;  // non-empty
};

struct ControlFlowGraph {
    std::vector<BasicBlock> blocks;
    std::vector<std::pair<std::string, std::string>> edges;  // (src, dst), no duplicates
    std::string entry;

    size_t n_nodes() const { return blocks.size(); }
    size_t n_edges() const { return edges.size(); }
};

enum class ObfuscationKind {
    None,
    EncodeArithmetic,
    EncodeLiterals,
    Virtualize,
    OpaquePredicates,
    Flatten,
    Split,
    Merge,
    Copy,
    Mix1,
    Mix2,
    Substitution,  // instruction-substitution pass (OLLVM-style)
};
inline constexpr int kNumObfuscationKinds = 12;  // including None
inline constexpr int kNumObfuscationClasses = 11;

enum class ObfuscatorTag { none, tigress, ollvm, synthetic };

struct ObfuscationLabel {
    ObfuscationKind kind = ObfuscationKind::None;
    ObfuscatorTag tool = ObfuscatorTag::none;
    // Set when a transform could not be applied faithfully (passthrough or
    // degraded mode). Benchmark runs exclude flagged samples by default.
    bool degenerate = false;

    bool is_obfuscated() const { return kind != ObfuscationKind::None; }
};

const std::string& to_string(ObfuscationKind kind);
const std::string& to_string(ObfuscatorTag tag);
std::optional<ObfuscationKind> obfuscation_kind_from_string(const std::string& s);
std::optional<ObfuscatorTag> obfuscator_tag_from_string(const std::string& s);
const std::vector<std::string>& obfuscation_kind_names();  // all 12, None first

struct FunctionSample {
    std::string function_id;
    std::string project;
    std::string binary;
    std::string opt_level;  // "O0" | "O2"
    ObfuscationLabel obfuscation;
    ControlFlowGraph cfg;
    int source_line = 0;  // 1-based line in the source file; 0 when generated

    // Symbol component of function_id (text after the last '/').
    std::string symbol() const;
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& message);
    int line() const { return line_; }

private:
    int line_;
};

// Structural validation. Returns human-readable violation descriptions
// naming the offending block/edge; empty means valid.
std::vector<std::string> validate_cfg(const ControlFlowGraph& cfg);
// validate_cfg plus sample-level invariants (opt_level, label coherence).
std::vector<std::string> validate_sample(const FunctionSample& sample);

// Parses a whole JSON-Lines stream. Fail-fast: the first malformed or
// invalid line throws ParseError carrying its line number. Duplicate
// function_id within the stream is an error.
std::vector<FunctionSample> parse_corpus(std::istream& in);
std::vector<FunctionSample> load_corpus(const std::string& path);

std::string serialize_sample(const FunctionSample& sample);
void write_corpus(std::ostream& out, const std::vector<FunctionSample>& corpus);
void save_corpus(const std::string& path, const std::vector<FunctionSample>& corpus);

struct MnemonicVocabulary {
    struct Entry {
        std::string token;
        uint64_t total_count = 0;  // occurrences across all instructions
        uint64_t doc_freq = 0;     // number of functions containing the token
    };
    std::vector<Entry> entries;  // sorted by (total_count desc, token asc)

    size_t size() const { return entries.size(); }
    // Index of token in entries, or nullopt.
    std::optional<size_t> index_of(const std::string& token) const;
};

// Assembly-mnemonic vocabulary ranked by total occurrence count, truncated
// to max_size (0 = unlimited). The parallel Pcode vocabulary lives in
// features.hpp because it depends on the Pcode fallback table.
MnemonicVocabulary build_vocabulary(const std::vector<FunctionSample>& corpus,
                                    size_t max_size = 0);

size_t weakly_connected_components(const ControlFlowGraph& cfg);

}  // namespace obfugraph
