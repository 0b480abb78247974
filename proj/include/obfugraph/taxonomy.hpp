#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "obfugraph/cfg.hpp"

// Coarse mnemonic classification: exactly 27 classes with an "other"
// fallback, so the mapping is total. The default table covers common
// x86-64 mnemonics; a custom table can be loaded from a text file:
//
//   #classes<TAB>class0<TAB>class1<TAB>...     (header, ordered class list)
//   mnemonic<TAB>class                         (one mapping per line)
//
// Lines starting with '#' other than the header are comments.

namespace obfugraph {

// Broad 7-way grouping used by the graph-level feature vector.
enum class BroadCategory {
    data_movement = 0,
    arithmetic = 1,
    logic_bitwise = 2,
    shift_rotate = 3,
    control_transfer = 4,
    compare_test = 5,
    other = 6,
};
inline constexpr int kNumBroadCategories = 7;
inline constexpr int kNumMnemonicClasses = 27;

struct MnemonicClassTaxonomy {
    struct ClassTraits {
        BroadCategory broad = BroadCategory::other;
        bool call_like = false;
        bool ret_like = false;
        bool cond_branch = false;
        bool uncond_branch = false;
        bool arithmetic = false;
        bool load_store = false;
    };

    std::vector<std::string> class_names;  // exactly 27; "other" present
    std::vector<ClassTraits> traits;       // parallel to class_names
    std::unordered_map<std::string, int> mnemonic_to_class;
    int other_class = -1;

    int class_of(const std::string& mnemonic) const {
        auto it = mnemonic_to_class.find(mnemonic);
        return it == mnemonic_to_class.end() ? other_class : it->second;
    }
    const ClassTraits& traits_of(const std::string& mnemonic) const {
        return traits[static_cast<size_t>(class_of(mnemonic))];
    }
    BroadCategory broad_of(const std::string& mnemonic) const {
        return traits_of(mnemonic).broad;
    }
};

const MnemonicClassTaxonomy& default_taxonomy();
MnemonicClassTaxonomy load_taxonomy(std::istream& in);
void write_taxonomy(std::ostream& out, const MnemonicClassTaxonomy& taxonomy);

// Fixed assembly-mnemonic -> Pcode-op multiset used when a record carries
// no lifted pcode. Unmapped mnemonics yield {"UNMAPPED"}. Lower fidelity
// than real lifter output, but keeps the pcode feature scheme usable.
const std::unordered_map<std::string, std::vector<std::string>>& pcode_fallback_table();

// The instruction's own pcode_ops when present, otherwise the fallback.
std::vector<std::string> effective_pcode_ops(const Instruction& insn);

}  // namespace obfugraph
