#include "obfugraph/taxonomy.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace obfugraph {

namespace {

struct ClassSpec {
    const char* name;
    MnemonicClassTaxonomy::ClassTraits traits;
};

// The 27 classes. Traits: broad 7-way category plus the structural-feature
// roles (call/ret/branch/arithmetic/load-store) consumed by node features.
const ClassSpec kClassSpecs[kNumMnemonicClasses] = {
    {"data_movement",   {BroadCategory::data_movement, false, false, false, false, false, true}},
    {"stack_ops",       {BroadCategory::data_movement, false, false, false, false, false, true}},
    {"arithmetic",      {BroadCategory::arithmetic, false, false, false, false, true, false}},
    {"ext_arithmetic",  {BroadCategory::arithmetic, false, false, false, false, true, false}},
    {"logic",           {BroadCategory::logic_bitwise, false, false, false, false, false, false}},
    {"shift_rotate",    {BroadCategory::shift_rotate, false, false, false, false, false, false}},
    {"compare",         {BroadCategory::compare_test, false, false, false, false, false, false}},
    {"cond_jump",       {BroadCategory::control_transfer, false, false, true, false, false, false}},
    {"uncond_jump",     {BroadCategory::control_transfer, false, false, false, true, false, false}},
    {"call",            {BroadCategory::control_transfer, true, false, false, false, false, false}},
    {"ret",             {BroadCategory::control_transfer, false, true, false, false, false, false}},
    {"interrupt",       {BroadCategory::control_transfer, false, false, false, false, false, false}},
    {"string_ops",      {BroadCategory::data_movement, false, false, false, false, false, true}},
    {"flag_ops",        {BroadCategory::other, false, false, false, false, false, false}},
    {"conversion",      {BroadCategory::data_movement, false, false, false, false, false, false}},
    {"simd_int",        {BroadCategory::other, false, false, false, false, false, false}},
    {"simd_float",      {BroadCategory::other, false, false, false, false, false, false}},
    {"float_arith",     {BroadCategory::arithmetic, false, false, false, false, true, false}},
    {"float_move",      {BroadCategory::data_movement, false, false, false, false, false, true}},
    {"lea",             {BroadCategory::data_movement, false, false, false, false, false, false}},
    {"nop_padding",     {BroadCategory::other, false, false, false, false, false, false}},
    {"atomic_lock",     {BroadCategory::other, false, false, false, false, false, false}},
    {"segment_system",  {BroadCategory::other, false, false, false, false, false, false}},
    {"crypto_aes",      {BroadCategory::other, false, false, false, false, false, false}},
    {"bit_manipulation",{BroadCategory::logic_bitwise, false, false, false, false, false, false}},
    {"io",              {BroadCategory::other, false, false, false, false, false, false}},
    {"other",           {BroadCategory::other, false, false, false, false, false, false}},
};

struct MnemonicSpec {
    const char* mnemonic;
    const char* cls;
};

const MnemonicSpec kDefaultMnemonics[] = {
    // data movement
    {"mov", "data_movement"}, {"movzx", "data_movement"}, {"movsx", "data_movement"},
    {"movsxd", "data_movement"}, {"movabs", "data_movement"}, {"xchg", "data_movement"},
    {"cmov", "data_movement"}, {"cmove", "data_movement"}, {"cmovne", "data_movement"},
    {"cmova", "data_movement"}, {"cmovb", "data_movement"}, {"cmovg", "data_movement"},
    {"cmovl", "data_movement"}, {"bswap", "data_movement"},
    // stack
    {"push", "stack_ops"}, {"pop", "stack_ops"}, {"pushf", "stack_ops"},
    {"popf", "stack_ops"}, {"enter", "stack_ops"}, {"leave", "stack_ops"},
    // arithmetic
    {"add", "arithmetic"}, {"sub", "arithmetic"}, {"inc", "arithmetic"},
    {"dec", "arithmetic"}, {"neg", "arithmetic"}, {"adc", "arithmetic"},
    {"sbb", "arithmetic"}, {"cdq", "arithmetic"}, {"cqo", "arithmetic"},
    // extended arithmetic
    {"mul", "ext_arithmetic"}, {"imul", "ext_arithmetic"}, {"div", "ext_arithmetic"},
    {"idiv", "ext_arithmetic"},
    // logic
    {"and", "logic"}, {"or", "logic"}, {"xor", "logic"}, {"not", "logic"},
    // shift/rotate
    {"shl", "shift_rotate"}, {"shr", "shift_rotate"}, {"sal", "shift_rotate"},
    {"sar", "shift_rotate"}, {"rol", "shift_rotate"}, {"ror", "shift_rotate"},
    {"rcl", "shift_rotate"}, {"rcr", "shift_rotate"}, {"shld", "shift_rotate"},
    {"shrd", "shift_rotate"},
    // compare
    {"cmp", "compare"}, {"test", "compare"}, {"cmpxchg", "compare"},
    // conditional jumps
    {"je", "cond_jump"}, {"jne", "cond_jump"}, {"jz", "cond_jump"},
    {"jnz", "cond_jump"}, {"ja", "cond_jump"}, {"jae", "cond_jump"},
    {"jb", "cond_jump"}, {"jbe", "cond_jump"}, {"jg", "cond_jump"},
    {"jge", "cond_jump"}, {"jl", "cond_jump"}, {"jle", "cond_jump"},
    {"js", "cond_jump"}, {"jns", "cond_jump"}, {"jo", "cond_jump"},
    {"jno", "cond_jump"}, {"jp", "cond_jump"}, {"jnp", "cond_jump"},
    {"jcxz", "cond_jump"}, {"jecxz", "cond_jump"}, {"jrcxz", "cond_jump"},
    {"loop", "cond_jump"}, {"loope", "cond_jump"}, {"loopne", "cond_jump"},
    // unconditional jump
    {"jmp", "uncond_jump"},
    // call / ret
    {"call", "call"}, {"ret", "ret"}, {"retn", "ret"}, {"retf", "ret"},
    // interrupt
    {"int", "interrupt"}, {"int3", "interrupt"}, {"syscall", "interrupt"},
    {"sysenter", "interrupt"}, {"ud2", "interrupt"}, {"hlt", "interrupt"},
    // string ops
    {"movs", "string_ops"}, {"movsb", "string_ops"}, {"movsw", "string_ops"},
    {"movsd_str", "string_ops"}, {"movsq", "string_ops"}, {"stos", "string_ops"},
    {"stosb", "string_ops"}, {"stosd", "string_ops"}, {"stosq", "string_ops"},
    {"lods", "string_ops"}, {"lodsb", "string_ops"}, {"scas", "string_ops"},
    {"scasb", "string_ops"}, {"cmps", "string_ops"}, {"cmpsb", "string_ops"},
    {"rep", "string_ops"}, {"repe", "string_ops"}, {"repne", "string_ops"},
    // flag ops
    {"clc", "flag_ops"}, {"stc", "flag_ops"}, {"cmc", "flag_ops"},
    {"cld", "flag_ops"}, {"std", "flag_ops"}, {"sahf", "flag_ops"},
    {"lahf", "flag_ops"}, {"sete", "flag_ops"}, {"setne", "flag_ops"},
    {"seta", "flag_ops"}, {"setb", "flag_ops"}, {"setg", "flag_ops"},
    {"setl", "flag_ops"}, {"setge", "flag_ops"}, {"setle", "flag_ops"},
    {"setae", "flag_ops"}, {"setbe", "flag_ops"}, {"sets", "flag_ops"},
    {"setns", "flag_ops"},
    // conversion
    {"cbw", "conversion"}, {"cwde", "conversion"}, {"cdqe", "conversion"},
    {"cwd", "conversion"}, {"cvtsi2sd", "conversion"}, {"cvtsi2ss", "conversion"},
    {"cvttsd2si", "conversion"}, {"cvttss2si", "conversion"}, {"cvtsd2ss", "conversion"},
    {"cvtss2sd", "conversion"},
    // SIMD integer
    {"paddd", "simd_int"}, {"paddq", "simd_int"}, {"psubd", "simd_int"},
    {"pxor", "simd_int"}, {"pand", "simd_int"}, {"por", "simd_int"},
    {"pcmpeqb", "simd_int"}, {"pcmpeqd", "simd_int"}, {"pmovmskb", "simd_int"},
    {"punpcklbw", "simd_int"}, {"pshufd", "simd_int"}, {"pslldq", "simd_int"},
    {"psrldq", "simd_int"},
    // SIMD float
    {"addps", "simd_float"}, {"mulps", "simd_float"}, {"subps", "simd_float"},
    {"divps", "simd_float"}, {"addpd", "simd_float"}, {"mulpd", "simd_float"},
    {"xorps", "simd_float"}, {"xorpd", "simd_float"}, {"andps", "simd_float"},
    {"unpcklps", "simd_float"}, {"shufps", "simd_float"},
    // scalar float arithmetic
    {"addsd", "float_arith"}, {"subsd", "float_arith"}, {"mulsd", "float_arith"},
    {"divsd", "float_arith"}, {"addss", "float_arith"}, {"subss", "float_arith"},
    {"mulss", "float_arith"}, {"divss", "float_arith"}, {"sqrtsd", "float_arith"},
    {"sqrtss", "float_arith"}, {"comisd", "float_arith"}, {"ucomisd", "float_arith"},
    {"comiss", "float_arith"}, {"ucomiss", "float_arith"}, {"fadd", "float_arith"},
    {"fsub", "float_arith"}, {"fmul", "float_arith"}, {"fdiv", "float_arith"},
    // float moves
    {"movsd", "float_move"}, {"movss", "float_move"}, {"movaps", "float_move"},
    {"movapd", "float_move"}, {"movups", "float_move"}, {"movupd", "float_move"},
    {"movdqa", "float_move"}, {"movdqu", "float_move"}, {"movq", "float_move"},
    {"movd", "float_move"}, {"fld", "float_move"}, {"fst", "float_move"},
    {"fstp", "float_move"},
    // lea
    {"lea", "lea"},
    // nop / padding
    {"nop", "nop_padding"}, {"endbr64", "nop_padding"}, {"pause", "nop_padding"},
    // atomic/lock
    {"lock", "atomic_lock"}, {"xadd", "atomic_lock"}, {"mfence", "atomic_lock"},
    {"lfence", "atomic_lock"}, {"sfence", "atomic_lock"},
    // segment/system
    {"cpuid", "segment_system"}, {"rdtsc", "segment_system"}, {"xgetbv", "segment_system"},
    {"fs", "segment_system"}, {"gs", "segment_system"}, {"swapgs", "segment_system"},
    // crypto
    {"aesenc", "crypto_aes"}, {"aesdec", "crypto_aes"}, {"aeskeygenassist", "crypto_aes"},
    {"sha256rnds2", "crypto_aes"}, {"pclmulqdq", "crypto_aes"},
    // bit manipulation
    {"bt", "bit_manipulation"}, {"bts", "bit_manipulation"}, {"btr", "bit_manipulation"},
    {"btc", "bit_manipulation"}, {"bsf", "bit_manipulation"}, {"bsr", "bit_manipulation"},
    {"popcnt", "bit_manipulation"}, {"lzcnt", "bit_manipulation"}, {"tzcnt", "bit_manipulation"},
    {"andn", "bit_manipulation"}, {"bextr", "bit_manipulation"},
    // I/O
    {"in", "io"}, {"out", "io"}, {"insb", "io"}, {"outsb", "io"},
};

MnemonicClassTaxonomy build_default() {
    MnemonicClassTaxonomy taxonomy;
    taxonomy.class_names.reserve(kNumMnemonicClasses);
    std::unordered_map<std::string, int> class_index;
    for (int i = 0; i < kNumMnemonicClasses; ++i) {
        taxonomy.class_names.emplace_back(kClassSpecs[i].name);
        taxonomy.traits.push_back(kClassSpecs[i].traits);
        class_index[kClassSpecs[i].name] = i;
    }
    taxonomy.other_class = class_index.at("other");
    for (const auto& spec : kDefaultMnemonics)
        taxonomy.mnemonic_to_class[spec.mnemonic] = class_index.at(spec.cls);
    return taxonomy;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    return fields;
}

}  // namespace

const MnemonicClassTaxonomy& default_taxonomy() {
    static const MnemonicClassTaxonomy taxonomy = build_default();
    return taxonomy;
}

MnemonicClassTaxonomy load_taxonomy(std::istream& in) {
    // Custom tables reuse the default class list and traits; the file's
    // header must name the same 27 classes (order may differ but the set
    // must match), then remaps mnemonics freely.
    MnemonicClassTaxonomy taxonomy;
    std::string line;
    bool saw_header = false;
    std::unordered_map<std::string, int> class_index;
    const auto& dflt = default_taxonomy();

    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (!saw_header) {
            if (fields.empty() || fields[0] != "#classes")
                throw std::runtime_error("taxonomy file must start with a #classes header");
            if (fields.size() != kNumMnemonicClasses + 1)
                throw std::runtime_error("taxonomy header must list exactly 27 classes, got " +
                                         std::to_string(fields.size() - 1));
            for (size_t i = 1; i < fields.size(); ++i) {
                const std::string& name = fields[i];
                auto it = std::find(dflt.class_names.begin(), dflt.class_names.end(), name);
                if (it == dflt.class_names.end())
                    throw std::runtime_error("unknown taxonomy class \"" + name + "\"");
                if (class_index.count(name))
                    throw std::runtime_error("duplicate taxonomy class \"" + name + "\"");
                class_index[name] = static_cast<int>(i - 1);
                taxonomy.class_names.push_back(name);
                taxonomy.traits.push_back(
                    dflt.traits[static_cast<size_t>(it - dflt.class_names.begin())]);
            }
            if (!class_index.count("other"))
                throw std::runtime_error("taxonomy class list must include \"other\"");
            taxonomy.other_class = class_index.at("other");
            saw_header = true;
            continue;
        }
        if (line[0] == '#') continue;
        if (fields.size() != 2)
            throw std::runtime_error("taxonomy line " + std::to_string(lineno) +
                                     ": expected mnemonic<TAB>class");
        auto it = class_index.find(fields[1]);
        if (it == class_index.end())
            throw std::runtime_error("taxonomy line " + std::to_string(lineno) +
                                     ": unknown class \"" + fields[1] + "\"");
        taxonomy.mnemonic_to_class[fields[0]] = it->second;
    }
    if (!saw_header) throw std::runtime_error("taxonomy file is empty");
    return taxonomy;
}

void write_taxonomy(std::ostream& out, const MnemonicClassTaxonomy& taxonomy) {
    out << "#classes";
    for (const auto& name : taxonomy.class_names) out << '\t' << name;
    out << '\n';
    std::vector<std::pair<std::string, int>> rows(taxonomy.mnemonic_to_class.begin(),
                                                  taxonomy.mnemonic_to_class.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [mnemonic, cls] : rows)
        out << mnemonic << '\t' << taxonomy.class_names[static_cast<size_t>(cls)] << '\n';
}

const std::unordered_map<std::string, std::vector<std::string>>& pcode_fallback_table() {
    static const std::unordered_map<std::string, std::vector<std::string>> table = {
        {"mov", {"COPY"}},
        {"movzx", {"INT_ZEXT"}},
        {"movsx", {"INT_SEXT"}},
        {"movsxd", {"INT_SEXT"}},
        {"movabs", {"COPY"}},
        {"xchg", {"COPY", "COPY"}},
        {"lea", {"INT_ADD"}},
        {"push", {"INT_SUB", "STORE"}},
        {"pop", {"LOAD", "INT_ADD"}},
        {"enter", {"INT_SUB", "STORE"}},
        {"leave", {"COPY", "LOAD"}},
        {"add", {"INT_ADD"}},
        {"sub", {"INT_SUB"}},
        {"inc", {"INT_ADD"}},
        {"dec", {"INT_SUB"}},
        {"neg", {"INT_2COMP"}},
        {"adc", {"INT_ADD", "INT_CARRY"}},
        {"sbb", {"INT_SUB", "INT_SBORROW"}},
        {"mul", {"INT_MULT"}},
        {"imul", {"INT_MULT"}},
        {"div", {"INT_DIV", "INT_REM"}},
        {"idiv", {"INT_SDIV", "INT_SREM"}},
        {"and", {"INT_AND"}},
        {"or", {"INT_OR"}},
        {"xor", {"INT_XOR"}},
        {"not", {"INT_NEGATE"}},
        {"shl", {"INT_LEFT"}},
        {"sal", {"INT_LEFT"}},
        {"shr", {"INT_RIGHT"}},
        {"sar", {"INT_SRIGHT"}},
        {"rol", {"INT_LEFT", "INT_OR"}},
        {"ror", {"INT_RIGHT", "INT_OR"}},
        {"cmp", {"INT_SUB", "INT_LESS", "INT_EQUAL"}},
        {"test", {"INT_AND", "INT_EQUAL"}},
        {"je", {"CBRANCH"}},
        {"jne", {"CBRANCH"}},
        {"jz", {"CBRANCH"}},
        {"jnz", {"CBRANCH"}},
        {"ja", {"CBRANCH"}},
        {"jae", {"CBRANCH"}},
        {"jb", {"CBRANCH"}},
        {"jbe", {"CBRANCH"}},
        {"jg", {"CBRANCH"}},
        {"jge", {"CBRANCH"}},
        {"jl", {"CBRANCH"}},
        {"jle", {"CBRANCH"}},
        {"js", {"CBRANCH"}},
        {"jns", {"CBRANCH"}},
        {"jmp", {"BRANCH"}},
        {"call", {"CALL"}},
        {"ret", {"RETURN"}},
        {"retn", {"RETURN"}},
        {"int", {"CALLOTHER"}},
        {"int3", {"CALLOTHER"}},
        {"syscall", {"CALLOTHER"}},
        {"hlt", {"CALLOTHER"}},
        {"nop", {}},
        {"endbr64", {}},
        {"cdq", {"INT_SEXT"}},
        {"cqo", {"INT_SEXT"}},
        {"cbw", {"INT_SEXT"}},
        {"cwde", {"INT_SEXT"}},
        {"cdqe", {"INT_SEXT"}},
        {"sete", {"INT_EQUAL", "INT_ZEXT"}},
        {"setne", {"INT_NOTEQUAL", "INT_ZEXT"}},
        {"setg", {"INT_SLESS", "INT_ZEXT"}},
        {"setl", {"INT_SLESS", "INT_ZEXT"}},
        {"seta", {"INT_LESS", "INT_ZEXT"}},
        {"setb", {"INT_LESS", "INT_ZEXT"}},
        {"cmove", {"INT_EQUAL", "COPY"}},
        {"cmovne", {"INT_NOTEQUAL", "COPY"}},
        {"movsd", {"COPY"}},
        {"movss", {"COPY"}},
        {"movaps", {"COPY"}},
        {"movups", {"COPY"}},
        {"movdqa", {"COPY"}},
        {"movdqu", {"COPY"}},
        {"movq", {"COPY"}},
        {"movd", {"COPY"}},
        {"addsd", {"FLOAT_ADD"}},
        {"subsd", {"FLOAT_SUB"}},
        {"mulsd", {"FLOAT_MULT"}},
        {"divsd", {"FLOAT_DIV"}},
        {"addss", {"FLOAT_ADD"}},
        {"subss", {"FLOAT_SUB"}},
        {"mulss", {"FLOAT_MULT"}},
        {"divss", {"FLOAT_DIV"}},
        {"sqrtsd", {"FLOAT_SQRT"}},
        {"comisd", {"FLOAT_LESS", "FLOAT_EQUAL"}},
        {"ucomisd", {"FLOAT_LESS", "FLOAT_EQUAL"}},
        {"cvtsi2sd", {"INT2FLOAT"}},
        {"cvttsd2si", {"TRUNC"}},
        {"cvtss2sd", {"FLOAT2FLOAT"}},
        {"cvtsd2ss", {"FLOAT2FLOAT"}},
        {"bswap", {"CALLOTHER"}},
        {"popcnt", {"POPCOUNT"}},
        {"bsf", {"CALLOTHER"}},
        {"bsr", {"CALLOTHER"}},
        {"bt", {"INT_RIGHT", "INT_AND"}},
        {"xadd", {"INT_ADD", "COPY"}},
        {"cmpxchg", {"INT_EQUAL", "COPY"}},
        {"pxor", {"INT_XOR"}},
        {"pand", {"INT_AND"}},
        {"por", {"INT_OR"}},
        {"paddd", {"INT_ADD"}},
        {"psubd", {"INT_SUB"}},
        {"stosb", {"STORE"}},
        {"stosd", {"STORE"}},
        {"stosq", {"STORE"}},
        {"lodsb", {"LOAD"}},
        {"movsb", {"LOAD", "STORE"}},
        {"movsq", {"LOAD", "STORE"}},
        {"scasb", {"LOAD", "INT_EQUAL"}},
        {"cmpsb", {"LOAD", "LOAD", "INT_EQUAL"}},
    };
    return table;
}

std::vector<std::string> effective_pcode_ops(const Instruction& insn) {
    if (insn.pcode_ops) return *insn.pcode_ops;
    const auto& table = pcode_fallback_table();
    auto it = table.find(insn.mnemonic);
    if (it == table.end()) return {"UNMAPPED"};
    return it->second;
}

}  // namespace obfugraph
