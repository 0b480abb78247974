#include "obfugraph/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "obfugraph/rng.hpp"
#include "obfugraph/taxonomy.hpp"

namespace obfugraph {

namespace {

int operand_count_for(const std::string& mnemonic) {
    const auto& t = default_taxonomy().traits_of(mnemonic);
    if (t.ret_like) return 0;
    if (t.call_like || t.cond_branch || t.uncond_branch) return 1;
    if (mnemonic == "push" || mnemonic == "pop" || mnemonic == "inc" ||
        mnemonic == "dec" || mnemonic == "neg" || mnemonic == "not")
        return 1;
    if (mnemonic == "nop") return 0;
    return 2;
}

Instruction make_insn(const std::string& mnemonic) {
    return Instruction{mnemonic, operand_count_for(mnemonic), std::nullopt};
}

// Skewed integer draw in [lo, hi]; shape > 1 favors the low end.
int shaped_int(Rng& rng, int lo, int hi, double shape) {
    if (hi <= lo) return lo;
    double u = rng.next_double();
    double t = std::pow(u, shape);
    int v = lo + static_cast<int>(t * static_cast<double>(hi - lo + 1));
    return std::min(v, hi);
}

struct ProjectStyle {
    MnemonicProfile profile;
    double block_shape;
    double insn_shape;
};

// Instruction-set idioms a codebase may lean on (float math, string ops,
// conditional moves, ...). Each pseudo-project samples a few, which gives
// cross-project splits genuine out-of-vocabulary shift.
const std::vector<std::string> kProjectIdioms = {
    "movaps", "movsd", "addsd",  "mulsd",  "subsd", "divsd",  "cvtsi2sd",
    "cvttsd2si", "movsb", "stosb", "lodsb", "scasb", "sete",  "setne",
    "setg",  "cmove", "cmovne", "adc",    "sbb",   "rol",    "ror",
    "bt",    "popcnt", "xchg",
};

ProjectStyle project_style(const GeneratorConfig& config, const std::string& project) {
    ProjectStyle style;
    style.profile = config.profile.weights.empty() ? default_mnemonic_profile() : config.profile;
    style.block_shape = config.block_shape;
    style.insn_shape = config.insn_shape;
    if (config.project_jitter > 0.0) {
        Rng rng(derive_seed(config.seed, hash_string(project), 0x9e57));
        for (auto& [mnemonic, weight] : style.profile.weights) {
            (void)mnemonic;
            weight *= 1.0 + config.project_jitter * (rng.next_double() * 2.0 - 1.0);
            weight = std::max(weight, 1e-3);
        }
        // Project idioms: 2..4 extra mnemonics with visible weight.
        size_t n_idioms = 2 + rng.index(3);
        std::vector<size_t> picks;
        while (picks.size() < n_idioms) {
            size_t p = rng.index(kProjectIdioms.size());
            if (std::find(picks.begin(), picks.end(), p) == picks.end()) picks.push_back(p);
        }
        for (size_t p : picks)
            style.profile.weights.emplace_back(
                kProjectIdioms[p], config.project_jitter * (3.0 + 5.0 * rng.next_double()));
        style.block_shape =
            std::max(0.5, style.block_shape *
                              (1.0 + 0.8 * config.project_jitter * (rng.next_double() * 2.0 - 1.0)));
        style.insn_shape =
            std::max(0.5, style.insn_shape *
                              (1.0 + 0.8 * config.project_jitter * (rng.next_double() * 2.0 - 1.0)));
    }
    return style;
}

// Structured-region builder: every block reachable from the region entry,
// single entry, single exit, no duplicate edges by construction.
class RegionBuilder {
public:
    explicit RegionBuilder(Rng& rng) : rng_(rng) {}

    struct Region {
        size_t entry;
        size_t exit;
    };

    Region build(int budget) {
        if (budget <= 1) {
            size_t b = new_block();
            return {b, b};
        }
        // Feasible productions: seq (>=2), loop (>=2), if-then (>=3),
        // if-else (>=4), switch (>=5, jump-table style multiway branch).
        double w_seq = 0.38, w_loop = 0.20;
        double w_ifthen = budget >= 3 ? 0.18 : 0.0;
        double w_ifelse = budget >= 4 ? 0.16 : 0.0;
        double w_switch = budget >= 5 ? 0.08 : 0.0;
        double pick =
            rng_.next_double() * (w_seq + w_loop + w_ifthen + w_ifelse + w_switch);
        if (pick < w_seq) {
            int left = 1 + static_cast<int>(rng_.below(static_cast<uint64_t>(budget - 1)));
            Region a = build(left);
            Region b = build(budget - left);
            add_edge(a.exit, b.entry);
            return {a.entry, b.exit};
        }
        pick -= w_seq;
        if (pick < w_loop) {
            size_t header = new_block();
            Region body = build(budget - 1);
            add_edge(header, body.entry);
            add_edge(body.exit, header);
            return {header, header};
        }
        pick -= w_loop;
        if (w_ifthen > 0.0 && pick < w_ifthen) {
            size_t cond = new_block();
            size_t join = new_block();
            Region then = build(budget - 2);
            add_edge(cond, then.entry);
            add_edge(cond, join);
            add_edge(then.exit, join);
            return {cond, join};
        }
        pick -= w_ifthen;
        if (w_ifelse > 0.0 && pick < w_ifelse) {
            size_t cond = new_block();
            size_t join = new_block();
            int inner = budget - 2;
            int left = 1 + static_cast<int>(rng_.below(static_cast<uint64_t>(inner - 1)));
            Region then = build(left);
            Region els = build(inner - left);
            add_edge(cond, then.entry);
            add_edge(cond, els.entry);
            add_edge(then.exit, join);
            add_edge(els.exit, join);
            return {cond, join};
        }
        // switch: jump-table style multiway branch; case bodies are
        // sub-regions so the whole production consumes the budget exactly.
        size_t head = new_block();
        size_t join = new_block();
        int inner = budget - 2;
        int max_cases = std::min(6, inner);
        int cases = 3 + static_cast<int>(rng_.below(static_cast<uint64_t>(max_cases - 2)));
        int base_share = inner / cases;
        int leftover = inner - base_share * cases;
        for (int c = 0; c < cases; ++c) {
            int share = base_share + (c < leftover ? 1 : 0);
            Region body = build(share);
            add_edge(head, body.entry);
            add_edge(body.exit, join);
        }
        return {head, join};
    }

    size_t n_blocks() const { return n_blocks_; }
    const std::vector<std::pair<size_t, size_t>>& edges() const { return edges_; }

private:
    size_t new_block() { return n_blocks_++; }
    void add_edge(size_t a, size_t b) { edges_.emplace_back(a, b); }

    Rng& rng_;
    size_t n_blocks_ = 0;
    std::vector<std::pair<size_t, size_t>> edges_;
};

const std::vector<std::string> kCondJumps = {"je", "jne", "jg", "jl", "ja", "jb"};
const std::vector<std::string> kPredicateArith = {"add", "xor", "imul", "and"};
const std::vector<std::string> kEncodeArith = {"add", "sub", "xor", "or", "and", "shl", "imul"};
const std::vector<std::string> kJunkPool = {"add", "sub", "xor", "imul", "mov", "lea"};
const std::vector<std::string> kLiteralPool = {"mov", "add", "xor", "lea", "sub"};

std::string fresh_id(const std::unordered_set<std::string>& used, const std::string& stem) {
    if (!used.count(stem)) return stem;
    for (int i = 1;; ++i) {
        std::string candidate = stem + "_" + std::to_string(i);
        if (!used.count(candidate)) return candidate;
    }
}

std::unordered_set<std::string> block_ids(const ControlFlowGraph& cfg) {
    std::unordered_set<std::string> ids;
    for (const auto& block : cfg.blocks) ids.insert(block.id);
    return ids;
}

// Variant bookkeeping: new binary tag, new function_id, synthetic label.
FunctionSample variant_of(const FunctionSample& f, ObfuscationKind kind) {
    FunctionSample out = f;
    out.obfuscation.kind = kind;
    out.obfuscation.tool = ObfuscatorTag::synthetic;
    out.obfuscation.degenerate = false;
    out.binary = f.binary + "-" + to_string(kind);
    out.function_id = f.project + "/" + out.binary + "/" + f.symbol();
    out.source_line = 0;
    return out;
}

// Appends an opaque-predicate computation and its conditional exit to a
// block: a run of arithmetic mnemonics, then cmp + conditional jump.
void append_predicate(std::vector<Instruction>& insns, Rng& rng) {
    int run = 4 + static_cast<int>(rng.below(3));  // 4..6
    for (int i = 0; i < run; ++i)
        insns.push_back(make_insn(kPredicateArith[rng.index(kPredicateArith.size())]));
    insns.push_back(make_insn("cmp"));
    insns.push_back(make_insn(kCondJumps[rng.index(kCondJumps.size())]));
}

BasicBlock make_junk_block(const std::string& id, Rng& rng) {
    BasicBlock junk;
    junk.id = id;
    int len = 2 + static_cast<int>(rng.below(4));  // 2..5
    for (int i = 0; i < len; ++i)
        junk.insns.push_back(make_insn(kJunkPool[rng.index(kJunkPool.size())]));
    junk.insns.push_back(make_insn("ret"));
    return junk;
}

// Splits off a block's trailing terminator group (an optional cmp/test
// followed by a control-transfer instruction). Empty result means the
// block had no trailing terminator.
std::vector<Instruction> strip_terminator(std::vector<Instruction>& insns) {
    std::vector<Instruction> tail;
    if (insns.empty()) return tail;
    const auto& taxonomy = default_taxonomy();
    const auto& last = taxonomy.traits_of(insns.back().mnemonic);
    if (last.cond_branch || last.uncond_branch || last.ret_like) {
        tail.insert(tail.begin(), insns.back());
        insns.pop_back();
        if (!insns.empty()) {
            int cls = taxonomy.class_of(insns.back().mnemonic);
            if (taxonomy.class_names[static_cast<size_t>(cls)] == "compare") {
                tail.insert(tail.begin(), insns.back());
                insns.pop_back();
            }
        }
    }
    return tail;
}

}  // namespace

MnemonicProfile default_mnemonic_profile() {
    return MnemonicProfile{{
        {"mov", 30.0}, {"lea", 6.0},  {"push", 5.0},  {"pop", 5.0},  {"call", 4.0},
        {"add", 6.0},  {"sub", 4.0},  {"xor", 4.0},   {"and", 2.0},  {"or", 2.0},
        {"imul", 1.5}, {"shl", 1.5},  {"shr", 1.0},   {"movzx", 2.0}, {"movsx", 1.0},
        {"cmp", 2.0},  {"test", 1.0}, {"nop", 1.0},
    }};
}

void validate_config(const GeneratorConfig& config) {
    if (config.n_functions == 0) throw std::invalid_argument("config: n_functions must be >= 1");
    if (config.min_blocks < 1) throw std::invalid_argument("config: min_blocks must be >= 1");
    if (config.max_blocks < config.min_blocks)
        throw std::invalid_argument("config: max_blocks < min_blocks");
    if (config.min_insns < 1) throw std::invalid_argument("config: min_insns must be >= 1");
    if (config.max_insns < config.min_insns)
        throw std::invalid_argument("config: max_insns < min_insns");
    if (config.block_shape <= 0 || config.insn_shape <= 0)
        throw std::invalid_argument("config: shape parameters must be positive");
    if (config.projects.empty()) throw std::invalid_argument("config: projects list is empty");
    if (config.project_jitter < 0.0 || config.project_jitter > 1.0)
        throw std::invalid_argument("config: project_jitter out of [0,1]");
    if (config.opt_level != "O0" && config.opt_level != "O2")
        throw std::invalid_argument("config: opt_level must be O0 or O2");
    for (const auto& [mnemonic, weight] : config.profile.weights) {
        if (mnemonic.empty()) throw std::invalid_argument("config: empty mnemonic in profile");
        if (weight <= 0.0)
            throw std::invalid_argument("config: non-positive profile weight for \"" + mnemonic +
                                        "\"");
    }
}

GeneratorConfig load_generator_config(std::istream& in) {
    nlohmann::json j = nlohmann::json::parse(in);
    if (!j.is_object()) throw std::runtime_error("generator config must be a JSON object");
    static const std::set<std::string> known = {
        "seed",      "n_functions", "min_blocks", "max_blocks",    "block_shape",
        "min_insns", "max_insns",   "insn_shape", "profile",       "projects",
        "project_jitter", "opt_level",
    };
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key))
            throw std::runtime_error("generator config: unknown key \"" + key + "\"");
    }
    GeneratorConfig config;
    if (j.contains("seed")) config.seed = j["seed"].get<uint64_t>();
    if (j.contains("n_functions")) config.n_functions = j["n_functions"].get<size_t>();
    if (j.contains("min_blocks")) config.min_blocks = j["min_blocks"].get<int>();
    if (j.contains("max_blocks")) config.max_blocks = j["max_blocks"].get<int>();
    if (j.contains("block_shape")) config.block_shape = j["block_shape"].get<double>();
    if (j.contains("min_insns")) config.min_insns = j["min_insns"].get<int>();
    if (j.contains("max_insns")) config.max_insns = j["max_insns"].get<int>();
    if (j.contains("insn_shape")) config.insn_shape = j["insn_shape"].get<double>();
    if (j.contains("projects")) config.projects = j["projects"].get<std::vector<std::string>>();
    if (j.contains("project_jitter")) config.project_jitter = j["project_jitter"].get<double>();
    if (j.contains("opt_level")) config.opt_level = j["opt_level"].get<std::string>();
    if (j.contains("profile")) {
        if (!j["profile"].is_object())
            throw std::runtime_error("generator config: profile must be an object");
        config.profile.weights.clear();
        for (const auto& [mnemonic, weight] : j["profile"].items())
            config.profile.weights.emplace_back(mnemonic, weight.get<double>());
        std::sort(config.profile.weights.begin(), config.profile.weights.end());
    }
    validate_config(config);
    return config;
}

void write_generator_config(std::ostream& out, const GeneratorConfig& config) {
    nlohmann::ordered_json j;
    j["seed"] = config.seed;
    j["n_functions"] = config.n_functions;
    j["min_blocks"] = config.min_blocks;
    j["max_blocks"] = config.max_blocks;
    j["block_shape"] = config.block_shape;
    j["min_insns"] = config.min_insns;
    j["max_insns"] = config.max_insns;
    j["insn_shape"] = config.insn_shape;
    nlohmann::ordered_json profile;
    for (const auto& [mnemonic, weight] : config.profile.weights) profile[mnemonic] = weight;
    j["profile"] = std::move(profile);
    j["projects"] = config.projects;
    j["project_jitter"] = config.project_jitter;
    j["opt_level"] = config.opt_level;
    out << j.dump(2) << '\n';
}

FunctionSample gen_base_function(const GeneratorConfig& config, size_t index) {
    validate_config(config);
    const std::string& project = config.projects[index % config.projects.size()];
    ProjectStyle style = project_style(config, project);
    Rng rng(derive_seed(config.seed, index, 0xbabe));

    int target = shaped_int(rng, config.min_blocks, config.max_blocks, style.block_shape);
    RegionBuilder builder(rng);
    auto region = builder.build(target);

    FunctionSample sample;
    sample.project = project;
    sample.binary = "base";
    sample.opt_level = config.opt_level;
    sample.obfuscation = {ObfuscationKind::None, ObfuscatorTag::synthetic, false};
    char symbol[32];
    std::snprintf(symbol, sizeof(symbol), "fn_%06zu", index);
    sample.function_id = project + "/base/" + symbol;

    size_t n = builder.n_blocks();
    std::vector<size_t> out_degree(n, 0);
    for (const auto& [src, dst] : builder.edges()) {
        (void)dst;
        ++out_degree[src];
    }

    std::vector<double> weights;
    std::vector<std::string> tokens;
    for (const auto& [mnemonic, weight] : style.profile.weights) {
        tokens.push_back(mnemonic);
        weights.push_back(weight);
    }

    sample.cfg.blocks.resize(n);
    for (size_t i = 0; i < n; ++i) {
        BasicBlock& block = sample.cfg.blocks[i];
        block.id = "b" + std::to_string(i);
        int body = shaped_int(rng, config.min_insns, config.max_insns, style.insn_shape);
        for (int k = 0; k < body; ++k)
            block.insns.push_back(make_insn(tokens[rng.weighted_index(weights)]));
        if (out_degree[i] >= 2) {
            block.insns.push_back(make_insn("cmp"));
            block.insns.push_back(make_insn(kCondJumps[rng.index(kCondJumps.size())]));
        } else if (out_degree[i] == 1) {
            if (rng.chance(0.5)) block.insns.push_back(make_insn("jmp"));
        } else {
            block.insns.push_back(make_insn("ret"));
        }
    }
    for (const auto& [src, dst] : builder.edges())
        sample.cfg.edges.emplace_back("b" + std::to_string(src), "b" + std::to_string(dst));
    sample.cfg.entry = "b" + std::to_string(region.entry);
    return sample;
}

FunctionSample apply_flatten(const FunctionSample& f, uint64_t seed) {
    FunctionSample out = variant_of(f, ObfuscationKind::Flatten);
    if (f.cfg.blocks.size() < 2) {
        out.obfuscation.degenerate = true;
        return out;
    }
    Rng rng(seed);
    auto used = block_ids(out.cfg);
    std::string disp_id = fresh_id(used, "disp");

    BasicBlock dispatcher;
    dispatcher.id = disp_id;
    dispatcher.insns.push_back(make_insn("mov"));
    for (size_t i = 0; i + 1 < out.cfg.blocks.size(); ++i) {
        dispatcher.insns.push_back(make_insn("cmp"));
        dispatcher.insns.push_back(make_insn(kCondJumps[rng.index(kCondJumps.size())]));
    }
    dispatcher.insns.push_back(make_insn("jmp"));

    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& block : out.cfg.blocks) {
        edges.emplace_back(disp_id, block.id);
        edges.emplace_back(block.id, disp_id);
    }
    out.cfg.blocks.insert(out.cfg.blocks.begin(), std::move(dispatcher));
    out.cfg.edges = std::move(edges);
    out.cfg.entry = disp_id;
    return out;
}

FunctionSample apply_opaque_predicates(const FunctionSample& f, uint64_t seed, double rate) {
    if (rate <= 0.0 || rate > 1.0)
        throw std::invalid_argument("apply_opaque_predicates: rate must be in (0,1]");
    FunctionSample out = variant_of(f, ObfuscationKind::OpaquePredicates);
    Rng rng(seed);

    size_t n = out.cfg.blocks.size();
    size_t sites = std::max<size_t>(1, static_cast<size_t>(std::llround(rate * static_cast<double>(n))));
    sites = std::min(sites, n);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    order.resize(sites);
    std::sort(order.begin(), order.end());

    auto used = block_ids(out.cfg);
    for (size_t k = 0; k < order.size(); ++k) {
        BasicBlock& block = out.cfg.blocks[order[k]];
        std::string stem = "opq" + std::to_string(k);
        std::string cont_id = fresh_id(used, stem + "_cont");
        used.insert(cont_id);
        std::string junk_id = fresh_id(used, stem + "_junk");
        used.insert(junk_id);

        BasicBlock cont;
        cont.id = cont_id;
        cont.insns = strip_terminator(block.insns);
        if (cont.insns.empty()) cont.insns.push_back(make_insn("jmp"));
        if (block.insns.empty()) block.insns.push_back(make_insn("mov"));
        append_predicate(block.insns, rng);

        // Original out-edges move to the continuation block.
        for (auto& [src, dst] : out.cfg.edges)
            if (src == block.id) src = cont_id;
        out.cfg.edges.emplace_back(block.id, junk_id);
        out.cfg.edges.emplace_back(block.id, cont_id);
        out.cfg.blocks.push_back(std::move(cont));
        out.cfg.blocks.push_back(make_junk_block(junk_id, rng));
    }
    return out;
}

FunctionSample apply_encode_arithmetic(const FunctionSample& f, uint64_t seed, int depth) {
    if (depth < 1) throw std::invalid_argument("apply_encode_arithmetic: depth must be >= 1");
    FunctionSample out = variant_of(f, ObfuscationKind::EncodeArithmetic);
    Rng rng(seed);
    const auto& taxonomy = default_taxonomy();

    size_t arith_sites = 0;
    for (const auto& block : out.cfg.blocks)
        for (const auto& insn : block.insns)
            if (taxonomy.traits_of(insn.mnemonic).arithmetic) ++arith_sites;
    if (arith_sites == 0) {
        // Degraded mode: plant one arithmetic site in the entry block.
        for (auto& block : out.cfg.blocks) {
            if (block.id == out.cfg.entry) {
                block.insns.insert(block.insns.begin(), make_insn("add"));
                break;
            }
        }
        out.obfuscation.degenerate = true;
    }

    for (auto& block : out.cfg.blocks) {
        std::vector<Instruction> expanded;
        expanded.reserve(block.insns.size());
        for (const auto& insn : block.insns) {
            if (taxonomy.traits_of(insn.mnemonic).arithmetic) {
                for (int k = 0; k < 3 * depth; ++k)
                    expanded.push_back(
                        make_insn(kEncodeArith[rng.index(kEncodeArith.size())]));
            } else {
                expanded.push_back(insn);
            }
        }
        block.insns = std::move(expanded);
    }
    return out;
}

FunctionSample apply_encode_literals(const FunctionSample& f, uint64_t seed) {
    FunctionSample out = variant_of(f, ObfuscationKind::EncodeLiterals);
    Rng rng(seed);
    const auto& taxonomy = default_taxonomy();

    bool any = false;
    for (auto& block : out.cfg.blocks) {
        std::vector<Instruction> expanded;
        expanded.reserve(block.insns.size());
        for (const auto& insn : block.insns) {
            expanded.push_back(insn);
            if (taxonomy.broad_of(insn.mnemonic) == BroadCategory::data_movement) {
                any = true;
                for (int k = 0; k < 2; ++k)
                    expanded.push_back(
                        make_insn(kLiteralPool[rng.index(kLiteralPool.size())]));
            }
        }
        block.insns = std::move(expanded);
    }
    if (!any) out.obfuscation.degenerate = true;
    return out;
}

FunctionSample apply_split(const FunctionSample& f, uint64_t seed) {
    FunctionSample out = variant_of(f, ObfuscationKind::Split);
    Rng rng(seed);

    std::vector<size_t> eligible;
    for (size_t i = 0; i < out.cfg.blocks.size(); ++i)
        if (out.cfg.blocks[i].insns.size() >= 2) eligible.push_back(i);
    if (eligible.empty()) {
        out.obfuscation.degenerate = true;
        return out;
    }
    std::vector<size_t> sites;
    for (size_t i : eligible)
        if (rng.chance(0.5)) sites.push_back(i);
    if (sites.empty()) sites.push_back(eligible[0]);

    auto used = block_ids(out.cfg);
    for (size_t k = 0; k < sites.size(); ++k) {
        BasicBlock& block = out.cfg.blocks[sites[k]];
        size_t cut = block.insns.size() / 2;  // midpoint
        std::string tail_id = fresh_id(used, "sp" + std::to_string(k));
        used.insert(tail_id);

        BasicBlock tail;
        tail.id = tail_id;
        tail.insns.assign(block.insns.begin() + static_cast<long>(cut), block.insns.end());
        block.insns.resize(cut);

        for (auto& [src, dst] : out.cfg.edges)
            if (src == block.id) src = tail_id;
        out.cfg.edges.emplace_back(block.id, tail_id);
        out.cfg.blocks.push_back(std::move(tail));
    }
    return out;
}

FunctionSample apply_merge(const FunctionSample& f, const FunctionSample& donor,
                           uint64_t seed) {
    FunctionSample out = variant_of(f, ObfuscationKind::Merge);
    Rng rng(seed);

    auto used = block_ids(out.cfg);
    std::unordered_map<std::string, std::string> donor_rename;
    for (const auto& block : donor.cfg.blocks) {
        std::string id = fresh_id(used, "dn_" + block.id);
        used.insert(id);
        donor_rename[block.id] = id;
        BasicBlock copy = block;
        copy.id = id;
        out.cfg.blocks.push_back(std::move(copy));
    }
    for (const auto& [src, dst] : donor.cfg.edges)
        out.cfg.edges.emplace_back(donor_rename.at(src), donor_rename.at(dst));

    std::string sel_id = fresh_id(used, "mg_sel");
    BasicBlock selector;
    selector.id = sel_id;
    selector.insns.push_back(make_insn("mov"));
    append_predicate(selector.insns, rng);
    out.cfg.edges.emplace_back(sel_id, out.cfg.entry);
    out.cfg.edges.emplace_back(sel_id, donor_rename.at(donor.cfg.entry));
    out.cfg.blocks.insert(out.cfg.blocks.begin(), std::move(selector));
    out.cfg.entry = sel_id;
    return out;
}

FunctionSample apply_copy(const FunctionSample& f, uint64_t seed) {
    FunctionSample out = variant_of(f, ObfuscationKind::Copy);
    Rng rng(seed);

    size_t n = out.cfg.blocks.size();
    std::vector<size_t> sites;
    for (size_t i = 0; i < n; ++i)
        if (rng.chance(1.0 / 3.0)) sites.push_back(i);
    if (sites.empty()) sites.push_back(rng.index(n));

    auto used = block_ids(out.cfg);
    for (size_t k = 0; k < sites.size(); ++k) {
        const std::string target_id = out.cfg.blocks[sites[k]].id;
        std::string stem = "cp" + std::to_string(k);
        std::string clone_id = fresh_id(used, stem);
        used.insert(clone_id);
        std::string sel_id = fresh_id(used, stem + "_sel");
        used.insert(sel_id);

        BasicBlock clone = out.cfg.blocks[sites[k]];
        clone.id = clone_id;

        BasicBlock selector;
        selector.id = sel_id;
        append_predicate(selector.insns, rng);

        // Predecessors now reach the selector, which picks a clone.
        std::set<std::pair<std::string, std::string>> seen;
        std::vector<std::pair<std::string, std::string>> edges;
        std::vector<std::pair<std::string, std::string>> clone_out;
        for (auto& [src, dst] : out.cfg.edges) {
            std::string s = src, d = dst;
            if (d == target_id) d = sel_id;
            if (src == target_id) clone_out.emplace_back(clone_id, d);
            if (seen.insert({s, d}).second) edges.emplace_back(s, d);
        }
        for (auto& e : clone_out)
            if (seen.insert(e).second) edges.push_back(e);
        if (seen.insert({sel_id, target_id}).second) edges.emplace_back(sel_id, target_id);
        if (seen.insert({sel_id, clone_id}).second) edges.emplace_back(sel_id, clone_id);
        out.cfg.edges = std::move(edges);
        out.cfg.blocks.push_back(std::move(clone));
        out.cfg.blocks.push_back(std::move(selector));
        if (out.cfg.entry == target_id) out.cfg.entry = sel_id;
    }
    return out;
}

FunctionSample apply_virtualize(const FunctionSample& f, uint64_t seed) {
    FunctionSample out = variant_of(f, ObfuscationKind::Virtualize);
    Rng rng(seed);

    auto used = block_ids(out.cfg);
    std::string fetch_id = fresh_id(used, "vm_fetch");
    used.insert(fetch_id);
    std::string decode_id = fresh_id(used, "vm_decode");
    used.insert(decode_id);
    std::string dispatch_id = fresh_id(used, "vm_dispatch");
    used.insert(dispatch_id);

    BasicBlock fetch;
    fetch.id = fetch_id;
    fetch.insns = {make_insn("mov"), make_insn("add")};
    BasicBlock decode;
    decode.id = decode_id;
    decode.insns = {make_insn("mov"), make_insn("shr"), make_insn("and")};
    BasicBlock dispatch;
    dispatch.id = dispatch_id;
    dispatch.insns = {make_insn("cmp"),
                      make_insn(kCondJumps[rng.index(kCondJumps.size())]),
                      make_insn("jmp")};

    std::vector<BasicBlock> handlers;
    std::vector<std::pair<std::string, std::string>> edges;
    edges.emplace_back(fetch_id, decode_id);
    edges.emplace_back(decode_id, dispatch_id);
    for (size_t i = 0; i < out.cfg.blocks.size(); ++i) {
        std::string handler_id = fresh_id(used, "vmh" + std::to_string(i));
        used.insert(handler_id);
        BasicBlock handler;
        handler.id = handler_id;
        handler.insns = out.cfg.blocks[i].insns;
        handlers.push_back(std::move(handler));
        edges.emplace_back(dispatch_id, handler_id);
        edges.emplace_back(handler_id, fetch_id);
    }

    out.cfg.blocks.clear();
    out.cfg.blocks.push_back(std::move(fetch));
    out.cfg.blocks.push_back(std::move(decode));
    out.cfg.blocks.push_back(std::move(dispatch));
    for (auto& handler : handlers) out.cfg.blocks.push_back(std::move(handler));
    out.cfg.edges = std::move(edges);
    out.cfg.entry = fetch_id;
    return out;
}

FunctionSample apply_substitution(const FunctionSample& f, uint64_t seed) {
    // OLLVM-style instruction substitution: arithmetic rewritten into an
    // equivalent two-instruction sequence. Structure unchanged; the
    // expansion factor and pool differ from EncodeArithmetic.
    static const std::vector<std::string> pool = {"sub", "add", "neg", "not", "xor"};
    FunctionSample out = variant_of(f, ObfuscationKind::Substitution);
    Rng rng(seed);
    const auto& taxonomy = default_taxonomy();

    size_t arith_sites = 0;
    for (const auto& block : out.cfg.blocks)
        for (const auto& insn : block.insns)
            if (taxonomy.traits_of(insn.mnemonic).arithmetic) ++arith_sites;
    if (arith_sites == 0) {
        for (auto& block : out.cfg.blocks) {
            if (block.id == out.cfg.entry) {
                block.insns.insert(block.insns.begin(), make_insn("sub"));
                break;
            }
        }
        out.obfuscation.degenerate = true;
    }

    for (auto& block : out.cfg.blocks) {
        std::vector<Instruction> expanded;
        expanded.reserve(block.insns.size());
        for (const auto& insn : block.insns) {
            if (taxonomy.traits_of(insn.mnemonic).arithmetic) {
                for (int k = 0; k < 2; ++k)
                    expanded.push_back(make_insn(pool[rng.index(pool.size())]));
            } else {
                expanded.push_back(insn);
            }
        }
        block.insns = std::move(expanded);
    }
    return out;
}

FunctionSample apply_mix1(const FunctionSample& f, uint64_t seed) {
    FunctionSample stage = apply_opaque_predicates(f, derive_seed(seed, 1), 0.5);
    bool degenerate = stage.obfuscation.degenerate;
    stage = apply_encode_arithmetic(stage, derive_seed(seed, 2), 1);
    degenerate = degenerate || stage.obfuscation.degenerate;
    stage = apply_flatten(stage, derive_seed(seed, 3));
    degenerate = degenerate || stage.obfuscation.degenerate;

    FunctionSample out = variant_of(f, ObfuscationKind::Mix1);
    out.cfg = std::move(stage.cfg);
    out.obfuscation.degenerate = degenerate;
    return out;
}

FunctionSample apply_mix2(const FunctionSample& f, uint64_t seed) {
    FunctionSample stage = apply_split(f, derive_seed(seed, 4));
    bool degenerate = stage.obfuscation.degenerate;
    stage = apply_mix1(stage, seed);
    degenerate = degenerate || stage.obfuscation.degenerate;

    FunctionSample out = variant_of(f, ObfuscationKind::Mix2);
    out.cfg = std::move(stage.cfg);
    out.obfuscation.degenerate = degenerate;
    return out;
}

const std::vector<ObfuscationKind>& all_obfuscation_kinds() {
    static const std::vector<ObfuscationKind> kinds = {
        ObfuscationKind::EncodeArithmetic, ObfuscationKind::EncodeLiterals,
        ObfuscationKind::Virtualize,       ObfuscationKind::OpaquePredicates,
        ObfuscationKind::Flatten,          ObfuscationKind::Split,
        ObfuscationKind::Merge,            ObfuscationKind::Copy,
        ObfuscationKind::Mix1,             ObfuscationKind::Mix2,
        ObfuscationKind::Substitution,
    };
    return kinds;
}

FunctionSample apply_transform(ObfuscationKind kind, const FunctionSample& f,
                               const FunctionSample* donor, uint64_t seed,
                               double opaque_rate, int encode_depth) {
    switch (kind) {
        case ObfuscationKind::EncodeArithmetic:
            return apply_encode_arithmetic(f, seed, encode_depth);
        case ObfuscationKind::EncodeLiterals:
            return apply_encode_literals(f, seed);
        case ObfuscationKind::Virtualize:
            return apply_virtualize(f, seed);
        case ObfuscationKind::OpaquePredicates:
            return apply_opaque_predicates(f, seed, opaque_rate);
        case ObfuscationKind::Flatten:
            return apply_flatten(f, seed);
        case ObfuscationKind::Split:
            return apply_split(f, seed);
        case ObfuscationKind::Merge:
            if (!donor) throw std::invalid_argument("apply_transform: Merge needs a donor");
            return apply_merge(f, *donor, seed);
        case ObfuscationKind::Copy:
            return apply_copy(f, seed);
        case ObfuscationKind::Substitution:
            return apply_substitution(f, seed);
        case ObfuscationKind::Mix1:
            return apply_mix1(f, seed);
        case ObfuscationKind::Mix2:
            return apply_mix2(f, seed);
        case ObfuscationKind::None:
            break;
    }
    throw std::invalid_argument("apply_transform: None is not a transform");
}

std::vector<FunctionSample> gen_corpus(const GeneratorConfig& config,
                                       const std::vector<ObfuscationKind>& variant_set) {
    validate_config(config);
    for (auto kind : variant_set)
        if (kind == ObfuscationKind::None)
            throw std::invalid_argument("gen_corpus: variant_set must not contain None");

    std::vector<FunctionSample> corpus;
    corpus.reserve(config.n_functions * (1 + variant_set.size()));
    for (size_t index = 0; index < config.n_functions; ++index) {
        FunctionSample base = gen_base_function(config, index);
        FunctionSample donor;
        bool donor_ready = false;
        for (auto kind : variant_set) {
            uint64_t seed =
                derive_seed(config.seed, index, static_cast<uint64_t>(kind) + 0x51);
            if (kind == ObfuscationKind::Merge && !donor_ready) {
                // Donor indices live past n_functions so they never collide
                // with emitted bases.
                donor = gen_base_function(config, index + config.n_functions);
                donor_ready = true;
            }
            corpus.push_back(apply_transform(kind, base,
                                             donor_ready ? &donor : nullptr, seed));
        }
        corpus.push_back(std::move(base));
    }
    // Keep file order grouped by function with the base first.
    std::stable_sort(corpus.begin(), corpus.end(),
                     [](const FunctionSample& a, const FunctionSample& b) {
                         if (a.symbol() != b.symbol()) return a.symbol() < b.symbol();
                         return !a.obfuscation.is_obfuscated() &&
                                b.obfuscation.is_obfuscated();
                     });
    return corpus;
}

}  // namespace obfugraph
