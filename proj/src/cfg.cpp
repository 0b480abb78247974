#include "obfugraph/cfg.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace obfugraph {

namespace {

const std::vector<std::string> kKindNames = {
    "None",  "EncodeArithmetic", "EncodeLiterals", "Virtualize",
    "OpaquePredicates", "Flatten", "Split", "Merge", "Copy", "Mix1", "Mix2",
    "Substitution",
};

const std::vector<std::string> kToolNames = {"none", "tigress", "ollvm", "synthetic"};

}  // namespace

const std::string& to_string(ObfuscationKind kind) {
    return kKindNames[static_cast<size_t>(kind)];
}

const std::string& to_string(ObfuscatorTag tag) {
    return kToolNames[static_cast<size_t>(tag)];
}

std::optional<ObfuscationKind> obfuscation_kind_from_string(const std::string& s) {
    for (size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == s) return static_cast<ObfuscationKind>(i);
    return std::nullopt;
}

std::optional<ObfuscatorTag> obfuscator_tag_from_string(const std::string& s) {
    for (size_t i = 0; i < kToolNames.size(); ++i)
        if (kToolNames[i] == s) return static_cast<ObfuscatorTag>(i);
    return std::nullopt;
}

const std::vector<std::string>& obfuscation_kind_names() { return kKindNames; }

std::string FunctionSample::symbol() const {
    auto pos = function_id.rfind('/');
    if (pos == std::string::npos) return function_id;
    return function_id.substr(pos + 1);
}

ParseError::ParseError(int line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

std::vector<std::string> validate_cfg(const ControlFlowGraph& cfg) {
    std::vector<std::string> violations;
    if (cfg.blocks.empty()) {
        violations.push_back("graph has no blocks");
        return violations;
    }

    std::unordered_set<std::string> ids;
    for (const auto& block : cfg.blocks) {
        if (!ids.insert(block.id).second)
            violations.push_back("duplicate block id \"" + block.id + "\"");
        if (block.insns.empty())
            violations.push_back("block \"" + block.id + "\" has an empty instruction list");
        for (const auto& insn : block.insns) {
            if (insn.mnemonic.empty()) {
                violations.push_back("block \"" + block.id + "\" has an empty mnemonic");
            } else if (std::any_of(insn.mnemonic.begin(), insn.mnemonic.end(),
                                   [](unsigned char c) { return std::isspace(c); })) {
                violations.push_back("block \"" + block.id + "\": mnemonic \"" +
                                     insn.mnemonic + "\" contains whitespace");
            }
            if (insn.operand_count < 0 || insn.operand_count > 8)
                violations.push_back("block \"" + block.id + "\": operand count " +
                                     std::to_string(insn.operand_count) +
                                     " out of range [0,8]");
        }
    }

    std::set<std::pair<std::string, std::string>> seen_edges;
    for (const auto& [src, dst] : cfg.edges) {
        if (!ids.count(src))
            violations.push_back("edge references missing block \"" + src + "\"");
        if (!ids.count(dst))
            violations.push_back("edge references missing block \"" + dst + "\"");
        if (!seen_edges.insert({src, dst}).second)
            violations.push_back("duplicate edge (\"" + src + "\",\"" + dst + "\")");
    }

    if (!ids.count(cfg.entry))
        violations.push_back("entry references missing block \"" + cfg.entry + "\"");

    return violations;
}

std::vector<std::string> validate_sample(const FunctionSample& sample) {
    std::vector<std::string> violations = validate_cfg(sample.cfg);
    if (sample.function_id.empty()) violations.push_back("function_id is empty");
    if (sample.opt_level != "O0" && sample.opt_level != "O2")
        violations.push_back("opt_level \"" + sample.opt_level + "\" not in {O0,O2}");
    const auto& label = sample.obfuscation;
    if (label.kind == ObfuscationKind::None) {
        if (label.tool != ObfuscatorTag::none && label.tool != ObfuscatorTag::synthetic)
            violations.push_back("label None requires obfuscator none or synthetic");
    } else if (label.tool == ObfuscatorTag::none) {
        violations.push_back("obfuscated label \"" + to_string(label.kind) +
                             "\" requires a non-none obfuscator tag");
    }
    return violations;
}

namespace {

using json = nlohmann::ordered_json;

Instruction parse_instruction(const json& j, int line) {
    if (!j.is_object()) throw ParseError(line, "instruction is not an object");
    Instruction insn;
    if (!j.contains("m") || !j["m"].is_string())
        throw ParseError(line, "instruction lacks string key \"m\"");
    insn.mnemonic = j["m"].get<std::string>();
    if (!j.contains("nops") || !j["nops"].is_number_integer())
        throw ParseError(line, "instruction lacks integer key \"nops\"");
    insn.operand_count = j["nops"].get<int>();
    if (j.contains("pcode")) {
        if (!j["pcode"].is_array())
            throw ParseError(line, "instruction key \"pcode\" is not an array");
        std::vector<std::string> ops;
        for (const auto& p : j["pcode"]) {
            if (!p.is_string()) throw ParseError(line, "pcode entry is not a string");
            ops.push_back(p.get<std::string>());
        }
        insn.pcode_ops = std::move(ops);
    }
    return insn;
}

FunctionSample parse_record(const std::string& text, int line) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line, "record is not a JSON object");

    auto req_string = [&](const char* key) -> std::string {
        if (!j.contains(key) || !j[key].is_string())
            throw ParseError(line, std::string("missing string key \"") + key + "\"");
        return j[key].get<std::string>();
    };

    FunctionSample sample;
    sample.source_line = line;
    sample.function_id = req_string("function_id");
    sample.project = req_string("project");
    sample.binary = req_string("binary");
    sample.opt_level = req_string("opt_level");

    if (!j.contains("obfuscation") || !j["obfuscation"].is_object())
        throw ParseError(line, "missing object key \"obfuscation\"");
    const json& ob = j["obfuscation"];
    if (!ob.contains("label") || !ob["label"].is_string())
        throw ParseError(line, "obfuscation lacks string key \"label\"");
    if (!ob.contains("obfuscator") || !ob["obfuscator"].is_string())
        throw ParseError(line, "obfuscation lacks string key \"obfuscator\"");
    auto kind = obfuscation_kind_from_string(ob["label"].get<std::string>());
    if (!kind)
        throw ParseError(line, "unknown obfuscation label \"" +
                                   ob["label"].get<std::string>() + "\"");
    auto tool = obfuscator_tag_from_string(ob["obfuscator"].get<std::string>());
    if (!tool)
        throw ParseError(line, "unknown obfuscator tag \"" +
                                   ob["obfuscator"].get<std::string>() + "\"");
    sample.obfuscation.kind = *kind;
    sample.obfuscation.tool = *tool;
    if (ob.contains("degenerate")) {
        if (!ob["degenerate"].is_boolean())
            throw ParseError(line, "obfuscation key \"degenerate\" is not a boolean");
        sample.obfuscation.degenerate = ob["degenerate"].get<bool>();
    }

    sample.cfg.entry = req_string("entry");

    if (!j.contains("blocks") || !j["blocks"].is_array())
        throw ParseError(line, "missing array key \"blocks\"");
    for (const auto& bj : j["blocks"]) {
        if (!bj.is_object()) throw ParseError(line, "block is not an object");
        BasicBlock block;
        if (!bj.contains("id") || !bj["id"].is_string())
            throw ParseError(line, "block lacks string key \"id\"");
        block.id = bj["id"].get<std::string>();
        if (!bj.contains("insns") || !bj["insns"].is_array())
            throw ParseError(line, "block \"" + block.id + "\" lacks array key \"insns\"");
        for (const auto& ij : bj["insns"]) block.insns.push_back(parse_instruction(ij, line));
        sample.cfg.blocks.push_back(std::move(block));
    }

    if (!j.contains("edges") || !j["edges"].is_array())
        throw ParseError(line, "missing array key \"edges\"");
    for (const auto& ej : j["edges"]) {
        if (!ej.is_array() || ej.size() != 2 || !ej[0].is_string() || !ej[1].is_string())
            throw ParseError(line, "edge is not a [src,dst] string pair");
        sample.cfg.edges.emplace_back(ej[0].get<std::string>(), ej[1].get<std::string>());
    }

    auto violations = validate_sample(sample);
    if (!violations.empty()) {
        std::string msg = "invalid record:";
        for (const auto& v : violations) msg += " " + v + ";";
        throw ParseError(line, msg);
    }
    return sample;
}

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::vector<FunctionSample> parse_corpus(std::istream& in) {
    std::vector<FunctionSample> corpus;
    std::unordered_set<std::string> seen_ids;
    std::string text;
    int line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (is_blank(text)) continue;
        FunctionSample sample = parse_record(text, line);
        if (!seen_ids.insert(sample.function_id).second)
            throw ParseError(line, "duplicate function_id \"" + sample.function_id + "\"");
        corpus.push_back(std::move(sample));
    }
    return corpus;
}

std::vector<FunctionSample> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);
    return parse_corpus(in);
}

std::string serialize_sample(const FunctionSample& sample) {
    json j;
    j["function_id"] = sample.function_id;
    j["project"] = sample.project;
    j["binary"] = sample.binary;
    j["opt_level"] = sample.opt_level;
    json ob;
    ob["label"] = to_string(sample.obfuscation.kind);
    ob["obfuscator"] = to_string(sample.obfuscation.tool);
    if (sample.obfuscation.degenerate) ob["degenerate"] = true;
    j["obfuscation"] = std::move(ob);
    j["entry"] = sample.cfg.entry;
    json blocks = json::array();
    for (const auto& block : sample.cfg.blocks) {
        json bj;
        bj["id"] = block.id;
        json insns = json::array();
        for (const auto& insn : block.insns) {
            json ij;
            ij["m"] = insn.mnemonic;
            ij["nops"] = insn.operand_count;
            if (insn.pcode_ops) ij["pcode"] = *insn.pcode_ops;
            insns.push_back(std::move(ij));
        }
        bj["insns"] = std::move(insns);
        blocks.push_back(std::move(bj));
    }
    j["blocks"] = std::move(blocks);
    json edges = json::array();
    for (const auto& [src, dst] : sample.cfg.edges) edges.push_back(json::array({src, dst}));
    j["edges"] = std::move(edges);
    return j.dump();
}

void write_corpus(std::ostream& out, const std::vector<FunctionSample>& corpus) {
    for (const auto& sample : corpus) out << serialize_sample(sample) << '\n';
}

void save_corpus(const std::string& path, const std::vector<FunctionSample>& corpus) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    write_corpus(out, corpus);
}

std::optional<size_t> MnemonicVocabulary::index_of(const std::string& token) const {
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].token == token) return i;
    return std::nullopt;
}

MnemonicVocabulary build_vocabulary(const std::vector<FunctionSample>& corpus,
                                    size_t max_size) {
    if (corpus.empty()) throw std::invalid_argument("build_vocabulary: empty corpus");
    std::unordered_map<std::string, MnemonicVocabulary::Entry> stats;
    for (const auto& sample : corpus) {
        std::unordered_set<std::string> in_function;
        for (const auto& block : sample.cfg.blocks) {
            for (const auto& insn : block.insns) {
                auto& e = stats[insn.mnemonic];
                e.token = insn.mnemonic;
                ++e.total_count;
                in_function.insert(insn.mnemonic);
            }
        }
        for (const auto& token : in_function) ++stats[token].doc_freq;
    }

    MnemonicVocabulary vocab;
    vocab.entries.reserve(stats.size());
    for (auto& [token, entry] : stats) vocab.entries.push_back(std::move(entry));
    std::sort(vocab.entries.begin(), vocab.entries.end(),
              [](const auto& a, const auto& b) {
                  if (a.total_count != b.total_count) return a.total_count > b.total_count;
                  return a.token < b.token;
              });
    if (max_size != 0 && vocab.entries.size() > max_size) vocab.entries.resize(max_size);
    return vocab;
}

size_t weakly_connected_components(const ControlFlowGraph& cfg) {
    if (cfg.blocks.empty()) return 0;
    std::unordered_map<std::string, size_t> index;
    for (size_t i = 0; i < cfg.blocks.size(); ++i) index[cfg.blocks[i].id] = i;

    // Union-find over block indices.
    std::vector<size_t> parent(cfg.blocks.size());
    for (size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& [src, dst] : cfg.edges) {
        auto si = index.find(src);
        auto di = index.find(dst);
        if (si == index.end() || di == index.end()) continue;
        size_t a = find(si->second), b = find(di->second);
        if (a != b) parent[a] = b;
    }
    std::unordered_set<size_t> roots;
    for (size_t i = 0; i < parent.size(); ++i) roots.insert(find(i));
    return roots.size();
}

}  // namespace obfugraph
