#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace falcon::code {

// 221 opcodes are live in Dalvik; everything beyond the top frequencies folds
// into the reserved OOV slot at index |V|.
inline constexpr std::size_t kMaxVocab = 221;

struct OpcodeVocab {
  std::vector<std::string> mnemonics;    // descending frequency, then lexicographic
  std::vector<std::uint64_t> counts;     // parallel to mnemonics
  std::uint64_t oov_count = 0;           // total occurrences folded into OOV

  std::size_t size() const { return mnemonics.size(); }        // |V|, without OOV
  int oov_index() const { return static_cast<int>(size()); }
  std::size_t rows() const { return size() + 1; }              // embedding rows

  int lookup(const std::string& mnemonic) const;  // OOV index when unknown
  std::uint64_t total_count() const;

  void save(const std::string& path) const;
  static OpcodeVocab load(const std::string& path);

 private:
  mutable std::unordered_map<std::string, int> index_;
  void build_index() const;
};

// Graph as written by the upstream disassembler, opcodes still mnemonic.
struct RawFunction {
  int id = 0;
  std::string name;
  std::vector<std::string> opcodes;
};

struct RawCallGraph {
  std::vector<RawFunction> nodes;
  std::vector<std::pair<int, int>> edges;  // (caller id, callee id)
  std::optional<int> label;                // 0..4 family or +-1 detection label
};

struct FunctionNode {
  int id = 0;
  std::string name;
  std::vector<int> opcodes;  // vocab indices, OOV included
};

struct CallGraph {
  std::vector<FunctionNode> nodes;
  std::vector<std::pair<int, int>> edges;  // validated, parallel edges collapsed
  std::optional<int> label;

  std::size_t node_index(int id) const;  // errc::schema_error when absent
};

// Line schema: header "FCG v1"; "N <id> <name> <k> <mnemonic>*k" per node;
// "E <src> <dst>" per edge; optional "L <label>". A JSON document with
// nodes/edges/label fields is accepted interchangeably (sniffed on '{').
RawCallGraph parse_fcg_file(const std::string& path);
void write_fcg_file(const RawCallGraph& graph, const std::string& path);

// Validates edges, collapses duplicates, resolves mnemonics through the
// vocabulary; unknown mnemonics count into *oov_hits.
CallGraph resolve_graph(const RawCallGraph& raw, const OpcodeVocab& vocab,
                        std::size_t* oov_hits = nullptr);

CallGraph parse_fcg(const std::string& path, const OpcodeVocab& vocab,
                    std::size_t* oov_hits = nullptr);

// Descending-frequency vocabulary over opcode sequences, ties broken
// lexicographically; mnemonics beyond kMaxVocab distinct entries fold into OOV.
OpcodeVocab build_vocab(const std::vector<std::vector<std::string>>& corpus);

struct HistogramRow {
  std::size_t rank = 0;  // 1-based
  std::string mnemonic;
  std::uint64_t count = 0;
};

// Rank/frequency data behind the power-law diagnostic.
std::vector<HistogramRow> opcode_histogram(const OpcodeVocab& vocab);
void write_histogram_csv(const std::vector<HistogramRow>& rows, const std::string& path);

}  // namespace falcon::code
