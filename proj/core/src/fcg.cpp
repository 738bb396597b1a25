#include "falcon/fcg.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "falcon/error.hpp"

namespace falcon::code {

int OpcodeVocab::lookup(const std::string& mnemonic) const {
  if (index_.empty() && !mnemonics.empty()) build_index();
  const auto it = index_.find(mnemonic);
  return it == index_.end() ? oov_index() : it->second;
}

void OpcodeVocab::build_index() const {
  for (std::size_t i = 0; i < mnemonics.size(); ++i)
    index_.emplace(mnemonics[i], static_cast<int>(i));
}

std::uint64_t OpcodeVocab::total_count() const {
  std::uint64_t total = oov_count;
  for (std::uint64_t c : counts) total += c;
  return total;
}

void OpcodeVocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  out << "OPVOCAB v1 " << mnemonics.size() << ' ' << oov_count << '\n';
  for (std::size_t i = 0; i < mnemonics.size(); ++i)
    out << mnemonics[i] << ' ' << counts[i] << '\n';
}

OpcodeVocab OpcodeVocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  std::string tag, version;
  std::size_t n = 0;
  OpcodeVocab vocab;
  if (!(in >> tag >> version >> n >> vocab.oov_count) || tag != "OPVOCAB" || version != "v1")
    fail(errc::bad_magic, "not a vocabulary file: " + path);
  vocab.mnemonics.resize(n);
  vocab.counts.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> vocab.mnemonics[i] >> vocab.counts[i]))
      fail(errc::schema_error, "truncated vocabulary file: " + path);
  }
  return vocab;
}

std::size_t CallGraph::node_index(int id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  fail(errc::schema_error, "unknown node id " + std::to_string(id));
}

namespace {

RawCallGraph parse_fcg_json(const std::string& text, const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::schema_error, path + ": " + e.what());
  }
  RawCallGraph graph;
  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    fail(errc::schema_error, path + ": missing nodes array");
  for (const auto& jn : doc["nodes"]) {
    RawFunction fn;
    if (!jn.contains("id") || !jn["id"].is_number_integer())
      fail(errc::schema_error, path + ": node without integer id");
    fn.id = jn["id"].get<int>();
    fn.name = jn.value("name", std::string{});
    if (jn.contains("opcodes"))
      for (const auto& op : jn["opcodes"]) fn.opcodes.push_back(op.get<std::string>());
    graph.nodes.push_back(std::move(fn));
  }
  if (doc.contains("edges")) {
    for (const auto& je : doc["edges"]) {
      if (!je.is_array() || je.size() != 2)
        fail(errc::schema_error, path + ": edge must be [src, dst]");
      graph.edges.emplace_back(je[0].get<int>(), je[1].get<int>());
    }
  }
  if (doc.contains("label") && !doc["label"].is_null()) graph.label = doc["label"].get<int>();
  return graph;
}

RawCallGraph parse_fcg_text(std::istream& in, const std::string& path) {
  std::string header;
  if (!std::getline(in, header) || header != "FCG v1")
    fail(errc::bad_magic, path + ": expected 'FCG v1' header");

  RawCallGraph graph;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    const auto where = [&] { return path + ":" + std::to_string(line_no); };
    std::string kind;
    row >> kind;
    if (kind == "N") {
      RawFunction fn;
      std::size_t k = 0;
      if (!(row >> fn.id >> fn.name >> k)) fail(errc::schema_error, where() + ": bad node line");
      fn.opcodes.resize(k);
      for (std::size_t i = 0; i < k; ++i)
        if (!(row >> fn.opcodes[i]))
          fail(errc::schema_error, where() + ": node declares more opcodes than present");
      graph.nodes.push_back(std::move(fn));
    } else if (kind == "E") {
      int src = 0, dst = 0;
      if (!(row >> src >> dst)) fail(errc::schema_error, where() + ": bad edge line");
      graph.edges.emplace_back(src, dst);
    } else if (kind == "L") {
      int label = 0;
      if (!(row >> label)) fail(errc::schema_error, where() + ": bad label line");
      graph.label = label;
    } else {
      fail(errc::schema_error, where() + ": unknown record '" + kind + "'");
    }
  }
  return graph;
}

}  // namespace

RawCallGraph parse_fcg_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  // Sniff: a structured-object document starts with '{'.
  int first = in.peek();
  while (first == ' ' || first == '\n' || first == '\r' || first == '\t') {
    in.get();
    first = in.peek();
  }
  if (first == '{') {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_fcg_json(buffer.str(), path);
  }
  return parse_fcg_text(in, path);
}

void write_fcg_file(const RawCallGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  out << "FCG v1\n";
  for (const auto& fn : graph.nodes) {
    out << "N " << fn.id << ' ' << (fn.name.empty() ? "_" : fn.name) << ' ' << fn.opcodes.size();
    for (const auto& op : fn.opcodes) out << ' ' << op;
    out << '\n';
  }
  for (const auto& [src, dst] : graph.edges) out << "E " << src << ' ' << dst << '\n';
  if (graph.label) out << "L " << *graph.label << '\n';
}

CallGraph resolve_graph(const RawCallGraph& raw, const OpcodeVocab& vocab,
                        std::size_t* oov_hits) {
  if (raw.nodes.empty()) fail(errc::empty_graph, "call graph has no nodes");

  std::set<int> ids;
  for (const auto& fn : raw.nodes)
    if (!ids.insert(fn.id).second)
      fail(errc::schema_error, "duplicate node id " + std::to_string(fn.id));

  CallGraph graph;
  graph.label = raw.label;
  std::size_t oov = 0;
  for (const auto& fn : raw.nodes) {
    FunctionNode node;
    node.id = fn.id;
    node.name = fn.name;
    node.opcodes.reserve(fn.opcodes.size());
    for (const auto& mnemonic : fn.opcodes) {
      const int idx = vocab.lookup(mnemonic);
      if (idx == vocab.oov_index()) ++oov;
      node.opcodes.push_back(idx);
    }
    graph.nodes.push_back(std::move(node));
  }

  std::set<std::pair<int, int>> seen;
  for (const auto& edge : raw.edges) {
    if (!ids.count(edge.first) || !ids.count(edge.second))
      fail(errc::schema_error, "edge references missing node " +
                                   std::to_string(ids.count(edge.first) ? edge.second
                                                                        : edge.first));
    if (seen.insert(edge).second) graph.edges.push_back(edge);
  }
  if (oov_hits) *oov_hits = oov;
  return graph;
}

CallGraph parse_fcg(const std::string& path, const OpcodeVocab& vocab, std::size_t* oov_hits) {
  return resolve_graph(parse_fcg_file(path), vocab, oov_hits);
}

OpcodeVocab build_vocab(const std::vector<std::vector<std::string>>& corpus) {
  std::map<std::string, std::uint64_t> freq;
  for (const auto& sequence : corpus)
    for (const auto& mnemonic : sequence) freq[mnemonic]++;

  std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  OpcodeVocab vocab;
  for (const auto& [mnemonic, count] : ranked) {
    if (vocab.mnemonics.size() < kMaxVocab) {
      vocab.mnemonics.push_back(mnemonic);
      vocab.counts.push_back(count);
    } else {
      vocab.oov_count += count;
    }
  }
  return vocab;
}

std::vector<HistogramRow> opcode_histogram(const OpcodeVocab& vocab) {
  std::vector<HistogramRow> rows;
  rows.reserve(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i)
    rows.push_back(HistogramRow{i + 1, vocab.mnemonics[i], vocab.counts[i]});
  return rows;
}

void write_histogram_csv(const std::vector<HistogramRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  out << "rank,mnemonic,count\n";
  for (const auto& row : rows) out << row.rank << ',' << row.mnemonic << ',' << row.count << '\n';
}

}  // namespace falcon::code
