#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>

#include "commands.hpp"
#include "falcon/bytes.hpp"
#include "falcon/error.hpp"
#include "falcon/fcg.hpp"
#include "falcon/fusion.hpp"
#include "falcon/rng.hpp"
#include "io_helpers.hpp"
#include "run_context.hpp"

namespace falcon::cli {

namespace {

// Minimal little-endian microsecond pcap writer for synthetic fixtures.
struct PcapWriter {
  Bytes data;

  PcapWriter() {
    const std::uint8_t magic[4] = {0xd4, 0xc3, 0xb2, 0xa1};
    data.insert(data.end(), magic, magic + 4);
    push16(2);
    push16(4);
    push32(0);
    push32(0);
    push32(0x40000);
    push32(1);  // ethernet
  }

  void push16(std::uint16_t v) {
    data.push_back(static_cast<std::uint8_t>(v & 0xff));
    data.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void push32(std::uint32_t v) { append_le32(data, v); }

  void record(std::uint32_t sec, std::uint32_t usec, const Bytes& frame) {
    push32(sec);
    push32(usec);
    push32(static_cast<std::uint32_t>(frame.size()));
    push32(static_cast<std::uint32_t>(frame.size()));
    data.insert(data.end(), frame.begin(), frame.end());
  }
};

Bytes udp_frame(const std::array<std::uint8_t, 4>& src, std::uint16_t sport,
                const std::array<std::uint8_t, 4>& dst, std::uint16_t dport,
                const Bytes& payload) {
  Bytes f(12, 0x02);  // placeholder mac addresses
  append_be16(f, 0x0800);
  const std::uint16_t total = static_cast<std::uint16_t>(20 + 8 + payload.size());
  f.push_back(0x45);
  f.push_back(0x00);
  append_be16(f, total);
  append_be16(f, 0x0000);
  append_be16(f, 0x0000);
  f.push_back(64);
  f.push_back(17);
  append_be16(f, 0x0000);
  f.insert(f.end(), src.begin(), src.end());
  f.insert(f.end(), dst.begin(), dst.end());
  append_be16(f, sport);
  append_be16(f, dport);
  append_be16(f, static_cast<std::uint16_t>(8 + payload.size()));
  append_be16(f, 0x0000);
  f.insert(f.end(), payload.begin(), payload.end());
  return f;
}

std::string stem_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s_%04zu%s", prefix, i, ext);
  return buf;
}

// Two intensity-separable classes: benign flows carry dark payload bytes,
// the malware class bright ones.
void synth_capture(Rng& rng, int label, std::size_t flows, const std::string& path) {
  PcapWriter pcap;
  for (std::size_t f = 0; f < flows; ++f) {
    const std::array<std::uint8_t, 4> src = {10, static_cast<std::uint8_t>(label),
                                             static_cast<std::uint8_t>(f >> 8),
                                             static_cast<std::uint8_t>(f & 0xff)};
    const std::array<std::uint8_t, 4> dst = {192, 168, 0, 1};
    const std::uint16_t sport = static_cast<std::uint16_t>(1024 + f);
    Bytes payload(700 + rng.uniform_int(0, 120));
    for (auto& b : payload) {
      const std::uint8_t base = label == 0 ? 0x18 : 0xd8;
      b = static_cast<std::uint8_t>(base + rng.uniform_int(0, 15));
    }
    pcap.record(static_cast<std::uint32_t>(1000 + f), 0,
                udp_frame(src, sport, dst, 53, payload));
  }
  write_file(path, pcap.data);
}

// Two opcode-disjoint classes over small random call graphs.
void synth_graph(Rng& rng, int label, const std::string& path) {
  code::RawCallGraph g;
  const std::size_t n = 3 + rng.uniform_int(0, 5);
  for (std::size_t v = 0; v < n; ++v) {
    code::RawFunction fn;
    fn.id = static_cast<int>(v);
    fn.name = "fn" + std::to_string(v);
    const std::size_t ops = 2 + rng.uniform_int(0, 8);
    for (std::size_t k = 0; k < ops; ++k) {
      const std::string family = label == 0 ? "alpha" : "beta";
      fn.opcodes.push_back(family + std::to_string(rng.uniform_int(0, 7)));
    }
    g.nodes.push_back(std::move(fn));
  }
  for (std::size_t v = 1; v < n; ++v)
    g.edges.emplace_back(static_cast<int>(rng.uniform_int(0, v - 1)), static_cast<int>(v));
  const std::size_t extra = rng.uniform_int(0, n);
  for (std::size_t e = 0; e < extra; ++e)
    g.edges.emplace_back(static_cast<int>(rng.uniform_int(0, n - 1)),
                         static_cast<int>(rng.uniform_int(0, n - 1)));
  g.label = label;
  code::write_fcg_file(g, path);
}

struct SynthOpts {
  Common common;
  std::string task, out;
  std::size_t n = 100;
  std::size_t flows = 6;
  double sep = 4.0;
};

void run_synth(const SynthOpts& o) {
  RunContext run("synth", o.common.seed);
  run.set_force(o.common.force);
  run.config("task", o.task);
  run.config("out", o.out);
  run.config("n", static_cast<std::uint64_t>(o.n));
  run.config("flows", static_cast<std::uint64_t>(o.flows));
  run.config("sep", o.sep);
  ensure_dir(o.out);
  run.guard(manifest_for_dir(o.out));

  Rng rng(o.common.seed);
  const auto dir = std::filesystem::path(o.out);
  std::map<std::string, int> labels;

  if (o.task == "captures" || o.task == "pair") {
    for (std::size_t i = 0; i < o.n; ++i) {
      const int label = static_cast<int>(i % 2);
      const std::string name = stem_name("app", i, ".pcap");
      synth_capture(rng, label, o.flows, (dir / name).string());
      labels[name] = label;
      run.output((dir / name).string());
    }
  }
  if (o.task == "graphs" || o.task == "pair") {
    for (std::size_t i = 0; i < o.n; ++i) {
      const int label = static_cast<int>(i % 2);
      const std::string name = stem_name("app", i, ".fcg");
      synth_graph(rng, label, (dir / name).string());
      labels[name] = label;
      run.output((dir / name).string());
    }
  }
  if (o.task == "blobs") {
    fuse::FeatureTable table;
    for (std::size_t i = 0; i < o.n; ++i) {
      const int label = static_cast<int>(i % 5);
      const double angle = 2.0 * 3.14159265358979 * label / 5.0;
      table.ids.push_back("blob_" + std::to_string(i));
      table.labels.push_back(label);
      table.features.push_back(
          {o.sep * std::cos(angle) + rng.normal(), o.sep * std::sin(angle) + rng.normal()});
    }
    fuse::write_feature_csv(table, (dir / "blobs.csv").string());
    run.output((dir / "blobs.csv").string());
  }
  if (o.task != "blobs") {
    // one label per stem; pair mode keys both files by their own names
    std::map<std::string, int> by_stem;
    for (const auto& [name, label] : labels)
      by_stem[std::filesystem::path(name).stem().string()] = label;
    std::map<std::string, int> merged = labels;
    for (const auto& [stem, label] : by_stem) merged.emplace(stem, label);
    write_labels_csv(merged, (dir / "labels.csv").string());
    run.output((dir / "labels.csv").string());
  }

  std::printf("synth: task %s, %zu items in %s\n", o.task.c_str(), o.n, o.out.c_str());
  run.finish(manifest_for_dir(o.out));
}

}  // namespace

void register_synth_command(CLI::App& app) {
  auto opts = std::make_shared<SynthOpts>();
  auto* cmd = app.add_subcommand("synth", "Generate deterministic synthetic fixtures");
  cmd->add_option("--task", opts->task, "captures|graphs|pair|blobs")
      ->check(CLI::IsMember({"captures", "graphs", "pair", "blobs"}))
      ->required();
  cmd->add_option("--out", opts->out, "Output directory")->required();
  cmd->add_option("--n", opts->n, "Number of items (blobs: total rows across 5 classes)")
      ->capture_default_str();
  cmd->add_option("--flows", opts->flows, "Flows per synthetic capture")->capture_default_str();
  cmd->add_option("--sep", opts->sep, "Blob center separation in sigma units")
      ->capture_default_str();
  add_common(cmd, opts->common);
  cmd->callback([opts] { run_synth(*opts); });
}

}  // namespace falcon::cli
