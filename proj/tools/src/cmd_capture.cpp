#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "commands.hpp"
#include "falcon/error.hpp"
#include "falcon/flow_image.hpp"
#include "falcon/net_pipeline.hpp"
#include "falcon/pcap.hpp"
#include "io_helpers.hpp"
#include "parallel.hpp"
#include "run_context.hpp"

namespace falcon::cli {

namespace {

std::string flow_name(std::size_t index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "flow_%05zu%s", index, ext);
  return buf;
}

std::string tuple_str(const pcap::FiveTuple& t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u:%u->%u.%u.%u.%u:%u/%u", t.src_ip[0], t.src_ip[1],
                t.src_ip[2], t.src_ip[3], t.src_port, t.dst_ip[0], t.dst_ip[1], t.dst_ip[2],
                t.dst_ip[3], t.dst_port, t.protocol);
  return buf;
}

struct SplitOpts {
  Common common;
  std::string in, out;
  bool unidirectional = false;
  bool payload_only = false;
};

void run_split(const SplitOpts& o) {
  RunContext run("split", o.common.seed);
  run.set_force(o.common.force);
  run.config("in", o.in);
  run.config("out", o.out);
  run.config("bidirectional", !o.unidirectional);
  run.config("payload_only", o.payload_only);
  run.input(o.in);
  ensure_dir(o.out);
  run.guard(manifest_for_dir(o.out));

  pcap::CaptureStats stats;
  const auto capture = pcap::read_capture(o.in, !o.unidirectional, &stats);
  const auto mode =
      o.payload_only ? img::SerializeMode::payload_only : img::SerializeMode::headers;

  std::ofstream tsv((std::filesystem::path(o.out) / "flows.tsv").string());
  tsv << "index\ttuple\tpackets\tbytes\tfirst_sec\tfirst_usec\n";
  for (std::size_t i = 0; i < capture.flows.size(); ++i) {
    const auto& flow = capture.flows[i];
    const Bytes data = img::serialize_flow(flow, mode);
    const std::string path = (std::filesystem::path(o.out) / flow_name(i, ".bin")).string();
    write_file(path, data);
    run.output(path);
    tsv << i << '\t' << tuple_str(flow.key) << '\t' << flow.packets.size() << '\t'
        << data.size() << '\t' << flow.first_time().sec << '\t' << flow.first_time().usec
        << '\n';
  }
  tsv.close();
  run.output((std::filesystem::path(o.out) / "flows.tsv").string());

  std::printf("split: %zu records, %zu decoded, %zu skipped, %zu flows\n", stats.records,
              stats.decoded, stats.skipped, capture.flows.size());
  run.finish(manifest_for_dir(o.out));
}

struct ImageizeOpts {
  Common common;
  std::string in, out;
  bool unidirectional = false;
  bool payload_only = false;
  bool pgm = false;
};

void run_imageize(const ImageizeOpts& o) {
  RunContext run("imageize", o.common.seed);
  run.set_force(o.common.force);
  run.config("in", o.in);
  run.config("out", o.out);
  run.config("bidirectional", !o.unidirectional);
  run.config("payload_only", o.payload_only);
  run.config("pgm", o.pgm);
  run.input(o.in);
  ensure_dir(o.out);
  run.guard(manifest_for_dir(o.out));

  const auto capture = pcap::read_capture(o.in, !o.unidirectional);
  const auto mode =
      o.payload_only ? img::SerializeMode::payload_only : img::SerializeMode::headers;
  const auto images = net::capture_to_images(capture, mode);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = (std::filesystem::path(o.out) / flow_name(i, ".bin")).string();
    write_file(path, std::span<const std::uint8_t>(images[i].pixels.data(),
                                                   images[i].pixels.size()));
    run.output(path);
    if (o.pgm) {
      const std::string pgm = (std::filesystem::path(o.out) / flow_name(i, ".pgm")).string();
      img::export_pgm(images[i], pgm);
      run.output(pgm);
    }
  }
  std::printf("imageize: %zu flow records\n", images.size());
  run.finish(manifest_for_dir(o.out));
}

struct CorpusOpts {
  Common common;
  std::string in, labels, out;
  bool unidirectional = false;
  bool payload_only = false;
  std::size_t jobs = 1;
};

void run_build_corpus(const CorpusOpts& o) {
  RunContext run("build-corpus", o.common.seed);
  run.set_force(o.common.force);
  run.config("in", o.in);
  run.config("labels", o.labels);
  run.config("out", o.out);
  run.config("bidirectional", !o.unidirectional);
  run.config("payload_only", o.payload_only);
  run.input(o.labels);

  const auto labels = read_labels_csv(o.labels);
  const auto files = list_files(o.in, ".pcap");
  if (files.empty()) fail(errc::empty_corpus, "no .pcap files under " + o.in);
  for (const auto& f : files) run.input(f);

  ensure_dir(o.out);
  run.guard(manifest_for_dir(o.out));

  const auto mode =
      o.payload_only ? img::SerializeMode::payload_only : img::SerializeMode::headers;
  std::vector<std::vector<img::FlowImage>> slots(files.size());
  std::vector<int> slot_labels(files.size());
  std::vector<std::string> names(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    names[i] = std::filesystem::path(files[i]).filename().string();
    const auto it = labels.find(names[i]);
    if (it == labels.end()) fail(errc::schema_error, "no label for capture " + names[i]);
    slot_labels[i] = static_cast<int>(img::class_from_id(it->second));
  }
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    slots[i] = net::capture_to_images(pcap::read_capture(files[i], !o.unidirectional), mode);
  });
  img::ImageCorpus corpus;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (slots[i].empty()) {
      std::fprintf(stderr, "warning: %s produced no flows\n", names[i].c_str());
      continue;
    }
    corpus.append_capture(names[i], slots[i], static_cast<std::uint8_t>(slot_labels[i]));
  }

  const auto p = std::filesystem::path(o.out);
  img::write_idx(corpus, (p / "images.idx").string(), (p / "labels.idx").string(),
                 (p / "captures.tsv").string());
  run.output((p / "images.idx").string());
  run.output((p / "labels.idx").string());
  run.output((p / "captures.tsv").string());

  std::printf("build-corpus: %zu captures, %zu flow images\n", corpus.ranges.size(),
              corpus.size());
  run.finish(manifest_for_dir(o.out));
}

}  // namespace

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "Seed for every random draw in this run")
      ->envname("FALCON_SEED")
      ->capture_default_str();
  cmd->add_flag("--force", common.force,
                "Overwrite outputs produced by a different configuration");
}

void register_capture_commands(CLI::App& app) {
  {
    auto opts = std::make_shared<SplitOpts>();
    auto* cmd = app.add_subcommand("split", "Split a capture into time-ordered flows");
    cmd->add_option("--in", opts->in, "Input .pcap file")->required();
    cmd->add_option("--out", opts->out, "Output directory for flow files")->required();
    cmd->add_flag("--unidirectional", opts->unidirectional,
                  "Group by strict 5-tuple instead of bidirectional sessions");
    cmd->add_flag("--payload-only", opts->payload_only,
                  "Drop IP/transport headers from serialized flows");
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_split(*opts); });
  }
  {
    auto opts = std::make_shared<ImageizeOpts>();
    auto* cmd = app.add_subcommand("imageize", "Render a capture's flows as 784-byte records");
    cmd->add_option("--in", opts->in, "Input .pcap file")->required();
    cmd->add_option("--out", opts->out, "Output directory")->required();
    cmd->add_flag("--unidirectional", opts->unidirectional,
                  "Group by strict 5-tuple instead of bidirectional sessions");
    cmd->add_flag("--payload-only", opts->payload_only,
                  "Drop IP/transport headers from serialized flows");
    cmd->add_flag("--pgm", opts->pgm, "Also export 28x28 PGM images");
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_imageize(*opts); });
  }
  {
    auto opts = std::make_shared<CorpusOpts>();
    auto* cmd =
        app.add_subcommand("build-corpus", "Convert labeled captures into an IDX image corpus");
    cmd->add_option("--in", opts->in, "Directory of .pcap files")->required();
    cmd->add_option("--labels", opts->labels, "capture,label csv")->required();
    cmd->add_option("--out", opts->out, "Corpus output directory")->required();
    cmd->add_flag("--unidirectional", opts->unidirectional,
                  "Group by strict 5-tuple instead of bidirectional sessions");
    cmd->add_flag("--payload-only", opts->payload_only,
                  "Drop IP/transport headers from serialized flows");
    cmd->add_option("--jobs", opts->jobs, "Convert captures in parallel")->capture_default_str();
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_build_corpus(*opts); });
  }
}

}  // namespace falcon::cli
