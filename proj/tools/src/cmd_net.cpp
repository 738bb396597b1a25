#include <cstdio>
#include <filesystem>
#include <memory>

#include "commands.hpp"
#include "falcon/cnn.hpp"
#include "falcon/error.hpp"
#include "falcon/fusion.hpp"
#include "falcon/lstm.hpp"
#include "io_helpers.hpp"
#include "parallel.hpp"
#include "run_context.hpp"

namespace falcon::cli {

namespace {

img::ImageCorpus load_corpus(const std::string& dir) {
  const auto p = std::filesystem::path(dir);
  return img::read_idx((p / "images.idx").string(), (p / "labels.idx").string(),
                       (p / "captures.tsv").string());
}

struct TrainCnnOpts {
  Common common;
  std::string corpus, out, log;
  net::CnnConfig cfg;
  std::string padding = "valid";
};

void run_train_cnn(const TrainCnnOpts& o) {
  TrainCnnOpts opts = o;
  opts.cfg.seed = o.common.seed;
  opts.cfg.padding = o.padding == "same" ? nn::Padding::same : nn::Padding::valid;
  const std::string log_path = o.log.empty() ? o.out + ".log.csv" : o.log;

  RunContext run("train-cnn", o.common.seed);
  run.set_force(o.common.force);
  run.config("corpus", o.corpus);
  run.config("out", o.out);
  run.config("c1", static_cast<std::uint64_t>(opts.cfg.c1));
  run.config("c2", static_cast<std::uint64_t>(opts.cfg.c2));
  run.config("padding", o.padding);
  run.config("dropout", opts.cfg.dropout_rate);
  run.config("lr", opts.cfg.lr);
  run.config("epochs", static_cast<std::uint64_t>(opts.cfg.epochs));
  run.config("batch", static_cast<std::uint64_t>(opts.cfg.batch));
  const auto p = std::filesystem::path(o.corpus);
  run.input((p / "images.idx").string());
  run.input((p / "labels.idx").string());
  run.guard(manifest_for_file(o.out));

  const auto corpus = load_corpus(o.corpus);
  nn::TrainLog log;
  const auto model = net::train_cnn(corpus, opts.cfg, &log);
  model.save(o.out);
  nn::write_train_log(log, log_path);
  run.output(o.out);
  run.output(log_path);

  if (!log.empty())
    std::printf("train-cnn: %zu images, final loss %.4f, accuracy %.4f\n", corpus.size(),
                log.back().loss, log.back().accuracy);
  run.finish(manifest_for_file(o.out));
}

struct EmbedNetOpts {
  Common common;
  std::string corpus, cnn, bilstm, out;
  std::size_t jobs = 1;
};

void run_embed_net(const EmbedNetOpts& o) {
  RunContext run("embed-net", o.common.seed);
  run.set_force(o.common.force);
  run.config("corpus", o.corpus);
  run.config("cnn", o.cnn);
  run.config("bilstm", o.bilstm);
  run.config("out", o.out);
  const auto p = std::filesystem::path(o.corpus);
  run.input((p / "images.idx").string());
  run.input((p / "labels.idx").string());
  run.input(o.cnn);
  if (!o.bilstm.empty()) run.input(o.bilstm);

  const auto corpus = load_corpus(o.corpus);
  const auto cnn = net::CnnModel::load(o.cnn);

  SequenceSet set;
  set.sequences.resize(corpus.ranges.size());
  parallel_for(corpus.ranges.size(), o.jobs, [&](std::size_t r) {
    const auto& range = corpus.ranges[r];
    auto& seq = set.sequences[r];
    seq.source_name = range.name;
    if (range.count == 0) return;
    seq.label = static_cast<int>(corpus.labels[range.start]);
    for (std::size_t i = range.start; i < range.start + range.count; ++i)
      seq.vectors.push_back(net::img2vec(cnn, corpus.images[i]));
  });
  std::erase_if(set.sequences,
                [](const net::CaptureSequence& s) { return s.vectors.empty(); });

  if (o.bilstm.empty()) {
    ensure_dir(o.out);
    run.guard(manifest_for_dir(o.out));
    set.save(o.out);
    run.output((std::filesystem::path(o.out) / "sequences.ckpt").string());
    run.output((std::filesystem::path(o.out) / "sequences.tsv").string());
    std::printf("embed-net: %zu capture sequences\n", set.sequences.size());
    run.finish(manifest_for_dir(o.out));
  } else {
    run.guard(manifest_for_file(o.out));
    const auto bilstm = net::BiLstmModel::load(o.bilstm);
    fuse::FeatureTable table;
    for (const auto& seq : set.sequences) {
      // ids are application stems so network and code features join cleanly
      table.ids.push_back(std::filesystem::path(seq.source_name).stem().string());
      table.labels.push_back(seq.label);
      table.features.push_back(net::encode_capture(bilstm, seq));
    }
    fuse::write_feature_csv(table, o.out);
    run.output(o.out);
    std::printf("embed-net: %zu network features of width %zu\n", table.size(), table.dim());
    run.finish(manifest_for_file(o.out));
  }
}

struct TrainBilstmOpts {
  Common common;
  std::string seqs, out, log;
  net::BiLstmConfig cfg;
};

void run_train_bilstm(const TrainBilstmOpts& o) {
  net::BiLstmConfig cfg = o.cfg;
  cfg.seed = o.common.seed;
  const std::string log_path = o.log.empty() ? o.out + ".log.csv" : o.log;

  RunContext run("train-bilstm", o.common.seed);
  run.set_force(o.common.force);
  run.config("seqs", o.seqs);
  run.config("out", o.out);
  run.config("hidden", static_cast<std::uint64_t>(cfg.hidden));
  run.config("paper_cell", cfg.paper_cell);
  run.config("lr", cfg.lr);
  run.config("epochs", static_cast<std::uint64_t>(cfg.epochs));
  run.config("batch", static_cast<std::uint64_t>(cfg.batch));
  run.config("bptt_truncate", static_cast<std::uint64_t>(cfg.bptt_truncate));
  run.config("sequence_cap", static_cast<std::uint64_t>(cfg.sequence_cap));
  run.input((std::filesystem::path(o.seqs) / "sequences.ckpt").string());
  run.guard(manifest_for_file(o.out));

  const auto set = SequenceSet::load(o.seqs);
  if (!set.sequences.empty()) cfg.input_dim = set.sequences.front().vectors.front().size();
  nn::TrainLog log;
  const auto model = net::train_bilstm(set.sequences, cfg, &log);
  model.save(o.out);
  nn::write_train_log(log, log_path);
  run.output(o.out);
  run.output(log_path);

  if (!log.empty())
    std::printf("train-bilstm: %zu sequences, final loss %.4f, accuracy %.4f\n",
                set.sequences.size(), log.back().loss, log.back().accuracy);
  run.finish(manifest_for_file(o.out));
}

}  // namespace

void register_net_commands(CLI::App& app) {
  {
    auto opts = std::make_shared<TrainCnnOpts>();
    auto* cmd = app.add_subcommand("train-cnn", "Train the 5-class flow-image CNN");
    cmd->add_option("--corpus", opts->corpus, "Corpus directory from build-corpus")->required();
    cmd->add_option("--out", opts->out, "Model checkpoint path")->required();
    cmd->add_option("--log", opts->log, "Training log csv (default <out>.log.csv)");
    cmd->add_option("--c1", opts->cfg.c1, "Channels of conv1")->capture_default_str();
    cmd->add_option("--c2", opts->cfg.c2, "Channels of conv2")->capture_default_str();
    cmd->add_option("--padding", opts->padding, "valid|same")
        ->check(CLI::IsMember({"valid", "same"}))
        ->capture_default_str();
    cmd->add_option("--dropout", opts->cfg.dropout_rate, "Dropout rate between pool2 and fc1")
        ->capture_default_str();
    cmd->add_option("--lr", opts->cfg.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--epochs", opts->cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", opts->cfg.batch, "Minibatch size")->capture_default_str();
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_train_cnn(*opts); });
  }
  {
    auto opts = std::make_shared<EmbedNetOpts>();
    auto* cmd = app.add_subcommand(
        "embed-net", "Turn corpus captures into flow-vector sequences or network features");
    cmd->add_option("--corpus", opts->corpus, "Corpus directory")->required();
    cmd->add_option("--cnn", opts->cnn, "Trained CNN checkpoint")->required();
    cmd->add_option("--bilstm", opts->bilstm,
                    "Trained bi-LSTM checkpoint; when given, --out is a feature csv");
    cmd->add_option("--out", opts->out, "Sequence directory, or feature csv with --bilstm")
        ->required();
    cmd->add_option("--jobs", opts->jobs, "Embed captures in parallel")->capture_default_str();
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_embed_net(*opts); });
  }
  {
    auto opts = std::make_shared<TrainBilstmOpts>();
    auto* cmd =
        app.add_subcommand("train-bilstm", "Train the capture classifier over flow sequences");
    cmd->add_option("--seqs", opts->seqs, "Sequence directory from embed-net")->required();
    cmd->add_option("--out", opts->out, "Model checkpoint path")->required();
    cmd->add_option("--log", opts->log, "Training log csv (default <out>.log.csv)");
    cmd->add_option("--hidden", opts->cfg.hidden, "Hidden units per direction")
        ->capture_default_str();
    cmd->add_flag("--paper-cell", opts->cfg.paper_cell,
                  "Wrap the cell update in an extra sigmoid");
    cmd->add_option("--lr", opts->cfg.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--epochs", opts->cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", opts->cfg.batch, "Sequences per optimizer step")
        ->capture_default_str();
    cmd->add_option("--truncate", opts->cfg.bptt_truncate,
                    "Backpropagation-through-time window (0 = full)")
        ->capture_default_str();
    cmd->add_option("--cap", opts->cfg.sequence_cap,
                    "Front-truncate sequences longer than this many flows")
        ->capture_default_str();
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_train_bilstm(*opts); });
  }
}

}  // namespace falcon::cli
