#include <cstdio>
#include <filesystem>
#include <memory>

#include "commands.hpp"
#include "falcon/embedding.hpp"
#include "falcon/error.hpp"
#include "falcon/fcg.hpp"
#include "falcon/fusion.hpp"
#include "falcon/struct2vec.hpp"
#include "parallel.hpp"
#include "run_context.hpp"

namespace falcon::cli {

namespace {

std::vector<std::string> graph_files(const std::string& dir) {
  auto files = list_files(dir, ".fcg");
  for (auto& extra : list_files(dir, ".json")) {
    if (std::filesystem::path(extra).filename() == "manifest.json") continue;
    files.push_back(extra);
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(errc::empty_dataset, "no .fcg or .json graphs under " + dir);
  return files;
}

struct TrainOpcodeOpts {
  Common common;
  std::string fcgs, out, vocab, histogram;
  code::SkipgramConfig cfg;
};

void run_train_opcode2vec(const TrainOpcodeOpts& o) {
  code::SkipgramConfig cfg = o.cfg;
  cfg.seed = o.common.seed;
  const std::string vocab_path = o.vocab.empty() ? o.out + ".vocab" : o.vocab;

  RunContext run("train-opcode2vec", o.common.seed);
  run.set_force(o.common.force);
  run.config("fcgs", o.fcgs);
  run.config("out", o.out);
  run.config("dim", static_cast<std::uint64_t>(cfg.dim));
  run.config("window", static_cast<std::uint64_t>(cfg.window));
  run.config("negatives", static_cast<std::uint64_t>(cfg.negatives));
  run.config("epochs", static_cast<std::uint64_t>(cfg.epochs));
  run.config("lr", cfg.lr);

  const auto files = graph_files(o.fcgs);
  for (const auto& f : files) run.input(f);
  run.guard(manifest_for_file(o.out));

  // every function body is one sentence
  std::vector<std::vector<std::string>> corpus;
  for (const auto& file : files) {
    const auto raw = code::parse_fcg_file(file);
    for (const auto& fn : raw.nodes)
      if (!fn.opcodes.empty()) corpus.push_back(fn.opcodes);
  }
  const auto vocab = code::build_vocab(corpus);
  vocab.save(vocab_path);
  run.output(vocab_path);

  if (!o.histogram.empty()) {
    code::write_histogram_csv(code::opcode_histogram(vocab), o.histogram);
    run.output(o.histogram);
  }

  std::vector<std::vector<int>> indexed;
  indexed.reserve(corpus.size());
  for (const auto& sentence : corpus) {
    std::vector<int> ids;
    ids.reserve(sentence.size());
    for (const auto& mnemonic : sentence) ids.push_back(vocab.lookup(mnemonic));
    indexed.push_back(std::move(ids));
  }
  const auto emb = code::train_skipgram(indexed, vocab.rows(), cfg);
  emb.save(o.out);
  run.output(o.out);

  std::printf("train-opcode2vec: %zu sentences, vocabulary %zu (+oov), dim %zu\n",
              corpus.size(), vocab.size(), cfg.dim);
  run.finish(manifest_for_file(o.out));
}

struct EmbedCodeOpts {
  Common common;
  std::string fcgs, emb, vocab, out;
  std::string params_in, save_params, save_head, log;
  bool train = false;
  bool binary = true;
  std::string task = "detect";
  std::string weighting = "uniform";
  std::size_t jobs = 1;
  code::GraphTrainConfig cfg;
};

int map_detect_label(int label) { return label > 0 ? 1 : -1; }

void run_embed_code(const EmbedCodeOpts& o) {
  code::GraphTrainConfig cfg = o.cfg;
  cfg.seed = o.common.seed;
  cfg.binary = o.task == "detect";
  cfg.embed.weighting =
      o.weighting == "sif" ? code::Weighting::sif : code::Weighting::uniform;

  RunContext run("embed-code", o.common.seed);
  run.set_force(o.common.force);
  run.config("fcgs", o.fcgs);
  run.config("emb", o.emb);
  run.config("vocab", o.vocab);
  run.config("out", o.out);
  run.config("train", o.train);
  run.config("task", o.task);
  run.config("weighting", o.weighting);
  run.config("p", static_cast<std::uint64_t>(cfg.embed.p));
  run.config("iterations", static_cast<std::uint64_t>(cfg.embed.iterations));
  run.config("sigma_layers", static_cast<std::uint64_t>(cfg.embed.sigma_layers));
  run.config("directed", cfg.embed.directed);
  run.config("random_init", cfg.embed.random_init);
  run.config("head_hidden", static_cast<std::uint64_t>(cfg.head_hidden));
  run.config("epochs", static_cast<std::uint64_t>(cfg.epochs));
  run.config("batch", static_cast<std::uint64_t>(cfg.batch));
  run.config("lr", cfg.lr);
  run.config("params_in", o.params_in);

  const auto files = graph_files(o.fcgs);
  for (const auto& f : files) run.input(f);
  run.input(o.emb);
  run.input(o.vocab);
  if (!o.params_in.empty()) run.input(o.params_in);
  run.guard(manifest_for_file(o.out));

  const auto vocab = code::OpcodeVocab::load(o.vocab);
  const auto emb = code::OpcodeEmbedding::load(o.emb);

  std::vector<code::CallGraph> graphs;
  std::vector<std::string> ids;
  std::vector<int> file_labels;
  std::size_t oov_total = 0;
  for (const auto& file : files) {
    std::size_t oov = 0;
    graphs.push_back(code::parse_fcg(file, vocab, &oov));
    oov_total += oov;
    ids.push_back(std::filesystem::path(file).stem().string());
    if (!graphs.back().label) {
      std::fprintf(stderr, "warning: %s carries no label, recording 0\n", ids.back().c_str());
      file_labels.push_back(0);
    } else {
      file_labels.push_back(*graphs.back().label);
    }
  }
  if (oov_total > 0)
    std::fprintf(stderr, "warning: %zu opcodes fell back to the OOV embedding\n", oov_total);

  code::GraphEmbedParams params;
  Rng rng(cfg.seed);
  if (o.train) {
    std::vector<int> train_labels = file_labels;
    if (cfg.binary)
      for (int& y : train_labels) y = map_detect_label(y);
    nn::TrainLog log;
    const auto clf =
        code::train_graph_classifier(graphs, train_labels, emb, vocab, cfg, &log);
    params = clf.embed;
    if (!o.save_params.empty()) {
      clf.embed.save(o.save_params);
      run.output(o.save_params);
    }
    if (!o.save_head.empty()) {
      clf.head.save(o.save_head);
      run.output(o.save_head);
    }
    if (!o.log.empty()) {
      nn::write_train_log(log, o.log);
      run.output(o.log);
    }
    if (!log.empty())
      std::printf("embed-code: trained %zu graphs, final loss %.4f, accuracy %.4f\n",
                  graphs.size(), log.back().loss, log.back().accuracy);
  } else if (!o.params_in.empty()) {
    params = code::GraphEmbedParams::load(o.params_in);
  } else {
    params = code::GraphEmbedParams::init(emb.dim, cfg.embed, rng);
    std::fprintf(stderr, "warning: embedding with freshly initialized graph parameters\n");
  }

  fuse::FeatureTable table;
  table.ids = ids;
  table.labels = file_labels;
  table.features.resize(graphs.size());
  if (params.random_init) {
    // seeded state draws stay sequential so --jobs cannot change them
    Rng init_rng = Rng(cfg.seed).fork(0x5eed);
    for (std::size_t i = 0; i < graphs.size(); ++i)
      table.features[i] = code::structure2vec_embed(graphs[i], params, emb, vocab,
                                                    cfg.embed.weighting, &init_rng);
  } else {
    parallel_for(graphs.size(), o.jobs, [&](std::size_t i) {
      table.features[i] =
          code::structure2vec_embed(graphs[i], params, emb, vocab, cfg.embed.weighting);
    });
  }
  fuse::write_feature_csv(table, o.out);
  run.output(o.out);

  std::printf("embed-code: %zu graph vectors of width %zu\n", table.size(), table.dim());
  run.finish(manifest_for_file(o.out));
}

}  // namespace

void register_code_commands(CLI::App& app) {
  {
    auto opts = std::make_shared<TrainOpcodeOpts>();
    auto* cmd = app.add_subcommand("train-opcode2vec",
                                   "Train skip-gram opcode embeddings from call graphs");
    cmd->add_option("--fcgs", opts->fcgs, "Directory of .fcg/.json graphs")->required();
    cmd->add_option("--out", opts->out, "Embedding checkpoint path")->required();
    cmd->add_option("--vocab", opts->vocab, "Vocabulary path (default <out>.vocab)");
    cmd->add_option("--histogram", opts->histogram, "rank,mnemonic,count csv for the rank plot");
    cmd->add_option("--dim", opts->cfg.dim, "Embedding width")->capture_default_str();
    cmd->add_option("--window", opts->cfg.window, "Context window")->capture_default_str();
    cmd->add_option("--negatives", opts->cfg.negatives, "Negative samples per pair")
        ->capture_default_str();
    cmd->add_option("--epochs", opts->cfg.epochs, "Corpus passes")->capture_default_str();
    cmd->add_option("--lr", opts->cfg.lr, "Initial learning rate, linearly decayed")
        ->capture_default_str();
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_train_opcode2vec(*opts); });
  }
  {
    auto opts = std::make_shared<EmbedCodeOpts>();
    auto* cmd = app.add_subcommand(
        "embed-code", "Embed call graphs as vectors (optionally training the graph network)");
    cmd->add_option("--fcgs", opts->fcgs, "Directory of .fcg/.json graphs")->required();
    cmd->add_option("--emb", opts->emb, "Opcode embedding checkpoint")->required();
    cmd->add_option("--vocab", opts->vocab, "Vocabulary file")->required();
    cmd->add_option("--out", opts->out, "Graph feature csv")->required();
    cmd->add_option("--params", opts->params_in, "Trained graph parameters checkpoint");
    cmd->add_flag("--train", opts->train, "Train graph parameters on the graphs' labels");
    cmd->add_option("--task", opts->task, "detect (+-1 hinge) or categorize (5-way)")
        ->check(CLI::IsMember({"detect", "categorize"}))
        ->capture_default_str();
    cmd->add_option("--save-params", opts->save_params, "Where to save trained parameters");
    cmd->add_option("--save-head", opts->save_head, "Where to save the trained head");
    cmd->add_option("--log", opts->log, "Training log csv");
    cmd->add_option("--weighting", opts->weighting, "uniform|sif function pooling")
        ->check(CLI::IsMember({"uniform", "sif"}))
        ->capture_default_str();
    cmd->add_option("--p", opts->cfg.embed.p, "Graph embedding width")->capture_default_str();
    cmd->add_option("--rounds", opts->cfg.embed.iterations, "Message passing rounds")
        ->capture_default_str();
    cmd->add_option("--sigma-layers", opts->cfg.embed.sigma_layers,
                    "Depth of the aggregation network")
        ->capture_default_str();
    cmd->add_flag("--directed", opts->cfg.embed.directed,
                  "Aggregate from out-neighbors only instead of undirected neighbors");
    cmd->add_flag("--random-init", opts->cfg.embed.random_init,
                  "Seeded random node-state init instead of zeros");
    cmd->add_option("--head-hidden", opts->cfg.head_hidden, "Hidden width of the training head")
        ->capture_default_str();
    cmd->add_option("--epochs", opts->cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", opts->cfg.batch, "Graphs per optimizer step")
        ->capture_default_str();
    cmd->add_option("--lr", opts->cfg.lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--jobs", opts->jobs, "Embed graphs in parallel (inference only)")
        ->capture_default_str();
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_embed_code(*opts); });
  }
}

}  // namespace falcon::cli
