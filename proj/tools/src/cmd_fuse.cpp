#include <cstdio>
#include <filesystem>
#include <memory>
#include <numeric>

#include "commands.hpp"
#include "falcon/checkpoint.hpp"
#include "falcon/cnn.hpp"
#include "falcon/error.hpp"
#include "falcon/flow_image.hpp"
#include "falcon/forest.hpp"
#include "falcon/fusion.hpp"
#include "falcon/metrics.hpp"
#include "falcon/mlp_head.hpp"
#include "io_helpers.hpp"
#include "run_context.hpp"

namespace falcon::cli {

namespace {

int detect_truth(int label) { return label > 0 ? 1 : 0; }  // 1 = malware

struct TrainFusionOpts {
  Common common;
  std::string net_csv, code_csv, features_csv;
  std::string out, metrics, confusion, log;
  std::string classifier = "mlp";
  std::string task = "detect";
  std::string family;  // one-vs-rest relabeling for a named malware family
  double holdout = 0.25;
  fuse::HeadTrainConfig head;
  std::size_t trees = 1400;
  std::size_t depth = 80;
  std::size_t min_split = 5;
  std::string max_features = "sqrt";
  bool no_bootstrap = false;
};

fuse::FeatureTable load_fused(const TrainFusionOpts& o, RunContext& run) {
  if (!o.features_csv.empty()) {
    run.input(o.features_csv);
    return fuse::read_feature_csv(o.features_csv);
  }
  if (o.net_csv.empty() || o.code_csv.empty())
    fail(errc::bad_config, "need --features, or both --net and --code");
  run.input(o.net_csv);
  run.input(o.code_csv);
  return fuse::join_features(fuse::read_feature_csv(o.net_csv),
                             fuse::read_feature_csv(o.code_csv));
}

void run_train_fusion(const TrainFusionOpts& o) {
  const bool detect = o.task == "detect";
  const std::string metrics_path = o.metrics.empty() ? o.out + ".metrics.csv" : o.metrics;
  const std::string confusion_path = o.confusion.empty() ? o.out + ".confusion.csv" : o.confusion;

  RunContext run("train-fusion", o.common.seed);
  run.set_force(o.common.force);
  run.config("net", o.net_csv);
  run.config("code", o.code_csv);
  run.config("features", o.features_csv);
  run.config("out", o.out);
  run.config("classifier", o.classifier);
  run.config("task", o.task);
  run.config("family", o.family);
  run.config("holdout", o.holdout);
  run.config("hidden", static_cast<std::uint64_t>(o.head.hidden));
  run.config("linear_head", o.head.linear);
  run.config("epochs", static_cast<std::uint64_t>(o.head.epochs));
  run.config("lr", o.head.lr);
  run.config("trees", static_cast<std::uint64_t>(o.trees));
  run.config("depth", static_cast<std::uint64_t>(o.depth));
  run.config("min_split", static_cast<std::uint64_t>(o.min_split));
  run.config("max_features", o.max_features);
  run.config("bootstrap", !o.no_bootstrap);

  auto table = load_fused(o, run);
  if (!o.family.empty()) {
    if (!detect) fail(errc::bad_config, "--family applies to the detect task");
    table.labels = fuse::relabel_top_n(table.labels, img::class_from_name(o.family));
  }
  run.guard(manifest_for_file(o.out));

  // deterministic holdout split
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(o.common.seed);
  rng.shuffle(order);
  const std::size_t train_n =
      o.holdout <= 0.0 ? table.size()
                       : std::max<std::size_t>(1, static_cast<std::size_t>(
                                                      static_cast<double>(table.size()) *
                                                      (1.0 - o.holdout)));

  std::vector<std::vector<double>> xtr, xte;
  std::vector<int> ytr_raw, yte_raw;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < train_n) {
      xtr.push_back(table.features[order[i]]);
      ytr_raw.push_back(table.labels[order[i]]);
    } else {
      xte.push_back(table.features[order[i]]);
      yte_raw.push_back(table.labels[order[i]]);
    }
  }
  const bool have_holdout = !xte.empty();
  const auto& xev = have_holdout ? xte : xtr;
  const auto& yev_raw = have_holdout ? yte_raw : ytr_raw;

  std::vector<int> preds;
  if (o.classifier == "mlp") {
    fuse::HeadTrainConfig cfg = o.head;
    cfg.seed = o.common.seed;
    nn::TrainLog log;
    if (detect) {
      std::vector<int> ytr;
      for (int y : ytr_raw) ytr.push_back(y > 0 ? 1 : -1);
      const auto head = fuse::train_detector(xtr, ytr, cfg, &log);
      head.save(o.out);
      for (const auto& x : xev)
        preds.push_back(fuse::mlp_detect(head, x).verdict == fuse::Verdict::malware ? 1 : 0);
    } else {
      const auto head = fuse::train_categorizer(xtr, ytr_raw, cfg, &log);
      head.save(o.out);
      for (const auto& x : xev) {
        const auto probs = fuse::mlp_categorize(head, x);
        preds.push_back(static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin()));
      }
    }
    if (!o.log.empty()) {
      nn::write_train_log(log, o.log);
      run.output(o.log);
    }
  } else {
    fuse::ForestHyperparams hp;
    hp.n_estimators = o.trees;
    hp.max_depth = o.depth;
    hp.min_samples_split = o.min_split;
    hp.max_features =
        o.max_features == "all" ? fuse::MaxFeatures::all : fuse::MaxFeatures::sqrt_rule;
    hp.bootstrap = !o.no_bootstrap;
    hp.seed = o.common.seed;
    std::vector<int> ytr = ytr_raw;
    if (detect)
      for (int& y : ytr) y = detect_truth(y);
    const auto model = fuse::train_forest(xtr, ytr, hp);
    model.save(o.out);
    preds = fuse::predict_forest(model, xev);
  }
  run.output(o.out);

  std::vector<int> truth = yev_raw;
  if (detect)
    for (int& y : truth) y = detect_truth(y);
  const auto metrics = fuse::evaluate(preds, truth);
  fuse::write_metrics_csv(metrics, metrics_path);
  fuse::write_confusion_csv(metrics, confusion_path);
  run.output(metrics_path);
  run.output(confusion_path);

  std::printf("train-fusion (%s/%s) on %zu rows, %s on %zu rows:\n%s", o.classifier.c_str(),
              o.task.c_str(), xtr.size(), have_holdout ? "holdout" : "train", xev.size(),
              fuse::format_metrics_table(metrics).c_str());
  run.finish(manifest_for_file(o.out));
}

struct PredictOpts {
  Common common;
  std::string model, features, net_csv, code_csv;
  std::string cnn, corpus;
  std::string bilstm, seqs;
  std::string out;
};

void run_predict(const PredictOpts& o) {
  RunContext run("predict", o.common.seed);
  run.set_force(o.common.force);
  run.config("model", o.model);
  run.config("features", o.features);
  run.config("net", o.net_csv);
  run.config("code", o.code_csv);
  run.config("cnn", o.cnn);
  run.config("corpus", o.corpus);
  run.config("bilstm", o.bilstm);
  run.config("seqs", o.seqs);
  run.config("out", o.out);

  Predictions preds;
  if (!o.model.empty()) {
    run.input(o.model);
    fuse::FeatureTable table;
    if (!o.features.empty()) {
      run.input(o.features);
      table = fuse::read_feature_csv(o.features);
    } else if (!o.net_csv.empty() && !o.code_csv.empty()) {
      run.input(o.net_csv);
      run.input(o.code_csv);
      table = fuse::join_features(fuse::read_feature_csv(o.net_csv),
                                  fuse::read_feature_csv(o.code_csv));
    } else {
      fail(errc::bad_config, "--model needs --features, or --net and --code");
    }
    run.guard(manifest_for_file(o.out));
    const auto ckpt = nn::Checkpoint::load(o.model);
    const double kind = ckpt.get_scalar("meta.kind");
    if (kind == 4.0) {
      const auto head = fuse::MlpHead::load(o.model);
      const bool detect = head.out_dim() == 1;
      for (std::size_t i = 0; i < table.size(); ++i) {
        preds.ids.push_back(table.ids[i]);
        preds.labels.push_back(detect ? detect_truth(table.labels[i]) : table.labels[i]);
        if (detect) {
          preds.preds.push_back(
              fuse::mlp_detect(head, table.features[i]).verdict == fuse::Verdict::malware ? 1
                                                                                          : 0);
        } else {
          const auto probs = fuse::mlp_categorize(head, table.features[i]);
          preds.preds.push_back(static_cast<int>(
              std::max_element(probs.begin(), probs.end()) - probs.begin()));
        }
      }
    } else if (kind == 5.0) {
      const auto model = fuse::ForestModel::load(o.model);
      const bool detect = model.n_classes == 2;
      for (std::size_t i = 0; i < table.size(); ++i) {
        preds.ids.push_back(table.ids[i]);
        preds.labels.push_back(detect ? detect_truth(table.labels[i]) : table.labels[i]);
        preds.preds.push_back(predict_forest(model, table.features[i]));
      }
    } else {
      fail(errc::schema_error, "--model must be an mlp head or forest checkpoint");
    }
  } else if (!o.cnn.empty()) {
    if (o.corpus.empty()) fail(errc::bad_config, "--cnn needs --corpus");
    const auto p = std::filesystem::path(o.corpus);
    run.input(o.cnn);
    run.input((p / "images.idx").string());
    run.guard(manifest_for_file(o.out));
    const auto corpus = img::read_idx((p / "images.idx").string(), (p / "labels.idx").string(),
                                      (p / "captures.tsv").string());
    const auto cnn = net::CnnModel::load(o.cnn);
    const auto out = net::cnn_predict(cnn, corpus.images);
    for (std::size_t i = 0; i < out.size(); ++i) {
      preds.ids.push_back("img" + std::to_string(i));
      preds.labels.push_back(corpus.labels[i]);
      preds.preds.push_back(out[i]);
    }
  } else if (!o.bilstm.empty()) {
    if (o.seqs.empty()) fail(errc::bad_config, "--bilstm needs --seqs");
    run.input(o.bilstm);
    run.input((std::filesystem::path(o.seqs) / "sequences.ckpt").string());
    run.guard(manifest_for_file(o.out));
    const auto model = net::BiLstmModel::load(o.bilstm);
    const auto set = SequenceSet::load(o.seqs);
    for (const auto& seq : set.sequences) {
      preds.ids.push_back(seq.source_name);
      preds.labels.push_back(seq.label);
      preds.preds.push_back(net::classify_capture(model, seq));
    }
  } else {
    fail(errc::bad_config, "predict needs --model, --cnn or --bilstm");
  }

  write_predictions_csv(preds, o.out);
  run.output(o.out);
  std::printf("predict: %zu predictions\n", preds.ids.size());
  run.finish(manifest_for_file(o.out));
}

struct EvaluateOpts {
  Common common;
  std::string preds, out, confusion;
};

void run_evaluate(const EvaluateOpts& o) {
  const std::string metrics_path = o.out.empty() ? o.preds + ".metrics.csv" : o.out;
  RunContext run("evaluate", o.common.seed);
  run.set_force(o.common.force);
  run.config("preds", o.preds);
  run.config("out", metrics_path);
  run.input(o.preds);
  run.guard(manifest_for_file(metrics_path));

  const auto p = read_predictions_csv(o.preds);
  const auto metrics = fuse::evaluate(p.preds, p.labels);
  fuse::write_metrics_csv(metrics, metrics_path);
  run.output(metrics_path);
  if (!o.confusion.empty()) {
    fuse::write_confusion_csv(metrics, o.confusion);
    run.output(o.confusion);
  }
  std::printf("%s", fuse::format_metrics_table(metrics).c_str());
  run.finish(manifest_for_file(metrics_path));
}

}  // namespace

void register_fusion_commands(CLI::App& app) {
  {
    auto opts = std::make_shared<TrainFusionOpts>();
    auto* cmd = app.add_subcommand("train-fusion",
                                   "Train a classifier over fused network+code features");
    cmd->add_option("--net", opts->net_csv, "Network feature csv from embed-net");
    cmd->add_option("--code", opts->code_csv, "Code feature csv from embed-code");
    cmd->add_option("--features", opts->features_csv, "Pre-fused feature csv");
    cmd->add_option("--out", opts->out, "Model checkpoint path")->required();
    cmd->add_option("--classifier", opts->classifier, "mlp|forest")
        ->check(CLI::IsMember({"mlp", "forest"}))
        ->capture_default_str();
    cmd->add_option("--task", opts->task, "detect|categorize")
        ->check(CLI::IsMember({"detect", "categorize"}))
        ->capture_default_str();
    cmd->add_option("--family", opts->family,
                    "Relabel one-vs-rest for this malware family before detection");
    cmd->add_option("--holdout", opts->holdout, "Held-out fraction for the report")
        ->capture_default_str();
    cmd->add_option("--metrics", opts->metrics, "Metrics csv (default <out>.metrics.csv)");
    cmd->add_option("--confusion", opts->confusion,
                    "Confusion matrix csv (default <out>.confusion.csv)");
    cmd->add_option("--log", opts->log, "Training log csv (mlp only)");
    cmd->add_option("--hidden", opts->head.hidden, "MLP hidden width")->capture_default_str();
    cmd->add_flag("--linear-head", opts->head.linear,
                  "Literal two-affine-map head with no hidden activation");
    cmd->add_option("--epochs", opts->head.epochs, "MLP epochs")->capture_default_str();
    cmd->add_option("--lr", opts->head.lr, "MLP Adam learning rate")->capture_default_str();
    cmd->add_option("--trees", opts->trees, "Forest size")->capture_default_str();
    cmd->add_option("--depth", opts->depth, "Forest max depth")->capture_default_str();
    cmd->add_option("--min-split", opts->min_split, "Forest min samples to split")
        ->capture_default_str();
    cmd->add_option("--max-features", opts->max_features, "sqrt|all per-split feature rule")
        ->check(CLI::IsMember({"sqrt", "all"}))
        ->capture_default_str();
    cmd->add_flag("--no-bootstrap", opts->no_bootstrap, "Train each tree on the full sample");
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_train_fusion(*opts); });
  }
  {
    auto opts = std::make_shared<PredictOpts>();
    auto* cmd = app.add_subcommand("predict", "Apply a trained model");
    cmd->add_option("--model", opts->model, "Fusion classifier checkpoint (mlp or forest)");
    cmd->add_option("--features", opts->features, "Feature csv for --model");
    cmd->add_option("--net", opts->net_csv, "Network feature csv (joined with --code)");
    cmd->add_option("--code", opts->code_csv, "Code feature csv (joined with --net)");
    cmd->add_option("--cnn", opts->cnn, "CNN checkpoint for per-image prediction");
    cmd->add_option("--corpus", opts->corpus, "Corpus directory for --cnn");
    cmd->add_option("--bilstm", opts->bilstm, "bi-LSTM checkpoint for per-capture prediction");
    cmd->add_option("--seqs", opts->seqs, "Sequence directory for --bilstm");
    cmd->add_option("--out", opts->out, "Predictions csv")->required();
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_predict(*opts); });
  }
  {
    auto opts = std::make_shared<EvaluateOpts>();
    auto* cmd = app.add_subcommand("evaluate", "Score a predictions csv with weighted metrics");
    cmd->add_option("--preds", opts->preds, "Predictions csv (id,label,pred)")->required();
    cmd->add_option("--out", opts->out, "Metrics csv (default <preds>.metrics.csv)");
    cmd->add_option("--confusion", opts->confusion, "Confusion matrix csv");
    add_common(cmd, opts->common);
    cmd->callback([opts] { run_evaluate(*opts); });
  }
}

}  // namespace falcon::cli
