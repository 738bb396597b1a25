#include <doctest.h>

#include <cmath>
#include <set>

#include "falcon/error.hpp"
#include "falcon/forest.hpp"
#include "falcon/fusion.hpp"
#include "falcon/metrics.hpp"
#include "falcon/mlp_head.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/tiny_models.hpp"

using namespace falcon;

TEST_CASE("fuse: concatenation with the network feature first") {
  const std::vector<double> net = {1, 2};
  const std::vector<double> code = {3};
  CHECK(fuse::fuse(net, code) == std::vector<double>{1, 2, 3});
  CHECK(fuse::fuse(net, code, 2, 1).size() == 3);
  CHECK_THROWS_WITH_AS(fuse::fuse(net, code, 4, 1), doctest::Contains("DimMismatch"),
                       falcon::error);
}

TEST_CASE("mlp_detect: zero head scores zero which counts as benign") {
  auto head = fuse::MlpHead::make(3, 4, 1);
  const auto r = fuse::mlp_detect(head, std::vector<double>{1.0, -2.0, 0.5});
  CHECK(r.score == 0.0);
  CHECK(r.verdict == fuse::Verdict::benign);
}

TEST_CASE("mlp_detect: negating the output layer flips every non-zero verdict") {
  Rng rng(12);
  auto head = fuse::MlpHead::make(5, 6, 1);
  head.init(rng);
  auto negated = head;
  for (double& v : negated.layer2.weight.data) v = -v;
  for (double& v : negated.layer2.bias.data) v = -v;
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform(-2, 2);
    const auto a = fuse::mlp_detect(head, x);
    const auto b = fuse::mlp_detect(negated, x);
    CHECK(b.score == doctest::Approx(-a.score).epsilon(1e-12));
    if (a.score != 0.0) CHECK(a.verdict != b.verdict);
  }
}

TEST_CASE("mlp_detect: positive rescaling of the output layer keeps every verdict") {
  Rng rng(88);
  auto head = fuse::MlpHead::make(4, 5, 1);
  head.init(rng);
  auto scaled = head;
  for (double& v : scaled.layer2.weight.data) v *= 2.5;
  for (double& v : scaled.layer2.bias.data) v *= 2.5;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-2, 2);
    const auto a = fuse::mlp_detect(head, x);
    const auto b = fuse::mlp_detect(scaled, x);
    CHECK(a.verdict == b.verdict);
  }
}

TEST_CASE("mlp heads match scalar compositions of the two maps") {
  Rng rng(77);
  for (const bool linear : {false, true}) {
    auto head = fuse::MlpHead::make(4, 3, 1, linear);
    head.init(rng);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> x(4);
      for (double& v : x) v = rng.uniform(-1.5, 1.5);
      const auto got = fuse::mlp_detect(head, x);

      double hidden[3];
      for (int hcol = 0; hcol < 3; ++hcol) {
        double z = head.layer1.bias[static_cast<std::size_t>(hcol)];
        for (int i = 0; i < 4; ++i)
          z += x[static_cast<std::size_t>(i)] *
               head.layer1.weight.at2(static_cast<std::size_t>(i),
                                      static_cast<std::size_t>(hcol));
        hidden[hcol] = linear ? z : std::tanh(z);
      }
      double score = head.layer2.bias[0];
      for (int hcol = 0; hcol < 3; ++hcol)
        score += hidden[hcol] * head.layer2.weight.at2(static_cast<std::size_t>(hcol), 0);

      CHECK(got.score == doctest::Approx(score).epsilon(1e-12));
      CHECK((got.verdict == fuse::Verdict::malware) == (score > 0.0));
    }
  }
}

TEST_CASE("mlp_categorize: zero head is uniform and rows always sum to one") {
  auto head = fuse::MlpHead::make(4, 5, 5);
  const auto p = fuse::mlp_categorize(head, std::vector<double>{1, 2, 3, 4});
  for (double v : p) CHECK(v == doctest::Approx(0.2));

  Rng rng(4);
  head.init(rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(4);
    for (double& v : x) v = rng.uniform(-3, 3);
    const auto probs = fuse::mlp_categorize(head, x);
    double sum = 0;
    for (double v : probs) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("mlp head gradients pass finite differences") {
  tiny::TinyHead detect(true, 808);
  CHECK(tiny::run_grad_check(detect) < 1e-4);
  tiny::TinyHead categorize(false, 809);
  CHECK(tiny::run_grad_check(categorize) < 1e-4);
}

namespace {

void blobs(Rng& rng, std::size_t per_class, std::size_t classes, double separation,
           std::vector<std::vector<double>>& x, std::vector<int>& y) {
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      std::vector<double> f(2);
      const double angle = 2.0 * 3.14159265358979 * static_cast<double>(c) /
                           static_cast<double>(classes);
      f[0] = separation * std::cos(angle) + rng.normal();
      f[1] = separation * std::sin(angle) + rng.normal();
      x.push_back(std::move(f));
      y.push_back(static_cast<int>(c));
    }
  }
}

}  // namespace

TEST_CASE("train_detector: separable blobs reach 100% and runs reproduce per seed") {
  Rng rng(21);
  std::vector<std::vector<double>> x;
  std::vector<int> y01;
  blobs(rng, 40, 2, 6.0, x, y01);
  std::vector<int> y;
  for (int v : y01) y.push_back(v == 0 ? -1 : 1);

  fuse::HeadTrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 60;
  cfg.seed = 3;
  nn::TrainLog log;
  const auto head = fuse::train_detector(x, y, cfg, &log);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto r = fuse::mlp_detect(head, x[i]);
    if ((r.verdict == fuse::Verdict::malware) == (y[i] == 1)) ++hits;
  }
  CHECK(hits == x.size());

  nn::TrainLog log2;
  fuse::train_detector(x, y, cfg, &log2);
  REQUIRE(log2.size() == log.size());
  CHECK(log2.back().loss == log.back().loss);

  CHECK_THROWS_WITH_AS(fuse::train_detector(x, std::vector<int>(x.size(), 1), cfg),
                       doctest::Contains("DegenerateLabels"), falcon::error);
  CHECK_THROWS_WITH_AS(fuse::train_detector(x, y01, cfg),
                       doctest::Contains("LabelOutOfRange"), falcon::error);
}

TEST_CASE("train_categorizer: five blobs reach 99%") {
  Rng rng(31);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  blobs(rng, 30, 5, 8.0, x, y);
  fuse::HeadTrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 80;
  cfg.seed = 5;
  const auto head = fuse::train_categorizer(x, y, cfg);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto probs = fuse::mlp_categorize(head, x[i]);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[arg]) arg = k;
    if (static_cast<int>(arg) == y[i]) ++hits;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(x.size()) >= 0.99);
}

TEST_CASE("relabel_top_n: one-vs-rest with idempotence") {
  const std::vector<int> labels = {1, 0, 1};  // Adware, Benign, Adware
  const auto bin = fuse::relabel_top_n(labels, img::ClassLabel::adware);
  CHECK(bin == std::vector<int>{1, 0, 1});
  CHECK(fuse::relabel_top_n(bin, img::ClassLabel::adware) == bin);  // 1 == Adware id

  const auto absent = fuse::relabel_top_n({0, 0, 0}, img::ClassLabel::ransomware);
  CHECK(absent == std::vector<int>{0, 0, 0});

  CHECK_THROWS_WITH_AS(fuse::relabel_top_n({7}, img::ClassLabel::adware),
                       doctest::Contains("UnknownFamily"), falcon::error);
}

TEST_CASE("train_forest: a depth-1 stump separates sign data exactly") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = -10; i <= 10; ++i) {
    if (i == 0) continue;
    x.push_back({static_cast<double>(i)});
    y.push_back(i > 0 ? 1 : 0);
  }
  fuse::ForestHyperparams hp;
  hp.n_estimators = 1;
  hp.max_depth = 1;
  hp.min_samples_split = 2;
  hp.bootstrap = false;
  hp.max_features = fuse::MaxFeatures::all;
  const auto model = fuse::train_forest(x, y, hp);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(fuse::predict_forest(model, x[i]) == y[i]);
  // exhaustive threshold oracle: best split must sit between -1 and 1
  REQUIRE(model.trees.size() == 1);
  CHECK(model.trees[0].nodes[0].threshold == doctest::Approx(0.0));
}

TEST_CASE("train_forest: single tree equals the reference CART oracle") {
  Rng rng(91);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    const std::size_t n = 20 + rng.uniform_int(0, 30);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> f(3);
      for (double& v : f) v = rng.uniform(-4, 4);
      const int label = (f[0] + 0.5 * f[1] > 0 ? 1 : 0) + (f[2] > 2 ? 1 : 0);
      x.push_back(std::move(f));
      y.push_back(label);
    }
    if (std::set<int>(y.begin(), y.end()).size() < 2) continue;

    fuse::ForestHyperparams hp;
    hp.n_estimators = 1;
    hp.bootstrap = false;
    hp.max_features = fuse::MaxFeatures::all;
    hp.max_depth = 10;
    hp.min_samples_split = 2;
    const auto model = fuse::train_forest(x, y, hp);

    oracles::CartOracle oracle;
    oracle.fit(x, y, 10, 2);

    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(fuse::predict_forest(model, x[i]) == oracle.predict(x[i]));
  }
}

TEST_CASE("train_forest: constant features collapse to the majority class") {
  std::vector<std::vector<double>> x(9, {1.0, 1.0});
  std::vector<int> y = {0, 0, 0, 0, 0, 1, 1, 1, 1};
  fuse::ForestHyperparams hp = fuse::ForestHyperparams::desk_scale(5);
  hp.n_estimators = 15;
  const auto model = fuse::train_forest(x, y, hp);
  CHECK(fuse::predict_forest(model, {1.0, 1.0}) == 0);
}

TEST_CASE("train_forest: five gaussian blobs at 4 sigma hit 90% held out") {
  Rng rng(271);
  std::vector<std::vector<double>> xtr, xte;
  std::vector<int> ytr, yte;
  blobs(rng, 60, 5, 4.0, xtr, ytr);
  blobs(rng, 20, 5, 4.0, xte, yte);

  fuse::ForestHyperparams hp = fuse::ForestHyperparams::desk_scale(11);
  hp.n_estimators = 30;  // smaller than the acceptance preset, still plenty
  const auto model = fuse::train_forest(xtr, ytr, hp);
  const auto preds = fuse::predict_forest(model, xte);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < yte.size(); ++i)
    if (preds[i] == yte[i]) ++hits;
  CHECK(static_cast<double>(hits) / static_cast<double>(yte.size()) >= 0.90);

  // tree order does not change the vote
  fuse::ForestModel reversed = model;
  std::reverse(reversed.trees.begin(), reversed.trees.end());
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(fuse::predict_forest(reversed, xte[i]) == preds[i]);
}

TEST_CASE("train_forest: hyperparameter validation and determinism") {
  std::vector<std::vector<double>> x = {{0.0}, {1.0}, {2.0}, {3.0}};
  std::vector<int> y = {0, 0, 1, 1};
  fuse::ForestHyperparams bad;
  bad.n_estimators = 0;
  CHECK_THROWS_WITH_AS(fuse::train_forest(x, y, bad), doctest::Contains("BadHyperparameters"),
                       falcon::error);
  CHECK_THROWS_WITH_AS(fuse::train_forest(x, std::vector<int>(4, 1),
                                          fuse::ForestHyperparams::desk_scale()),
                       doctest::Contains("DegenerateLabels"), falcon::error);

  fuse::ForestHyperparams hp = fuse::ForestHyperparams::desk_scale(9);
  hp.n_estimators = 7;
  hp.min_samples_split = 2;
  const auto a = fuse::train_forest(x, y, hp);
  const auto b = fuse::train_forest(x, y, hp);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t i = 0; i < a.trees[t].nodes.size(); ++i) {
      CHECK(a.trees[t].nodes[i].feature == b.trees[t].nodes[i].feature);
      CHECK(a.trees[t].nodes[i].threshold == b.trees[t].nodes[i].threshold);
    }
  }
}

TEST_CASE("forest checkpoint round trips predictions") {
  fixtures::TempDir tmp("forest");
  Rng rng(17);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  blobs(rng, 25, 3, 5.0, x, y);
  fuse::ForestHyperparams hp = fuse::ForestHyperparams::desk_scale(2);
  hp.n_estimators = 9;
  const auto model = fuse::train_forest(x, y, hp);
  model.save(tmp.file("f.ckpt"));
  const auto back = fuse::ForestModel::load(tmp.file("f.ckpt"));
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(fuse::predict_forest(back, x[i]) == fuse::predict_forest(model, x[i]));
}

TEST_CASE("evaluate: perfect predictions score ones") {
  const std::vector<int> labels = {0, 1, 2, 3, 4, 2, 1};
  const auto m = fuse::evaluate(labels, labels);
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == doctest::Approx(1.0));
  CHECK(m.recall == doctest::Approx(1.0));
  CHECK(m.f1 == doctest::Approx(1.0));
}

TEST_CASE("evaluate: the four-sample worked example to four decimals") {
  const std::vector<int> labels = {0, 0, 1, 1};
  const std::vector<int> preds = {0, 1, 1, 1};
  const auto m = fuse::evaluate(preds, labels);
  CHECK(m.accuracy == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(m.precision == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(m.recall == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(m.f1 == doctest::Approx(0.7333).epsilon(1e-4));
  REQUIRE(m.confusion.size() == 2);
  CHECK(m.confusion[0][0] == 1);
  CHECK(m.confusion[0][1] == 1);
  CHECK(m.confusion[1][0] == 0);
  CHECK(m.confusion[1][1] == 2);
}

TEST_CASE("evaluate: sample order does not matter") {
  const std::vector<int> labels = {0, 0, 1, 1, 2};
  const std::vector<int> preds = {0, 1, 1, 2, 2};
  const auto a = fuse::evaluate(preds, labels);
  const std::vector<int> labels2 = {2, 1, 0, 1, 0};
  const std::vector<int> preds2 = {2, 1, 0, 2, 1};
  const auto b = fuse::evaluate(preds2, labels2);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.precision == doctest::Approx(b.precision));
  CHECK(a.recall == doctest::Approx(b.recall));
  CHECK(a.f1 == doctest::Approx(b.f1));
}

TEST_CASE("evaluate: random cases match the independent oracle exactly") {
  Rng rng(515);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 2 + rng.uniform_int(0, 3);
    const std::size_t n = 1 + rng.uniform_int(0, 199);
    std::vector<int> labels(n), preds(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.uniform_int(0, k - 1));
      preds[i] = static_cast<int>(rng.uniform_int(0, k - 1));
    }
    const auto m = fuse::evaluate(preds, labels, k);
    const auto o = oracles::metrics_naive(preds, labels, k);
    CHECK(m.accuracy == doctest::Approx(o.accuracy).epsilon(1e-12));
    CHECK(m.precision == doctest::Approx(o.precision).epsilon(1e-12));
    CHECK(m.recall == doctest::Approx(o.recall).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(o.f1).epsilon(1e-12));
  }
}

TEST_CASE("evaluate: guards") {
  CHECK_THROWS_WITH_AS(fuse::evaluate({}, {}), doctest::Contains("Empty"), falcon::error);
  CHECK_THROWS_WITH_AS(fuse::evaluate({1}, {1, 0}), doctest::Contains("LengthMismatch"),
                       falcon::error);
}

TEST_CASE("feature csv: write, read, join") {
  fixtures::TempDir tmp("csv");
  fuse::FeatureTable net;
  net.ids = {"app1", "app2", "app3"};
  net.labels = {0, 1, 1};
  net.features = {{0.5, -1.25}, {3.75, 2.0}, {1e-3, 123.456}};
  fuse::write_feature_csv(net, tmp.file("net.csv"));

  const auto back = fuse::read_feature_csv(tmp.file("net.csv"));
  CHECK(back.ids == net.ids);
  CHECK(back.labels == net.labels);
  REQUIRE(back.features.size() == 3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c)
      CHECK(back.features[r][c] == net.features[r][c]);  // %.17g round trips

  fuse::FeatureTable code;
  code.ids = {"app2", "app1"};
  code.labels = {1, 0};
  code.features = {{9.0}, {7.0}};
  const auto joined = fuse::join_features(net, code);
  REQUIRE(joined.ids == std::vector<std::string>{"app1", "app2"});
  CHECK(joined.features[0] == std::vector<double>{0.5, -1.25, 7.0});
  CHECK(joined.features[1] == std::vector<double>{3.75, 2.0, 9.0});

  fuse::FeatureTable conflict = code;
  conflict.labels = {0, 0};
  CHECK_THROWS_AS(fuse::join_features(net, conflict), falcon::error);
}

TEST_CASE("metrics csv writers emit parseable tables") {
  fixtures::TempDir tmp("mcsv");
  const auto m = fuse::evaluate({0, 1, 1, 1}, {0, 0, 1, 1});
  fuse::write_metrics_csv(m, tmp.file("m.csv"));
  fuse::write_confusion_csv(m, tmp.file("c.csv"));
  const auto text = read_file(tmp.file("m.csv"));
  const std::string head(text.begin(), text.begin() + 13);
  CHECK(head == "metric,value\n");
  CHECK(!fuse::format_metrics_table(m).empty());
}
