#include <benchmark/benchmark.h>

#include "falcon/cnn.hpp"
#include "falcon/forest.hpp"
#include "falcon/lstm.hpp"
#include "falcon/pcap.hpp"
#include "falcon/struct2vec.hpp"

using namespace falcon;

namespace {

nn::Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1, 1);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(1);
  const auto x = random_tensor({8, 28, 28, 1}, rng);
  auto p = nn::Conv2dParams::make(1, static_cast<std::size_t>(state.range(0)));
  p.init_he_uniform(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nn::conv2d_forward(x, p, nn::Padding::valid));
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

void BM_Img2Vec(benchmark::State& state) {
  Rng rng(2);
  net::CnnConfig cfg;
  const auto model = net::CnnModel::init(cfg, rng);
  img::FlowImage image;
  for (auto& px : image.pixels) px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  for (auto _ : state) {
    benchmark::DoNotOptimize(net::img2vec(model, image));
  }
}
BENCHMARK(BM_Img2Vec);

void BM_LstmStep(benchmark::State& state) {
  Rng rng(3);
  const std::size_t hidden = static_cast<std::size_t>(state.range(0));
  auto cell = net::LstmCellParams::make(32, hidden);
  cell.init(rng);
  std::vector<double> x(32), h(hidden, 0.0), c(hidden, 0.0), h2, c2;
  for (double& v : x) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    net::lstm_step(cell, x, h, c, false, h2, c2);
    benchmark::DoNotOptimize(h2.data());
  }
}
BENCHMARK(BM_LstmStep)->Arg(32)->Arg(64)->Arg(128);

void BM_Structure2vec(benchmark::State& state) {
  Rng rng(4);
  const auto vocab = code::build_vocab({{"a", "b", "c", "d"}});
  code::OpcodeEmbedding emb;
  emb.dim = 64;
  emb.data.resize(vocab.rows() * emb.dim);
  for (double& v : emb.data) v = rng.uniform(-1, 1);

  code::RawCallGraph raw;
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  for (std::size_t i = 0; i < n; ++i) {
    code::RawFunction fn;
    fn.id = static_cast<int>(i);
    fn.name = "f";
    for (int k = 0; k < 12; ++k)
      fn.opcodes.push_back(vocab.mnemonics[rng.uniform_int(0, vocab.size() - 1)]);
    raw.nodes.push_back(std::move(fn));
  }
  for (std::size_t i = 1; i < n; ++i)
    raw.edges.emplace_back(static_cast<int>(rng.uniform_int(0, i - 1)), static_cast<int>(i));
  const auto graph = code::resolve_graph(raw, vocab);

  code::GraphEmbedConfig cfg;
  Rng init(5);
  const auto params = code::GraphEmbedParams::init(emb.dim, cfg, init);
  const auto features = code::node_features(graph, emb, vocab, code::Weighting::uniform);
  for (auto _ : state) {
    benchmark::DoNotOptimize(code::s2v_forward(graph, params, features).out);
  }
}
BENCHMARK(BM_Structure2vec)->Arg(16)->Arg(64)->Arg(256);

void BM_ForestPredict(benchmark::State& state) {
  Rng rng(6);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 400; ++i) {
    x.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    y.push_back(static_cast<int>(rng.uniform_int(0, 4)));
  }
  auto hp = fuse::ForestHyperparams::desk_scale(7);
  const auto model = fuse::train_forest(x, y, hp);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fuse::predict_forest(model, x[i++ % x.size()]));
  }
}
BENCHMARK(BM_ForestPredict);

void BM_SplitFlows(benchmark::State& state) {
  Rng rng(8);
  std::vector<pcap::ParsedPacket> packets;
  for (int i = 0; i < 2000; ++i) {
    pcap::ParsedPacket p;
    p.tuple = {{10, 0, 0, static_cast<std::uint8_t>(rng.uniform_int(1, 40))},
               static_cast<std::uint16_t>(rng.uniform_int(1024, 1064)),
               {192, 168, 0, 1},
               443,
               6};
    p.bytes = Bytes(64, 0);
    p.size = 64;
    p.time = {static_cast<std::int64_t>(rng.uniform_int(0, 100)), 0};
    packets.push_back(std::move(p));
  }
  for (auto _ : state) {
    auto copy = packets;
    benchmark::DoNotOptimize(pcap::split_flows(std::move(copy), true));
  }
}
BENCHMARK(BM_SplitFlows);

}  // namespace

BENCHMARK_MAIN();
