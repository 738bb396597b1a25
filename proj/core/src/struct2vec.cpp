#include "falcon/struct2vec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "falcon/checkpoint.hpp"
#include "falcon/error.hpp"
#include "falcon/optim.hpp"

namespace falcon::code {

namespace {

// y = a[n,k] * b[k,m]
nn::Tensor matmul(const nn::Tensor& a, const nn::Tensor& b) {
  const std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[1];
  nn::require(b.shape[0] == k, errc::shape_mismatch, "matmul inner dims");
  nn::Tensor y({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = a.data[i * k + kk];
      if (av == 0.0) continue;
      const double* bp = &b.data[kk * m];
      double* yp = &y.data[i * m];
      for (std::size_t j = 0; j < m; ++j) yp[j] += av * bp[j];
    }
  }
  return y;
}

// acc[k,m] += a[n,k]^T * d[n,m]
void accumulate_at_d(const nn::Tensor& a, const nn::Tensor& d, nn::Tensor& acc) {
  const std::size_t n = a.shape[0], k = a.shape[1], m = d.shape[1];
  for (std::size_t i = 0; i < n; ++i) {
    const double* ap = &a.data[i * k];
    const double* dp = &d.data[i * m];
    for (std::size_t kk = 0; kk < k; ++kk) {
      if (ap[kk] == 0.0) continue;
      double* accp = &acc.data[kk * m];
      for (std::size_t j = 0; j < m; ++j) accp[j] += ap[kk] * dp[j];
    }
  }
}

// y[n,k] = d[n,m] * b[k,m]^T
nn::Tensor matmul_bt(const nn::Tensor& d, const nn::Tensor& b) {
  const std::size_t n = d.shape[0], m = d.shape[1], k = b.shape[0];
  nn::Tensor y({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    const double* dp = &d.data[i * m];
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* bp = &b.data[kk * m];
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += dp[j] * bp[j];
      y.data[i * k + kk] = acc;
    }
  }
  return y;
}

std::vector<std::vector<std::size_t>> build_neighbors(const CallGraph& g, bool directed) {
  std::unordered_map<int, std::size_t> index;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) index.emplace(g.nodes[i].id, i);
  std::vector<std::set<std::size_t>> sets(g.nodes.size());
  for (const auto& [src, dst] : g.edges) {
    const std::size_t s = index.at(src), d = index.at(dst);
    sets[s].insert(d);
    if (!directed) sets[d].insert(s);
  }
  std::vector<std::vector<std::size_t>> out(g.nodes.size());
  for (std::size_t i = 0; i < sets.size(); ++i) out[i].assign(sets[i].begin(), sets[i].end());
  return out;
}

}  // namespace

GraphEmbedParams GraphEmbedParams::init(std::size_t feature_dim, const GraphEmbedConfig& cfg,
                                        Rng& rng) {
  nn::require(cfg.iterations >= 1, errc::bad_hyperparameters, "iterations must be >= 1");
  nn::require(cfg.sigma_layers >= 1, errc::bad_hyperparameters, "sigma needs >= 1 layer");
  GraphEmbedParams params;
  params.iterations = cfg.iterations;
  params.random_init = cfg.random_init;
  params.directed = cfg.directed;
  params.w1 = nn::Tensor({feature_dim, cfg.p});
  params.w2 = nn::Tensor({cfg.p, cfg.p});
  params.sigma.assign(cfg.sigma_layers, nn::Tensor({cfg.p, cfg.p}));

  const auto glorot = [&rng](nn::Tensor& t) {
    const double limit = std::sqrt(6.0 / static_cast<double>(t.shape[0] + t.shape[1]));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
  };
  glorot(params.w1);
  glorot(params.w2);
  for (auto& layer : params.sigma) glorot(layer);
  return params;
}

std::vector<nn::Tensor*> GraphEmbedParams::parameters() {
  std::vector<nn::Tensor*> out{&w1};
  for (auto& layer : sigma) out.push_back(&layer);
  out.push_back(&w2);
  return out;
}

std::vector<const nn::Tensor*> GraphEmbedParams::parameters() const {
  std::vector<const nn::Tensor*> out{&w1};
  for (const auto& layer : sigma) out.push_back(&layer);
  out.push_back(&w2);
  return out;
}

void GraphEmbedParams::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.put_scalar("meta.kind", 6.0);  // 6 = graph embedding parameters
  ckpt.put_scalar("meta.iterations", static_cast<double>(iterations));
  ckpt.put_scalar("meta.random_init", random_init ? 1.0 : 0.0);
  ckpt.put_scalar("meta.directed", directed ? 1.0 : 0.0);
  ckpt.put_scalar("meta.sigma_layers", static_cast<double>(sigma.size()));
  ckpt.put("w1", w1);
  for (std::size_t i = 0; i < sigma.size(); ++i) ckpt.put("sigma." + std::to_string(i), sigma[i]);
  ckpt.put("w2", w2);
  ckpt.save(path);
}

GraphEmbedParams GraphEmbedParams::load(const std::string& path) {
  const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
  if (ckpt.get_scalar("meta.kind") != 6.0)
    fail(errc::schema_error, "checkpoint is not graph embedding parameters: " + path);
  GraphEmbedParams params;
  params.iterations = static_cast<std::size_t>(ckpt.get_scalar("meta.iterations"));
  params.random_init = ckpt.get_scalar("meta.random_init") == 1.0;
  params.directed = ckpt.get_scalar("meta.directed") == 1.0;
  params.w1 = ckpt.get("w1");
  params.w2 = ckpt.get("w2");
  const std::size_t layers = static_cast<std::size_t>(ckpt.get_scalar("meta.sigma_layers"));
  for (std::size_t i = 0; i < layers; ++i)
    params.sigma.push_back(ckpt.get("sigma." + std::to_string(i)));
  return params;
}

std::vector<std::vector<double>> node_features(const CallGraph& g, const OpcodeEmbedding& emb,
                                               const OpcodeVocab& vocab, Weighting weighting) {
  std::vector<std::vector<double>> out;
  out.reserve(g.nodes.size());
  for (const auto& node : g.nodes) out.push_back(function2vec(node, emb, vocab, weighting));
  return out;
}

S2vForward s2v_forward(const CallGraph& g, const GraphEmbedParams& params,
                       const std::vector<std::vector<double>>& features, Rng* init_rng) {
  if (g.nodes.empty()) fail(errc::empty_graph, "structure2vec needs a non-empty graph");
  const std::size_t n = g.nodes.size();
  const std::size_t p = params.p();
  const std::size_t d = params.feature_dim();
  nn::require(features.size() == n, errc::length_mismatch, "one feature row per node");

  S2vForward fwd;
  fwd.neighbors = build_neighbors(g, params.directed);
  fwd.x = nn::Tensor({n, d});
  for (std::size_t v = 0; v < n; ++v) {
    nn::require(features[v].size() == d, errc::dim_mismatch, "node feature width");
    std::copy(features[v].begin(), features[v].end(), &fwd.x.data[v * d]);
  }

  fwd.mu0 = nn::Tensor({n, p});
  if (params.random_init) {
    nn::require(init_rng != nullptr, errc::bad_config, "random mu init needs a seeded generator");
    for (double& v : fwd.mu0.data) v = init_rng->uniform(-0.5, 0.5);
  }

  const nn::Tensor xw1 = matmul(fwd.x, params.w1);
  const std::size_t layers = params.sigma.size();

  const nn::Tensor* mu_prev = &fwd.mu0;
  fwd.rounds.resize(params.iterations);
  for (std::size_t t = 0; t < params.iterations; ++t) {
    auto& round = fwd.rounds[t];
    round.l = nn::Tensor({n, p});
    for (std::size_t v = 0; v < n; ++v) {
      double* lp = &round.l.data[v * p];
      for (std::size_t u : fwd.neighbors[v]) {
        const double* mp = &mu_prev->data[u * p];
        for (std::size_t j = 0; j < p; ++j) lp[j] += mp[j];
      }
    }

    round.inputs.resize(layers);
    round.pre.resize(layers);
    nn::Tensor y = round.l;
    for (std::size_t j = layers; j-- > 1;) {
      round.inputs[j] = y;
      round.pre[j] = matmul(y, params.sigma[j]);
      y = nn::relu(round.pre[j]);
    }
    round.inputs[0] = y;
    round.sig = matmul(y, params.sigma[0]);

    round.mu = nn::Tensor({n, p});
    for (std::size_t i = 0; i < n * p; ++i)
      round.mu.data[i] = std::tanh(xw1.data[i] + round.sig.data[i]);
    mu_prev = &round.mu;
  }

  fwd.mean.assign(p, 0.0);
  const nn::Tensor& mu_final = fwd.rounds.back().mu;
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t j = 0; j < p; ++j) fwd.mean[j] += mu_final.data[v * p + j];
  for (double& v : fwd.mean) v /= static_cast<double>(n);

  fwd.out.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double mv = fwd.mean[j];
    if (mv == 0.0) continue;
    const double* wp = &params.w2.data[j * p];
    for (std::size_t k = 0; k < p; ++k) fwd.out[k] += mv * wp[k];
  }
  return fwd;
}

void s2v_backward(const S2vForward& fwd, const GraphEmbedParams& params,
                  std::span<const double> dout, std::vector<nn::Tensor>& grads) {
  const std::size_t n = fwd.x.shape[0];
  const std::size_t p = params.p();
  const std::size_t layers = params.sigma.size();
  nn::require(grads.size() == params.sigma.size() + 2, errc::shape_mismatch,
              "s2v_backward grads layout");

  nn::Tensor& dw1 = grads.front();
  nn::Tensor& dw2 = grads.back();

  // out = mean * W2
  nn::Tensor mean({1, p});
  std::copy(fwd.mean.begin(), fwd.mean.end(), mean.data.begin());
  nn::Tensor dout_row({1, p});
  std::copy(dout.begin(), dout.end(), dout_row.data.begin());
  accumulate_at_d(mean, dout_row, dw2);
  const nn::Tensor dmean = matmul_bt(dout_row, params.w2);

  nn::Tensor dmu({n, p});
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t j = 0; j < p; ++j) dmu.data[v * p + j] = dmean.data[j] * inv_n;

  for (std::size_t t = fwd.rounds.size(); t-- > 0;) {
    const auto& round = fwd.rounds[t];

    // mu = tanh(x*W1 + sig)
    nn::Tensor dpre({n, p});
    for (std::size_t i = 0; i < n * p; ++i)
      dpre.data[i] = dmu.data[i] * (1.0 - round.mu.data[i] * round.mu.data[i]);

    accumulate_at_d(fwd.x, dpre, dw1);

    // Backward through the sigma chain, outermost layer first.
    nn::Tensor d = dpre;
    accumulate_at_d(round.inputs[0], d, grads[1]);
    d = matmul_bt(d, params.sigma[0]);
    for (std::size_t j = 1; j < layers; ++j) {
      for (std::size_t i = 0; i < d.numel(); ++i)
        if (round.pre[j].data[i] <= 0.0) d.data[i] = 0.0;
      accumulate_at_d(round.inputs[j], d, grads[1 + j]);
      d = matmul_bt(d, params.sigma[j]);
    }

    // l_v = sum of neighbor mu: scatter back through the adjacency.
    if (t > 0) {
      nn::Tensor dmu_prev({n, p});
      for (std::size_t v = 0; v < n; ++v) {
        const double* dl = &d.data[v * p];
        for (std::size_t u : fwd.neighbors[v]) {
          double* tp = &dmu_prev.data[u * p];
          for (std::size_t j = 0; j < p; ++j) tp[j] += dl[j];
        }
      }
      dmu = std::move(dmu_prev);
    }
  }
}

GraphVector structure2vec_embed(const CallGraph& g, const GraphEmbedParams& params,
                                const OpcodeEmbedding& emb, const OpcodeVocab& vocab,
                                Weighting weighting, Rng* init_rng) {
  return s2v_forward(g, params, node_features(g, emb, vocab, weighting), init_rng).out;
}

void GraphClassifier::save(const std::string& params_path, const std::string& head_path) const {
  embed.save(params_path);
  head.save(head_path);
}

GraphClassifier train_graph_classifier(const std::vector<CallGraph>& graphs,
                                       const std::vector<int>& labels,
                                       const OpcodeEmbedding& emb, const OpcodeVocab& vocab,
                                       const GraphTrainConfig& cfg, nn::TrainLog* log) {
  if (graphs.empty()) fail(errc::empty_dataset, "train_graph_classifier needs graphs");
  nn::require(graphs.size() == labels.size(), errc::length_mismatch,
              "graphs/labels length mismatch");
  {
    std::set<int> classes(labels.begin(), labels.end());
    if (classes.size() < 2) fail(errc::degenerate_labels, "graph training needs >= 2 classes");
    for (int y : classes) {
      if (cfg.binary)
        nn::require(y == 1 || y == -1, errc::label_out_of_range, "binary labels must be +-1");
      else
        nn::require(y >= 0 && y < 5, errc::label_out_of_range, "family labels must be 0..4");
    }
  }

  Rng rng(cfg.seed);
  GraphClassifier clf;
  clf.weighting = cfg.embed.weighting;
  clf.embed = GraphEmbedParams::init(emb.dim, cfg.embed, rng);
  clf.head = fuse::MlpHead::make(cfg.embed.p, cfg.head_hidden, cfg.binary ? 1 : 5);
  clf.head.init(rng);

  // Opcode embeddings are frozen, so node features are fixed per graph.
  std::vector<std::vector<std::vector<double>>> features;
  features.reserve(graphs.size());
  for (const auto& g : graphs)
    features.push_back(node_features(g, emb, vocab, cfg.embed.weighting));

  std::vector<nn::Tensor*> params = clf.embed.parameters();
  for (nn::Tensor* t : clf.head.parameters()) params.push_back(t);
  nn::AdamState adam(nn::AdamConfig{cfg.lr});
  adam.attach(params);

  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t hits = 0, batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      std::vector<nn::Tensor> embed_grads;
      for (const nn::Tensor* t : clf.embed.parameters()) embed_grads.emplace_back(t->shape);
      std::vector<nn::Tensor> head_grads;
      for (const nn::Tensor* t : clf.head.parameters()) head_grads.emplace_back(t->shape);

      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t gi = order[k];
        Rng init_rng = Rng(cfg.seed).fork(gi);  // stable per-graph mu0 draw
        const S2vForward fwd = s2v_forward(graphs[gi], clf.embed, features[gi],
                                           clf.embed.random_init ? &init_rng : nullptr);

        nn::Tensor gv({1, clf.embed.p()});
        std::copy(fwd.out.begin(), fwd.out.end(), gv.data.begin());
        fuse::MlpCache cache;
        const nn::Tensor out = mlp_forward(clf.head, gv, &cache);

        nn::Tensor dout_head(out.shape);
        if (cfg.binary) {
          const double y = static_cast<double>(labels[gi]);
          const double margin = 1.0 - y * out[0];
          if (margin > 0.0) {
            loss_sum += margin * inv_batch;
            dout_head[0] = -y * inv_batch;
          }
          if ((labels[gi] == 1) == (out[0] > 0.0)) ++hits;
        } else {
          const auto ce = nn::sparse_ce_loss(out, {labels[gi]});
          loss_sum += ce.loss * inv_batch;
          dout_head = ce.dlogits;
          for (double& v : dout_head.data) v *= inv_batch;
          std::size_t arg = 0;
          for (std::size_t j = 1; j < out.shape[1]; ++j)
            if (out.at2(0, j) > out.at2(0, arg)) arg = j;
          if (static_cast<int>(arg) == labels[gi]) ++hits;
        }

        const auto hg = mlp_backward(clf.head, cache, dout_head);
        for (std::size_t i = 0; i < head_grads.size(); ++i)
          for (std::size_t j = 0; j < head_grads[i].numel(); ++j)
            head_grads[i].data[j] += hg.params[i].data[j];

        s2v_backward(fwd, clf.embed, hg.dx.data, embed_grads);
      }

      std::vector<const nn::Tensor*> gptrs;
      for (const auto& g : embed_grads) gptrs.push_back(&g);
      for (const auto& g : head_grads) gptrs.push_back(&g);
      nn::adam_step(params, gptrs, adam);
      ++batches;
    }

    // NaN guard: training must never drift into non-finite territory.
    for (const nn::Tensor* t : params)
      for (double v : t->data)
        if (!std::isfinite(v)) fail(errc::numeric_error, "non-finite parameter during training");

    if (log)
      log->push_back(nn::EpochStats{
          epoch, loss_sum / static_cast<double>(batches ? batches : 1),
          static_cast<double>(hits) / static_cast<double>(order.size())});
  }
  return clf;
}

int classify_graph(const GraphClassifier& clf, const CallGraph& g, const OpcodeEmbedding& emb,
                   const OpcodeVocab& vocab) {
  Rng init_rng(1);
  const GraphVector gv =
      structure2vec_embed(g, clf.embed, emb, vocab, clf.weighting,
                          clf.embed.random_init ? &init_rng : nullptr);
  if (clf.head.out_dim() == 1) {
    const auto r = fuse::mlp_detect(clf.head, gv);
    return r.verdict == fuse::Verdict::malware ? 1 : -1;
  }
  const auto probs = fuse::mlp_categorize(clf.head, gv);
  std::size_t arg = 0;
  for (std::size_t j = 1; j < probs.size(); ++j)
    if (probs[j] > probs[arg]) arg = j;
  return static_cast<int>(arg);
}

}  // namespace falcon::code
