#include "falcon/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>

#include "falcon/checkpoint.hpp"
#include "falcon/error.hpp"
#include "falcon/optim.hpp"

namespace falcon::net {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// z = x*U + h*W + b for one gate, row-vector convention.
void gate_preactivation(const nn::Tensor& u, const nn::Tensor& w, const nn::Tensor& b,
                        std::span<const double> x, std::span<const double> h,
                        std::vector<double>& z) {
  const std::size_t in = u.shape[0], hid = u.shape[1];
  z.assign(hid, 0.0);
  for (std::size_t k = 0; k < hid; ++k) z[k] = b[k];
  for (std::size_t i = 0; i < in; ++i) {
    const double xv = x[i];
    if (xv == 0.0) continue;
    const double* up = &u.data[i * hid];
    for (std::size_t k = 0; k < hid; ++k) z[k] += xv * up[k];
  }
  for (std::size_t j = 0; j < hid; ++j) {
    const double hv = h[j];
    if (hv == 0.0) continue;
    const double* wp = &w.data[j * hid];
    for (std::size_t k = 0; k < hid; ++k) z[k] += hv * wp[k];
  }
}

}  // namespace

LstmCellParams LstmCellParams::make(std::size_t input_dim, std::size_t hidden) {
  LstmCellParams p;
  for (int g = 0; g < 4; ++g) {
    p.U[g] = nn::Tensor({input_dim, hidden});
    p.W[g] = nn::Tensor({hidden, hidden});
    p.b[g] = nn::Tensor({hidden});
  }
  return p;
}

void LstmCellParams::init(Rng& rng) {
  for (int g = 0; g < 4; ++g) {
    const double lu = std::sqrt(6.0 / static_cast<double>(U[g].shape[0] + U[g].shape[1]));
    for (double& v : U[g].data) v = rng.uniform(-lu, lu);
    const double lw = std::sqrt(6.0 / static_cast<double>(W[g].shape[0] + W[g].shape[1]));
    for (double& v : W[g].data) v = rng.uniform(-lw, lw);
    b[g].fill(g == kGateF ? 1.0 : 0.0);
  }
}

void LstmCellParams::collect(std::vector<nn::Tensor*>& out) {
  for (int g = 0; g < 4; ++g) out.push_back(&U[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&W[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&b[g]);
}

void LstmCellParams::collect(std::vector<const nn::Tensor*>& out) const {
  for (int g = 0; g < 4; ++g) out.push_back(&U[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&W[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&b[g]);
}

void lstm_step(const LstmCellParams& p, std::span<const double> x,
               std::span<const double> h_prev, std::span<const double> c_prev, bool paper_cell,
               std::vector<double>& h_out, std::vector<double>& c_out, LstmStepCache* cache) {
  const std::size_t hid = p.hidden();
  nn::require(x.size() == p.input_dim(), errc::shape_mismatch, "lstm_step input width");
  nn::require(h_prev.size() == hid && c_prev.size() == hid, errc::shape_mismatch,
              "lstm_step state width");

  std::vector<double> zi, zf, zo, zg;
  gate_preactivation(p.U[kGateI], p.W[kGateI], p.b[kGateI], x, h_prev, zi);
  gate_preactivation(p.U[kGateF], p.W[kGateF], p.b[kGateF], x, h_prev, zf);
  gate_preactivation(p.U[kGateO], p.W[kGateO], p.b[kGateO], x, h_prev, zo);
  gate_preactivation(p.U[kGateG], p.W[kGateG], p.b[kGateG], x, h_prev, zg);

  std::vector<double> i(hid), f(hid), o(hid), g(hid), s(hid);
  for (std::size_t k = 0; k < hid; ++k) {
    i[k] = sigmoid(zi[k]);
    f[k] = sigmoid(zf[k]);
    o[k] = sigmoid(zo[k]);
    g[k] = std::tanh(zg[k]);
    s[k] = f[k] * c_prev[k] + i[k] * g[k];
  }

  c_out.resize(hid);
  h_out.resize(hid);
  std::vector<double> tanh_c(hid);
  for (std::size_t k = 0; k < hid; ++k) {
    c_out[k] = paper_cell ? sigmoid(s[k]) : s[k];
    tanh_c[k] = std::tanh(c_out[k]);
    h_out[k] = tanh_c[k] * o[k];
  }

  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev.assign(h_prev.begin(), h_prev.end());
    cache->c_prev.assign(c_prev.begin(), c_prev.end());
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->c = c_out;
    cache->tanh_c = std::move(tanh_c);
    cache->s = std::move(s);
  }
}

LstmCellGrads::LstmCellGrads(const LstmCellParams& p) {
  for (int g = 0; g < 4; ++g) {
    dU[g] = nn::Tensor(p.U[g].shape);
    dW[g] = nn::Tensor(p.W[g].shape);
    db[g] = nn::Tensor(p.b[g].shape);
  }
}

void LstmCellGrads::collect(std::vector<const nn::Tensor*>& out) const {
  for (int g = 0; g < 4; ++g) out.push_back(&dU[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&dW[g]);
  for (int g = 0; g < 4; ++g) out.push_back(&db[g]);
}

void lstm_step_backward(const LstmCellParams& p, const LstmStepCache& cache, bool paper_cell,
                        std::span<const double> dh, std::span<const double> dc,
                        LstmCellGrads& grads, std::vector<double>& dh_prev,
                        std::vector<double>& dc_prev) {
  const std::size_t hid = p.hidden();
  const std::size_t in = p.input_dim();

  std::vector<double> dzi(hid), dzf(hid), dzo(hid), dzg(hid);
  dh_prev.assign(hid, 0.0);
  dc_prev.assign(hid, 0.0);

  for (std::size_t k = 0; k < hid; ++k) {
    const double do_k = dh[k] * cache.tanh_c[k];
    double dc_k = dc[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
    if (paper_cell) {
      // c = sigmoid(s): chain through the extra squashing.
      dc_k *= cache.c[k] * (1.0 - cache.c[k]);
    }
    const double di_k = dc_k * cache.g[k];
    const double df_k = dc_k * cache.c_prev[k];
    const double dg_k = dc_k * cache.i[k];
    dc_prev[k] = dc_k * cache.f[k];

    dzi[k] = di_k * cache.i[k] * (1.0 - cache.i[k]);
    dzf[k] = df_k * cache.f[k] * (1.0 - cache.f[k]);
    dzo[k] = do_k * cache.o[k] * (1.0 - cache.o[k]);
    dzg[k] = dg_k * (1.0 - cache.g[k] * cache.g[k]);
  }

  const std::array<const std::vector<double>*, 4> dz = {&dzi, &dzf, &dzo, &dzg};
  for (int g = 0; g < 4; ++g) {
    const std::vector<double>& d = *dz[g];
    for (std::size_t k = 0; k < hid; ++k) grads.db[g].data[k] += d[k];
    for (std::size_t i = 0; i < in; ++i) {
      const double xv = cache.x[i];
      if (xv != 0.0) {
        double* dup = &grads.dU[g].data[i * hid];
        for (std::size_t k = 0; k < hid; ++k) dup[k] += xv * d[k];
      }
    }
    for (std::size_t j = 0; j < hid; ++j) {
      const double hv = cache.h_prev[j];
      double* dwp = &grads.dW[g].data[j * hid];
      const double* wp = &p.W[g].data[j * hid];
      double acc = 0.0;
      for (std::size_t k = 0; k < hid; ++k) {
        if (hv != 0.0) dwp[k] += hv * d[k];
        acc += wp[k] * d[k];
      }
      dh_prev[j] += acc;
    }
  }
}

BiLstmModel BiLstmModel::init(const BiLstmConfig& cfg, Rng& rng) {
  BiLstmModel m;
  m.hidden = cfg.hidden;
  m.paper_cell = cfg.paper_cell;
  m.sequence_cap = cfg.sequence_cap;
  m.forward_cell = LstmCellParams::make(cfg.input_dim, cfg.hidden);
  m.backward_cell = LstmCellParams::make(cfg.input_dim, cfg.hidden);
  m.head = nn::DenseParams::make(2 * cfg.hidden, img::kNumClasses);
  m.forward_cell.init(rng);
  m.backward_cell.init(rng);
  m.head.init_glorot_uniform(rng);
  return m;
}

std::vector<nn::Tensor*> BiLstmModel::parameters() {
  std::vector<nn::Tensor*> out;
  forward_cell.collect(out);
  backward_cell.collect(out);
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

std::vector<const nn::Tensor*> BiLstmModel::parameters() const {
  std::vector<const nn::Tensor*> out;
  forward_cell.collect(out);
  backward_cell.collect(out);
  out.push_back(&head.weight);
  out.push_back(&head.bias);
  return out;
}

namespace {

const char* gate_names[4] = {"i", "f", "o", "g"};

void put_cell(nn::Checkpoint& ckpt, const std::string& prefix, const LstmCellParams& cell) {
  for (int g = 0; g < 4; ++g) {
    ckpt.put(prefix + ".U." + gate_names[g], cell.U[g]);
    ckpt.put(prefix + ".W." + gate_names[g], cell.W[g]);
    ckpt.put(prefix + ".b." + gate_names[g], cell.b[g]);
  }
}

void get_cell(const nn::Checkpoint& ckpt, const std::string& prefix, LstmCellParams& cell) {
  for (int g = 0; g < 4; ++g) {
    cell.U[g] = ckpt.get(prefix + ".U." + gate_names[g]);
    cell.W[g] = ckpt.get(prefix + ".W." + gate_names[g]);
    cell.b[g] = ckpt.get(prefix + ".b." + gate_names[g]);
  }
}

}  // namespace

void BiLstmModel::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.put_scalar("meta.kind", 2.0);  // 2 = bilstm
  ckpt.put_scalar("meta.hidden", static_cast<double>(hidden));
  ckpt.put_scalar("meta.paper_cell", paper_cell ? 1.0 : 0.0);
  ckpt.put_scalar("meta.sequence_cap", static_cast<double>(sequence_cap));
  put_cell(ckpt, "fwd", forward_cell);
  put_cell(ckpt, "bwd", backward_cell);
  ckpt.put("head.weight", head.weight);
  ckpt.put("head.bias", head.bias);
  ckpt.save(path);
}

BiLstmModel BiLstmModel::load(const std::string& path) {
  const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
  if (ckpt.get_scalar("meta.kind") != 2.0)
    fail(errc::schema_error, "checkpoint is not a bilstm model: " + path);
  BiLstmModel m;
  m.hidden = static_cast<std::size_t>(ckpt.get_scalar("meta.hidden"));
  m.paper_cell = ckpt.get_scalar("meta.paper_cell") == 1.0;
  m.sequence_cap = static_cast<std::size_t>(ckpt.get_scalar("meta.sequence_cap"));
  get_cell(ckpt, "fwd", m.forward_cell);
  get_cell(ckpt, "bwd", m.backward_cell);
  m.head.weight = ckpt.get("head.weight");
  m.head.bias = ckpt.get("head.bias");
  return m;
}

namespace {

// Front-truncates to the cap so pathological captures stay bounded.
std::span<const FlowVector> capped(const CaptureSequence& seq, std::size_t cap) {
  const std::size_t n = seq.vectors.size();
  if (cap == 0 || n <= cap) return {seq.vectors.data(), n};
  std::cerr << "warning: capture " << seq.source_name << " truncated from " << n << " to "
            << cap << " flows\n";
  return {seq.vectors.data() + (n - cap), cap};
}

struct BiLstmRun {
  std::vector<LstmStepCache> fwd_caches, bwd_caches;
  std::vector<double> feature;  // 2H
};

void run_directions(const BiLstmModel& m, std::span<const FlowVector> vectors, bool with_caches,
                    BiLstmRun& run) {
  const std::size_t hid = m.hidden;
  const std::size_t steps = vectors.size();
  std::vector<double> h(hid, 0.0), c(hid, 0.0), h_next, c_next;

  if (with_caches) run.fwd_caches.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    lstm_step(m.forward_cell, vectors[t], h, c, m.paper_cell, h_next, c_next,
              with_caches ? &run.fwd_caches[t] : nullptr);
    h.swap(h_next);
    c.swap(c_next);
  }
  run.feature.assign(2 * hid, 0.0);
  std::copy(h.begin(), h.end(), run.feature.begin());

  h.assign(hid, 0.0);
  c.assign(hid, 0.0);
  if (with_caches) run.bwd_caches.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const FlowVector& x = vectors[steps - 1 - t];
    lstm_step(m.backward_cell, x, h, c, m.paper_cell, h_next, c_next,
              with_caches ? &run.bwd_caches[t] : nullptr);
    h.swap(h_next);
    c.swap(c_next);
  }
  std::copy(h.begin(), h.end(), run.feature.begin() + static_cast<std::ptrdiff_t>(hid));
}

// BPTT over one direction; only the final hidden state carries an external
// gradient, interior steps receive it through the recurrence.
void bptt_direction(const LstmCellParams& cell, const std::vector<LstmStepCache>& caches,
                    bool paper_cell, std::span<const double> dh_final, std::size_t truncate,
                    LstmCellGrads& grads) {
  const std::size_t hid = cell.hidden();
  std::vector<double> dh(dh_final.begin(), dh_final.end());
  std::vector<double> dc(hid, 0.0);
  std::vector<double> dh_prev, dc_prev;
  const std::size_t steps = caches.size();
  const std::size_t stop = (truncate > 0 && steps > truncate) ? steps - truncate : 0;
  for (std::size_t t = steps; t-- > stop;) {
    lstm_step_backward(cell, caches[t], paper_cell, dh, dc, grads, dh_prev, dc_prev);
    dh.swap(dh_prev);
    dc.swap(dc_prev);
  }
}

}  // namespace

NetworkFeature encode_capture(const BiLstmModel& m, const CaptureSequence& seq) {
  if (seq.vectors.empty()) fail(errc::empty_sequence, "encode_capture needs a non-empty sequence");
  for (const auto& v : seq.vectors)
    nn::require(v.size() == m.forward_cell.input_dim(), errc::shape_mismatch,
                "capture sequence vector width");
  BiLstmRun run;
  run_directions(m, capped(seq, m.sequence_cap), false, run);
  return run.feature;
}

double bilstm_example_grads(const BiLstmModel& m, const CaptureSequence& seq, double scale,
                            std::size_t bptt_truncate, std::vector<nn::Tensor>& grads,
                            bool* correct) {
  if (seq.vectors.empty()) fail(errc::empty_sequence, "cannot train on an empty sequence");
  const std::size_t hid = m.hidden;
  nn::require(grads.size() == 26, errc::shape_mismatch, "bilstm grads layout");

  BiLstmRun run;
  run_directions(m, capped(seq, m.sequence_cap), true, run);

  nn::Tensor feat({1, 2 * hid});
  feat.data = run.feature;
  const nn::Tensor logits = nn::dense_forward(feat, m.head);
  const auto ce = nn::sparse_ce_loss(logits, {seq.label});

  if (correct) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < logits.shape[1]; ++j)
      if (logits.at2(0, j) > logits.at2(0, arg)) arg = j;
    *correct = static_cast<int>(arg) == seq.label;
  }

  nn::Tensor dlogits = ce.dlogits;
  for (double& v : dlogits.data) v *= scale;
  auto g_head = nn::dense_backward(feat, m.head, dlogits);
  for (std::size_t i = 0; i < grads[24].numel(); ++i) grads[24].data[i] += g_head.dweight.data[i];
  for (std::size_t i = 0; i < grads[25].numel(); ++i) grads[25].data[i] += g_head.dbias.data[i];

  LstmCellGrads fwd_grads(m.forward_cell), bwd_grads(m.backward_cell);
  bptt_direction(m.forward_cell, run.fwd_caches, m.paper_cell, {g_head.dx.data.data(), hid},
                 bptt_truncate, fwd_grads);
  bptt_direction(m.backward_cell, run.bwd_caches, m.paper_cell,
                 {g_head.dx.data.data() + hid, hid}, bptt_truncate, bwd_grads);

  std::vector<const nn::Tensor*> cell_grads;
  fwd_grads.collect(cell_grads);
  bwd_grads.collect(cell_grads);
  for (std::size_t i = 0; i < cell_grads.size(); ++i)
    for (std::size_t j = 0; j < cell_grads[i]->numel(); ++j)
      grads[i].data[j] += cell_grads[i]->data[j];

  return ce.loss;
}

int classify_capture(const BiLstmModel& m, const CaptureSequence& seq) {
  const NetworkFeature feature = encode_capture(m, seq);
  nn::Tensor x({1, feature.size()});
  x.data = feature;
  const nn::Tensor logits = nn::dense_forward(x, m.head);
  std::size_t arg = 0;
  for (std::size_t k = 1; k < static_cast<std::size_t>(img::kNumClasses); ++k)
    if (logits.at2(0, k) > logits.at2(0, arg)) arg = k;
  return static_cast<int>(arg);
}

BiLstmModel train_bilstm(const std::vector<CaptureSequence>& sequences, const BiLstmConfig& cfg,
                         TrainLog* log) {
  if (sequences.empty()) fail(errc::empty_dataset, "train_bilstm needs sequences");
  {
    std::set<int> classes;
    for (const auto& s : sequences) classes.insert(s.label);
    if (classes.size() < 2)
      fail(errc::degenerate_labels, "train_bilstm needs at least two classes");
  }
  for (const auto& s : sequences)
    if (s.vectors.empty()) fail(errc::empty_sequence, "capture " + s.source_name + " is empty");

  Rng rng(cfg.seed);
  BiLstmModel model = BiLstmModel::init(cfg, rng);

  auto params = model.parameters();
  nn::AdamState adam(nn::AdamConfig{cfg.lr});
  adam.attach(params);

  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t batch = std::max<std::size_t>(1, cfg.batch);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      std::vector<nn::Tensor> grads;
      for (const nn::Tensor* t : std::as_const(model).parameters()) grads.emplace_back(t->shape);

      for (std::size_t k = begin; k < end; ++k) {
        bool correct = false;
        loss_sum += bilstm_example_grads(model, sequences[order[k]], inv_batch,
                                         cfg.bptt_truncate, grads, &correct);
        if (correct) ++hits;
      }

      std::vector<const nn::Tensor*> gptrs;
      for (const auto& g : grads) gptrs.push_back(&g);
      nn::adam_step(params, gptrs, adam);
    }
    if (log)
      log->push_back(EpochStats{epoch, loss_sum / static_cast<double>(order.size()),
                                static_cast<double>(hits) / static_cast<double>(order.size())});
  }
  return model;
}

}  // namespace falcon::net
