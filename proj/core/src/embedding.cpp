#include "falcon/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "falcon/checkpoint.hpp"
#include "falcon/error.hpp"
#include "falcon/rng.hpp"
#include "falcon/tensor.hpp"

namespace falcon::code {

void OpcodeEmbedding::save(const std::string& path) const {
  nn::Checkpoint ckpt;
  ckpt.put_scalar("meta.kind", 3.0);  // 3 = opcode embedding
  ckpt.put_scalar("meta.dim", static_cast<double>(dim));
  nn::Tensor matrix({rows(), dim});
  matrix.data = data;
  ckpt.put("embedding", std::move(matrix));
  ckpt.save(path);
}

OpcodeEmbedding OpcodeEmbedding::load(const std::string& path) {
  const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
  if (ckpt.get_scalar("meta.kind") != 3.0)
    fail(errc::schema_error, "checkpoint is not an opcode embedding: " + path);
  OpcodeEmbedding emb;
  emb.dim = static_cast<std::size_t>(ckpt.get_scalar("meta.dim"));
  emb.data = ckpt.get("embedding").data;
  return emb;
}

OpcodeEmbedding train_skipgram(const std::vector<std::vector<int>>& corpus,
                               std::size_t vocab_rows, const SkipgramConfig& cfg) {
  std::uint64_t total_tokens = 0;
  std::vector<double> unigram(vocab_rows, 0.0);
  {
    std::set<int> distinct;
    for (const auto& sentence : corpus) {
      for (int token : sentence) {
        nn::require(token >= 0 && static_cast<std::size_t>(token) < vocab_rows,
                    errc::label_out_of_range, "token index outside vocabulary");
        distinct.insert(token);
        unigram[static_cast<std::size_t>(token)] += 1.0;
        ++total_tokens;
      }
    }
    if (distinct.size() < 2)
      fail(errc::degenerate_corpus, "skip-gram needs at least two distinct tokens");
  }

  // Cumulative unigram^0.75 table for negative draws.
  std::vector<double> cumulative(vocab_rows, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < vocab_rows; ++i) {
    z += std::pow(unigram[i], 0.75);
    cumulative[i] = z;
  }

  Rng rng(cfg.seed);
  OpcodeEmbedding emb;
  emb.dim = cfg.dim;
  emb.data.resize(vocab_rows * cfg.dim);
  // word2vec-style init: small uniform input vectors, zero output vectors.
  for (double& v : emb.data) v = rng.uniform(-0.5, 0.5) / static_cast<double>(cfg.dim);
  std::vector<double> out(vocab_rows * cfg.dim, 0.0);

  const auto draw_negative = [&]() -> std::size_t {
    const double u = rng.uniform() * z;
    return static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
  };

  const std::uint64_t total_steps = static_cast<std::uint64_t>(cfg.epochs) * total_tokens;
  const double lr_floor = cfg.lr * 1e-4;
  std::uint64_t processed = 0;
  std::vector<double> accum(cfg.dim);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& sentence : corpus) {
      for (std::size_t pos = 0; pos < sentence.size(); ++pos) {
        const double progress =
            total_steps ? static_cast<double>(processed) / static_cast<double>(total_steps) : 0.0;
        const double lr = std::max(lr_floor, cfg.lr * (1.0 - progress));
        ++processed;

        const std::size_t center = static_cast<std::size_t>(sentence[pos]);
        const std::size_t reach = 1 + static_cast<std::size_t>(rng.uniform_int(
                                          0, cfg.window > 0 ? cfg.window - 1 : 0));
        double* v_c = &emb.data[center * cfg.dim];

        const std::size_t lo = pos >= reach ? pos - reach : 0;
        const std::size_t hi = std::min(sentence.size() - 1, pos + reach);
        for (std::size_t ctx = lo; ctx <= hi; ++ctx) {
          if (ctx == pos) continue;
          std::fill(accum.begin(), accum.end(), 0.0);
          for (std::size_t k = 0; k <= cfg.negatives; ++k) {
            const std::size_t target =
                k == 0 ? static_cast<std::size_t>(sentence[ctx]) : draw_negative();
            const double label = k == 0 ? 1.0 : 0.0;
            double* u_t = &out[target * cfg.dim];
            double dot = 0.0;
            for (std::size_t i = 0; i < cfg.dim; ++i) dot += v_c[i] * u_t[i];
            const double grad = (1.0 / (1.0 + std::exp(-dot)) - label) * lr;
            for (std::size_t i = 0; i < cfg.dim; ++i) {
              accum[i] += grad * u_t[i];
              u_t[i] -= grad * v_c[i];
            }
          }
          for (std::size_t i = 0; i < cfg.dim; ++i) v_c[i] -= accum[i];
        }
      }
    }
  }
  return emb;
}

std::vector<double> function2vec(const FunctionNode& fn, const OpcodeEmbedding& emb,
                                 const OpcodeVocab& vocab, Weighting weighting) {
  std::vector<double> out(emb.dim, 0.0);
  if (fn.opcodes.empty()) return out;

  const double total = static_cast<double>(vocab.total_count());
  double weight_sum = 0.0;
  for (int op : fn.opcodes) {
    nn::require(op >= 0 && static_cast<std::size_t>(op) < emb.rows(), errc::label_out_of_range,
                "opcode index outside embedding");
    double w = 1.0;
    if (weighting == Weighting::sif) {
      const std::uint64_t count = op == vocab.oov_index()
                                      ? vocab.oov_count
                                      : vocab.counts[static_cast<std::size_t>(op)];
      const double p = total > 0.0 ? static_cast<double>(count) / total : 0.0;
      w = kSifA / (kSifA + p);
    }
    const auto row = emb.row(static_cast<std::size_t>(op));
    for (std::size_t i = 0; i < emb.dim; ++i) out[i] += w * row[i];
    weight_sum += w;
  }
  if (weight_sum > 0.0)
    for (double& v : out) v /= weight_sum;
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  nn::require(a.size() == b.size(), errc::dim_mismatch, "cosine of unequal vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace falcon::code
