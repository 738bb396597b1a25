#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "falcon/fcg.hpp"

namespace falcon::code {

// (|V|+1) x d matrix, one row per vocabulary entry plus the OOV row.
struct OpcodeEmbedding {
  std::size_t dim = 0;
  std::vector<double> data;

  std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }

  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }

  void save(const std::string& path) const;
  static OpcodeEmbedding load(const std::string& path);
};

struct SkipgramConfig {
  std::size_t dim = 64;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;  // linearly decayed to lr * 1e-4
  std::uint64_t seed = 1;
};

// Skip-gram with negative sampling over opcode-index sequences. Negatives are
// drawn from the unigram distribution raised to 0.75; the input-side matrix
// is returned.
OpcodeEmbedding train_skipgram(const std::vector<std::vector<int>>& corpus,
                               std::size_t vocab_rows, const SkipgramConfig& cfg);

enum class Weighting { uniform, sif };

inline constexpr double kSifA = 1e-3;

// Weighted mean of the function's opcode embeddings; SIF weights are
// a/(a + p(op)) from the vocabulary frequencies. Empty functions embed to the
// zero vector.
std::vector<double> function2vec(const FunctionNode& fn, const OpcodeEmbedding& emb,
                                 const OpcodeVocab& vocab, Weighting weighting);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace falcon::code
