#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "falcon/embedding.hpp"
#include "falcon/mlp_head.hpp"
#include "falcon/tensor.hpp"
#include "falcon/train_log.hpp"

namespace falcon::code {

struct GraphEmbedConfig {
  std::size_t p = 64;             // per-node embedding width
  std::size_t sigma_layers = 2;   // depth of the aggregation network
  std::size_t iterations = 4;     // synchronous message-passing rounds T
  bool random_init = false;       // seeded random mu^0 instead of zero
  bool directed = false;          // restrict messages to out-neighbors
  Weighting weighting = Weighting::uniform;
};

// Row-vector convention throughout: mu (1xp), node feature x (1xd),
// mu = tanh(x*W1 + sigma(sum of neighbor mu)), graph vector = mean(mu)*W2.
struct GraphEmbedParams {
  nn::Tensor w1;                  // [d,p]
  std::vector<nn::Tensor> sigma;  // sigma[0] applied last, ReLU between layers
  nn::Tensor w2;                  // [p,p]
  std::size_t iterations = 4;
  bool random_init = false;
  bool directed = false;

  static GraphEmbedParams init(std::size_t feature_dim, const GraphEmbedConfig& cfg, Rng& rng);

  std::size_t p() const { return w1.shape[1]; }
  std::size_t feature_dim() const { return w1.shape[0]; }

  std::vector<nn::Tensor*> parameters();
  std::vector<const nn::Tensor*> parameters() const;

  void save(const std::string& path) const;
  static GraphEmbedParams load(const std::string& path);
};

using GraphVector = std::vector<double>;

// Frozen per-node features from the pretrained opcode embeddings.
std::vector<std::vector<double>> node_features(const CallGraph& g, const OpcodeEmbedding& emb,
                                               const OpcodeVocab& vocab, Weighting weighting);

// Cached unrolled forward pass, reusable for gradient computation.
struct S2vForward {
  std::vector<std::vector<std::size_t>> neighbors;
  nn::Tensor x;    // [n,d]
  nn::Tensor mu0;  // [n,p]
  struct Round {
    nn::Tensor l;                    // [n,p] neighbor sums
    std::vector<nn::Tensor> inputs;  // input fed into each sigma layer, by layer index
    std::vector<nn::Tensor> pre;     // pre-ReLU activations for layers >= 1
    nn::Tensor sig;                  // sigma chain output
    nn::Tensor mu;                   // [n,p]
  };
  std::vector<Round> rounds;
  std::vector<double> mean;  // [p]
  GraphVector out;           // [p]
};

S2vForward s2v_forward(const CallGraph& g, const GraphEmbedParams& params,
                       const std::vector<std::vector<double>>& features,
                       Rng* init_rng = nullptr);

// Accumulates d(out)/d(params) into `grads` (parameters() order).
void s2v_backward(const S2vForward& fwd, const GraphEmbedParams& params,
                  std::span<const double> dout, std::vector<nn::Tensor>& grads);

// Whole-graph embedding per the unrolled rounds with mean aggregation and the
// final projection. init_rng is consulted only with random_init.
GraphVector structure2vec_embed(const CallGraph& g, const GraphEmbedParams& params,
                                const OpcodeEmbedding& emb, const OpcodeVocab& vocab,
                                Weighting weighting, Rng* init_rng = nullptr);

struct GraphTrainConfig {
  GraphEmbedConfig embed;
  std::size_t head_hidden = 64;
  bool binary = true;  // +-1 hinge head; false = 5-way softmax head
  double lr = 0.001;
  std::size_t epochs = 50;
  std::size_t batch = 8;
  std::uint64_t seed = 1;
};

struct GraphClassifier {
  GraphEmbedParams embed;
  fuse::MlpHead head;
  Weighting weighting = Weighting::uniform;

  void save(const std::string& params_path, const std::string& head_path) const;
};

// End-to-end supervised training: gradients flow from the head loss through
// W2, the unrolled rounds, the sigma network and W1; opcode embeddings stay
// frozen. Binary labels are +-1, categorical labels 0..4.
GraphClassifier train_graph_classifier(const std::vector<CallGraph>& graphs,
                                       const std::vector<int>& labels,
                                       const OpcodeEmbedding& emb, const OpcodeVocab& vocab,
                                       const GraphTrainConfig& cfg, nn::TrainLog* log = nullptr);

// Returns +-1 for binary heads, 0..4 otherwise.
int classify_graph(const GraphClassifier& clf, const CallGraph& g, const OpcodeEmbedding& emb,
                   const OpcodeVocab& vocab);

}  // namespace falcon::code
