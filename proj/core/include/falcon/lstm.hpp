#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "falcon/cnn.hpp"
#include "falcon/layers.hpp"

namespace falcon::net {

// Gate order used throughout: input, forget, output, candidate.
enum GateIndex { kGateI = 0, kGateF = 1, kGateO = 2, kGateG = 3 };

struct LstmCellParams {
  std::array<nn::Tensor, 4> U;  // input weights, [in,H]
  std::array<nn::Tensor, 4> W;  // recurrent weights, [H,H]
  std::array<nn::Tensor, 4> b;  // [H]

  static LstmCellParams make(std::size_t input_dim, std::size_t hidden);
  // Glorot-uniform weights; forget-gate bias starts at +1.
  void init(Rng& rng);

  std::size_t hidden() const { return b[0].numel(); }
  std::size_t input_dim() const { return U[0].shape[0]; }

  void collect(std::vector<nn::Tensor*>& out);
  void collect(std::vector<const nn::Tensor*>& out) const;
};

struct LstmStepCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, o, g;  // post-activation gate values
  std::vector<double> c, tanh_c;
  std::vector<double> s;  // cell preactivation, kept only for the paper-cell variant
};

// One cell step. With paper_cell the cell update is wrapped in an extra
// sigmoid, C_t = sigmoid(f*C_prev + i*candidate); the standard form omits it.
void lstm_step(const LstmCellParams& p, std::span<const double> x,
               std::span<const double> h_prev, std::span<const double> c_prev, bool paper_cell,
               std::vector<double>& h_out, std::vector<double>& c_out,
               LstmStepCache* cache = nullptr);

struct LstmCellGrads {
  std::array<nn::Tensor, 4> dU, dW, db;

  explicit LstmCellGrads(const LstmCellParams& p);
  void collect(std::vector<const nn::Tensor*>& out) const;
};

// Accumulates parameter gradients for one step; returns gradients for the
// previous hidden/cell state through the output arguments.
void lstm_step_backward(const LstmCellParams& p, const LstmStepCache& cache, bool paper_cell,
                        std::span<const double> dh, std::span<const double> dc,
                        LstmCellGrads& grads, std::vector<double>& dh_prev,
                        std::vector<double>& dc_prev);

struct CaptureSequence {
  std::string source_name;
  std::vector<FlowVector> vectors;  // flow order = first-packet time
  int label = 0;
};

struct BiLstmConfig {
  std::size_t input_dim = kFlowVectorDim;
  std::size_t hidden = 64;
  bool paper_cell = false;
  double lr = 0.001;
  std::size_t epochs = 30;
  std::size_t batch = 8;
  std::size_t bptt_truncate = 0;  // 0 = full backpropagation through time
  std::size_t sequence_cap = 2000;
  std::uint64_t seed = 1;
};

struct BiLstmModel {
  std::size_t hidden = 0;
  bool paper_cell = false;
  std::size_t sequence_cap = 2000;
  LstmCellParams forward_cell;
  LstmCellParams backward_cell;
  nn::DenseParams head;  // 2H -> 5

  static BiLstmModel init(const BiLstmConfig& cfg, Rng& rng);

  std::vector<nn::Tensor*> parameters();
  std::vector<const nn::Tensor*> parameters() const;

  void save(const std::string& path) const;
  static BiLstmModel load(const std::string& path);
};

using NetworkFeature = std::vector<double>;  // length 2H

// Forward cell consumes the sequence in time order, backward cell reversed,
// both from zero state; the two final hidden states are concatenated.
NetworkFeature encode_capture(const BiLstmModel& m, const CaptureSequence& seq);

// Cross-entropy loss of one sequence against its label plus parameter
// gradients scaled by `scale`, accumulated into the output tensors (which
// must follow parameters() order). Returns the loss; used by the trainer and
// by gradient-check harnesses.
double bilstm_example_grads(const BiLstmModel& m, const CaptureSequence& seq, double scale,
                            std::size_t bptt_truncate, std::vector<nn::Tensor>& grads,
                            bool* correct = nullptr);

// Head prediction over the encoded capture.
int classify_capture(const BiLstmModel& m, const CaptureSequence& seq);

BiLstmModel train_bilstm(const std::vector<CaptureSequence>& sequences, const BiLstmConfig& cfg,
                         TrainLog* log = nullptr);

}  // namespace falcon::net
