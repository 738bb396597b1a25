#pragma once

#include <CLI11.hpp>

#include <cstdint>

namespace falcon::cli {

struct Common {
  std::uint64_t seed = 1;
  bool force = false;
};

void add_common(CLI::App* cmd, Common& common);

void register_capture_commands(CLI::App& app);  // split, imageize, build-corpus
void register_net_commands(CLI::App& app);      // train-cnn, embed-net, train-bilstm
void register_code_commands(CLI::App& app);     // train-opcode2vec, embed-code
void register_fusion_commands(CLI::App& app);   // train-fusion, predict, evaluate
void register_synth_command(CLI::App& app);     // synth

}  // namespace falcon::cli
