#pragma once

#include <string>
#include <vector>

namespace falcon::nn {

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

using TrainLog = std::vector<EpochStats>;

// CSV: epoch,loss,accuracy
void write_train_log(const TrainLog& log, const std::string& path);

}  // namespace falcon::nn
