#include "falcon/train_log.hpp"

#include <fstream>

#include "falcon/error.hpp"

namespace falcon::nn {

void write_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot create " + path);
  out << "epoch,loss,accuracy\n";
  for (const auto& row : log)
    out << row.epoch << ',' << row.loss << ',' << row.accuracy << '\n';
}

}  // namespace falcon::nn
