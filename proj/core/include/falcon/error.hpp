#pragma once

#include <stdexcept>
#include <string>

namespace falcon {

// Stable error taxonomy shared by every module and mapped to CLI exit codes.
enum class errc {
  bad_magic,
  truncated,
  bad_length,
  dim_mismatch,
  count_mismatch,
  shape_mismatch,
  label_out_of_range,
  empty_corpus,
  empty_sequence,
  empty_dataset,
  empty_graph,
  schema_error,
  degenerate_corpus,
  degenerate_labels,
  unknown_family,
  length_mismatch,
  empty_input,
  bad_hyperparameters,
  no_flows,
  io_error,
  bad_config,
  numeric_error,
};

const char* errc_name(errc c);

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw error(code, msg); }

}  // namespace falcon
