#pragma once

#include <string>
#include <utility>
#include <vector>

#include "falcon/tensor.hpp"

namespace falcon::nn {

// Versioned binary container for model parameters.
//
// Layout (all integers little-endian):
//   bytes 0..7   magic "FLCNCKPT"
//   u32          version (currently 1)
//   u32          entry count E
//   E manifest entries: u16 name length, name bytes, u8 ndim, ndim x u64 dims
//   E data blocks, in manifest order: numel x f64 (IEEE-754 bits, LE)
//
// Round trips are bit-exact; scalars are stored as shape-[1] tensors.
class Checkpoint {
 public:
  void put(const std::string& name, Tensor tensor);
  void put_scalar(const std::string& name, double value);

  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;  // errc::schema_error if absent
  double get_scalar(const std::string& name) const;

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace falcon::nn
