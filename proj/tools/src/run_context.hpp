#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace falcon::cli {

// Per-invocation bookkeeping: canonical config serialization (hashed into the
// run identity), input digests, produced artifacts, timing. Every subcommand
// writes one manifest; a pre-existing manifest with a different config hash
// blocks the run unless --force is given, so distinct configurations never
// silently overwrite each other's artifacts.
class RunContext {
 public:
  RunContext(std::string command, std::uint64_t seed);

  void set_force(bool force) { force_ = force; }
  std::uint64_t seed() const { return seed_; }

  // Configuration entries, added in a fixed order per subcommand.
  void config(const std::string& key, const std::string& value);
  void config(const std::string& key, std::uint64_t value);
  void config(const std::string& key, double value);
  void config(const std::string& key, bool value);

  // Input files (digested) and output artifacts (digested at finish).
  void input(const std::string& path);
  void output(const std::string& path);

  std::uint64_t config_hash() const;

  // Overwrite guard; call once the config is complete, before producing
  // outputs. `manifest_path` is where finish() will write.
  void guard(const std::string& manifest_path) const;

  // Digest outputs and atomically write the manifest.
  void finish(const std::string& manifest_path);

 private:
  std::string command_;
  std::uint64_t seed_;
  bool force_ = false;
  std::vector<std::pair<std::string, std::string>> config_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::int64_t start_ms_;
};

// Directory-output commands keep their manifest inside the directory; file
// outputs put it next to the primary artifact.
std::string manifest_for_dir(const std::string& dir);
std::string manifest_for_file(const std::string& file);

void ensure_dir(const std::string& dir);

std::vector<std::string> list_files(const std::string& dir, const std::string& extension);

}  // namespace falcon::cli
