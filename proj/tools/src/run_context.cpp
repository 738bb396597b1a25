#include "run_context.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "falcon/bytes.hpp"
#include "falcon/error.hpp"

namespace falcon::cli {

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

RunContext::RunContext(std::string command, std::uint64_t seed)
    : command_(std::move(command)), seed_(seed), start_ms_(now_ms()) {
  config("seed", static_cast<std::uint64_t>(seed));
}

void RunContext::config(const std::string& key, const std::string& value) {
  config_.emplace_back(key, value);
}

void RunContext::config(const std::string& key, std::uint64_t value) {
  config(key, std::to_string(value));
}

void RunContext::config(const std::string& key, double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  config(key, std::string(buf));
}

void RunContext::config(const std::string& key, bool value) {
  config(key, std::string(value ? "true" : "false"));
}

void RunContext::input(const std::string& path) { inputs_.push_back(path); }

void RunContext::output(const std::string& path) { outputs_.push_back(path); }

std::uint64_t RunContext::config_hash() const {
  std::string canonical = command_ + "\n";
  for (const auto& [k, v] : config_) canonical += k + "=" + v + "\n";
  return fnv1a64(canonical);
}

void RunContext::guard(const std::string& manifest_path) const {
  if (force_) return;
  std::ifstream in(manifest_path);
  if (!in) return;
  try {
    nlohmann::json doc = nlohmann::json::parse(in);
    const std::string previous = doc.value("config_hash", std::string{});
    if (!previous.empty() && previous != to_hex(config_hash()))
      fail(errc::bad_config,
           "outputs at " + manifest_path + " belong to a different configuration (" + previous +
               "); pass --force to overwrite");
  } catch (const nlohmann::json::exception&) {
    // unreadable manifest: treat as absent
  }
}

void RunContext::finish(const std::string& manifest_path) {
  nlohmann::json doc;
  doc["schema"] = 1;
  doc["command"] = command_;
  doc["config_hash"] = to_hex(config_hash());
  doc["seed"] = seed_;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : config_) cfg[k] = v;
  doc["config"] = cfg;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& path : inputs_)
    inputs.push_back({{"path", path}, {"fnv64", to_hex(file_digest(path))}});
  doc["inputs"] = inputs;
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& path : outputs_)
    outputs.push_back({{"path", path}, {"fnv64", to_hex(file_digest(path))}});
  doc["outputs"] = outputs;
  doc["duration_ms"] = now_ms() - start_ms_;
  write_file_atomic(manifest_path, doc.dump(2) + "\n");
}

std::string manifest_for_dir(const std::string& dir) {
  return (std::filesystem::path(dir) / "manifest.json").string();
}

std::string manifest_for_file(const std::string& file) { return file + ".manifest.json"; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(errc::io_error, "cannot create directory " + dir + ": " + ec.message());
}

std::vector<std::string> list_files(const std::string& dir, const std::string& extension) {
  if (!std::filesystem::is_directory(dir)) fail(errc::io_error, "not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (!extension.empty() && entry.path().extension() != extension) continue;
    out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace falcon::cli
