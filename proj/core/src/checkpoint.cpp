#include "falcon/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "falcon/bytes.hpp"
#include "falcon/error.hpp"

namespace falcon::nn {

namespace {
constexpr char kMagic[8] = {'F', 'L', 'C', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void Checkpoint::put(const std::string& name, Tensor tensor) {
  for (auto& [n, t] : entries_) {
    if (n == name) {
      t = std::move(tensor);
      return;
    }
  }
  entries_.emplace_back(name, std::move(tensor));
}

void Checkpoint::put_scalar(const std::string& name, double value) {
  Tensor t({1});
  t[0] = value;
  put(name, std::move(t));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return true;
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  fail(errc::schema_error, "checkpoint entry '" + name + "' missing");
}

double Checkpoint::get_scalar(const std::string& name) const {
  const Tensor& t = get(name);
  if (t.numel() != 1) fail(errc::schema_error, "checkpoint entry '" + name + "' is not scalar");
  return t[0];
}

void Checkpoint::save(const std::string& path) const {
  Bytes out;
  out.insert(out.end(), kMagic, kMagic + 8);
  append_le32(out, kVersion);
  append_le32(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, tensor] : entries_) {
    if (name.size() > 0xffff) fail(errc::schema_error, "checkpoint entry name too long");
    out.push_back(static_cast<std::uint8_t>(name.size() & 0xff));
    out.push_back(static_cast<std::uint8_t>(name.size() >> 8));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(tensor.shape.size()));
    for (std::size_t dim : tensor.shape) append_le64(out, dim);
  }
  for (const auto& [name, tensor] : entries_) {
    for (double v : tensor.data) append_le64(out, std::bit_cast<std::uint64_t>(v));
  }
  write_file(path, out);
}

Checkpoint Checkpoint::load(const std::string& path) {
  const Bytes raw = read_file(path);
  if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, 8) != 0)
    fail(errc::bad_magic, "not a falcon checkpoint: " + path);
  if (read_le32(raw.data() + 8) != kVersion)
    fail(errc::schema_error, "unsupported checkpoint version in " + path);
  const std::uint32_t count = read_le32(raw.data() + 12);

  std::size_t off = 16;
  const auto need = [&](std::size_t n) {
    if (raw.size() - off < n) fail(errc::truncated, "checkpoint manifest truncated: " + path);
  };

  Checkpoint ckpt;
  std::vector<std::size_t> sizes;
  for (std::uint32_t e = 0; e < count; ++e) {
    need(2);
    const std::size_t name_len = raw[off] | (static_cast<std::size_t>(raw[off + 1]) << 8);
    off += 2;
    need(name_len + 1);
    std::string name(raw.begin() + static_cast<std::ptrdiff_t>(off),
                     raw.begin() + static_cast<std::ptrdiff_t>(off + name_len));
    off += name_len;
    const std::size_t ndim = raw[off++];
    need(ndim * 8);
    std::vector<std::size_t> shape(ndim);
    for (std::size_t d = 0; d < ndim; ++d) {
      shape[d] = static_cast<std::size_t>(read_le64(raw.data() + off));
      off += 8;
    }
    Tensor t(shape);
    sizes.push_back(t.numel());
    ckpt.entries_.emplace_back(std::move(name), std::move(t));
  }
  for (std::uint32_t e = 0; e < count; ++e) {
    need(sizes[e] * 8);
    Tensor& t = ckpt.entries_[e].second;
    for (std::size_t i = 0; i < sizes[e]; ++i) {
      t.data[i] = std::bit_cast<double>(read_le64(raw.data() + off));
      off += 8;
    }
  }
  if (off != raw.size()) fail(errc::truncated, "trailing bytes in checkpoint: " + path);
  return ckpt;
}

}  // namespace falcon::nn
