#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "falcon/bytes.hpp"
#include "falcon/pcap.hpp"

namespace falcon::img {

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kRecordBytes = kImageSide * kImageSide;  // 784
inline constexpr int kNumClasses = 5;

// Class ids are a stable contract: Benign = 0, then the malware families in
// listing order.
enum class ClassLabel : std::uint8_t {
  benign = 0,
  adware = 1,
  ransomware = 2,
  scareware = 3,
  smsmalware = 4,
};

const char* class_name(ClassLabel label);
ClassLabel class_from_name(const std::string& name);  // errc::unknown_family
ClassLabel class_from_id(int id);                     // errc::label_out_of_range

enum class SerializeMode {
  headers,       // packet bytes from the IP header on
  payload_only,  // drop IP and transport headers, keep payload bytes
};

// Flow record layout: 13-byte canonical tuple encoding
// (src_ip 4 | src_port 2 BE | dst_ip 4 | dst_port 2 BE | protocol 1)
// followed by every packet's bytes in flow order.
Bytes serialize_flow(const pcap::Flow& flow, SerializeMode mode = SerializeMode::headers);

// Trim to 784 bytes, or zero-pad up to 784.
std::array<std::uint8_t, kRecordBytes> normalize_784(std::span<const std::uint8_t> raw);

// 28x28 grayscale, row-major; 0x00 black, 0xff white.
struct FlowImage {
  std::array<std::uint8_t, kRecordBytes> pixels{};

  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * kImageSide + col]; }
};

FlowImage to_image(std::span<const std::uint8_t> record);  // errc::bad_length

struct CaptureRange {
  std::string name;
  std::size_t start = 0;
  std::size_t count = 0;
};

struct ImageCorpus {
  std::vector<FlowImage> images;
  std::vector<std::uint8_t> labels;
  std::vector<CaptureRange> ranges;  // disjoint, covering all images

  std::size_t size() const { return images.size(); }
  void append_capture(const std::string& name, const std::vector<FlowImage>& imgs,
                      std::uint8_t label);
};

// IDX persistence (MNIST-compatible): image magic 0x00000803 with dims
// (N, 28, 28), label magic 0x00000801 with dim (N), integers big-endian.
// The per-capture index goes to a sidecar manifest, one line per capture:
// name <TAB> start <TAB> count.
void write_idx(const ImageCorpus& corpus, const std::string& image_path,
               const std::string& label_path, const std::string& manifest_path);
ImageCorpus read_idx(const std::string& image_path, const std::string& label_path,
                     const std::string& manifest_path);

// Binary PGM ("P5\n28 28\n255\n" + raw pixels) for eyeballing converted flows.
void export_pgm(const FlowImage& image, const std::string& path);
FlowImage read_pgm(const std::string& path);

}  // namespace falcon::img
