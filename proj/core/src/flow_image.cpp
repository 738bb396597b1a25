#include "falcon/flow_image.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "falcon/error.hpp"

namespace falcon::img {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

// Offset of the payload inside packet bytes that start at the IP header.
std::size_t payload_offset(const Bytes& packet, std::uint8_t protocol) {
  if (packet.size() < 20) return packet.size();
  const std::size_t ihl = static_cast<std::size_t>(packet[0] & 0x0f) * 4;
  std::size_t transport = 8;  // UDP
  if (protocol == 6) {
    if (packet.size() < ihl + 13) return packet.size();
    transport = static_cast<std::size_t>(packet[ihl + 12] >> 4) * 4;
  }
  return std::min(packet.size(), ihl + transport);
}

}  // namespace

const char* class_name(ClassLabel label) {
  switch (label) {
    case ClassLabel::benign: return "Benign";
    case ClassLabel::adware: return "Adware";
    case ClassLabel::ransomware: return "Ransomware";
    case ClassLabel::scareware: return "Scareware";
    case ClassLabel::smsmalware: return "SMSmalware";
  }
  return "?";
}

ClassLabel class_from_name(const std::string& name) {
  for (int id = 0; id < kNumClasses; ++id) {
    if (name == class_name(static_cast<ClassLabel>(id))) return static_cast<ClassLabel>(id);
  }
  fail(errc::unknown_family, "unknown class name '" + name + "'");
}

ClassLabel class_from_id(int id) {
  if (id < 0 || id >= kNumClasses) fail(errc::label_out_of_range, "class id must be 0..4");
  return static_cast<ClassLabel>(id);
}

Bytes serialize_flow(const pcap::Flow& flow, SerializeMode mode) {
  if (flow.packets.empty()) fail(errc::empty_input, "cannot serialize an empty flow");
  Bytes out;
  out.reserve(13);
  out.insert(out.end(), flow.key.src_ip.begin(), flow.key.src_ip.end());
  append_be16(out, flow.key.src_port);
  out.insert(out.end(), flow.key.dst_ip.begin(), flow.key.dst_ip.end());
  append_be16(out, flow.key.dst_port);
  out.push_back(flow.key.protocol);
  for (const auto& pkt : flow.packets) {
    if (mode == SerializeMode::payload_only) {
      const std::size_t off = payload_offset(pkt.bytes, pkt.tuple.protocol);
      out.insert(out.end(), pkt.bytes.begin() + static_cast<std::ptrdiff_t>(off),
                 pkt.bytes.end());
    } else {
      out.insert(out.end(), pkt.bytes.begin(), pkt.bytes.end());
    }
  }
  return out;
}

std::array<std::uint8_t, kRecordBytes> normalize_784(std::span<const std::uint8_t> raw) {
  std::array<std::uint8_t, kRecordBytes> out{};
  const std::size_t n = std::min(raw.size(), kRecordBytes);
  std::copy(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(n), out.begin());
  return out;
}

FlowImage to_image(std::span<const std::uint8_t> record) {
  if (record.size() != kRecordBytes) fail(errc::bad_length, "flow record must be 784 bytes");
  FlowImage image;
  std::copy(record.begin(), record.end(), image.pixels.begin());
  return image;
}

void ImageCorpus::append_capture(const std::string& name, const std::vector<FlowImage>& imgs,
                                 std::uint8_t label) {
  ranges.push_back(CaptureRange{name, images.size(), imgs.size()});
  images.insert(images.end(), imgs.begin(), imgs.end());
  labels.insert(labels.end(), imgs.size(), label);
}

void write_idx(const ImageCorpus& corpus, const std::string& image_path,
               const std::string& label_path, const std::string& manifest_path) {
  if (corpus.images.size() != corpus.labels.size())
    fail(errc::count_mismatch, "corpus images and labels differ in length");

  const std::uint32_t n = static_cast<std::uint32_t>(corpus.images.size());

  Bytes img;
  img.reserve(16 + n * kRecordBytes);
  append_be32(img, kImageMagic);
  append_be32(img, n);
  append_be32(img, kImageSide);
  append_be32(img, kImageSide);
  for (const auto& image : corpus.images)
    img.insert(img.end(), image.pixels.begin(), image.pixels.end());
  write_file(image_path, img);

  Bytes lab;
  lab.reserve(8 + n);
  append_be32(lab, kLabelMagic);
  append_be32(lab, n);
  lab.insert(lab.end(), corpus.labels.begin(), corpus.labels.end());
  write_file(label_path, lab);

  std::ostringstream manifest;
  for (const auto& range : corpus.ranges)
    manifest << range.name << '\t' << range.start << '\t' << range.count << '\n';
  write_file_atomic(manifest_path, manifest.str());
}

ImageCorpus read_idx(const std::string& image_path, const std::string& label_path,
                     const std::string& manifest_path) {
  const Bytes img = read_file(image_path);
  if (img.size() < 16) fail(errc::truncated, "idx image header needs 16 bytes");
  if (read_be32(img.data()) != kImageMagic) fail(errc::bad_magic, "bad idx image magic");
  const std::uint32_t n = read_be32(img.data() + 4);
  if (read_be32(img.data() + 8) != kImageSide || read_be32(img.data() + 12) != kImageSide)
    fail(errc::dim_mismatch, "idx images must be 28x28");
  if (img.size() != 16 + static_cast<std::size_t>(n) * kRecordBytes)
    fail(errc::dim_mismatch, "idx image payload does not match declared count");

  const Bytes lab = read_file(label_path);
  if (lab.size() < 8) fail(errc::truncated, "idx label header needs 8 bytes");
  if (read_be32(lab.data()) != kLabelMagic) fail(errc::bad_magic, "bad idx label magic");
  if (read_be32(lab.data() + 4) != n) fail(errc::count_mismatch, "image/label counts differ");
  if (lab.size() != 8 + static_cast<std::size_t>(n))
    fail(errc::dim_mismatch, "idx label payload does not match declared count");

  ImageCorpus corpus;
  corpus.images.resize(n);
  corpus.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::copy_n(img.begin() + 16 + static_cast<std::ptrdiff_t>(i * kRecordBytes), kRecordBytes,
                corpus.images[i].pixels.begin());
    corpus.labels[i] = lab[8 + i];
  }

  std::ifstream mf(manifest_path);
  if (!mf) fail(errc::io_error, "cannot open manifest " + manifest_path);
  std::string line;
  std::size_t covered = 0;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    CaptureRange range;
    if (!std::getline(row, range.name, '\t')) fail(errc::schema_error, "manifest line: " + line);
    if (!(row >> range.start >> range.count)) fail(errc::schema_error, "manifest line: " + line);
    if (range.start != covered || range.start + range.count > n)
      fail(errc::schema_error, "manifest ranges must be contiguous and in bounds");
    covered += range.count;
    corpus.ranges.push_back(std::move(range));
  }
  if (covered != n) fail(errc::count_mismatch, "manifest ranges do not cover the corpus");
  return corpus;
}

void export_pgm(const FlowImage& image, const std::string& path) {
  static const std::string header = "P5\n28 28\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  write_file(path, out);
}

FlowImage read_pgm(const std::string& path) {
  const Bytes raw = read_file(path);
  static const std::string header = "P5\n28 28\n255\n";
  if (raw.size() != header.size() + kRecordBytes ||
      !std::equal(header.begin(), header.end(), raw.begin()))
    fail(errc::bad_magic, "not a falcon 28x28 PGM: " + path);
  FlowImage image;
  std::copy(raw.begin() + static_cast<std::ptrdiff_t>(header.size()), raw.end(),
            image.pixels.begin());
  return image;
}

}  // namespace falcon::img
