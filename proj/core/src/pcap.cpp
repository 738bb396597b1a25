#include "falcon/pcap.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "falcon/error.hpp"

namespace falcon::pcap {

namespace {

struct Magic {
  bool swapped;  // file byte order differs from the magic's canonical big-endian spelling
  bool nanos;
};

std::optional<Magic> classify_magic(const std::uint8_t* p) {
  const std::array<std::uint8_t, 4> m = {p[0], p[1], p[2], p[3]};
  if (m == std::array<std::uint8_t, 4>{0xa1, 0xb2, 0xc3, 0xd4}) return Magic{false, false};
  if (m == std::array<std::uint8_t, 4>{0xd4, 0xc3, 0xb2, 0xa1}) return Magic{true, false};
  if (m == std::array<std::uint8_t, 4>{0xa1, 0xb2, 0x3c, 0x4d}) return Magic{false, true};
  if (m == std::array<std::uint8_t, 4>{0x4d, 0x3c, 0xb2, 0xa1}) return Magic{true, true};
  return std::nullopt;
}

}  // namespace

std::vector<PcapRecord> parse_pcap(std::span<const std::uint8_t> raw) {
  if (raw.size() < 24) fail(errc::truncated, "pcap global header needs 24 bytes");
  const auto magic = classify_magic(raw.data());
  if (!magic) fail(errc::bad_magic, "unknown pcap magic");

  const auto u32 = [&](std::size_t off) {
    return magic->swapped ? read_le32(raw.data() + off) : read_be32(raw.data() + off);
  };

  const std::uint32_t link_type = u32(20);

  std::vector<PcapRecord> records;
  std::size_t off = 24;
  while (off < raw.size()) {
    if (raw.size() - off < 16) fail(errc::truncated, "pcap record header needs 16 bytes");
    const std::uint32_t ts_sec = u32(off);
    const std::uint32_t ts_frac = u32(off + 4);
    const std::uint32_t incl_len = u32(off + 8);
    const std::uint32_t orig_len = u32(off + 12);
    off += 16;
    if (raw.size() - off < incl_len) fail(errc::truncated, "pcap record body shorter than declared");

    PcapRecord rec;
    rec.time.sec = static_cast<std::int64_t>(ts_sec);
    rec.time.usec = static_cast<std::int32_t>(magic->nanos ? ts_frac / 1000 : ts_frac);
    rec.link_type = link_type;
    rec.orig_len = orig_len;
    rec.frame.assign(raw.begin() + static_cast<std::ptrdiff_t>(off),
                     raw.begin() + static_cast<std::ptrdiff_t>(off + incl_len));
    records.push_back(std::move(rec));
    off += incl_len;
  }
  return records;
}

std::optional<ParsedPacket> decode_packet(std::span<const std::uint8_t> frame,
                                          std::uint32_t link_type, Timestamp time,
                                          std::uint32_t orig_len) {
  std::size_t ip_off = 0;
  if (link_type == kLinkEthernet) {
    if (frame.size() < 14) return std::nullopt;
    const std::uint16_t ethertype = read_be16(frame.data() + 12);
    if (ethertype != 0x0800) return std::nullopt;  // IPv4 only
    ip_off = 14;
  } else if (link_type == kLinkRawIp) {
    ip_off = 0;
  } else {
    return std::nullopt;
  }

  if (frame.size() < ip_off + 20) return std::nullopt;
  const std::uint8_t* ip = frame.data() + ip_off;
  if ((ip[0] >> 4) != 4) return std::nullopt;  // IPv6 and friends are out of scope
  const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
  if (ihl < 20 || frame.size() < ip_off + ihl) return std::nullopt;

  const std::uint8_t protocol = ip[9];
  if (protocol != 6 && protocol != 17) return std::nullopt;

  // Ports live in the first 4 bytes of the transport header; a capture that
  // clipped them is rejected rather than producing port 0 ghosts.
  if (frame.size() < ip_off + ihl + 4) return std::nullopt;

  ParsedPacket pkt;
  std::copy(ip + 12, ip + 16, pkt.tuple.src_ip.begin());
  std::copy(ip + 16, ip + 20, pkt.tuple.dst_ip.begin());
  pkt.tuple.src_port = read_be16(ip + ihl);
  pkt.tuple.dst_port = read_be16(ip + ihl + 2);
  pkt.tuple.protocol = protocol;
  pkt.bytes.assign(frame.begin() + static_cast<std::ptrdiff_t>(ip_off), frame.end());
  pkt.size = pkt.bytes.size();
  pkt.wire_size = std::max(pkt.size, static_cast<std::size_t>(
                                         orig_len > ip_off ? orig_len - ip_off : 0));
  pkt.time = time;
  return pkt;
}

FiveTuple canonicalize(const FiveTuple& t, bool bidirectional) {
  if (!bidirectional) return t;
  const auto endpoint = [](const std::array<std::uint8_t, 4>& ip, std::uint16_t port) {
    std::array<std::uint8_t, 6> e{};
    std::copy(ip.begin(), ip.end(), e.begin());
    e[4] = static_cast<std::uint8_t>(port >> 8);
    e[5] = static_cast<std::uint8_t>(port & 0xff);
    return e;
  };
  if (endpoint(t.dst_ip, t.dst_port) < endpoint(t.src_ip, t.src_port)) {
    FiveTuple swapped = t;
    std::swap(swapped.src_ip, swapped.dst_ip);
    std::swap(swapped.src_port, swapped.dst_port);
    return swapped;
  }
  return t;
}

std::vector<Flow> split_flows(std::vector<ParsedPacket> packets, bool bidirectional) {
  std::vector<Flow> flows;
  std::map<FiveTuple, std::size_t> index;
  for (auto& pkt : packets) {
    const FiveTuple key = canonicalize(pkt.tuple, bidirectional);
    auto [it, inserted] = index.emplace(key, flows.size());
    if (inserted) flows.push_back(Flow{key, {}});
    flows[it->second].packets.push_back(std::move(pkt));
  }
  for (auto& flow : flows) {
    std::stable_sort(flow.packets.begin(), flow.packets.end(),
                     [](const ParsedPacket& a, const ParsedPacket& b) { return a.time < b.time; });
  }
  std::stable_sort(flows.begin(), flows.end(),
                   [](const Flow& a, const Flow& b) { return a.first_time() < b.first_time(); });
  return flows;
}

CaptureSet read_capture(const std::string& path, bool bidirectional, CaptureStats* stats) {
  const Bytes raw = read_file(path);
  const auto records = parse_pcap(std::span<const std::uint8_t>(raw.data(), raw.size()));

  std::vector<ParsedPacket> packets;
  std::size_t skipped = 0;
  for (const auto& rec : records) {
    auto pkt = decode_packet(std::span<const std::uint8_t>(rec.frame.data(), rec.frame.size()),
                             rec.link_type, rec.time, rec.orig_len);
    if (pkt)
      packets.push_back(std::move(*pkt));
    else
      ++skipped;
  }
  if (stats) {
    stats->records = records.size();
    stats->decoded = packets.size();
    stats->skipped = skipped;
  }

  CaptureSet set;
  set.source_name = std::filesystem::path(path).filename().string();
  set.flows = split_flows(std::move(packets), bidirectional);
  return set;
}

}  // namespace falcon::pcap
