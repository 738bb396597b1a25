#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "falcon/bytes.hpp"

namespace falcon::pcap {

struct Timestamp {
  std::int64_t sec = 0;
  std::int32_t usec = 0;

  auto operator<=>(const Timestamp&) const = default;
};

// (src ip, src port, dst ip, dst port, protocol); protocol is 6 (TCP) or 17
// (UDP) for every retained packet.
struct FiveTuple {
  std::array<std::uint8_t, 4> src_ip{};
  std::uint16_t src_port = 0;
  std::array<std::uint8_t, 4> dst_ip{};
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;

  auto operator<=>(const FiveTuple&) const = default;
};

struct ParsedPacket {
  FiveTuple tuple;
  Bytes bytes;                 // captured bytes, starting at the IP header
  std::size_t size = 0;        // == bytes.size()
  std::size_t wire_size = 0;   // original on-wire length from the IP header on
  Timestamp time;
};

struct Flow {
  FiveTuple key;  // canonical
  std::vector<ParsedPacket> packets;

  Timestamp first_time() const { return packets.front().time; }
};

struct CaptureSet {
  std::string source_name;
  std::vector<Flow> flows;
};

struct PcapRecord {
  Timestamp time;
  std::uint32_t link_type = 0;
  Bytes frame;
  std::uint32_t orig_len = 0;
};

inline constexpr std::uint32_t kLinkEthernet = 1;
inline constexpr std::uint32_t kLinkRawIp = 101;

// Classic libpcap container: 24-byte global header, 16-byte record headers.
// Accepts the four standard magics (us/ns, either byte order). Throws
// errc::bad_magic / errc::truncated on unusable input.
std::vector<PcapRecord> parse_pcap(std::span<const std::uint8_t> raw);

// Strips the link layer and keeps IPv4 TCP/UDP frames with an intact
// transport header; everything else maps to nullopt (Skip).
std::optional<ParsedPacket> decode_packet(std::span<const std::uint8_t> frame,
                                          std::uint32_t link_type, Timestamp time,
                                          std::uint32_t orig_len = 0);

// Bidirectional canonical form: the lexicographically smaller of the tuple and
// its endpoint-swapped twin, comparing (ip, port) pairs as byte strings.
FiveTuple canonicalize(const FiveTuple& t, bool bidirectional);

// Groups packets by canonical tuple. Within a flow packets are time-sorted
// with input order as the stable tie-break; flows are ordered by first-packet
// time (first-appearance order on ties).
std::vector<Flow> split_flows(std::vector<ParsedPacket> packets, bool bidirectional);

struct CaptureStats {
  std::size_t records = 0;
  std::size_t decoded = 0;
  std::size_t skipped = 0;
};

CaptureSet read_capture(const std::string& path, bool bidirectional,
                        CaptureStats* stats = nullptr);

}  // namespace falcon::pcap
