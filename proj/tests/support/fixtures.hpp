#pragma once

// Byte-level builders for synthetic captures and graphs used across the test
// suites. Everything here is assembled by hand so the tests stay independent
// of the parsers they exercise.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "falcon/bytes.hpp"
#include "falcon/fcg.hpp"
#include "falcon/flow_image.hpp"
#include "falcon/pcap.hpp"
#include "falcon/rng.hpp"

namespace fixtures {

using falcon::Bytes;

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    falcon::Rng salt(reinterpret_cast<std::uint64_t>(&counter) ^ counter++);
    path = std::filesystem::temp_directory_path() /
           ("falcon-test-" + tag + "-" + falcon::to_hex(salt.next_u64()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline Bytes ipv4_packet(std::uint8_t protocol, const std::array<std::uint8_t, 4>& src,
                         std::uint16_t sport, const std::array<std::uint8_t, 4>& dst,
                         std::uint16_t dport, const Bytes& payload) {
  Bytes out;
  const std::size_t transport = protocol == 6 ? 20 : 8;
  const std::uint16_t total = static_cast<std::uint16_t>(20 + transport + payload.size());
  out.push_back(0x45);  // version 4, ihl 5
  out.push_back(0x00);
  falcon::append_be16(out, total);
  falcon::append_be16(out, 0x1234);  // id
  falcon::append_be16(out, 0x0000);  // flags/fragment
  out.push_back(64);                 // ttl
  out.push_back(protocol);
  falcon::append_be16(out, 0x0000);  // checksum, unvalidated
  out.insert(out.end(), src.begin(), src.end());
  out.insert(out.end(), dst.begin(), dst.end());
  falcon::append_be16(out, sport);
  falcon::append_be16(out, dport);
  if (protocol == 6) {
    falcon::append_be32(out, 1);  // seq
    falcon::append_be32(out, 0);  // ack
    out.push_back(0x50);          // data offset 5 words
    out.push_back(0x18);          // PSH|ACK
    falcon::append_be16(out, 0xffff);
    falcon::append_be16(out, 0x0000);
    falcon::append_be16(out, 0x0000);
  } else {
    falcon::append_be16(out, static_cast<std::uint16_t>(8 + payload.size()));
    falcon::append_be16(out, 0x0000);
  }
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline Bytes ethernet_frame(std::uint16_t ethertype, const Bytes& inner) {
  Bytes out(12, 0x02);  // junk mac addresses
  falcon::append_be16(out, ethertype);
  out.insert(out.end(), inner.begin(), inner.end());
  return out;
}

// Classic libpcap writer driven byte-by-byte.
struct PcapBuilder {
  Bytes data;
  bool big_endian = false;

  explicit PcapBuilder(std::uint32_t link_type = falcon::pcap::kLinkEthernet,
                       bool be = false, bool nanos = false)
      : big_endian(be) {
    const std::array<std::uint8_t, 4> magic =
        nanos ? (be ? std::array<std::uint8_t, 4>{0xa1, 0xb2, 0x3c, 0x4d}
                    : std::array<std::uint8_t, 4>{0x4d, 0x3c, 0xb2, 0xa1})
              : (be ? std::array<std::uint8_t, 4>{0xa1, 0xb2, 0xc3, 0xd4}
                    : std::array<std::uint8_t, 4>{0xd4, 0xc3, 0xb2, 0xa1});
    data.insert(data.end(), magic.begin(), magic.end());
    put16(2);
    put16(4);
    put32(0);        // thiszone
    put32(0);        // sigfigs
    put32(0x40000);  // snaplen
    put32(link_type);
  }

  void put16(std::uint16_t v) {
    if (big_endian) {
      data.push_back(static_cast<std::uint8_t>(v >> 8));
      data.push_back(static_cast<std::uint8_t>(v & 0xff));
    } else {
      data.push_back(static_cast<std::uint8_t>(v & 0xff));
      data.push_back(static_cast<std::uint8_t>(v >> 8));
    }
  }

  void put32(std::uint32_t v) {
    if (big_endian) {
      falcon::append_be32(data, v);
    } else {
      falcon::append_le32(data, v);
    }
  }

  void add_record(std::uint32_t sec, std::uint32_t frac, const Bytes& frame,
                  std::uint32_t orig_len = 0) {
    put32(sec);
    put32(frac);
    put32(static_cast<std::uint32_t>(frame.size()));
    put32(orig_len ? orig_len : static_cast<std::uint32_t>(frame.size()));
    data.insert(data.end(), frame.begin(), frame.end());
  }
};

inline std::array<std::uint8_t, 4> ip(std::uint8_t a, std::uint8_t b, std::uint8_t c,
                                      std::uint8_t d) {
  return {a, b, c, d};
}

// Three UDP frames over distinct tuples with the written timestamps.
inline PcapBuilder three_udp_capture() {
  PcapBuilder pcap;
  pcap.add_record(100, 11,
                  ethernet_frame(0x0800, ipv4_packet(17, ip(10, 0, 0, 1), 1111, ip(10, 0, 0, 2),
                                                     2222, {0xaa, 0xbb})));
  pcap.add_record(101, 22,
                  ethernet_frame(0x0800, ipv4_packet(17, ip(10, 0, 0, 3), 3333, ip(10, 0, 0, 4),
                                                     4444, {0xcc})));
  pcap.add_record(102, 33,
                  ethernet_frame(0x0800, ipv4_packet(17, ip(10, 0, 0, 5), 5555, ip(10, 0, 0, 6),
                                                     6666, {})));
  return pcap;
}

inline falcon::img::FlowImage constant_image(std::uint8_t value) {
  falcon::img::FlowImage image;
  image.pixels.fill(value);
  return image;
}

inline falcon::code::RawCallGraph small_graph(int label = 0) {
  falcon::code::RawCallGraph g;
  g.nodes.push_back({0, "init", {"load", "add", "store"}});
  g.nodes.push_back({1, "loop", {"add", "add", "branch"}});
  g.nodes.push_back({2, "exit", {"ret"}});
  g.edges = {{0, 1}, {1, 2}, {0, 2}};
  g.label = label;
  return g;
}

}  // namespace fixtures
