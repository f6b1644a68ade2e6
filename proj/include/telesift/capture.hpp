#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "telesift/daytime.hpp"

namespace telesift {

namespace tcpflag {
constexpr std::uint8_t fin = 0x01;
constexpr std::uint8_t syn = 0x02;
constexpr std::uint8_t rst = 0x04;
constexpr std::uint8_t psh = 0x08;
constexpr std::uint8_t ack = 0x10;
constexpr std::uint8_t urg = 0x20;
}  // namespace tcpflag

// One captured TCP-over-IPv4 packet. Immutable after creation; safe to copy
// between workers. IPs and header words are host order.
struct PacketRecord {
    NsTime ts_ns = 0;
    std::uint32_t src_ip = 0;
    std::uint32_t dst_ip = 0;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint8_t tcp_flags = 0;
    std::uint32_t seq = 0;
    std::uint32_t ack = 0;
    std::string payload;

    std::size_t payload_len() const { return payload.size(); }
};

struct CaptureStats {
    std::uint64_t packets_total = 0;  // complete packet records seen in the file
    std::uint64_t records = 0;        // emitted TCP/IPv4 records
    std::uint64_t skipped = 0;        // non-IPv4, non-TCP, fragments, unparseable frames
    bool truncated_tail = false;      // file ended mid-packet; remainder dropped
};

class CaptureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint16_t be16(const unsigned char* p) {
    return std::uint16_t(p[0]) << 8 | p[1];
}

inline std::uint32_t be32(const unsigned char* p) {
    return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 |
           std::uint32_t(p[2]) << 8 | p[3];
}

inline std::uint16_t file16(const unsigned char* p, bool swap) {
    std::uint16_t v;
    std::memcpy(&v, p, 2);
    if (swap) v = std::uint16_t(v << 8 | v >> 8);
    return v;
}

inline std::uint32_t file32(const unsigned char* p, bool swap) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    if (swap) v = __builtin_bswap32(v);
    return v;
}

struct LinkTypes {
    static constexpr std::uint32_t null_bsd = 0;
    static constexpr std::uint32_t ethernet = 1;
    static constexpr std::uint32_t raw_ip = 101;
    static constexpr std::uint32_t loop = 108;
    static constexpr std::uint32_t linux_sll = 113;
};

// Offset of the IPv4 header within the frame, or npos when the frame does
// not carry IPv4.
inline std::size_t ipv4_offset(std::span<const unsigned char> frame,
                               std::uint32_t linktype) {
    constexpr std::size_t npos = std::size_t(-1);
    switch (linktype) {
    case LinkTypes::ethernet: {
        if (frame.size() < 14) return npos;
        std::size_t off = 12;
        std::uint16_t ethertype = be16(frame.data() + off);
        // 802.1Q / QinQ tags
        int vlan_hops = 0;
        while ((ethertype == 0x8100 || ethertype == 0x88A8 || ethertype == 0x9100) &&
               vlan_hops < 2) {
            off += 4;
            if (frame.size() < off + 2) return npos;
            ethertype = be16(frame.data() + off);
            ++vlan_hops;
        }
        if (ethertype != 0x0800) return npos;
        return off + 2;
    }
    case LinkTypes::null_bsd:
    case LinkTypes::loop: {
        if (frame.size() < 4) return npos;
        std::uint32_t family;
        std::memcpy(&family, frame.data(), 4);
        if (family != 2 && __builtin_bswap32(family) != 2) return npos;
        return 4;
    }
    case LinkTypes::raw_ip:
        return 0;
    case LinkTypes::linux_sll: {
        if (frame.size() < 16) return npos;
        if (be16(frame.data() + 14) != 0x0800) return npos;
        return 16;
    }
    default:
        return npos;
    }
}

// Parses IPv4+TCP out of a frame. Returns false when the packet should be
// counted as skipped.
inline bool parse_tcp_ipv4(std::span<const unsigned char> frame, std::size_t ip_off,
                           PacketRecord& rec) {
    if (ip_off == std::size_t(-1) || frame.size() < ip_off + 20) return false;
    const unsigned char* ip = frame.data() + ip_off;
    if ((ip[0] >> 4) != 4) return false;
    std::size_t ihl = std::size_t(ip[0] & 0x0F) * 4;
    if (ihl < 20 || frame.size() < ip_off + ihl) return false;
    std::uint16_t total_len = be16(ip + 2);
    std::uint16_t frag = be16(ip + 6);
    if ((frag & 0x1FFF) != 0) return false;  // non-first fragment
    if (ip[9] != 6) return false;            // not TCP
    std::size_t tcp_off = ip_off + ihl;
    if (frame.size() < tcp_off + 20) return false;
    const unsigned char* tcp = frame.data() + tcp_off;
    std::size_t doff = std::size_t(tcp[12] >> 4) * 4;
    if (doff < 20 || frame.size() < tcp_off + doff) return false;

    rec.src_ip = be32(ip + 12);
    rec.dst_ip = be32(ip + 16);
    rec.src_port = be16(tcp);
    rec.dst_port = be16(tcp + 2);
    rec.seq = be32(tcp + 4);
    rec.ack = be32(tcp + 8);
    rec.tcp_flags = tcp[13];

    // Payload ends at the IP total length, which excludes link-layer padding.
    // A total length below the header sizes (e.g. offloaded captures) falls
    // back to the bytes on the wire.
    std::size_t avail = frame.size() - ip_off;
    std::size_t ip_len = total_len >= ihl + doff ? total_len : avail;
    std::size_t end = ip_off + std::min<std::size_t>(ip_len, avail);
    std::size_t payload_start = tcp_off + doff;
    if (end > payload_start)
        rec.payload.assign(reinterpret_cast<const char*>(frame.data() + payload_start),
                           end - payload_start);
    return true;
}

}  // namespace detail

// Streams TCP/IPv4 records out of a classic pcap file. Handles both magic
// byte orders and both microsecond and nanosecond timestamp variants.
// Non-TCP/non-IPv4 packets are counted and skipped; a truncated final packet
// is dropped and the stream ends cleanly with truncated_tail set.
template <typename OnRecord>
CaptureStats read_capture(std::istream& in, OnRecord&& emit,
                          const std::string& origin = "<stream>") {
    unsigned char hdr[24];
    in.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
    if (in.gcount() != sizeof(hdr))
        throw CaptureError(origin + ": not a capture file (short header)");

    std::uint32_t magic;
    std::memcpy(&magic, hdr, 4);
    bool swap, nanos;
    switch (magic) {
    case 0xA1B2C3D4: swap = false; nanos = false; break;
    case 0xD4C3B2A1: swap = true;  nanos = false; break;
    case 0xA1B23C4D: swap = false; nanos = true;  break;
    case 0x4D3CB2A1: swap = true;  nanos = true;  break;
    default:
        throw CaptureError(origin + ": unrecognized capture magic number");
    }
    std::uint32_t linktype = detail::file32(hdr + 20, swap);
    switch (linktype) {
    case detail::LinkTypes::null_bsd:
    case detail::LinkTypes::ethernet:
    case detail::LinkTypes::raw_ip:
    case detail::LinkTypes::loop:
    case detail::LinkTypes::linux_sll:
        break;
    default:
        throw CaptureError(origin + ": unsupported link type " +
                           std::to_string(linktype));
    }

    CaptureStats stats;
    std::vector<unsigned char> frame;
    for (;;) {
        unsigned char ph[16];
        in.read(reinterpret_cast<char*>(ph), sizeof(ph));
        if (in.gcount() == 0) break;  // clean end of file
        if (in.gcount() != sizeof(ph)) {
            stats.truncated_tail = true;
            break;
        }
        std::uint32_t ts_sec = detail::file32(ph, swap);
        std::uint32_t ts_frac = detail::file32(ph + 4, swap);
        std::uint32_t incl_len = detail::file32(ph + 8, swap);
        if (incl_len > (64u << 20))
            throw CaptureError(origin + ": implausible packet length " +
                               std::to_string(incl_len));
        frame.resize(incl_len);
        in.read(reinterpret_cast<char*>(frame.data()), incl_len);
        if (std::size_t(in.gcount()) != incl_len) {
            stats.truncated_tail = true;
            break;
        }

        ++stats.packets_total;
        PacketRecord rec;
        rec.ts_ns = NsTime(ts_sec) * ns_per_sec +
                    NsTime(ts_frac) * (nanos ? 1 : 1000);
        std::size_t ip_off = detail::ipv4_offset(frame, linktype);
        if (detail::parse_tcp_ipv4(frame, ip_off, rec)) {
            ++stats.records;
            emit(std::move(rec));
        } else {
            ++stats.skipped;
        }
    }
    return stats;
}

inline CaptureStats read_capture_file(const std::string& path,
                                      std::vector<PacketRecord>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CaptureError("cannot open capture file: " + path);
    return read_capture(in, [&](PacketRecord&& r) { out.push_back(std::move(r)); },
                        path);
}

struct DailyPartition {
    DayIndex day = 0;
    std::vector<PacketRecord> records;
};

// Splits records into per-day partitions in the given UTC offset. Partitions
// come out sorted by day; input order is preserved within each partition.
inline std::vector<DailyPartition> partition_daily(std::span<const PacketRecord> records,
                                                   std::int32_t tz_offset_s) {
    std::map<DayIndex, std::vector<PacketRecord>> by_day;
    for (const auto& rec : records) by_day[day_of(rec.ts_ns, tz_offset_s)].push_back(rec);
    std::vector<DailyPartition> out;
    out.reserve(by_day.size());
    for (auto& [day, recs] : by_day) out.push_back({day, std::move(recs)});
    return out;
}

}  // namespace telesift
