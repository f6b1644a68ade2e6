#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "telesift/capture.hpp"

namespace telesift {

struct Endpoint {
    std::uint32_t ip = 0;
    std::uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
};

// Canonical bidirectional connection identity: endpoints ordered so that a
// packet and its reversed-direction reply map to the same key.
struct ConnectionKey {
    Endpoint a;
    Endpoint b;
    std::uint32_t session_index = 0;

    auto operator<=>(const ConnectionKey&) const = default;
};

inline ConnectionKey canonical_key(const PacketRecord& rec) {
    Endpoint src{rec.src_ip, rec.src_port};
    Endpoint dst{rec.dst_ip, rec.dst_port};
    if (dst < src) std::swap(src, dst);
    return {src, dst, 0};
}

// Contiguous per-direction application byte streams of one logical
// connection. bytes_a_to_b flows from key.a to key.b.
struct ReassembledStream {
    ConnectionKey key;
    Endpoint initiator;  // first-seen SYN sender, else first-seen sender
    std::string bytes_a_to_b;
    std::string bytes_b_to_a;
    NsTime first_ts = 0;
    NsTime last_ts = 0;
    std::uint64_t packet_count = 0;   // packets after deduplication
    std::uint64_t dedup_removed = 0;  // retransmissions dropped
    std::uint32_t gaps = 0;           // sequence discontinuities across both directions

    const std::string& from_initiator() const {
        return initiator == key.a ? bytes_a_to_b : bytes_b_to_a;
    }
    const std::string& to_initiator() const {
        return initiator == key.a ? bytes_b_to_a : bytes_a_to_b;
    }
    std::size_t payload_bytes() const {
        return bytes_a_to_b.size() + bytes_b_to_a.size();
    }
};

// Splits time-sorted packets sharing one canonical key into session groups:
// an inter-packet gap above gap_seconds starts a new group.
inline std::vector<std::vector<PacketRecord>> sessionize(
    std::span<const PacketRecord> records, double gap_seconds) {
    std::vector<std::vector<PacketRecord>> groups;
    const std::int64_t gap_ns = std::int64_t(gap_seconds * double(ns_per_sec));
    for (const auto& rec : records) {
        if (groups.empty() || rec.ts_ns - groups.back().back().ts_ns > gap_ns)
            groups.emplace_back();
        groups.back().push_back(rec);
    }
    return groups;
}

// Drops retransmissions: per direction, only the first packet with a given
// (seq, ack, payload_len) triple survives. Returns the number removed.
inline std::uint64_t dedup_retransmissions(std::vector<PacketRecord>& group) {
    using Dir = std::tuple<std::uint32_t, std::uint16_t, std::uint32_t, std::uint16_t>;
    using Triple = std::tuple<std::uint32_t, std::uint32_t, std::size_t>;
    std::set<std::pair<Dir, Triple>> seen;
    std::uint64_t removed = 0;
    std::vector<PacketRecord> kept;
    kept.reserve(group.size());
    for (auto& rec : group) {
        Dir dir{rec.src_ip, rec.src_port, rec.dst_ip, rec.dst_port};
        Triple triple{rec.seq, rec.ack, rec.payload_len()};
        if (seen.emplace(dir, triple).second)
            kept.push_back(std::move(rec));
        else
            ++removed;
    }
    group = std::move(kept);
    return removed;
}

namespace detail {

// Payload placement for one direction. Positions are signed 32-bit sequence
// offsets against the direction's first seen seq, which keeps ordering
// correct across 2^32 wraparound and across segments observed slightly
// before the reference packet. Overlaps resolve first-writer-wins in
// arrival order; gaps concatenate without padding and bump the counter.
class DirectionAssembler {
public:
    void add(std::uint32_t seq, const std::string& payload) {
        if (!ref_set_) {
            ref_ = seq;
            ref_set_ = true;
        }
        if (payload.empty()) return;
        std::int64_t rel = std::int32_t(seq - ref_);
        insert(rel, payload);
    }

    std::string finish(std::uint32_t& gap_counter) const {
        std::string out;
        std::int64_t expect = 0;
        bool first = true;
        for (const auto& [rel, chunk] : chunks_) {
            if (!first && rel > expect) ++gap_counter;
            out += chunk;
            expect = rel + std::int64_t(chunk.size());
            first = false;
        }
        return out;
    }

private:
    void insert(std::int64_t rel, const std::string& payload) {
        // Clip the new segment against already-written intervals.
        std::vector<std::pair<std::int64_t, std::int64_t>> holes{
            {rel, rel + std::int64_t(payload.size())}};
        for (const auto& [start, chunk] : chunks_) {
            std::int64_t cs = start, ce = start + std::int64_t(chunk.size());
            std::vector<std::pair<std::int64_t, std::int64_t>> next;
            for (auto [hlo, hhi] : holes) {
                if (ce <= hlo || cs >= hhi) {
                    next.emplace_back(hlo, hhi);
                    continue;
                }
                if (hlo < cs) next.emplace_back(hlo, cs);
                if (ce < hhi) next.emplace_back(ce, hhi);
            }
            holes = std::move(next);
            if (holes.empty()) return;
        }
        for (auto [hlo, hhi] : holes)
            chunks_[hlo] = payload.substr(std::size_t(hlo - rel), std::size_t(hhi - hlo));
    }

    std::map<std::int64_t, std::string> chunks_;
    std::uint32_t ref_ = 0;
    bool ref_set_ = false;
};

}  // namespace detail

// Rebuilds the two directed byte streams of one deduplicated packet group.
// Group must be non-empty and time-ordered.
inline ReassembledStream reassemble(std::span<const PacketRecord> group,
                                    const ConnectionKey& key) {
    ReassembledStream stream;
    stream.key = key;
    stream.packet_count = group.size();
    stream.first_ts = group.front().ts_ns;
    stream.last_ts = group.front().ts_ns;

    bool initiator_set = false;
    for (const auto& rec : group) {
        stream.first_ts = std::min(stream.first_ts, rec.ts_ns);
        stream.last_ts = std::max(stream.last_ts, rec.ts_ns);
        if (!initiator_set && (rec.tcp_flags & tcpflag::syn)) {
            stream.initiator = {rec.src_ip, rec.src_port};
            initiator_set = true;
        }
    }
    if (!initiator_set)
        stream.initiator = {group.front().src_ip, group.front().src_port};

    detail::DirectionAssembler a_to_b, b_to_a;
    for (const auto& rec : group) {
        Endpoint src{rec.src_ip, rec.src_port};
        if (src == key.a)
            a_to_b.add(rec.seq, rec.payload);
        else
            b_to_a.add(rec.seq, rec.payload);
    }
    stream.bytes_a_to_b = a_to_b.finish(stream.gaps);
    stream.bytes_b_to_a = b_to_a.finish(stream.gaps);
    return stream;
}

// Debug dump: length-prefixed binary records, one per stream. Layout per
// record (all integers little-endian):
//   u32 a_ip, u16 a_port, u32 b_ip, u16 b_port, u32 session_index,
//   u32 initiator_ip, u16 initiator_port, i64 first_ts, i64 last_ts,
//   u64 packet_count, u64 dedup_removed, u32 gaps,
//   u64 len(bytes_a_to_b), bytes, u64 len(bytes_b_to_a), bytes
inline void dump_streams(std::ostream& out, std::span<const ReassembledStream> streams) {
    auto put = [&](const auto& v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    const char magic[4] = {'T', 'S', 'R', 'S'};
    out.write(magic, 4);
    put(std::uint32_t{1});  // format version
    put(std::uint64_t(streams.size()));
    for (const auto& s : streams) {
        put(s.key.a.ip);
        put(s.key.a.port);
        put(s.key.b.ip);
        put(s.key.b.port);
        put(s.key.session_index);
        put(s.initiator.ip);
        put(s.initiator.port);
        put(s.first_ts);
        put(s.last_ts);
        put(s.packet_count);
        put(s.dedup_removed);
        put(s.gaps);
        put(std::uint64_t(s.bytes_a_to_b.size()));
        out.write(s.bytes_a_to_b.data(), std::streamsize(s.bytes_a_to_b.size()));
        put(std::uint64_t(s.bytes_b_to_a.size()));
        out.write(s.bytes_b_to_a.data(), std::streamsize(s.bytes_b_to_a.size()));
    }
}

inline std::vector<ReassembledStream> load_streams(std::istream& in) {
    auto get = [&](auto& v) {
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in) throw std::runtime_error("truncated stream dump");
    };
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string_view(magic, 4) != "TSRS")
        throw std::runtime_error("not a stream dump");
    std::uint32_t version;
    get(version);
    if (version != 1) throw std::runtime_error("unsupported stream dump version");
    std::uint64_t count;
    get(count);
    std::vector<ReassembledStream> streams;
    streams.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ReassembledStream s;
        get(s.key.a.ip);
        get(s.key.a.port);
        get(s.key.b.ip);
        get(s.key.b.port);
        get(s.key.session_index);
        get(s.initiator.ip);
        get(s.initiator.port);
        get(s.first_ts);
        get(s.last_ts);
        get(s.packet_count);
        get(s.dedup_removed);
        get(s.gaps);
        auto read_bytes = [&](std::string& dst) {
            std::uint64_t len;
            get(len);
            dst.resize(len);
            in.read(dst.data(), std::streamsize(len));
            if (!in) throw std::runtime_error("truncated stream dump");
        };
        read_bytes(s.bytes_a_to_b);
        read_bytes(s.bytes_b_to_a);
        streams.push_back(std::move(s));
    }
    return streams;
}

// Full grouping pipeline: canonical keying, sessionization, retransmission
// dedup, reassembly. Streams come out ordered by (first_ts, key).
inline std::vector<ReassembledStream> reassemble_all(
    std::span<const PacketRecord> records, double gap_seconds) {
    std::map<ConnectionKey, std::vector<PacketRecord>> by_key;
    for (const auto& rec : records) by_key[canonical_key(rec)].push_back(rec);

    std::vector<ReassembledStream> streams;
    for (auto& [key, packets] : by_key) {
        std::stable_sort(packets.begin(), packets.end(),
                         [](const PacketRecord& x, const PacketRecord& y) {
                             return x.ts_ns < y.ts_ns;
                         });
        auto groups = sessionize(packets, gap_seconds);
        for (std::size_t i = 0; i < groups.size(); ++i) {
            ConnectionKey session_key = key;
            session_key.session_index = std::uint32_t(i);
            std::uint64_t removed = dedup_retransmissions(groups[i]);
            auto stream = reassemble(groups[i], session_key);
            stream.dedup_removed = removed;
            streams.push_back(std::move(stream));
        }
    }
    std::sort(streams.begin(), streams.end(),
              [](const ReassembledStream& x, const ReassembledStream& y) {
                  return std::tie(x.first_ts, x.key) < std::tie(y.first_ts, y.key);
              });
    return streams;
}

}  // namespace telesift
