#pragma once

// Test fixtures: an in-memory pcap writer and independent encoders used as
// oracles. These deliberately do not share code with the library under test.

#include <cassert>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "telesift/geo.hpp"

namespace fixtures {

class PcapWriter {
public:
    explicit PcapWriter(bool big_endian_file = false, bool nanos = false,
                        std::uint32_t linktype = 1)
        : big_endian_(big_endian_file), nanos_(nanos) {
        put32(nanos_ ? 0xA1B23C4Du : 0xA1B2C3D4u);
        put16(2);
        put16(4);
        put32(0);      // thiszone
        put32(0);      // sigfigs
        put32(65535);  // snaplen
        put32(linktype);
    }

    void add_tcp(std::int64_t ts_ns, const std::string& src_ip, std::uint16_t sport,
                 const std::string& dst_ip, std::uint16_t dport, std::uint8_t flags,
                 std::uint32_t seq, std::uint32_t ack, const std::string& payload) {
        std::string frame = ethernet_header(0x0800);
        frame += ipv4_header(src_ip, dst_ip, 6, 20 + payload.size());
        frame += tcp_header(sport, dport, seq, ack, flags);
        frame += payload;
        add_frame(ts_ns, frame);
    }

    void add_udp(std::int64_t ts_ns, const std::string& src_ip, std::uint16_t sport,
                 const std::string& dst_ip, std::uint16_t dport,
                 const std::string& payload) {
        std::string frame = ethernet_header(0x0800);
        frame += ipv4_header(src_ip, dst_ip, 17, 8 + payload.size());
        std::string udp;
        be16(udp, sport);
        be16(udp, dport);
        be16(udp, std::uint16_t(8 + payload.size()));
        be16(udp, 0);
        frame += udp + payload;
        add_frame(ts_ns, frame);
    }

    void add_frame(std::int64_t ts_ns, const std::string& frame) {
        put32(std::uint32_t(ts_ns / 1'000'000'000));
        std::int64_t frac = ts_ns % 1'000'000'000;
        put32(std::uint32_t(nanos_ ? frac : frac / 1000));
        put32(std::uint32_t(frame.size()));
        put32(std::uint32_t(frame.size()));
        data_ += frame;
    }

    // Claims more bytes than it writes, leaving a truncated tail.
    void add_truncated(std::int64_t ts_ns, std::uint32_t claimed,
                       const std::string& partial) {
        put32(std::uint32_t(ts_ns / 1'000'000'000));
        put32(0);
        put32(claimed);
        put32(claimed);
        data_ += partial;
    }

    const std::string& bytes() const { return data_; }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        out.write(data_.data(), std::streamsize(data_.size()));
        if (!out) throw std::runtime_error("fixture write failed: " + path);
    }

private:
    static std::string ethernet_header(std::uint16_t ethertype) {
        std::string h(12, '\x02');
        h += char(ethertype >> 8);
        h += char(ethertype & 0xFF);
        return h;
    }

    static std::string ipv4_header(const std::string& src, const std::string& dst,
                                   std::uint8_t proto, std::size_t l4_len) {
        std::string h;
        h += '\x45';
        h += '\x00';
        be16(h, std::uint16_t(20 + l4_len));
        be16(h, 0);     // id
        be16(h, 0);     // flags/fragment
        h += '\x40';    // ttl
        h += char(proto);
        be16(h, 0);     // checksum (not verified)
        be32(h, *telesift::parse_ipv4(src));
        be32(h, *telesift::parse_ipv4(dst));
        return h;
    }

    static std::string tcp_header(std::uint16_t sport, std::uint16_t dport,
                                  std::uint32_t seq, std::uint32_t ack,
                                  std::uint8_t flags) {
        std::string h;
        be16(h, sport);
        be16(h, dport);
        be32(h, seq);
        be32(h, ack);
        h += char(5 << 4);
        h += char(flags);
        be16(h, 65535);
        be16(h, 0);
        be16(h, 0);
        return h;
    }

    static void be16(std::string& out, std::uint16_t v) {
        out += char(v >> 8);
        out += char(v & 0xFF);
    }

    static void be32(std::string& out, std::uint32_t v) {
        out += char(v >> 24);
        out += char((v >> 16) & 0xFF);
        out += char((v >> 8) & 0xFF);
        out += char(v & 0xFF);
    }

    void put16(std::uint16_t v) {
        if (big_endian_) {
            data_ += char(v >> 8);
            data_ += char(v & 0xFF);
        } else {
            data_ += char(v & 0xFF);
            data_ += char(v >> 8);
        }
    }

    void put32(std::uint32_t v) {
        if (big_endian_) {
            data_ += char(v >> 24);
            data_ += char((v >> 16) & 0xFF);
            data_ += char((v >> 8) & 0xFF);
            data_ += char(v & 0xFF);
        } else {
            data_ += char(v & 0xFF);
            data_ += char((v >> 8) & 0xFF);
            data_ += char((v >> 16) & 0xFF);
            data_ += char(v >> 24);
        }
    }

    std::string data_;
    bool big_endian_;
    bool nanos_;
};

// ---- independent encoders (oracle side) ----

inline std::string percent_encode_all(const std::string& in) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : in) {
        out += '%';
        out += hex[c >> 4];
        out += hex[c & 0xF];
    }
    return out;
}

// Independent percent decoder used to cross-check url expansion.
inline std::string oracle_percent_decode(const std::string& in) {
    std::string out;
    for (std::size_t i = 0; i < in.size();) {
        auto hexval = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            return -1;
        };
        if (in[i] == '%' && i + 2 < in.size() && hexval(in[i + 1]) >= 0 &&
            hexval(in[i + 2]) >= 0) {
            out += char(hexval(in[i + 1]) * 16 + hexval(in[i + 2]));
            i += 3;
        } else {
            out += in[i++];
        }
    }
    return out;
}

inline std::string base64_encode(const std::string& in) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    std::size_t i = 0;
    for (; i + 2 < in.size(); i += 3) {
        std::uint32_t v = std::uint32_t(std::uint8_t(in[i])) << 16 |
                          std::uint32_t(std::uint8_t(in[i + 1])) << 8 |
                          std::uint8_t(in[i + 2]);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += alphabet[v & 63];
    }
    if (i + 1 == in.size()) {
        std::uint32_t v = std::uint32_t(std::uint8_t(in[i])) << 16;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == in.size()) {
        std::uint32_t v = std::uint32_t(std::uint8_t(in[i])) << 16 |
                          std::uint32_t(std::uint8_t(in[i + 1])) << 8;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::string gzip_compress(const std::string& in) {
    z_stream strm{};
    if (deflateInit2(&strm, Z_BEST_SPEED, Z_DEFLATED, 16 + MAX_WBITS, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw std::runtime_error("deflateInit2 failed");
    std::string out(in.size() + 128, '\0');
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
    strm.avail_in = uInt(in.size());
    strm.next_out = reinterpret_cast<Bytef*>(out.data());
    strm.avail_out = uInt(out.size());
    if (deflate(&strm, Z_FINISH) != Z_STREAM_END) {
        deflateEnd(&strm);
        throw std::runtime_error("deflate failed");
    }
    out.resize(out.size() - strm.avail_out);
    deflateEnd(&strm);
    return out;
}

inline std::string u_escape_all(const std::string& in) {
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned char c : in) {
        out += "\\u00";
        out += hex[c >> 4];
        out += hex[c & 0xF];
    }
    return out;
}

// Numeric HTML entities for expression delimiters (and '&' so the encoding
// stays reversible).
inline std::string html_entity_encode(const std::string& in) {
    std::string out;
    for (char c : in) {
        switch (c) {
        case '$': out += "&#36;"; break;
        case '{': out += "&#123;"; break;
        case '}': out += "&#125;"; break;
        case ':': out += "&#58;"; break;
        case '/': out += "&#47;"; break;
        case '&': out += "&#38;"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace fixtures
