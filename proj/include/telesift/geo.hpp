#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace telesift {

struct GeoInfo {
    std::string country_code = "ZZ";  // ISO 3166-1 alpha-2, "ZZ" = unknown
    std::uint32_t asn = 0;            // 0 = unknown
};

inline std::optional<std::uint32_t> parse_ipv4(const std::string& s) {
    std::uint32_t parts[4];
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos])))
            return std::nullopt;
        std::uint32_t v = 0;
        std::size_t digits = 0;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            v = v * 10 + std::uint32_t(s[pos] - '0');
            if (v > 255 || ++digits > 3) return std::nullopt;
            ++pos;
        }
        parts[i] = v;
        if (i < 3) {
            if (pos >= s.size() || s[pos] != '.') return std::nullopt;
            ++pos;
        }
    }
    if (pos != s.size()) return std::nullopt;
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3];
}

inline std::string format_ipv4(std::uint32_t ip) {
    return std::to_string((ip >> 24) & 255) + "." + std::to_string((ip >> 16) & 255) +
           "." + std::to_string((ip >> 8) & 255) + "." + std::to_string(ip & 255);
}

// Offline geolocation/ASN lookup over inclusive uint32 ranges.
//
// Source format: headerless CSV, one row per range:
//   range_start,range_end,country_code,asn
// Ranges must not overlap. Malformed rows abort the load; lookups never fail.
class GeoTable {
public:
    static GeoTable parse(std::istream& in, const std::string& origin = "<stream>") {
        GeoTable table;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            table.rows_.push_back(parse_row(line, origin, lineno));
        }
        std::sort(table.rows_.begin(), table.rows_.end(),
                  [](const Row& a, const Row& b) { return a.lo < b.lo; });
        for (std::size_t i = 1; i < table.rows_.size(); ++i) {
            if (table.rows_[i].lo <= table.rows_[i - 1].hi)
                throw std::runtime_error(origin + ": overlapping ranges at row starting " +
                                         std::to_string(table.rows_[i].lo));
        }
        return table;
    }

    static GeoTable load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open geolocation table: " + path);
        return parse(in, path);
    }

    GeoInfo lookup(std::uint32_t ip) const {
        auto it = std::upper_bound(rows_.begin(), rows_.end(), ip,
                                   [](std::uint32_t v, const Row& r) { return v < r.lo; });
        if (it == rows_.begin()) return {};
        --it;
        if (ip >= it->lo && ip <= it->hi) return it->info;
        return {};
    }

    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

private:
    struct Row {
        std::uint32_t lo = 0, hi = 0;
        GeoInfo info;
    };

    static Row parse_row(const std::string& line, const std::string& origin,
                         std::size_t lineno) {
        auto fail = [&](const std::string& why) -> std::runtime_error {
            return std::runtime_error(origin + ":" + std::to_string(lineno) + ": " + why);
        };
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4) throw fail("expected 4 fields, got " +
                                           std::to_string(fields.size()));
        Row row;
        try {
            row.lo = std::uint32_t(std::stoul(fields[0]));
            row.hi = std::uint32_t(std::stoul(fields[1]));
            row.info.asn = std::uint32_t(std::stoul(fields[3]));
        } catch (const std::exception&) {
            throw fail("non-numeric range or asn");
        }
        if (row.lo > row.hi) throw fail("range start exceeds range end");
        if (fields[2].size() != 2 ||
            !std::isalpha(static_cast<unsigned char>(fields[2][0])) ||
            !std::isalpha(static_cast<unsigned char>(fields[2][1])))
            throw fail("country code must be two letters");
        row.info.country_code = fields[2];
        for (auto& c : row.info.country_code)
            c = char(std::toupper(static_cast<unsigned char>(c)));
        return row;
    }

    std::vector<Row> rows_;
};

}  // namespace telesift
