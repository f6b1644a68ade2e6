#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "telesift/daytime.hpp"

namespace telesift {

// One detection occurrence tied to a callback host, flattened for
// aggregation: a detection with several endpoints contributes one event per
// endpoint.
struct HostEvent {
    DayIndex day = 0;
    std::string scanner;  // scanner identity (source IP text)
    std::string host;     // literal callback host string, IP or domain
};

struct HostTimeline {
    std::string host;
    DayIndex first_seen = 0;
    DayIndex last_seen = 0;
    std::uint64_t request_volume = 0;
    std::uint64_t distinct_scanners = 0;

    std::int64_t lifetime_days() const { return std::int64_t(last_seen) - first_seen + 1; }
};

// One timeline per distinct host string, ordered by host.
inline std::vector<HostTimeline> callback_timelines(std::span<const HostEvent> events) {
    struct Acc {
        DayIndex first = 0, last = 0;
        std::uint64_t volume = 0;
        std::set<std::string> scanners;
        bool init = false;
    };
    std::map<std::string, Acc> by_host;
    for (const auto& ev : events) {
        auto& acc = by_host[ev.host];
        if (!acc.init) {
            acc.first = acc.last = ev.day;
            acc.init = true;
        } else {
            acc.first = std::min(acc.first, ev.day);
            acc.last = std::max(acc.last, ev.day);
        }
        ++acc.volume;
        acc.scanners.insert(ev.scanner);
    }
    std::vector<HostTimeline> out;
    out.reserve(by_host.size());
    for (const auto& [host, acc] : by_host)
        out.push_back({host, acc.first, acc.last, acc.volume, acc.scanners.size()});
    return out;
}

// Left-closed right-open buckets over strictly increasing edges; the last
// bucket is open-ended, values below the first edge clamp into bucket 0.
inline std::size_t bucket_index(double value, std::span<const double> edges) {
    std::size_t idx = 0;
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (value >= edges[i])
            idx = i;
        else
            break;
    return idx;
}

inline std::vector<double> default_lifetime_edges() { return {1, 2, 8, 31, 181}; }

inline std::vector<double> default_volume_edges() { return {1, 10, 100, 1000, 10000}; }

struct BucketMatrix {
    std::vector<double> row_edges;  // lifetime
    std::vector<double> col_edges;  // volume
    std::vector<std::vector<std::uint64_t>> cells;

    std::uint64_t total() const {
        std::uint64_t sum = 0;
        for (const auto& row : cells)
            for (auto v : row) sum += v;
        return sum;
    }
};

inline BucketMatrix lifetime_volume_matrix(std::span<const HostTimeline> timelines,
                                           std::vector<double> lifetime_edges,
                                           std::vector<double> volume_edges) {
    BucketMatrix m;
    m.row_edges = std::move(lifetime_edges);
    m.col_edges = std::move(volume_edges);
    m.cells.assign(m.row_edges.size(),
                   std::vector<std::uint64_t>(m.col_edges.size(), 0));
    for (const auto& tl : timelines) {
        std::size_t r = bucket_index(double(tl.lifetime_days()), m.row_edges);
        std::size_t c = bucket_index(double(tl.request_volume), m.col_edges);
        ++m.cells[r][c];
    }
    return m;
}

// Five-number summary with linearly interpolated quantiles.
struct DistributionSummary {
    std::size_t count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

inline double quantile_linear(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    double h = p * double(sorted.size() - 1);
    std::size_t lo = std::size_t(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - double(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline DistributionSummary summarize(std::vector<double> values) {
    DistributionSummary s;
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    s.count = values.size();
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile_linear(values, 0.25);
    s.median = quantile_linear(values, 0.50);
    s.q3 = quantile_linear(values, 0.75);
    return s;
}

// Distribution of scanner reuse per lifetime category. Empty categories come
// back as nullopt.
inline std::vector<std::optional<DistributionSummary>> reuse_by_lifetime(
    std::span<const HostTimeline> timelines, std::span<const double> lifetime_edges) {
    std::vector<std::vector<double>> groups(lifetime_edges.size());
    for (const auto& tl : timelines)
        groups[bucket_index(double(tl.lifetime_days()), lifetime_edges)].push_back(
            double(tl.distinct_scanners));
    std::vector<std::optional<DistributionSummary>> out;
    out.reserve(groups.size());
    for (auto& g : groups) {
        if (g.empty())
            out.push_back(std::nullopt);
        else
            out.push_back(summarize(std::move(g)));
    }
    return out;
}

// Running distinct-key count, one point per day present in the input.
// Events must be sorted by day.
inline std::vector<std::pair<DayIndex, std::size_t>> cumulative_unique(
    std::span<const std::pair<DayIndex, std::string>> events) {
    std::vector<std::pair<DayIndex, std::size_t>> out;
    std::set<std::string> seen;
    for (const auto& [day, key] : events) {
        seen.insert(key);
        if (!out.empty() && out.back().first == day)
            out.back().second = seen.size();
        else
            out.emplace_back(day, seen.size());
    }
    return out;
}

struct ShareEntry {
    std::string key;
    std::uint64_t count = 0;
    double percent = 0.0;
};

struct ShareTable {
    std::vector<ShareEntry> entries;  // descending count, then ascending key
    std::uint64_t total = 0;
};

// Counts and percentage shares per key; percents sum to 100 over all keys.
inline ShareTable make_share_table(const std::map<std::string, std::uint64_t>& counts) {
    ShareTable table;
    for (const auto& [key, count] : counts) {
        table.total += count;
        table.entries.push_back({key, count, 0.0});
    }
    std::sort(table.entries.begin(), table.entries.end(),
              [](const ShareEntry& a, const ShareEntry& b) {
                  if (a.count != b.count) return a.count > b.count;
                  return a.key < b.key;
              });
    if (table.total > 0)
        for (auto& e : table.entries)
            e.percent = 100.0 * double(e.count) / double(table.total);
    return table;
}

inline ShareTable dimension_shares(std::span<const std::string> keys) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& k : keys) ++counts[k];
    return make_share_table(counts);
}

// Cross-tabulation of scanner country vs callback-host country; each cell
// is the row share in percent, so each row with any detections sums to 100.
struct CountryCrossTab {
    std::vector<std::string> rows;  // scanner countries
    std::vector<std::string> cols;  // host countries
    std::vector<std::vector<std::uint64_t>> counts;
    std::vector<std::vector<double>> shares;
};

inline CountryCrossTab scanner_host_matrix(
    std::span<const std::pair<std::string, std::string>> pairs) {
    std::map<std::string, std::map<std::string, std::uint64_t>> tab;
    std::set<std::string> col_set;
    for (const auto& [scanner, host] : pairs) {
        ++tab[scanner][host];
        col_set.insert(host);
    }
    CountryCrossTab out;
    out.cols.assign(col_set.begin(), col_set.end());
    for (const auto& [scanner, row] : tab) {
        out.rows.push_back(scanner);
        std::vector<std::uint64_t> counts(out.cols.size(), 0);
        std::uint64_t total = 0;
        for (std::size_t c = 0; c < out.cols.size(); ++c) {
            auto it = row.find(out.cols[c]);
            counts[c] = it == row.end() ? 0 : it->second;
            total += counts[c];
        }
        std::vector<double> shares(out.cols.size(), 0.0);
        if (total > 0)
            for (std::size_t c = 0; c < out.cols.size(); ++c)
                shares[c] = 100.0 * double(counts[c]) / double(total);
        out.counts.push_back(std::move(counts));
        out.shares.push_back(std::move(shares));
    }
    return out;
}

}  // namespace telesift
