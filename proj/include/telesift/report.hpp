#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "telesift/infra.hpp"
#include "telesift/records.hpp"
#include "telesift/temporal.hpp"

namespace telesift {

namespace csv {

inline std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string format(double v) {
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace csv

// Human-readable label for bucket i over the given edges, e.g. "2-7", ">=181".
inline std::string bucket_label(std::span<const double> edges, std::size_t i) {
    auto num = [](double v) {
        std::int64_t n = std::int64_t(v);
        return double(n) == v ? std::to_string(n) : csv::format(v);
    };
    if (i + 1 >= edges.size()) return ">=" + num(edges[i]);
    if (edges[i + 1] - edges[i] == 1.0) return num(edges[i]);
    return num(edges[i]) + "-" + num(edges[i + 1] - 1);
}

inline std::ofstream open_report(const std::filesystem::path& dir,
                                 const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report file: " + name);
    return out;
}

// ---- share views (per-year dimension breakdowns) ----

inline void write_share_csv(std::ostream& out, const std::string& dimension,
                            const std::map<int, ShareTable>& by_year) {
    out << "year," << dimension << ",count,percent\n";
    for (const auto& [year, table] : by_year)
        for (const auto& e : table.entries)
            out << year << ',' << csv::escape(e.key) << ',' << e.count << ','
                << csv::format(e.percent) << '\n';
}

struct ShareViews {
    std::map<int, ShareTable> scanner_country;
    std::map<int, ShareTable> host_country;
    std::map<int, ShareTable> dst_port;
    std::map<int, ShareTable> scheme;
    std::map<int, ShareTable> scanner_asn;
};

inline ShareViews build_share_views(const std::vector<DetectionRecord>& records,
                                    std::int32_t tz_offset_s) {
    std::map<int, std::map<std::string, std::uint64_t>> scanner, host, port, scheme, asn;
    for (const auto& rec : records) {
        int year = day_year(day_of(rec.ts_ns, tz_offset_s));
        ++scanner[year][rec.src_country];
        ++port[year][std::to_string(rec.dst_port)];
        ++asn[year]["AS" + std::to_string(rec.src_asn)];
        for (const auto& ep : rec.endpoints) ++host[year][ep.host_country];
        for (const auto& expr : rec.expressions)
            if (expr.scheme_complete()) ++scheme[year][expr.scheme];
    }
    ShareViews views;
    for (const auto& [y, counts] : scanner) views.scanner_country[y] = make_share_table(counts);
    for (const auto& [y, counts] : host) views.host_country[y] = make_share_table(counts);
    for (const auto& [y, counts] : port) views.dst_port[y] = make_share_table(counts);
    for (const auto& [y, counts] : scheme) views.scheme[y] = make_share_table(counts);
    for (const auto& [y, counts] : asn) views.scanner_asn[y] = make_share_table(counts);
    return views;
}

inline void export_shares(const std::vector<DetectionRecord>& records,
                          const std::filesystem::path& dir, std::int32_t tz_offset_s) {
    auto views = build_share_views(records, tz_offset_s);
    {
        auto out = open_report(dir, "scanner_country_shares.csv");
        write_share_csv(out, "country", views.scanner_country);
    }
    {
        auto out = open_report(dir, "host_country_shares.csv");
        write_share_csv(out, "country", views.host_country);
    }
    {
        auto out = open_report(dir, "dst_port_shares.csv");
        write_share_csv(out, "port", views.dst_port);
    }
    {
        auto out = open_report(dir, "scheme_shares.csv");
        write_share_csv(out, "scheme", views.scheme);
    }
    {
        auto out = open_report(dir, "scanner_asn_shares.csv");
        write_share_csv(out, "asn", views.scanner_asn);
    }
}

// ---- infrastructure views ----

inline std::vector<HostEvent> host_events(const std::vector<DetectionRecord>& records,
                                          std::int32_t tz_offset_s) {
    std::vector<HostEvent> events;
    for (const auto& rec : records)
        for (const auto& ep : rec.endpoints)
            events.push_back(
                {day_of(rec.ts_ns, tz_offset_s), rec.src_ip, ep.ep.host});
    return events;
}

inline void export_infra(const std::vector<DetectionRecord>& records,
                         const std::filesystem::path& dir, std::int32_t tz_offset_s) {
    auto events = host_events(records, tz_offset_s);
    auto timelines = callback_timelines(events);

    {
        auto out = open_report(dir, "host_timelines.csv");
        out << "host,first_seen,last_seen,lifetime_days,request_volume,"
               "distinct_scanners\n";
        for (const auto& tl : timelines)
            out << csv::escape(tl.host) << ',' << day_to_string(tl.first_seen) << ','
                << day_to_string(tl.last_seen) << ',' << tl.lifetime_days() << ','
                << tl.request_volume << ',' << tl.distinct_scanners << '\n';
    }
    {
        auto matrix = lifetime_volume_matrix(timelines, default_lifetime_edges(),
                                             default_volume_edges());
        auto out = open_report(dir, "lifetime_volume_matrix.csv");
        out << "lifetime_days,request_volume,hosts\n";
        for (std::size_t r = 0; r < matrix.cells.size(); ++r)
            for (std::size_t c = 0; c < matrix.cells[r].size(); ++c)
                out << bucket_label(matrix.row_edges, r) << ','
                    << bucket_label(matrix.col_edges, c) << ',' << matrix.cells[r][c]
                    << '\n';
    }
    {
        auto edges = default_lifetime_edges();
        auto summaries = reuse_by_lifetime(timelines, edges);
        auto out = open_report(dir, "reuse_by_lifetime.csv");
        out << "lifetime_days,hosts,min,q1,median,q3,max\n";
        for (std::size_t i = 0; i < summaries.size(); ++i) {
            out << bucket_label(edges, i) << ',';
            if (summaries[i])
                out << summaries[i]->count << ',' << csv::format(summaries[i]->min)
                    << ',' << csv::format(summaries[i]->q1) << ','
                    << csv::format(summaries[i]->median) << ','
                    << csv::format(summaries[i]->q3) << ','
                    << csv::format(summaries[i]->max) << '\n';
            else
                out << "0,,,,,\n";
        }
    }

    auto write_cumulative = [&](const std::string& name, auto key_of) {
        std::vector<std::pair<DayIndex, std::string>> events2;
        for (const auto& rec : records) {
            auto day = day_of(rec.ts_ns, tz_offset_s);
            for (auto&& key : key_of(rec)) events2.emplace_back(day, key);
        }
        std::stable_sort(events2.begin(), events2.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        auto series = cumulative_unique(events2);
        auto out = open_report(dir, name);
        out << "date,cumulative_unique\n";
        for (const auto& [day, count] : series)
            out << day_to_string(day) << ',' << count << '\n';
    };
    write_cumulative("cumulative_scanner_ips.csv",
                     [](const DetectionRecord& r) -> std::vector<std::string> {
                         return {r.src_ip};
                     });
    write_cumulative("cumulative_scanner_asns.csv",
                     [](const DetectionRecord& r) -> std::vector<std::string> {
                         return {"AS" + std::to_string(r.src_asn)};
                     });
    write_cumulative("cumulative_host_ips.csv",
                     [](const DetectionRecord& r) {
                         std::vector<std::string> keys;
                         for (const auto& ep : r.endpoints)
                             if (ep.ep.is_ip_literal) keys.push_back(ep.ep.host);
                         return keys;
                     });
    write_cumulative("cumulative_host_asns.csv",
                     [](const DetectionRecord& r) {
                         std::vector<std::string> keys;
                         for (const auto& ep : r.endpoints)
                             if (ep.host_asn != 0)
                                 keys.push_back("AS" + std::to_string(ep.host_asn));
                         return keys;
                     });

    {
        // Scanner country vs referenced host country, per year.
        std::map<int, std::vector<std::pair<std::string, std::string>>> pairs;
        for (const auto& rec : records) {
            int year = day_year(day_of(rec.ts_ns, tz_offset_s));
            for (const auto& ep : rec.endpoints)
                pairs[year].emplace_back(rec.src_country, ep.host_country);
        }
        auto out = open_report(dir, "scanner_host_matrix.csv");
        out << "year,scanner_country,host_country,count,row_percent\n";
        for (const auto& [year, p] : pairs) {
            auto tab = scanner_host_matrix(p);
            for (std::size_t r = 0; r < tab.rows.size(); ++r)
                for (std::size_t c = 0; c < tab.cols.size(); ++c)
                    if (tab.counts[r][c] > 0)
                        out << year << ',' << tab.rows[r] << ',' << tab.cols[c] << ','
                            << tab.counts[r][c] << ',' << csv::format(tab.shares[r][c])
                            << '\n';
        }
    }
    {
        // Scanner country vs monitored destination address, per year.
        std::map<int, std::vector<std::pair<std::string, std::string>>> pairs;
        for (const auto& rec : records)
            pairs[day_year(day_of(rec.ts_ns, tz_offset_s))].emplace_back(
                rec.src_country, rec.dst_ip);
        auto out = open_report(dir, "scanner_dst_matrix.csv");
        out << "year,scanner_country,dst_ip,count,row_percent\n";
        for (const auto& [year, p] : pairs) {
            auto tab = scanner_host_matrix(p);
            for (std::size_t r = 0; r < tab.rows.size(); ++r)
                for (std::size_t c = 0; c < tab.cols.size(); ++c)
                    if (tab.counts[r][c] > 0)
                        out << year << ',' << tab.rows[r] << ',' << tab.cols[c] << ','
                            << tab.counts[r][c] << ',' << csv::format(tab.shares[r][c])
                            << '\n';
        }
    }
    {
        std::map<DayIndex, std::uint64_t> daily;
        for (const auto& rec : records) ++daily[day_of(rec.ts_ns, tz_offset_s)];
        auto out = open_report(dir, "daily_incidence.csv");
        out << "date,detections\n";
        for (const auto& [day, count] : daily)
            out << day_to_string(day) << ',' << count << '\n';
    }
    {
        std::map<std::string, std::uint64_t> hist;
        for (const auto& rec : records)
            ++hist[std::string(severity_name(rec.severity))];
        auto out = open_report(dir, "severity_histogram.csv");
        out << "severity,count\n";
        for (const auto& [level, count] : hist) out << level << ',' << count << '\n';
    }
}

// ---- monthly / temporal views ----

inline MonthlyMatrix monthly_matrix(const std::vector<DetectionRecord>& records,
                                    std::int32_t tz_offset_s) {
    MonthlyMatrix m;
    for (const auto& rec : records) {
        auto day = day_of(rec.ts_ns, tz_offset_s);
        m.add(day_year(day), day_month(day));
    }
    return m;
}

// Years with fewer populated months than min_months are excluded from the
// trend table (partial coverage distorts intra-annual shapes).
inline void export_monthly(const MonthlyMatrix& matrix,
                           const std::filesystem::path& dir, double threshold_percent,
                           int min_months = 2) {
    {
        auto out = open_report(dir, "monthly_counts.csv");
        out << "year,month,count\n";
        for (const auto& [year, row] : matrix.counts)
            for (int m = 1; m <= 12; ++m)
                out << year << ',' << m << ',' << row[std::size_t(m - 1)] << '\n';
    }
    auto out_dist = open_report(dir, "monthly_distribution.csv");
    out_dist << "year,month,percent,cumulative_percent\n";
    auto out_trend = open_report(dir, "year_trend.csv");
    out_trend << "year,m_star,p_hat_m_star,a_v\n";
    for (int year : matrix.years()) {
        if (matrix.total(year) == 0) continue;
        auto dist = year_trend(matrix, year, threshold_percent);
        for (int m = 1; m <= 12; ++m)
            out_dist << year << ',' << m << ','
                     << csv::format(dist.p[std::size_t(m - 1)]) << ','
                     << csv::format(dist.p_hat[std::size_t(m - 1)]) << '\n';
        int populated = 0;
        for (auto c : matrix.counts.at(year))
            if (c > 0) ++populated;
        if (populated < min_months || dist.m_star < 2) continue;
        out_trend << year << ',' << dist.m_star << ','
                  << csv::format(dist.p_hat[std::size_t(dist.m_star - 1)]) << ','
                  << csv::format(dist.a_v) << '\n';
    }
}

inline MonthlyMatrix read_monthly_csv(std::istream& in) {
    MonthlyMatrix m;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = csv::split(line);
        if (first) {
            first = false;
            if (!fields.empty() && fields[0] == "year") continue;  // header
        }
        if (fields.size() != 3)
            throw std::runtime_error("monthly matrix rows need year,month,count");
        m.add(std::stoi(fields[0]), std::stoi(fields[1]),
              std::stoull(fields[2]));
    }
    return m;
}

// (t, value) rows, optional header.
inline std::vector<std::pair<double, double>> read_points_csv(std::istream& in) {
    std::vector<std::pair<double, double>> points;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = csv::split(line);
        if (fields.size() < 2) throw std::runtime_error("point rows need t,value");
        try {
            points.emplace_back(std::stod(fields[0]), std::stod(fields[1]));
        } catch (const std::exception&) {
            if (points.empty()) continue;  // header line
            throw std::runtime_error("malformed point row: " + line);
        }
    }
    return points;
}

inline void export_fit(const LogisticParams& fit, const std::filesystem::path& dir,
                       double band_from, double band_to, double band_step = 0.25) {
    {
        auto out = open_report(dir, "fit_report.csv");
        out << "parameter,value\n";
        out << "L," << csv::format(fit.L) << '\n';
        out << "k," << csv::format(fit.k) << '\n';
        out << "t0," << csv::format(fit.t0) << '\n';
        out << "ssr," << csv::format(fit.ssr) << '\n';
        out << "iterations," << fit.iterations << '\n';
        out << "n," << fit.n << '\n';
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                out << "cov_" << a << b << ',' << csv::format(fit.covariance[a][b])
                    << '\n';
    }
    {
        auto out = open_report(dir, "fit_band.csv");
        out << "t,mean,se,lo95,hi95\n";
        for (double t = band_from; t <= band_to + 1e-9; t += band_step) {
            auto band = logistic_band(fit, t);
            out << csv::format(t) << ',' << csv::format(band.mean) << ','
                << csv::format(band.se) << ',' << csv::format(band.lo) << ','
                << csv::format(band.hi) << '\n';
        }
    }
}

inline void export_correlation(const CorrelationResult& res,
                               const std::filesystem::path& dir) {
    auto out = open_report(dir, "correlation.csv");
    out << "r,p_value,n\n";
    out << csv::format(res.r) << ',' << csv::format(res.p_value) << ',' << res.n
        << '\n';
}

}  // namespace telesift
