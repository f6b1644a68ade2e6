#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "telesift/daytime.hpp"
#include "telesift/detect.hpp"
#include "telesift/geo.hpp"

namespace telesift {

// One detection, flattened for export: one JSON object per line.
struct DetectionRecord {
    NsTime ts_ns = 0;
    std::string src_ip;
    std::uint16_t src_port = 0;
    std::string dst_ip;
    std::uint16_t dst_port = 0;
    std::string src_country = "ZZ";
    std::uint32_t src_asn = 0;
    std::vector<JndiExpression> expressions;
    struct Endpoint {
        CallbackEndpoint ep;
        std::string host_country = "ZZ";
        std::uint32_t host_asn = 0;
    };
    std::vector<Endpoint> endpoints;
    bool obfuscated = false;
    bool weak_only = false;
    Severity severity = Severity::L5;
    double printable_ratio = 0.0;
    int transform_count = 0;
    std::uint64_t byte_length = 0;
    int matched_candidate = 0;
};

inline nlohmann::ordered_json record_to_json(const DetectionRecord& rec) {
    nlohmann::ordered_json j;
    j["ts"] = rec.ts_ns;
    j["src_ip"] = rec.src_ip;
    j["src_port"] = rec.src_port;
    j["dst_ip"] = rec.dst_ip;
    j["dst_port"] = rec.dst_port;
    j["src_country"] = rec.src_country;
    j["src_asn"] = rec.src_asn;
    j["expressions"] = nlohmann::ordered_json::array();
    for (const auto& expr : rec.expressions)
        j["expressions"].push_back({{"scheme", expr.scheme},
                                    {"endpoint", expr.endpoint_text},
                                    {"normalized", expr.normalized}});
    j["endpoints"] = nlohmann::ordered_json::array();
    for (const auto& ep : rec.endpoints)
        j["endpoints"].push_back({{"host", ep.ep.host},
                                  {"is_ip", ep.ep.is_ip_literal},
                                  {"port", ep.ep.port},
                                  {"scheme", ep.ep.scheme},
                                  {"path", ep.ep.path},
                                  {"host_country", ep.host_country},
                                  {"host_asn", ep.host_asn}});
    j["obfuscated"] = rec.obfuscated;
    j["weak_only"] = rec.weak_only;
    j["severity"] = std::string(severity_name(rec.severity));
    j["printable_ratio"] = rec.printable_ratio;
    j["transform_count"] = rec.transform_count;
    j["byte_length"] = rec.byte_length;
    j["matched_candidate"] = rec.matched_candidate;
    return j;
}

inline DetectionRecord record_from_json(const nlohmann::json& j) {
    DetectionRecord rec;
    rec.ts_ns = j.at("ts").get<NsTime>();
    rec.src_ip = j.at("src_ip").get<std::string>();
    rec.src_port = j.at("src_port").get<std::uint16_t>();
    rec.dst_ip = j.at("dst_ip").get<std::string>();
    rec.dst_port = j.at("dst_port").get<std::uint16_t>();
    rec.src_country = j.at("src_country").get<std::string>();
    rec.src_asn = j.at("src_asn").get<std::uint32_t>();
    for (const auto& e : j.at("expressions")) {
        JndiExpression expr;
        expr.scheme = e.at("scheme").get<std::string>();
        expr.endpoint_text = e.at("endpoint").get<std::string>();
        expr.normalized = e.at("normalized").get<std::string>();
        rec.expressions.push_back(std::move(expr));
    }
    for (const auto& e : j.at("endpoints")) {
        DetectionRecord::Endpoint ep;
        ep.ep.host = e.at("host").get<std::string>();
        ep.ep.is_ip_literal = e.at("is_ip").get<bool>();
        ep.ep.port = e.at("port").get<int>();
        ep.ep.scheme = e.at("scheme").get<std::string>();
        ep.ep.path = e.at("path").get<std::string>();
        ep.host_country = e.at("host_country").get<std::string>();
        ep.host_asn = e.at("host_asn").get<std::uint32_t>();
        rec.endpoints.push_back(std::move(ep));
    }
    rec.obfuscated = j.at("obfuscated").get<bool>();
    rec.weak_only = j.at("weak_only").get<bool>();
    auto severity = severity_from_name(j.at("severity").get<std::string>());
    if (!severity) throw std::runtime_error("unknown severity level");
    rec.severity = *severity;
    rec.printable_ratio = j.at("printable_ratio").get<double>();
    rec.transform_count = j.at("transform_count").get<int>();
    rec.byte_length = j.at("byte_length").get<std::uint64_t>();
    rec.matched_candidate = j.at("matched_candidate").get<int>();
    return rec;
}

inline void write_detections(std::ostream& out,
                             const std::vector<DetectionRecord>& records) {
    for (const auto& rec : records) out << record_to_json(rec).dump() << '\n';
}

struct DetectionFile {
    std::vector<DetectionRecord> records;
    std::size_t skipped_lines = 0;  // malformed lines, counted and dropped
};

inline DetectionFile read_detections(std::istream& in) {
    DetectionFile out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception&) {
            ++out.skipped_lines;
        }
    }
    return out;
}

inline DetectionFile read_detections_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open detection records: " + path);
    return read_detections(in);
}

}  // namespace telesift
