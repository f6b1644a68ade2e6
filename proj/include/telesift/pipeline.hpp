#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "telesift/capture.hpp"
#include "telesift/decode.hpp"
#include "telesift/detect.hpp"
#include "telesift/geo.hpp"
#include "telesift/reassembly.hpp"
#include "telesift/records.hpp"
#include "telesift/report.hpp"

namespace telesift {

struct RunConfig {
    std::vector<std::string> inputs;  // capture files
    std::string geo_db_path;          // empty: no enrichment, everything ZZ/0
    std::int32_t tz_offset_s = 0;
    double session_gap_s = 300.0;
    DecodeConfig decode;
    ClassifyConfig classify;
    double threshold_percent = 79.0;
    std::string out_dir = "out";
    std::string stream_dump_path;  // optional debug dump of reassembled streams

    void validate() const {
        if (inputs.empty()) throw std::invalid_argument("no input captures given");
        if (session_gap_s <= 0) throw std::invalid_argument("session gap must be positive");
        if (decode.max_depth < 1) throw std::invalid_argument("max depth must be >= 1");
        if (threshold_percent <= 0 || threshold_percent > 100)
            throw std::invalid_argument("threshold must be in (0, 100]");
        if (out_dir.empty()) throw std::invalid_argument("output directory required");
    }
};

struct RunSummary {
    std::uint64_t packets_read = 0;
    std::uint64_t packets_skipped = 0;
    std::uint64_t truncated_files = 0;
    std::uint64_t connections = 0;
    std::uint64_t payload_connections = 0;
    std::uint64_t detections = 0;
    std::uint64_t tier1_detections = 0;      // scheme-complete jndi expressions
    std::uint64_t obfuscated_detections = 0;
    std::uint64_t weak_only_detections = 0;
    std::map<std::string, std::uint64_t> severity_histogram;
    std::map<std::string, double> stage_ms;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["packets_read"] = packets_read;
        j["packets_skipped"] = packets_skipped;
        j["truncated_files"] = truncated_files;
        j["connections"] = connections;
        j["payload_connections"] = payload_connections;
        j["detections"] = detections;
        j["tier1_detections"] = tier1_detections;
        j["obfuscated_detections"] = obfuscated_detections;
        j["weak_only_detections"] = weak_only_detections;
        j["severity_histogram"] = severity_histogram;
        j["stage_ms"] = stage_ms;
        return j;
    }
};

namespace detail {

class StageClock {
public:
    explicit StageClock(std::map<std::string, double>& sink) : sink_(sink) {}
    void lap(const std::string& stage) {
        auto now = std::chrono::steady_clock::now();
        sink_[stage] = std::chrono::duration<double, std::milli>(now - last_).count();
        last_ = now;
    }

private:
    std::map<std::string, double>& sink_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// One reassembled connection analyzed end to end. The initiator's byte
// stream is decoded (falling back to the reverse direction when the
// initiator sent nothing), detection runs over all candidates, and the
// responder address doubles as the self-reference token for L2.
inline std::optional<DetectionRecord> analyze_stream(const ReassembledStream& stream,
                                                     const RunConfig& cfg,
                                                     const GeoTable& geo) {
    const std::string& payload = !stream.from_initiator().empty()
                                     ? stream.from_initiator()
                                     : stream.to_initiator();
    if (payload.empty()) return std::nullopt;

    auto decoded = decode_payload(payload, cfg.decode);
    auto detection = detect_payload(decoded);
    if (!detection) return std::nullopt;

    Endpoint scanner = stream.initiator;
    Endpoint target = stream.initiator == stream.key.a ? stream.key.b : stream.key.a;

    ClassifyConfig classify_cfg = cfg.classify;
    classify_cfg.telescope_address = format_ipv4(target.ip);
    detection->severity = classify_severity(*detection, decoded, classify_cfg);

    DetectionRecord rec;
    rec.ts_ns = stream.first_ts;
    rec.src_ip = format_ipv4(scanner.ip);
    rec.src_port = scanner.port;
    rec.dst_ip = format_ipv4(target.ip);
    rec.dst_port = target.port;
    auto src_geo = geo.lookup(scanner.ip);
    rec.src_country = src_geo.country_code;
    rec.src_asn = src_geo.asn;
    rec.expressions = detection->expressions;
    for (const auto& ep : detection->endpoints) {
        DetectionRecord::Endpoint out;
        out.ep = ep;
        if (ep.is_ip_literal) {
            auto host_geo = geo.lookup(*parse_ipv4(ep.host));
            out.host_country = host_geo.country_code;
            out.host_asn = host_geo.asn;
        }
        rec.endpoints.push_back(std::move(out));
    }
    rec.obfuscated = detection->obfuscated;
    rec.weak_only = detection->weak_only;
    rec.severity = detection->severity;
    rec.printable_ratio = detection->printable_ratio;
    rec.transform_count = detection->valid_transform_count;
    rec.byte_length = detection->byte_length;
    rec.matched_candidate = detection->matched_candidate;
    return rec;
}

struct RunResult {
    RunSummary summary;
    std::vector<DetectionRecord> detections;
};

inline RunResult run_pipeline_in_memory(const RunConfig& cfg) {
    cfg.validate();
    RunResult result;
    auto& summary = result.summary;
    detail::StageClock clock(summary.stage_ms);

    GeoTable geo;
    if (!cfg.geo_db_path.empty()) geo = GeoTable::load(cfg.geo_db_path);

    std::vector<PacketRecord> records;
    for (const auto& path : cfg.inputs) {
        auto stats = read_capture_file(path, records);
        summary.packets_read += stats.records;
        summary.packets_skipped += stats.skipped;
        if (stats.truncated_tail) ++summary.truncated_files;
    }
    clock.lap("ingest");

    auto streams = reassemble_all(records, cfg.session_gap_s);
    summary.connections = streams.size();
    for (const auto& s : streams)
        if (s.payload_bytes() > 0) ++summary.payload_connections;
    if (!cfg.stream_dump_path.empty()) {
        std::ofstream dump(cfg.stream_dump_path, std::ios::binary);
        if (!dump) throw std::runtime_error("cannot write stream dump: " +
                                            cfg.stream_dump_path);
        dump_streams(dump, streams);
    }
    clock.lap("reassemble");

    for (const auto& stream : streams) {
        auto rec = analyze_stream(stream, cfg, geo);
        if (!rec) continue;
        ++summary.detections;
        bool tier1 = false;
        for (const auto& expr : rec->expressions)
            if (expr.scheme_complete()) tier1 = true;
        if (tier1) ++summary.tier1_detections;
        if (rec->obfuscated) ++summary.obfuscated_detections;
        if (rec->weak_only) ++summary.weak_only_detections;
        ++summary.severity_histogram[std::string(severity_name(rec->severity))];
        result.detections.push_back(std::move(*rec));
    }
    clock.lap("decode_detect");
    return result;
}

// Full run: analysis plus detections.jsonl and summary.json in out_dir.
inline RunSummary run_pipeline(const RunConfig& cfg) {
    auto result = run_pipeline_in_memory(cfg);
    detail::StageClock clock(result.summary.stage_ms);

    std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "detections.jsonl", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write detections.jsonl");
        write_detections(out, result.detections);
    }
    clock.lap("export");
    {
        std::ofstream out(dir / "summary.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write summary.json");
        out << result.summary.to_json().dump(2) << '\n';
    }
    return result.summary;
}

// Standalone decode mode: the full candidate ledger for one payload plus
// the detection verdict.
struct DecodeReport {
    DecodedPayload decoded;
    std::optional<DetectionResult> detection;
};

inline DecodeReport decode_one(const std::string& raw, const RunConfig& cfg = {}) {
    DecodeReport report;
    report.decoded = decode_payload(raw, cfg.decode);
    report.detection = detect_payload(report.decoded);
    if (report.detection)
        report.detection->severity =
            classify_severity(*report.detection, report.decoded, cfg.classify);
    return report;
}

}  // namespace telesift
