// telesift: reconstructs application payloads from packet captures, decodes
// Log4Shell exploit expressions, classifies them by severity, and emits the
// longitudinal analytics views.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "telesift/pipeline.hpp"

using namespace telesift;

namespace {

std::string printable_preview(const std::string& text, std::size_t limit = 200) {
    std::string out;
    for (unsigned char c : text) {
        if (out.size() >= limit) {
            out += "...";
            break;
        }
        if ((c >= 0x20 && c <= 0x7E) || c == ' ') {
            out += char(c);
        } else {
            char buf[5];
            std::snprintf(buf, sizeof(buf), "\\x%02X", c);
            out += buf;
        }
    }
    return out;
}

std::string read_payload_source(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open payload file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_summary(const RunSummary& summary, const std::string& out_dir) {
    std::printf("packets read:        %llu (skipped %llu, truncated files %llu)\n",
                (unsigned long long)summary.packets_read,
                (unsigned long long)summary.packets_skipped,
                (unsigned long long)summary.truncated_files);
    std::printf("connections:         %llu (payload-bearing %llu)\n",
                (unsigned long long)summary.connections,
                (unsigned long long)summary.payload_connections);
    std::printf("detections:          %llu (tier1 %llu, obfuscated %llu, weak-only %llu)\n",
                (unsigned long long)summary.detections,
                (unsigned long long)summary.tier1_detections,
                (unsigned long long)summary.obfuscated_detections,
                (unsigned long long)summary.weak_only_detections);
    std::printf("severity:           ");
    for (const char* level : {"L1", "L2", "L3", "L4", "L5"}) {
        auto it = summary.severity_histogram.find(level);
        std::printf(" %s=%llu", level,
                    (unsigned long long)(it == summary.severity_histogram.end()
                                             ? 0
                                             : it->second));
    }
    std::printf("\nstage times (ms):   ");
    for (const auto& [stage, ms] : summary.stage_ms)
        std::printf(" %s=%.1f", stage.c_str(), ms);
    std::printf("\noutputs:             %s/detections.jsonl, %s/summary.json\n",
                out_dir.c_str(), out_dir.c_str());
}

void print_decode_report(const DecodeReport& report) {
    const auto& decoded = report.decoded;
    std::printf("payload bytes: %zu, candidates: %zu, valid transforms: %d\n",
                decoded.byte_length, decoded.candidates.size(),
                decoded.valid_transform_count);
    for (std::size_t i = 0; i < decoded.candidates.size(); ++i) {
        const auto& cand = decoded.candidates[i];
        std::string chain;
        for (const auto& tag : cand.transform_chain) {
            if (!chain.empty()) chain += '+';
            chain += tag;
        }
        if (chain.empty()) chain = "-";
        std::printf("[%zu]%s score=%.3f ratio=%.3f chain=%s\n    %s\n", i,
                    i == decoded.best ? "*" : " ", cand.score, cand.printable_ratio,
                    chain.c_str(), printable_preview(cand.text).c_str());
    }
    if (!report.detection) {
        std::printf("verdict: none\n");
        return;
    }
    const auto& det = *report.detection;
    std::printf("verdict: detected severity=%s obfuscated=%s weak_only=%s "
                "matched_candidate=%d\n",
                std::string(severity_name(det.severity)).c_str(),
                det.obfuscated ? "yes" : "no", det.weak_only ? "yes" : "no",
                det.matched_candidate);
    for (const auto& expr : det.expressions)
        std::printf("  expression: %s (scheme %s)\n",
                    printable_preview(expr.endpoint_text).c_str(),
                    expr.scheme_complete() ? expr.scheme.c_str() : "absent");
    for (const auto& ep : det.endpoints)
        std::printf("  endpoint: %s port=%d scheme=%s path=%s ip_literal=%s\n",
                    ep.host.c_str(), ep.port, ep.scheme.c_str(),
                    printable_preview(ep.path, 80).c_str(),
                    ep.is_ip_literal ? "yes" : "no");
    for (const auto& err : det.endpoint_errors)
        std::printf("  endpoint error: %s\n", printable_preview(err).c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"telescope payload forensics: capture ingest, TCP stream "
                 "reassembly, Log4Shell deobfuscation and detection, and "
                 "longitudinal analytics"};
    app.set_config("--config", "", "flat key=value config file; flags override");
    app.require_subcommand(1);

    RunConfig cfg;
    std::string tz_text = "UTC";

    // ---- run ----
    auto* run = app.add_subcommand("run", "capture -> detections end to end");
    run->add_option("--input,-i", cfg.inputs, "capture file(s)")->required();
    run->add_option("--geo-db", cfg.geo_db_path,
                    "geolocation CSV (start,end,country,asn)");
    run->add_option("--tz", tz_text, "partition timezone offset, e.g. UTC or +05:30");
    run->add_option("--session-gap", cfg.session_gap_s,
                    "seconds separating sessions on one 4-tuple");
    run->add_option("--max-depth", cfg.decode.max_depth, "decode nesting limit");
    run->add_option("--jndi-weight", cfg.decode.jndi_weight, "score boost for jndi");
    run->add_option("--ldap-weight", cfg.decode.ldap_weight, "score boost for ldap://");
    run->add_option("--oast-host", cfg.classify.oast_hosts,
                    "substring identifying verification-service hosts (repeatable)");
    run->add_option("--threshold", cfg.threshold_percent,
                    "cumulative percent threshold for m*");
    run->add_option("--out,-o", cfg.out_dir, "output directory");
    run->add_option("--dump-streams", cfg.stream_dump_path,
                    "write reassembled streams to this file (debug format)");

    // ---- decode ----
    auto* decode = app.add_subcommand("decode", "single-payload candidate ledger");
    std::string decode_input = "-";
    bool decode_hex = false;
    decode->add_option("--input,-i", decode_input, "payload file, or - for stdin");
    decode->add_flag("--hex", decode_hex, "input is hex text");
    decode->add_option("--max-depth", cfg.decode.max_depth, "decode nesting limit");

    // ---- report ----
    auto* report = app.add_subcommand("report", "analytics views from detections");
    report->require_subcommand(1);
    std::string report_input;
    int min_months = 2;
    double predict_t = 0.0, phat1 = -1.0;
    bool have_predict_t = false;

    auto add_common = [&](CLI::App* sub, const char* what) {
        sub->add_option("--input,-i", report_input, what)->required();
        sub->add_option("--out,-o", cfg.out_dir, "output directory");
        return sub;
    };
    auto* shares = add_common(report->add_subcommand(
                                  "shares", "country/port/scheme/asn share tables"),
                              "detections.jsonl");
    shares->add_option("--tz", tz_text, "timezone offset for day grouping");
    auto* infra = add_common(report->add_subcommand(
                                 "infra", "callback-host and scanner infrastructure views"),
                             "detections.jsonl");
    infra->add_option("--tz", tz_text, "timezone offset for day grouping");
    auto* monthly = add_common(report->add_subcommand(
                                   "monthly", "monthly distributions and growth trends"),
                               "detections.jsonl or monthly counts CSV");
    monthly->add_option("--tz", tz_text, "timezone offset for day grouping");
    monthly->add_option("--threshold", cfg.threshold_percent,
                        "cumulative percent threshold for m*");
    monthly->add_option("--min-months", min_months,
                        "exclude years with fewer populated months from the trend");
    auto* fit = add_common(report->add_subcommand(
                               "fit", "logistic fit over (t,value) rows"),
                           "CSV with t,value rows");
    fit->add_option("--predict-t", predict_t, "evaluate the fitted curve at t")
        ->each([&](const std::string&) { have_predict_t = true; });
    fit->add_option("--phat1", phat1,
                    "first-month cumulative percent for the m* prediction interval");
    auto* correlate = add_common(report->add_subcommand(
                                     "correlate", "Pearson correlation of two series"),
                                 "CSV with a,b rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        auto tz = parse_tz_offset(tz_text);
        if (!tz) throw std::runtime_error("unparseable timezone offset: " + tz_text);
        cfg.tz_offset_s = *tz;

        if (run->parsed()) {
            auto summary = run_pipeline(cfg);
            print_summary(summary, cfg.out_dir);
            return 0;
        }
        if (decode->parsed()) {
            std::string raw = read_payload_source(decode_input);
            if (decode_hex) {
                auto rec = hex_recover(raw);
                if (rec.bytes.empty())
                    throw std::runtime_error("hex input yielded no bytes");
                raw = rec.bytes;
            }
            if (raw.empty()) throw std::runtime_error("empty payload");
            print_decode_report(decode_one(raw, cfg));
            return 0;
        }

        // report subcommands
        std::filesystem::path out_dir(cfg.out_dir);
        if (shares->parsed() || infra->parsed() ||
            (monthly->parsed() && !report_input.ends_with(".csv"))) {
            auto file = read_detections_file(report_input);
            if (file.skipped_lines > 0)
                std::fprintf(stderr, "warning: skipped %zu malformed record lines\n",
                             file.skipped_lines);
            if (shares->parsed())
                export_shares(file.records, out_dir, cfg.tz_offset_s);
            else if (infra->parsed())
                export_infra(file.records, out_dir, cfg.tz_offset_s);
            else
                export_monthly(monthly_matrix(file.records, cfg.tz_offset_s), out_dir,
                               cfg.threshold_percent, min_months);
            return 0;
        }
        if (monthly->parsed()) {
            std::ifstream in(report_input);
            if (!in) throw std::runtime_error("cannot open: " + report_input);
            export_monthly(read_monthly_csv(in), out_dir, cfg.threshold_percent,
                           min_months);
            return 0;
        }
        if (fit->parsed()) {
            std::ifstream in(report_input);
            if (!in) throw std::runtime_error("cannot open: " + report_input);
            auto points = read_points_csv(in);
            auto params = fit_logistic(points);
            double t_min = points.front().first, t_max = points.front().first;
            for (const auto& [t, v] : points) {
                t_min = std::min(t_min, t);
                t_max = std::max(t_max, t);
            }
            double band_to = have_predict_t ? std::max(t_max, predict_t) : t_max + 2.0;
            export_fit(params, out_dir, t_min, band_to);
            std::printf("fit: L=%.6g k=%.6g t0=%.6g (ssr %.3g, %d iterations)\n",
                        params.L, params.k, params.t0, params.ssr, params.iterations);
            if (have_predict_t) {
                auto band = logistic_band(params, predict_t);
                std::printf("F(%.3g) = %.6g, 95%% band [%.6g, %.6g]\n", predict_t,
                            band.mean, band.lo, band.hi);
                if (phat1 >= 0.0) {
                    auto interval = predict_threshold_interval(
                        {band.lo, band.mean, band.hi}, phat1);
                    auto out = open_report(out_dir, "threshold_prediction.csv");
                    out << "m_low,m_mean,m_high,degenerate\n"
                        << csv::format(interval.m_low) << ','
                        << csv::format(interval.m_mean) << ','
                        << csv::format(interval.m_high) << ','
                        << (interval.degenerate ? 1 : 0) << '\n';
                    std::printf("m* interval: [%.3f, %.3f], mean %.3f%s\n",
                                interval.m_low, interval.m_high, interval.m_mean,
                                interval.degenerate ? " (degenerate)" : "");
                }
            }
            return 0;
        }
        if (correlate->parsed()) {
            std::ifstream in(report_input);
            if (!in) throw std::runtime_error("cannot open: " + report_input);
            auto points = read_points_csv(in);
            std::vector<double> a, b;
            for (const auto& [x, y] : points) {
                a.push_back(x);
                b.push_back(y);
            }
            auto res = pearson(a, b);
            export_correlation(res, out_dir);
            std::printf("pearson: r=%.6f p=%.6g n=%zu\n", res.r, res.p_value, res.n);
            return 0;
        }
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
