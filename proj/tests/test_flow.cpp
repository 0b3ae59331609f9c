// Flow parsing, the service index space, dedup and window slicing.
#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "svcfp/flow.hpp"

using namespace svcfp;

namespace {

FlowRecord rec(const char* dev, std::int64_t ts, Protocol proto,
               std::uint16_t port, const char* key) {
    return FlowRecord{dev, ts, ServiceKey{proto, port}, key};
}

} // namespace

TEST_CASE("service index maps TCP then UDP ports contiguously") {
    CHECK(service_index({Protocol::TCP, 0}) == 0u);
    CHECK(service_index({Protocol::TCP, 443}) == 443u);
    CHECK(service_index({Protocol::TCP, 65535}) == 65535u);
    CHECK(service_index({Protocol::UDP, 0}) == 65536u);
    CHECK(service_index({Protocol::UDP, 53}) == 65589u);
    CHECK(service_index({Protocol::UDP, 65535}) == 131071u);
}

TEST_CASE("service index round-trips over the whole space") {
    for (std::uint32_t i = 0; i < kServiceIndexCount; ++i) {
        ServiceKey key = index_to_service(i);
        CHECK(service_index(key) == i);
    }
    CHECK_THROWS_AS(index_to_service(kServiceIndexCount), std::out_of_range);
}

TEST_CASE("service strings parse and print") {
    CHECK(to_string(ServiceKey{Protocol::TCP, 443}) == "TCP/443");
    CHECK(to_string(ServiceKey{Protocol::UDP, 53}) == "UDP/53");
    CHECK(parse_service("TCP/8009") == ServiceKey{Protocol::TCP, 8009});
    CHECK(parse_service("UDP/0") == ServiceKey{Protocol::UDP, 0});
    CHECK_FALSE(parse_service("ICMP/0").has_value());
    CHECK_FALSE(parse_service("TCP/65536").has_value());
    CHECK_FALSE(parse_service("TCP/").has_value());
    CHECK_FALSE(parse_service("443").has_value());
}

TEST_CASE("timestamps accept epoch seconds and RFC 3339") {
    CHECK(parse_timestamp("1559347200") == 1559347200);
    CHECK(parse_timestamp("2019-06-01T00:00:00Z") == 1559347200);
    CHECK(parse_timestamp("2019-06-01T00:00:00.75Z") == 1559347200); // truncated
    CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_timestamp("2020-01-01T00:00:00Z") == 1577836800);
    CHECK_FALSE(parse_timestamp("yesterday").has_value());
    CHECK_FALSE(parse_timestamp("").has_value());

    CHECK(format_timestamp_rfc3339(1559347200) == "2019-06-01T00:00:00Z");
    CHECK(format_timestamp_rfc3339(0) == "1970-01-01T00:00:00Z");
    // Round-trip across a leap day.
    std::int64_t t = 1582934461; // 2020-02-29T00:01:01Z
    CHECK(parse_timestamp(format_timestamp_rfc3339(t)) == t);
}

TEST_CASE("CSV parsing skips the header and counts malformed rows") {
    std::string text =
        "timestamp,device_id,protocol,service_port,conn_key\n"
        "2019-06-01T00:00:04Z,cam,TCP,443,c01\n"
        "1559347300,cam,UDP,53,c02\n"
        "1559347400,plug,TCP,8883,c03\n"
        "not-a-time,cam,TCP,443,c04\n"
        "1559347500,cam,ICMP,0,c05\n"
        "1559347600,cam,TCP,70000,c06\n";
    ParseSummary summary;
    DeviceFlows flows = parse_flows(text, FlowFormat::Csv, &summary);

    CHECK(summary.rows_total == 6);
    CHECK(summary.rows_skipped == 3);
    REQUIRE(flows.count("cam") == 1);
    REQUIRE(flows.count("plug") == 1);
    CHECK(flows["cam"].size() == 2);
    CHECK(flows["cam"][0].timestamp == 1559347204);
    CHECK(flows["cam"][0].service == ServiceKey{Protocol::TCP, 443});
    CHECK(flows["plug"][0].conn_key == "c03");
}

TEST_CASE("JSONL parsing accepts string or integer fields") {
    std::string text =
        R"({"timestamp":1559347200,"device_id":"tv","protocol":"TCP","service_port":7000,"conn_key":"c1"})" "\n"
        R"({"timestamp":"2019-06-01T00:01:00Z","device_id":"tv","protocol":"UDP","service_port":"1900","conn_key":"c2"})" "\n"
        "this is not json\n"
        R"({"timestamp":1,"device_id":"tv","protocol":"TCP","conn_key":"c3"})" "\n";
    ParseSummary summary;
    DeviceFlows flows = parse_flows(text, FlowFormat::Jsonl, &summary);

    CHECK(summary.rows_total == 4);
    CHECK(summary.rows_skipped == 2);
    REQUIRE(flows["tv"].size() == 2);
    CHECK(flows["tv"][1].timestamp == 1559347260);
    CHECK(flows["tv"][1].service == ServiceKey{Protocol::UDP, 1900});
}

TEST_CASE("per-device streams come out sorted by timestamp") {
    std::string text =
        "timestamp,device_id,protocol,service_port,conn_key\n"
        "300,dev,TCP,80,c3\n"
        "100,dev,TCP,80,c1\n"
        "200,dev,TCP,80,c2\n";
    DeviceFlows flows = parse_flows(text, FlowFormat::Csv);
    REQUIRE(flows["dev"].size() == 3);
    CHECK(flows["dev"][0].conn_key == "c1");
    CHECK(flows["dev"][2].conn_key == "c3");
}

TEST_CASE("dedup collapses conn-key chains into the earliest record") {
    std::vector<FlowRecord> in{
        rec("d", 0, Protocol::TCP, 443, "k1"),
        rec("d", 30, Protocol::TCP, 443, "k1"),  // 30s after k1's last: merged
        rec("d", 400, Protocol::TCP, 443, "k1"), // 370s gap: new flow
    };
    auto out = dedup_flows(in, 60.0);
    REQUIRE(out.size() == 2);
    CHECK(out[0].timestamp == 0);
    CHECK(out[1].timestamp == 400);
}

TEST_CASE("dedup follows the chain, not the first record") {
    // Each report is 50s after the previous; all within one 60s chain even
    // though the last sits 150s after the first.
    std::vector<FlowRecord> in{
        rec("d", 0, Protocol::TCP, 443, "k"),
        rec("d", 50, Protocol::TCP, 443, "k"),
        rec("d", 100, Protocol::TCP, 443, "k"),
        rec("d", 150, Protocol::TCP, 443, "k"),
    };
    auto out = dedup_flows(in, 60.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0].timestamp == 0);
}

TEST_CASE("dedup keys on device and conn key together") {
    std::vector<FlowRecord> in{
        rec("a", 0, Protocol::TCP, 443, "k"),
        rec("b", 10, Protocol::TCP, 443, "k"),  // same key, other device
        rec("a", 20, Protocol::TCP, 443, "k2"), // same device, other key
    };
    auto out = dedup_flows(in, 60.0);
    CHECK(out.size() == 3);
}

TEST_CASE("dedup with a non-positive gap is the identity") {
    std::vector<FlowRecord> in{
        rec("d", 0, Protocol::TCP, 443, "k"),
        rec("d", 1, Protocol::TCP, 443, "k"),
    };
    CHECK(dedup_flows(in, 0.0).size() == 2);
    CHECK(dedup_flows(in, -5.0).size() == 2);
}

TEST_CASE("dedup is idempotent") {
    std::vector<FlowRecord> in;
    for (int i = 0; i < 200; ++i) {
        in.push_back(rec("d", i * 37 % 1000, Protocol::TCP,
                         static_cast<std::uint16_t>(80 + i % 3),
                         i % 2 ? "ka" : "kb"));
    }
    std::sort(in.begin(), in.end(), [](const FlowRecord& a, const FlowRecord& b) {
        return a.timestamp < b.timestamp;
    });
    auto once = dedup_flows(in, 60.0);
    auto twice = dedup_flows(once, 60.0);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(once[i].timestamp == twice[i].timestamp);
        CHECK(once[i].conn_key == twice[i].conn_key);
    }
}

TEST_CASE("window slicing is half-open") {
    std::vector<FlowRecord> in{
        rec("d", 99, Protocol::TCP, 80, "k1"),
        rec("d", 100, Protocol::TCP, 80, "k2"),
        rec("d", 150, Protocol::UDP, 53, "k3"),
        rec("d", 199, Protocol::TCP, 80, "k4"),
        rec("d", 200, Protocol::TCP, 80, "k5"),
    };
    auto obs = slice_window(in, TimeWindow{100.0, 100.0});
    REQUIRE(obs.size() == 3);
    CHECK(obs[0].timestamp == doctest::Approx(100.0));
    CHECK(obs[1].service == ServiceKey{Protocol::UDP, 53});
    CHECK(obs[2].timestamp == doctest::Approx(199.0));
}

TEST_CASE("consecutive windows partition a stream") {
    std::vector<FlowRecord> in;
    for (int i = 0; i < 500; ++i) {
        in.push_back(rec("d", i * 7 % 997, Protocol::TCP, 80, "k"));
    }
    std::sort(in.begin(), in.end(), [](const FlowRecord& a, const FlowRecord& b) {
        return a.timestamp < b.timestamp;
    });
    std::size_t total = 0;
    for (double start = 0.0; start < 1000.0; start += 250.0) {
        total += slice_window(in, TimeWindow{start, 250.0}).size();
    }
    CHECK(total == in.size());
}
