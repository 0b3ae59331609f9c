// flow.hpp - flow records, the service index space, ingestion and windowing
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace svcfp {

constexpr double kSecondsPerDay = 86400.0;

// Full TCP+UDP service index space: [0, 2*2^16).
constexpr std::uint32_t kServiceIndexCount = 2u * 65536u;

enum class Protocol : std::uint8_t { TCP, UDP };

std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view s);

// A network service consumed by a device: transport protocol plus the
// server-side port, e.g. TCP/443.
struct ServiceKey {
    Protocol protocol = Protocol::TCP;
    std::uint16_t port = 0;

    friend auto operator<=>(const ServiceKey&, const ServiceKey&) = default;
};

std::string to_string(ServiceKey key);                       // "TCP/443"
std::optional<ServiceKey> parse_service(std::string_view s); // "UDP/53"

// Bijection onto [0, 2*2^16): TCP ports at [0, 65536), UDP at [65536, 131072).
std::uint32_t service_index(ServiceKey key);
ServiceKey index_to_service(std::uint32_t index); // throws std::out_of_range

// One deduplicated transport-layer flow observation.
struct FlowRecord {
    std::string device_id;
    std::int64_t timestamp = 0; // epoch seconds
    ServiceKey service;
    std::string conn_key; // exporter flow identifier, used only for dedup
};

// Half-open interval [start, start + duration).
struct TimeWindow {
    double start = 0.0;
    double duration = 0.0; // seconds

    double end() const { return start + duration; }
    bool contains(double t) const { return t >= start && t < end(); }

    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

// A flow projected to what the representations consume.
struct ServiceObs {
    ServiceKey service;
    double timestamp = 0.0;
};

// Per-device streams, each sorted by timestamp (non-decreasing).
using DeviceFlows = std::map<std::string, std::vector<FlowRecord>>;

enum class FlowFormat { Csv, Jsonl };

struct ParseSummary {
    std::uint64_t rows_total = 0;
    std::uint64_t rows_skipped = 0;
};

// Parses flow rows (CSV with header, or JSONL), groups them per device and
// sorts each stream by timestamp. Malformed rows and rows with a protocol
// other than TCP/UDP are skipped and counted in the summary.
DeviceFlows parse_flows(std::string_view text, FlowFormat format,
                        ParseSummary* summary = nullptr);

// One data row; nullopt for blank, header or malformed lines.
std::optional<FlowRecord> parse_flow_line(std::string_view line, FlowFormat format);

// Accepts integer epoch seconds or RFC 3339 (fractional seconds truncated).
std::optional<std::int64_t> parse_timestamp(std::string_view s);

std::string format_timestamp_rfc3339(std::int64_t epoch_seconds);

// Collapses records that share (device_id, conn_key) and sit within
// merge_gap_s seconds of the previous record of that key into the earliest
// record of the chain. merge_gap_s <= 0 keeps the input unchanged.
std::vector<FlowRecord> dedup_flows(std::span<const FlowRecord> sorted_flows,
                                    double merge_gap_s);
DeviceFlows dedup_flows(const DeviceFlows& flows, double merge_gap_s);

// Flows with start <= timestamp < start + duration, projected to
// observations. The count of returned observations is n(W).
std::vector<ServiceObs> slice_window(std::span<const FlowRecord> sorted_flows,
                                     const TimeWindow& window);

} // namespace svcfp
