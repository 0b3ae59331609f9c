// flow.cpp - service index space, row parsing, dedup and window slicing
#include "svcfp/flow.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <deque>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace svcfp {

std::string_view to_string(Protocol p) {
    return p == Protocol::TCP ? "TCP" : "UDP";
}

std::optional<Protocol> parse_protocol(std::string_view s) {
    if (s == "TCP" || s == "tcp") return Protocol::TCP;
    if (s == "UDP" || s == "udp") return Protocol::UDP;
    return std::nullopt;
}

std::string to_string(ServiceKey key) {
    std::string out(to_string(key.protocol));
    out += '/';
    out += std::to_string(key.port);
    return out;
}

std::optional<ServiceKey> parse_service(std::string_view s) {
    auto slash = s.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    auto proto = parse_protocol(s.substr(0, slash));
    if (!proto) return std::nullopt;
    std::string_view port_part = s.substr(slash + 1);
    unsigned port = 0;
    auto [ptr, ec] = std::from_chars(port_part.data(),
                                     port_part.data() + port_part.size(), port);
    if (ec != std::errc{} || ptr != port_part.data() + port_part.size() ||
        port > 65535) {
        return std::nullopt;
    }
    return ServiceKey{*proto, static_cast<std::uint16_t>(port)};
}

std::uint32_t service_index(ServiceKey key) {
    std::uint32_t base = key.protocol == Protocol::UDP ? 65536u : 0u;
    return base + key.port;
}

ServiceKey index_to_service(std::uint32_t index) {
    if (index >= kServiceIndexCount) {
        throw std::out_of_range("service index " + std::to_string(index) +
                                " outside [0, " +
                                std::to_string(kServiceIndexCount) + ")");
    }
    if (index < 65536u) {
        return ServiceKey{Protocol::TCP, static_cast<std::uint16_t>(index)};
    }
    return ServiceKey{Protocol::UDP, static_cast<std::uint16_t>(index - 65536u)};
}

namespace {

bool parse_int(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_fixed_uint(std::string_view s, int& out) {
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return !s.empty();
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    int yoe = static_cast<int>(y - era * 400);
    int doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    int doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    int doe = static_cast<int>(z - era * 146097);
    int yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    int yr = static_cast<int>(yoe + era * 400);
    int doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    int mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = yr + (m <= 2);
}

} // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (std::int64_t epoch = 0; parse_int(s, epoch)) return epoch;

    // RFC 3339: YYYY-MM-DD[T ]HH:MM:SS[.frac][Z|+hh:mm|-hh:mm]
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' ||
        (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':') {
        return std::nullopt;
    }
    int year, month, day, hour, minute, second;
    if (!parse_fixed_uint(s.substr(0, 4), year) ||
        !parse_fixed_uint(s.substr(5, 2), month) ||
        !parse_fixed_uint(s.substr(8, 2), day) ||
        !parse_fixed_uint(s.substr(11, 2), hour) ||
        !parse_fixed_uint(s.substr(14, 2), minute) ||
        !parse_fixed_uint(s.substr(17, 2), second)) {
        return std::nullopt;
    }
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 ||
        minute > 59 || second > 60) {
        return std::nullopt;
    }
    std::string_view rest = s.substr(19);
    if (!rest.empty() && rest[0] == '.') {
        std::size_t i = 1;
        while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') ++i;
        if (i == 1) return std::nullopt;
        rest = rest.substr(i);
    }
    std::int64_t offset = 0;
    if (rest == "Z" || rest == "z" || rest.empty()) {
        // UTC
    } else if ((rest[0] == '+' || rest[0] == '-') && rest.size() == 6 &&
               rest[3] == ':') {
        int oh, om;
        if (!parse_fixed_uint(rest.substr(1, 2), oh) ||
            !parse_fixed_uint(rest.substr(4, 2), om) || oh > 23 || om > 59) {
            return std::nullopt;
        }
        offset = (rest[0] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    } else {
        return std::nullopt;
    }
    std::int64_t days = days_from_civil(year, month, day);
    return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

std::string format_timestamp_rfc3339(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    std::int64_t rem = epoch_seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

namespace {

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

std::optional<FlowRecord> parse_csv_line(std::string_view line) {
    std::string_view fields[5];
    std::size_t n = 0;
    while (n < 5) {
        auto comma = line.find(',');
        fields[n++] = line.substr(0, comma);
        if (comma == std::string_view::npos) break;
        line = line.substr(comma + 1);
    }
    if (n != 5 || line.find(',') != std::string_view::npos) return std::nullopt;

    auto ts = parse_timestamp(fields[0]);
    if (!ts || fields[1].empty()) return std::nullopt;
    auto proto = parse_protocol(fields[2]);
    if (!proto) return std::nullopt;
    std::int64_t port = 0;
    if (!parse_int(fields[3], port) || port < 0 || port > 65535) {
        return std::nullopt;
    }
    FlowRecord rec;
    rec.timestamp = *ts;
    rec.device_id = std::string(fields[1]);
    rec.service = ServiceKey{*proto, static_cast<std::uint16_t>(port)};
    rec.conn_key = std::string(fields[4]);
    return rec;
}

std::optional<FlowRecord> parse_jsonl_line(std::string_view line) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;

    auto ts_it = j.find("timestamp");
    auto dev_it = j.find("device_id");
    auto proto_it = j.find("protocol");
    auto port_it = j.find("service_port");
    auto key_it = j.find("conn_key");
    if (ts_it == j.end() || dev_it == j.end() || proto_it == j.end() ||
        port_it == j.end() || key_it == j.end() || !dev_it->is_string() ||
        !proto_it->is_string() || !key_it->is_string()) {
        return std::nullopt;
    }

    std::optional<std::int64_t> ts;
    if (ts_it->is_number_integer()) {
        ts = ts_it->get<std::int64_t>();
    } else if (ts_it->is_string()) {
        ts = parse_timestamp(ts_it->get_ref<const std::string&>());
    }
    if (!ts) return std::nullopt;

    auto proto = parse_protocol(proto_it->get_ref<const std::string&>());
    if (!proto) return std::nullopt;

    std::int64_t port = -1;
    if (port_it->is_number_integer()) {
        port = port_it->get<std::int64_t>();
    } else if (port_it->is_string()) {
        if (!parse_int(port_it->get_ref<const std::string&>(), port)) port = -1;
    }
    if (port < 0 || port > 65535) return std::nullopt;

    FlowRecord rec;
    rec.timestamp = *ts;
    rec.device_id = dev_it->get<std::string>();
    rec.service = ServiceKey{*proto, static_cast<std::uint16_t>(port)};
    rec.conn_key = key_it->get<std::string>();
    if (rec.device_id.empty()) return std::nullopt;
    return rec;
}

} // namespace

std::optional<FlowRecord> parse_flow_line(std::string_view line,
                                          FlowFormat format) {
    line = strip_cr(line);
    if (line.empty()) return std::nullopt;
    if (format == FlowFormat::Csv) {
        if (line.substr(0, 10) == "timestamp,") return std::nullopt; // header
        return parse_csv_line(line);
    }
    return parse_jsonl_line(line);
}

DeviceFlows parse_flows(std::string_view text, FlowFormat format,
                        ParseSummary* summary) {
    DeviceFlows out;
    ParseSummary stats;
    std::size_t pos = 0;
    bool first_line = true;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line = text.substr(
            pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

        line = strip_cr(line);
        if (line.empty()) continue;
        bool header = first_line && format == FlowFormat::Csv &&
                      line.substr(0, 10) == "timestamp,";
        first_line = false;
        if (header) continue;

        ++stats.rows_total;
        if (auto rec = parse_flow_line(line, format)) {
            out[rec->device_id].push_back(std::move(*rec));
        } else {
            ++stats.rows_skipped;
        }
    }
    for (auto& [id, flows] : out) {
        std::sort(flows.begin(), flows.end(),
                  [](const FlowRecord& a, const FlowRecord& b) {
                      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                      if (a.service != b.service) return a.service < b.service;
                      return a.conn_key < b.conn_key;
                  });
    }
    if (summary) *summary = stats;
    return out;
}

std::vector<FlowRecord> dedup_flows(std::span<const FlowRecord> sorted_flows,
                                    double merge_gap_s) {
    std::vector<FlowRecord> out;
    out.reserve(sorted_flows.size());
    if (merge_gap_s <= 0.0) {
        out.assign(sorted_flows.begin(), sorted_flows.end());
        return out;
    }
    // Chains of re-exports of one long-lived connection collapse into their
    // first record: a record extends the chain while it lands within the gap
    // of the previously seen record for the same (device, conn_key).
    using ChainKey = std::pair<std::string_view, std::string_view>;
    std::map<ChainKey, std::int64_t> last_seen;
    // Input is timestamp-sorted, so keys idle past the gap can never merge
    // again; expiring them keeps the map near the trace's instantaneous
    // connection count instead of its total size.
    std::deque<std::pair<std::int64_t, ChainKey>> expiry;
    for (const FlowRecord& rec : sorted_flows) {
        while (!expiry.empty() &&
               static_cast<double>(rec.timestamp - expiry.front().first) > merge_gap_s) {
            auto entry = last_seen.find(expiry.front().second);
            if (entry != last_seen.end() && entry->second == expiry.front().first) {
                last_seen.erase(entry);
            }
            expiry.pop_front();
        }
        auto key = std::make_pair(std::string_view(rec.device_id),
                                  std::string_view(rec.conn_key));
        auto it = last_seen.find(key);
        bool merged = it != last_seen.end() &&
                      static_cast<double>(rec.timestamp - it->second) <= merge_gap_s;
        if (it == last_seen.end()) {
            it = last_seen.emplace(key, rec.timestamp).first;
        } else {
            it->second = rec.timestamp;
        }
        expiry.emplace_back(rec.timestamp, it->first);
        if (!merged) out.push_back(rec);
    }
    return out;
}

DeviceFlows dedup_flows(const DeviceFlows& flows, double merge_gap_s) {
    DeviceFlows out;
    for (const auto& [id, recs] : flows) {
        out.emplace(id, dedup_flows(std::span(recs), merge_gap_s));
    }
    return out;
}

std::vector<ServiceObs> slice_window(std::span<const FlowRecord> sorted_flows,
                                     const TimeWindow& window) {
    auto cmp = [](const FlowRecord& r, double t) {
        return static_cast<double>(r.timestamp) < t;
    };
    auto first = std::lower_bound(sorted_flows.begin(), sorted_flows.end(),
                                  window.start, cmp);
    auto last = std::lower_bound(first, sorted_flows.end(), window.end(), cmp);
    std::vector<ServiceObs> out;
    out.reserve(static_cast<std::size_t>(last - first));
    for (auto it = first; it != last; ++it) {
        out.push_back(ServiceObs{it->service, static_cast<double>(it->timestamp)});
    }
    return out;
}

} // namespace svcfp
