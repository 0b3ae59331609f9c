// io.cpp - gzip-aware trace files and JSON serialization
#include "svcfp/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace svcfp {

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() &&
           s.substr(s.size() - suffix.size()) == suffix;
}

FlowFormat format_for_path(const std::string& path) {
    std::string_view p = path;
    if (ends_with(p, ".gz")) p.remove_suffix(3);
    if (ends_with(p, ".csv")) return FlowFormat::Csv;
    if (ends_with(p, ".jsonl")) return FlowFormat::Jsonl;
    throw std::runtime_error("unsupported trace extension (want .csv/.jsonl, "
                             "optionally .gz): " + path);
}

// Whole numbers as JSON integers; keeps serialized files byte-stable and
// readable. Counts, timestamps and day-aligned durations all take this path.
nlohmann::json json_number(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) <= 9.0e15) {
        return static_cast<std::int64_t>(v);
    }
    return v;
}

nlohmann::json granularity_json(Granularity g) {
    if (g.is_infinite()) return "inf";
    return g.value();
}

Granularity granularity_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        auto g = Granularity::parse(j.get_ref<const std::string&>());
        if (!g) throw std::runtime_error("bad granularity: " + j.dump());
        return *g;
    }
    return Granularity::finite(j.get<std::uint32_t>());
}

ReprKind kind_from_json(const nlohmann::json& j) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "SL") return ReprKind::SL;
    if (s == "SP") return ReprKind::SP;
    if (s == "G") return ReprKind::G;
    throw std::runtime_error("bad representation kind: " + s);
}

} // namespace

DeviceFlows load_flows(const std::string& path, ParseSummary* summary) {
    FlowFormat format = format_for_path(path);
    gzFile f = gzopen(path.c_str(), "rb"); // reads plain files transparently
    if (!f) throw std::runtime_error("cannot open trace file: " + path);
    gzbuffer(f, 1u << 20);

    DeviceFlows out;
    ParseSummary stats;
    char buf[1 << 16];
    std::string line;
    bool first_line = true;

    auto handle = [&](std::string_view text) {
        if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
        if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
        if (text.empty()) return;
        bool header = first_line && format == FlowFormat::Csv &&
                      text.substr(0, 10) == "timestamp,";
        first_line = false;
        if (header) return;
        ++stats.rows_total;
        if (auto rec = parse_flow_line(text, format)) {
            out[rec->device_id].push_back(std::move(*rec));
        } else {
            ++stats.rows_skipped;
        }
    };

    while (char* r = gzgets(f, buf, sizeof buf)) {
        line += r;
        if (line.back() == '\n') {
            handle(line);
            line.clear();
        }
    }
    int errnum = 0;
    const char* msg = gzerror(f, &errnum);
    if (errnum != Z_OK && errnum != Z_STREAM_END) {
        std::string err = msg ? msg : "read error";
        gzclose(f);
        throw std::runtime_error("error reading " + path + ": " + err);
    }
    gzclose(f);
    if (!line.empty()) handle(line);

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

namespace {

// One sink for both plain and gzip output paths.
struct LineSink {
    gzFile gz = nullptr;
    std::FILE* plain = nullptr;

    explicit LineSink(const std::string& path) {
        if (ends_with(path, ".gz")) {
            gz = gzopen(path.c_str(), "wb");
            if (gz) gzbuffer(gz, 1u << 20);
        } else {
            plain = std::fopen(path.c_str(), "wb");
        }
        if (!gz && !plain) {
            throw std::runtime_error("cannot open output file: " + path);
        }
    }
    LineSink(const LineSink&) = delete;
    LineSink& operator=(const LineSink&) = delete;
    ~LineSink() { close(); }

    void put(const char* data, std::size_t n) {
        bool ok = gz ? gzwrite(gz, data, static_cast<unsigned>(n)) ==
                           static_cast<int>(n)
                     : std::fwrite(data, 1, n, plain) == n;
        if (!ok) throw std::runtime_error("short write to output file");
    }

    void close() {
        if (gz) {
            gzclose(gz);
            gz = nullptr;
        }
        if (plain) {
            std::fclose(plain);
            plain = nullptr;
        }
    }
};

} // namespace

void write_flows_csv(const std::string& path, const DeviceFlows& devices) {
    std::vector<const FlowRecord*> all;
    std::size_t total = 0;
    for (const auto& [id, flows] : devices) total += flows.size();
    all.reserve(total);
    for (const auto& [id, flows] : devices) {
        for (const FlowRecord& rec : flows) all.push_back(&rec);
    }
    std::sort(all.begin(), all.end(),
              [](const FlowRecord* a, const FlowRecord* b) {
                  if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
                  if (a->device_id != b->device_id) return a->device_id < b->device_id;
                  if (a->service != b->service) return a->service < b->service;
                  return a->conn_key < b->conn_key;
              });

    LineSink sink(path);
    constexpr std::string_view header =
        "timestamp,device_id,protocol,service_port,conn_key\n";
    sink.put(header.data(), header.size());
    char buf[256];
    for (const FlowRecord* rec : all) {
        std::string ts = format_timestamp_rfc3339(rec->timestamp);
        int n = std::snprintf(buf, sizeof buf, "%s,%s,%s,%u,%s\n", ts.c_str(),
                              rec->device_id.c_str(),
                              std::string(to_string(rec->service.protocol)).c_str(),
                              static_cast<unsigned>(rec->service.port),
                              rec->conn_key.c_str());
        if (n < 0 || n >= static_cast<int>(sizeof buf)) {
            throw std::runtime_error("flow row too long for output buffer");
        }
        sink.put(buf, static_cast<std::size_t>(n));
    }
    sink.close();
}

void to_json(nlohmann::json& j, const ServiceVector& v) {
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [idx, val] : v.entries) {
        entries[to_string(index_to_service(idx))] = json_number(val);
    }
    j = nlohmann::json{
        {"kind", std::string(to_string(v.kind))},
        {"window", {{"start", json_number(v.window.start)},
                    {"duration_s", json_number(v.window.duration)}}},
        {"flow_count", v.flow_count},
        {"entries", std::move(entries)},
    };
    // SL and SP fix their own granularity; only G carries it explicitly.
    if (v.kind == ReprKind::G) j["g"] = granularity_json(v.g);
}

void from_json(const nlohmann::json& j, ServiceVector& v) {
    v.kind = kind_from_json(j.at("kind"));
    if (j.contains("g")) {
        v.g = granularity_from_json(j.at("g"));
    } else {
        v.g = v.kind == ReprKind::SP ? Granularity::infinite()
                                     : Granularity::finite(1);
    }
    v.window.start = j.at("window").at("start").get<double>();
    v.window.duration = j.at("window").at("duration_s").get<double>();
    v.flow_count = j.at("flow_count").get<std::int64_t>();
    v.entries.clear();
    for (const auto& [key, val] : j.at("entries").items()) {
        auto service = parse_service(key);
        if (!service) throw std::runtime_error("bad service key: " + key);
        v.entries[service_index(*service)] = val.get<double>();
    }
}

void to_json(nlohmann::json& j, const Fingerprint& fp) {
    to_json(j, fp.vector);
    j["device_id"] = fp.device_id;
    j["anchor"] = json_number(fp.config.anchor_time);
    j["converged_days"] =
        json_number(fp.converged_window().duration / kSecondsPerDay);
    j["period_days"] = json_number(fp.inferred_period_s() / kSecondsPerDay);
    j["theta"] = json_number(fp.config.similarity_threshold);
    j["variant"] = fp.variant_index;
}

void from_json(const nlohmann::json& j, Fingerprint& fp) {
    from_json(j, fp.vector);
    fp.device_id = j.at("device_id").get<std::string>();
    fp.variant_index = j.at("variant").get<int>();
    fp.config.anchor_time = j.at("anchor").get<double>();
    fp.config.similarity_threshold = j.at("theta").get<double>();
    fp.config.g = fp.vector.g;
    // initial_window_s / max_iterations / growth_threshold live on the pool.
}

void to_json(nlohmann::json& j, const CalibrationStats& c) {
    j = nlohmann::json{{"mu", c.mu},
                       {"sigma", c.sigma},
                       {"windows_used", c.windows_used},
                       {"zero_windows", c.zero_windows},
                       {"usable", c.usable}};
}

void from_json(const nlohmann::json& j, CalibrationStats& c) {
    c.mu = j.at("mu").get<double>();
    c.sigma = j.at("sigma").get<double>();
    c.windows_used = j.at("windows_used").get<int>();
    c.zero_windows = j.at("zero_windows").get<int>();
    c.usable = j.at("usable").get<bool>();
}

void to_json(nlohmann::json& j, const FingerprintPool& pool) {
    j = nlohmann::json{
        {"g", granularity_json(pool.config.g)},
        {"theta", json_number(pool.config.similarity_threshold)},
        {"l0_s", json_number(pool.config.initial_window_s)},
        {"i_max", pool.config.max_iterations},
        {"delta", json_number(pool.config.growth_threshold)},
        {"fingerprints", pool.fingerprints},
        {"calibration", pool.calibration},
    };
}

void from_json(const nlohmann::json& j, FingerprintPool& pool) {
    pool.config.g = granularity_from_json(j.at("g"));
    pool.config.similarity_threshold = j.at("theta").get<double>();
    pool.config.initial_window_s = j.at("l0_s").get<double>();
    pool.config.max_iterations = j.at("i_max").get<int>();
    pool.config.growth_threshold = j.at("delta").get<double>();
    pool.fingerprints = j.at("fingerprints").get<std::vector<Fingerprint>>();
    for (Fingerprint& fp : pool.fingerprints) {
        fp.config.initial_window_s = pool.config.initial_window_s;
        fp.config.max_iterations = pool.config.max_iterations;
        fp.config.growth_threshold = pool.config.growth_threshold;
    }
    pool.calibration.clear();
    if (j.contains("calibration")) {
        pool.calibration =
            j.at("calibration").get<std::map<std::string, CalibrationStats>>();
    }
}

namespace {

ServiceKey service_from_json(const nlohmann::json& j) {
    const auto& s = j.get_ref<const std::string&>();
    auto key = parse_service(s);
    if (!key) throw std::runtime_error("bad service: " + s);
    return *key;
}

} // namespace

void to_json(nlohmann::json& j, const SimSpec& spec) {
    nlohmann::json profiles = nlohmann::json::array();
    for (const DeviceProfile& p : spec.profiles) {
        nlohmann::json epochs = nlohmann::json::array();
        for (const ProfileEpoch& e : p.epochs) {
            nlohmann::json services = nlohmann::json::array();
            for (const ServiceRate& s : e.services) {
                services.push_back({{"service", to_string(s.service)},
                                    {"per_day", json_number(s.per_day)}});
            }
            nlohmann::json je{{"start_day", e.start_day},
                              {"services", std::move(services)}};
            if (!e.intermittent.empty()) {
                nlohmann::json iv = nlohmann::json::array();
                for (const IntermittentService& s : e.intermittent) {
                    iv.push_back({{"service", to_string(s.service)},
                                  {"per_day", json_number(s.per_day)},
                                  {"active_prob", s.active_prob}});
                }
                je["intermittent"] = std::move(iv);
            }
            if (!e.sporadic.empty()) {
                nlohmann::json sp = nlohmann::json::array();
                for (const SporadicPool& pool : e.sporadic) {
                    sp.push_back({{"protocol", std::string(to_string(pool.protocol))},
                                  {"port_lo", pool.port_lo},
                                  {"port_hi", pool.port_hi},
                                  {"per_day", json_number(pool.per_day)}});
                }
                je["sporadic"] = std::move(sp);
            }
            epochs.push_back(std::move(je));
        }
        nlohmann::json jp{{"device_id", p.device_id},
                          {"epochs", std::move(epochs)}};
        if (!p.surges.empty()) {
            nlohmann::json sv = nlohmann::json::array();
            for (const Surge& s : p.surges) {
                sv.push_back({{"service", to_string(s.service)},
                              {"start_day", s.start_day},
                              {"end_day", s.end_day},
                              {"multiplier", json_number(s.multiplier)}});
            }
            jp["surges"] = std::move(sv);
        }
        profiles.push_back(std::move(jp));
    }
    j = nlohmann::json{{"start_time", json_number(spec.start_time)},
                       {"duration_days", spec.duration_days},
                       {"seed", spec.seed},
                       {"profiles", std::move(profiles)}};
}

void from_json(const nlohmann::json& j, SimSpec& spec) {
    spec.start_time = j.at("start_time").get<double>();
    spec.duration_days = j.at("duration_days").get<int>();
    spec.seed = j.value("seed", std::uint64_t{7});
    spec.profiles.clear();
    for (const auto& jp : j.at("profiles")) {
        DeviceProfile p;
        p.device_id = jp.at("device_id").get<std::string>();
        for (const auto& je : jp.at("epochs")) {
            ProfileEpoch e;
            e.start_day = je.at("start_day").get<int>();
            for (const auto& js : je.value("services", nlohmann::json::array())) {
                e.services.push_back({service_from_json(js.at("service")),
                                      js.at("per_day").get<double>()});
            }
            for (const auto& js : je.value("intermittent", nlohmann::json::array())) {
                e.intermittent.push_back({service_from_json(js.at("service")),
                                          js.at("per_day").get<double>(),
                                          js.at("active_prob").get<double>()});
            }
            for (const auto& js : je.value("sporadic", nlohmann::json::array())) {
                SporadicPool pool;
                auto proto = parse_protocol(js.at("protocol").get_ref<const std::string&>());
                if (!proto) {
                    throw std::runtime_error("bad protocol in sporadic pool: " +
                                             js.at("protocol").dump());
                }
                pool.protocol = *proto;
                pool.port_lo = js.at("port_lo").get<std::uint16_t>();
                pool.port_hi = js.at("port_hi").get<std::uint16_t>();
                pool.per_day = js.at("per_day").get<double>();
                e.sporadic.push_back(pool);
            }
            p.epochs.push_back(std::move(e));
        }
        for (const auto& js : jp.value("surges", nlohmann::json::array())) {
            p.surges.push_back({service_from_json(js.at("service")),
                                js.at("start_day").get<int>(),
                                js.at("end_day").get<int>(),
                                js.at("multiplier").get<double>()});
        }
        spec.profiles.push_back(std::move(p));
    }
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open JSON file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("error writing " + path);
}

} // namespace svcfp
