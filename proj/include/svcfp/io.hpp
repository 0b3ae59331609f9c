// io.hpp - trace files (plain or gzip) and JSON forms of vectors and pools
#pragma once

#include <string>

#include <json.hpp>

#include "svcfp/classifier.hpp"
#include "svcfp/flow.hpp"
#include "svcfp/synthgen.hpp"

namespace svcfp {

// Format by extension: .csv / .jsonl, with transparent .gz handling.
DeviceFlows load_flows(const std::string& path, ParseSummary* summary = nullptr);

// Globally ordered by (timestamp, device, service, conn_key); gzips when the
// path ends in .gz.
void write_flows_csv(const std::string& path, const DeviceFlows& devices);

// Entries appear as {"TCP/80": 512, ...}; whole-valued numbers are written as
// integers so files stay byte-stable across reruns.
void to_json(nlohmann::json& j, const ServiceVector& v);
void from_json(const nlohmann::json& j, ServiceVector& v);

// Flat object: the vector's fields plus device metadata.
void to_json(nlohmann::json& j, const Fingerprint& fp);
void from_json(const nlohmann::json& j, Fingerprint& fp);

void to_json(nlohmann::json& j, const CalibrationStats& c);
void from_json(const nlohmann::json& j, CalibrationStats& c);

// Carries the exporter settings too, so a loaded pool can be augmented with
// the same configuration it was built with.
void to_json(nlohmann::json& j, const FingerprintPool& pool);
void from_json(const nlohmann::json& j, FingerprintPool& pool);

// Simulation specs are plain JSON so fleets can be edited by hand. Services
// are written as "TCP/443" strings; empty sections are omitted.
void to_json(nlohmann::json& j, const SimSpec& spec);
void from_json(const nlohmann::json& j, SimSpec& spec);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

} // namespace svcfp
