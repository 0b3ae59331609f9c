// exporter.hpp - exponential-window fingerprint export and period inference
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "svcfp/flow.hpp"
#include "svcfp/representation.hpp"

namespace svcfp {

struct ExportConfig {
    double anchor_time = 0.0;            // t0, epoch seconds
    double initial_window_s = kSecondsPerDay; // L0
    int max_iterations = 6;              // i_max; window cap = 2^i_max * L0
    double similarity_threshold = 0.95;  // theta, in (0, 1]
    double growth_threshold = 0.5;       // delta, minimum flow-count growth rate
    Granularity g = Granularity::finite(2048);
};

// Throws std::invalid_argument when a field is out of range.
void validate(const ExportConfig& cfg);

// A converged service-usage vector with its provenance. The converged
// window is the larger of the two windows whose representations agreed;
// the preceding window's length is the device's inferred seasonal period.
struct Fingerprint {
    std::string device_id;
    ServiceVector vector; // kind G, computed over the converged window
    ExportConfig config;
    int variant_index = 0; // 0 for the initial export, >= 1 for augmentation variants

    const TimeWindow& converged_window() const { return vector.window; }
    double inferred_period_s() const { return vector.window.duration / 2.0; }
};

struct DidNotConverge {
    int iterations_run = 0;
    std::optional<double> last_similarity;
};

using ExportOutcome = std::variant<Fingerprint, DidNotConverge>;

// The anchored doubling windows examined by the exporter:
// [t0, t0 + 2^i * L0) for i = 0..i_max.
std::vector<TimeWindow> window_schedule(const ExportConfig& cfg);

// Runs the window search over one device's deduplicated, sorted flows.
// Iteration i recomputes the representation only when the flow count grew
// by more than delta relative to the reference; the similarity check then
// exports the larger window's representation once it exceeds theta.
ExportOutcome export_fingerprint(std::span<const FlowRecord> device_flows,
                                 const std::string& device_id,
                                 const ExportConfig& cfg);

struct ExportRunResult {
    std::vector<Fingerprint> fingerprints;           // converged devices, by device order
    std::map<std::string, DidNotConverge> failures;  // devices that did not converge
};

ExportRunResult export_all(const DeviceFlows& flows, const ExportConfig& cfg);

} // namespace svcfp
