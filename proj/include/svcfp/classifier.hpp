// classifier.hpp - fingerprint pool matching, augmentation, open-set rejection
#pragma once

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svcfp/exporter.hpp"

namespace svcfp {

inline constexpr const char* kUnknownLabel = "UNKNOWN";

// Per-device similarity baseline used for open-set rejection.
struct CalibrationStats {
    double mu = 0.0;
    double sigma = 0.0;
    int windows_used = 0;
    int zero_windows = 0;
    bool usable = false; // needs at least two non-empty windows
};

struct FingerprintPool {
    // Settings the pool was exported with; anchor_time is per device and is
    // not meaningful here. Augmentation re-exports with these.
    ExportConfig config;
    std::vector<Fingerprint> fingerprints;
    std::map<std::string, CalibrationStats> calibration;

    Granularity g() const { return config.g; }
    double theta() const { return config.similarity_threshold; }
    std::vector<std::string> device_ids() const;
    std::vector<const Fingerprint*> device_fingerprints(const std::string& id) const;
};

struct Prediction {
    std::string device_id;
    double similarity = 0.0;
    bool conflict = false;       // tie resolved by volume scaling
    double volume_score = 0.0;   // (ln rho)^2 of the winner, 0 when no conflict
};

struct ClassifyOptions {
    double tie_tolerance = 1e-6;
    bool use_volume_tiebreak = true; // false: break ties by device id only
};

// Outcome of the volume-consistency resolution among cosine-tied candidates.
struct ConflictResolution {
    std::size_t winner_index = 0;
    std::vector<double> scores; // (ln rho)^2 per candidate, candidate order
};

// Scales each candidate fingerprint to the window's duration, capping entries
// at g for finite granularities, and picks the candidate whose scaled mass is
// closest to the observed vector in log ratio.
ConflictResolution resolve_conflict(const ServiceVector& observed,
                                    const TimeWindow& window,
                                    std::span<const Fingerprint* const> candidates,
                                    Granularity g);

// Best-match classification of one window. Returns nullopt when the window
// holds no flows or the pool is empty.
std::optional<Prediction> classify_closed(std::span<const FlowRecord> device_flows,
                                          const TimeWindow& window,
                                          const FingerprintPool& pool,
                                          const ClassifyOptions& opts = {});

// Walks consecutive monitor windows after each device's converged window and
// re-exports when the device's similarity to its own fingerprints drops below
// the pool's theta. New fingerprints get increasing variant indices. Flows at
// or past training_end are ignored. Returns the number of variants added.
int augment_pool(FingerprintPool& pool, const DeviceFlows& devices,
                 double training_end, int monitor_window_days = 8);

// Fills pool.calibration from per-device self-similarity over consecutive
// windows anchored at each device's fingerprint anchor. Zero-flow windows are
// excluded; devices with fewer than two usable windows are marked unusable.
void calibrate_unknown_threshold(FingerprintPool& pool, const DeviceFlows& devices,
                                 int window_count = 26, int window_days = 8,
                                 double data_end = std::numeric_limits<double>::infinity());

// Closed-set match, then relabels to UNKNOWN when the similarity falls more
// than three sigma below the matched device's calibrated mean. Devices
// without usable calibration never reject.
std::optional<Prediction> classify_open(std::span<const FlowRecord> device_flows,
                                        const TimeWindow& window,
                                        const FingerprintPool& pool,
                                        const ClassifyOptions& opts = {});

} // namespace svcfp
