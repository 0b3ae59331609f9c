// evaluation.hpp - convergence sweeps, recurrence scores, period distribution
#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svcfp/exporter.hpp"

namespace svcfp {

struct SweepGrid {
    std::vector<Granularity> g_values;
    std::vector<double> theta_values;

    // g in {1, 2, 4, ..., 4096, inf}; theta in {0.80, 0.85, 0.90, 0.95, 0.99}.
    static SweepGrid defaults();
};

// Fraction of devices whose export converged, per (theta, g) cell.
// Rows follow theta_values, columns follow g_values.
struct ConvergenceMatrix {
    std::vector<double> theta_values;
    std::vector<Granularity> g_values;
    std::vector<std::vector<double>> fraction;

    double at(std::size_t theta_idx, std::size_t g_idx) const {
        return fraction[theta_idx][g_idx];
    }
};

// base supplies anchor/L0/i_max/delta; theta and g come from the grid.
ConvergenceMatrix convergence_fraction(const DeviceFlows& devices,
                                       const SweepGrid& grid,
                                       const ExportConfig& base);

struct RecurrenceResult {
    std::vector<double> scores;  // one per computed window
    std::vector<bool> zero_flow; // flags windows scored 0 for lack of flows
    int requested = 0;

    int shortfall() const { return requested - static_cast<int>(scores.size()); }
    double mean() const;
};

// Cosine similarity between the fingerprint and consecutive fixed-length
// windows that tile the span following its converged window. Windows
// extending past data_end are not computed (shortfall); windows inside the
// span but without flows score 0 and are flagged.
RecurrenceResult recurrence_scores(
    const Fingerprint& fp, std::span<const FlowRecord> device_flows,
    int window_days = 8, int window_count = 18,
    double data_end = std::numeric_limits<double>::infinity());

struct PeriodPercentiles {
    double p50_days = 0.0;
    double p80_days = 0.0;
    double p90_days = 0.0;
};

// Nearest-rank percentiles of the fingerprints' inferred periods, in days.
PeriodPercentiles period_distribution(std::span<const Fingerprint> fingerprints);

struct DeviceRecurrence {
    std::string device_id;
    std::vector<double> scores;
    double mean = 0.0;
};

struct SweepCell {
    double theta = 0.0;
    Granularity g = Granularity::finite(1);
    double convergence_fraction = 0.0;
    int converged_count = 0;
    std::vector<DeviceRecurrence> recurrence;        // converged devices only
    std::optional<double> avg_recurrence;            // mean of per-device means
    std::optional<PeriodPercentiles> periods;
};

struct SweepReport {
    SweepGrid grid;
    std::vector<SweepCell> cells; // theta-major, matching grid order
    ConvergenceMatrix convergence;
    std::vector<std::vector<double>> avg_recurrence; // NaN where no device converged

    const SweepCell& cell(std::size_t theta_idx, std::size_t g_idx) const;
};

// Runs the exporter for every (theta, g) cell and scores recurrence of the
// converged fingerprints. Deterministic: cells and devices are processed in
// grid and device-id order.
SweepReport run_sweep(const DeviceFlows& devices, const SweepGrid& grid,
                      const ExportConfig& base, int recur_window_days = 8,
                      int recur_window_count = 18,
                      double data_end = std::numeric_limits<double>::infinity());

} // namespace svcfp
