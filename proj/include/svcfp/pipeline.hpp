// pipeline.hpp - sliding-window classification runs and their file formats
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svcfp/classifier.hpp"
#include "svcfp/metrics.hpp"

namespace svcfp {

struct PredictionRow {
    double window_start = 0.0;
    std::string device_true;
    std::string device_pred;
    double similarity = 0.0;
    bool conflict = false;
    double volume_score = 0.0;
};

enum class ClassifyMode { Closed, Open };

struct ClassifySpan {
    double start = 0.0;
    int window_days = 8;
    int slide_days = 1;
    int window_count = 0;
};

// Day-aligned span covering the data: start floors the earliest flow, the
// window count is however many full windows fit before the latest flow's day
// ceiling. Overrides pin start or end explicitly.
ClassifySpan derive_span(const DeviceFlows& devices, int window_days = 8,
                         int slide_days = 1,
                         std::optional<double> start = std::nullopt,
                         std::optional<double> end = std::nullopt);

struct ClassifyRun {
    std::vector<PredictionRow> rows; // device-major, then window order
    ConfusionMatrix matrix;
    MacroMetrics macro;
    int empty_windows = 0; // windows skipped for having no flows
};

ClassifyRun run_classification(const DeviceFlows& devices,
                               const FingerprintPool& pool, ClassifyMode mode,
                               const ClassifySpan& span,
                               const ClassifyOptions& opts = {});

void write_predictions_csv(const std::string& path,
                           const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> read_predictions_csv(const std::string& path);

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm,
                         bool normalized = false);

} // namespace svcfp
