// pipeline.cpp - sliding-window runs over a trace and their CSV formats
#include "svcfp/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace svcfp {

namespace {

// Integral values (the common case: day-aligned starts, whole-valued scores)
// print without a fractional part so files stay byte-stable.
std::string format_value(double v) {
    char buf[64];
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) <= 9.0e15) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
    } else {
        std::snprintf(buf, sizeof buf, "%.9f", v);
    }
    return buf;
}

} // namespace

ClassifySpan derive_span(const DeviceFlows& devices, int window_days,
                         int slide_days, std::optional<double> start,
                         std::optional<double> end) {
    if (window_days <= 0 || slide_days <= 0) {
        throw std::invalid_argument("window and slide must be positive day counts");
    }
    double min_ts = std::numeric_limits<double>::infinity();
    double max_ts = -std::numeric_limits<double>::infinity();
    for (const auto& [id, flows] : devices) {
        if (flows.empty()) continue;
        min_ts = std::min(min_ts, static_cast<double>(flows.front().timestamp));
        max_ts = std::max(max_ts, static_cast<double>(flows.back().timestamp));
    }

    ClassifySpan span;
    span.window_days = window_days;
    span.slide_days = slide_days;

    double s;
    if (start) {
        s = *start;
    } else if (std::isfinite(min_ts)) {
        s = std::floor(min_ts / kSecondsPerDay) * kSecondsPerDay;
    } else {
        return span; // no flows and no explicit span: zero windows
    }
    double e;
    if (end) {
        e = *end;
    } else if (std::isfinite(max_ts)) {
        e = std::ceil((max_ts + 1.0) / kSecondsPerDay) * kSecondsPerDay;
    } else {
        return span;
    }

    span.start = s;
    double window_len = window_days * kSecondsPerDay;
    double slide_len = slide_days * kSecondsPerDay;
    if (e - s >= window_len) {
        span.window_count =
            static_cast<int>(std::floor((e - s - window_len) / slide_len)) + 1;
    }
    return span;
}

ClassifyRun run_classification(const DeviceFlows& devices,
                               const FingerprintPool& pool, ClassifyMode mode,
                               const ClassifySpan& span,
                               const ClassifyOptions& opts) {
    ClassifyRun run;
    double window_len = span.window_days * kSecondsPerDay;
    double slide_len = span.slide_days * kSecondsPerDay;

    // Open-set scoring groups every device outside the pool under the one
    // rejection label, so the matrix has a single unseen row.
    std::set<std::string> known;
    if (mode == ClassifyMode::Open) {
        for (const std::string& id : pool.device_ids()) known.insert(id);
    }

    std::vector<std::string> truth, predicted;
    for (const auto& [device_id, flows] : devices) {
        bool seen = mode != ClassifyMode::Open || known.count(device_id) != 0;
        for (int k = 0; k < span.window_count; ++k) {
            TimeWindow w{span.start + k * slide_len, window_len};
            std::optional<Prediction> p =
                mode == ClassifyMode::Open
                    ? classify_open(flows, w, pool, opts)
                    : classify_closed(flows, w, pool, opts);
            if (!p) {
                ++run.empty_windows;
                continue;
            }
            PredictionRow row;
            row.window_start = w.start;
            row.device_true = seen ? device_id : kUnknownLabel;
            row.device_pred = p->device_id;
            row.similarity = p->similarity;
            row.conflict = p->conflict;
            row.volume_score = p->volume_score;
            truth.push_back(row.device_true);
            predicted.push_back(row.device_pred);
            run.rows.push_back(std::move(row));
        }
    }
    run.matrix = confusion(truth, predicted);
    run.macro = macro_precision_recall(run.matrix);
    return run;
}

void write_predictions_csv(const std::string& path,
                           const std::vector<PredictionRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "window_start,device_true,device_pred,similarity,conflict,volume_score\n";
    char buf[64];
    for (const PredictionRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.9f", r.similarity);
        out << format_value(r.window_start) << ',' << r.device_true << ','
            << r.device_pred << ',' << buf << ',' << (r.conflict ? 1 : 0) << ',';
        std::snprintf(buf, sizeof buf, "%.9f", r.volume_score);
        out << buf << '\n';
    }
    if (!out) throw std::runtime_error("error writing " + path);
}

std::vector<PredictionRow> read_predictions_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open predictions file: " + path);
    std::vector<PredictionRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first && line.rfind("window_start,", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        std::array<std::string, 6> fields;
        std::size_t n = 0;
        std::stringstream ss(line);
        std::string field;
        while (n < 6 && std::getline(ss, field, ',')) fields[n++] = field;
        if (n != 6) {
            throw std::runtime_error("bad predictions row in " + path + ": " + line);
        }
        PredictionRow r;
        r.window_start = std::stod(fields[0]);
        r.device_true = fields[1];
        r.device_pred = fields[2];
        r.similarity = std::stod(fields[3]);
        r.conflict = fields[4] == "1";
        r.volume_score = std::stod(fields[5]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm,
                         bool normalized) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "true_label";
    for (const std::string& l : cm.labels) out << ',' << l;
    out << '\n';
    if (normalized) {
        auto norm = cm.row_normalized();
        char buf[32];
        for (std::size_t r = 0; r < norm.size(); ++r) {
            out << cm.labels[r];
            for (double v : norm[r]) {
                std::snprintf(buf, sizeof buf, "%.6f", v);
                out << ',' << buf;
            }
            out << '\n';
        }
    } else {
        for (std::size_t r = 0; r < cm.counts.size(); ++r) {
            out << cm.labels[r];
            for (std::int64_t v : cm.counts[r]) out << ',' << v;
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("error writing " + path);
}

} // namespace svcfp
