// metrics.hpp - confusion matrix and macro precision/recall
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace svcfp {

// Rows are true labels, columns predicted. Labels are sorted, except UNKNOWN
// which always sorts last when present.
struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<std::int64_t>> counts;

    std::int64_t at(const std::string& true_label,
                    const std::string& pred_label) const;
    // Each row divided by its sum; all-zero rows stay zero.
    std::vector<std::vector<double>> row_normalized() const;
};

ConfusionMatrix confusion(std::span<const std::string> truth,
                          std::span<const std::string> predicted);

struct MacroMetrics {
    double precision = 0.0;
    double recall = 0.0;
    // Per-class values for the classes present among true labels, in
    // confusion-matrix label order.
    std::vector<std::string> classes;
    std::vector<double> per_class_precision;
    std::vector<double> per_class_recall;
};

// Averages over classes that appear among the true labels. A class never
// predicted counts precision 0 rather than being dropped.
MacroMetrics macro_precision_recall(const ConfusionMatrix& cm);

} // namespace svcfp
