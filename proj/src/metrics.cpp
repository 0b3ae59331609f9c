// metrics.cpp - confusion matrices and macro-averaged precision/recall
#include "svcfp/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace svcfp {

namespace {

constexpr const char* kUnknown = "UNKNOWN";

std::size_t label_index(const std::vector<std::string>& labels,
                        const std::string& label) {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
        throw std::out_of_range("label not in confusion matrix: " + label);
    }
    return static_cast<std::size_t>(it - labels.begin());
}

} // namespace

std::int64_t ConfusionMatrix::at(const std::string& true_label,
                                 const std::string& pred_label) const {
    return counts[label_index(labels, true_label)]
                 [label_index(labels, pred_label)];
}

std::vector<std::vector<double>> ConfusionMatrix::row_normalized() const {
    std::vector<std::vector<double>> out(labels.size(),
                                         std::vector<double>(labels.size(), 0.0));
    for (std::size_t r = 0; r < counts.size(); ++r) {
        std::int64_t row_sum = 0;
        for (std::int64_t c : counts[r]) row_sum += c;
        if (row_sum == 0) continue;
        for (std::size_t c = 0; c < counts[r].size(); ++c) {
            out[r][c] = static_cast<double>(counts[r][c]) /
                        static_cast<double>(row_sum);
        }
    }
    return out;
}

ConfusionMatrix confusion(std::span<const std::string> truth,
                          std::span<const std::string> predicted) {
    if (truth.size() != predicted.size()) {
        throw std::invalid_argument("truth and prediction lengths differ");
    }
    std::set<std::string> label_set(truth.begin(), truth.end());
    label_set.insert(predicted.begin(), predicted.end());

    ConfusionMatrix cm;
    bool has_unknown = label_set.erase(kUnknown) > 0;
    cm.labels.assign(label_set.begin(), label_set.end());
    if (has_unknown) cm.labels.push_back(kUnknown); // rejects sort last

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < cm.labels.size(); ++i) index[cm.labels[i]] = i;

    cm.counts.assign(cm.labels.size(),
                     std::vector<std::int64_t>(cm.labels.size(), 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ++cm.counts[index[truth[i]]][index[predicted[i]]];
    }
    return cm;
}

MacroMetrics macro_precision_recall(const ConfusionMatrix& cm) {
    MacroMetrics m;
    std::size_t n = cm.labels.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::int64_t row_sum = 0, col_sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            row_sum += cm.counts[i][j];
            col_sum += cm.counts[j][i];
        }
        if (row_sum == 0) continue; // class absent from the true labels

        double diag = static_cast<double>(cm.counts[i][i]);
        m.classes.push_back(cm.labels[i]);
        m.per_class_recall.push_back(diag / static_cast<double>(row_sum));
        m.per_class_precision.push_back(
            col_sum == 0 ? 0.0 : diag / static_cast<double>(col_sum));
    }
    if (!m.classes.empty()) {
        double p = 0.0, r = 0.0;
        for (double v : m.per_class_precision) p += v;
        for (double v : m.per_class_recall) r += v;
        m.precision = p / static_cast<double>(m.classes.size());
        m.recall = r / static_cast<double>(m.classes.size());
    }
    return m;
}

} // namespace svcfp
