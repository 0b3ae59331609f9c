// evaluation.cpp - sweeps over (theta, g), recurrence and period statistics
#include "svcfp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace svcfp {

SweepGrid SweepGrid::defaults() {
    SweepGrid grid;
    for (std::uint32_t g = 1; g <= 4096; g *= 2) {
        grid.g_values.push_back(Granularity::finite(g));
    }
    grid.g_values.push_back(Granularity::infinite());
    grid.theta_values = {0.80, 0.85, 0.90, 0.95, 0.99};
    return grid;
}

ConvergenceMatrix convergence_fraction(const DeviceFlows& devices,
                                       const SweepGrid& grid,
                                       const ExportConfig& base) {
    if (devices.empty()) {
        throw std::invalid_argument("convergence fraction needs at least one device");
    }
    if (grid.theta_values.empty() || grid.g_values.empty()) {
        throw std::invalid_argument("sweep grid must not be empty");
    }
    ConvergenceMatrix m;
    m.theta_values = grid.theta_values;
    m.g_values = grid.g_values;
    m.fraction.assign(grid.theta_values.size(),
                      std::vector<double>(grid.g_values.size(), 0.0));

    for (std::size_t ti = 0; ti < grid.theta_values.size(); ++ti) {
        for (std::size_t gi = 0; gi < grid.g_values.size(); ++gi) {
            ExportConfig cfg = base;
            cfg.similarity_threshold = grid.theta_values[ti];
            cfg.g = grid.g_values[gi];
            int converged = 0;
            for (const auto& [id, recs] : devices) {
                if (std::holds_alternative<Fingerprint>(
                        export_fingerprint(recs, id, cfg))) {
                    ++converged;
                }
            }
            m.fraction[ti][gi] =
                static_cast<double>(converged) / static_cast<double>(devices.size());
        }
    }
    return m;
}

double RecurrenceResult::mean() const {
    if (scores.empty()) return 0.0;
    double sum = 0.0;
    for (double s : scores) sum += s;
    return sum / static_cast<double>(scores.size());
}

RecurrenceResult recurrence_scores(const Fingerprint& fp,
                                   std::span<const FlowRecord> device_flows,
                                   int window_days, int window_count,
                                   double data_end) {
    if (window_days <= 0 || window_count < 0) {
        throw std::invalid_argument("recurrence window parameters must be positive");
    }
    RecurrenceResult out;
    out.requested = window_count;
    double anchor = fp.converged_window().end();
    double len = window_days * kSecondsPerDay;
    for (int k = 0; k < window_count; ++k) {
        TimeWindow w{anchor + k * len, len};
        if (w.end() > data_end) break;
        auto obs = slice_window(device_flows, w);
        if (obs.empty()) {
            out.scores.push_back(0.0);
            out.zero_flow.push_back(true);
            continue;
        }
        ServiceVector r = repr_g(obs, w, fp.config.g);
        out.scores.push_back(cosine_similarity(fp.vector, r));
        out.zero_flow.push_back(false);
    }
    return out;
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double pct) {
    if (sorted.empty()) return 0.0;
    auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

} // namespace

PeriodPercentiles period_distribution(std::span<const Fingerprint> fingerprints) {
    if (fingerprints.empty()) {
        throw std::invalid_argument("period distribution needs at least one fingerprint");
    }
    std::vector<double> days;
    days.reserve(fingerprints.size());
    for (const Fingerprint& fp : fingerprints) {
        days.push_back(fp.inferred_period_s() / kSecondsPerDay);
    }
    std::sort(days.begin(), days.end());
    PeriodPercentiles p;
    p.p50_days = nearest_rank(days, 50.0);
    p.p80_days = nearest_rank(days, 80.0);
    p.p90_days = nearest_rank(days, 90.0);
    return p;
}

const SweepCell& SweepReport::cell(std::size_t theta_idx, std::size_t g_idx) const {
    return cells.at(theta_idx * grid.g_values.size() + g_idx);
}

SweepReport run_sweep(const DeviceFlows& devices, const SweepGrid& grid,
                      const ExportConfig& base, int recur_window_days,
                      int recur_window_count, double data_end) {
    if (devices.empty()) {
        throw std::invalid_argument("sweep needs at least one device");
    }
    if (grid.theta_values.empty() || grid.g_values.empty()) {
        throw std::invalid_argument("sweep grid must not be empty");
    }
    SweepReport report;
    report.grid = grid;
    report.convergence.theta_values = grid.theta_values;
    report.convergence.g_values = grid.g_values;
    report.convergence.fraction.assign(
        grid.theta_values.size(), std::vector<double>(grid.g_values.size(), 0.0));
    report.avg_recurrence.assign(
        grid.theta_values.size(),
        std::vector<double>(grid.g_values.size(),
                            std::numeric_limits<double>::quiet_NaN()));

    for (std::size_t ti = 0; ti < grid.theta_values.size(); ++ti) {
        for (std::size_t gi = 0; gi < grid.g_values.size(); ++gi) {
            SweepCell cell;
            cell.theta = grid.theta_values[ti];
            cell.g = grid.g_values[gi];

            ExportConfig cfg = base;
            cfg.similarity_threshold = cell.theta;
            cfg.g = cell.g;

            double mean_sum = 0.0;
            std::vector<double> period_days;
            for (const auto& [id, recs] : devices) {
                ExportOutcome outcome = export_fingerprint(recs, id, cfg);
                auto* fp = std::get_if<Fingerprint>(&outcome);
                if (!fp) continue;
                ++cell.converged_count;
                DeviceRecurrence dr;
                dr.device_id = id;
                RecurrenceResult rr = recurrence_scores(
                    *fp, recs, recur_window_days, recur_window_count, data_end);
                dr.scores = rr.scores;
                dr.mean = rr.mean();
                mean_sum += dr.mean;
                cell.recurrence.push_back(std::move(dr));
                period_days.push_back(fp->inferred_period_s() / kSecondsPerDay);
            }
            if (!devices.empty()) {
                cell.convergence_fraction =
                    static_cast<double>(cell.converged_count) /
                    static_cast<double>(devices.size());
            }
            if (cell.converged_count > 0) {
                cell.avg_recurrence =
                    mean_sum / static_cast<double>(cell.converged_count);
                std::sort(period_days.begin(), period_days.end());
                PeriodPercentiles p;
                p.p50_days = nearest_rank(period_days, 50.0);
                p.p80_days = nearest_rank(period_days, 80.0);
                p.p90_days = nearest_rank(period_days, 90.0);
                cell.periods = p;
            }

            report.convergence.fraction[ti][gi] = cell.convergence_fraction;
            if (cell.avg_recurrence) {
                report.avg_recurrence[ti][gi] = *cell.avg_recurrence;
            }
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

} // namespace svcfp
