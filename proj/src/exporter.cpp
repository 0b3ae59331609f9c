// exporter.cpp - doubling-window search for a stable service-usage vector
#include "svcfp/exporter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace svcfp {

void validate(const ExportConfig& cfg) {
    if (!(cfg.initial_window_s > 0.0)) {
        throw std::invalid_argument("initial window must be positive");
    }
    if (cfg.max_iterations < 1) {
        throw std::invalid_argument("max iterations must be >= 1");
    }
    if (!(cfg.similarity_threshold > 0.0) || cfg.similarity_threshold > 1.0) {
        throw std::invalid_argument("similarity threshold must be in (0, 1]");
    }
    if (cfg.growth_threshold < 0.0) {
        throw std::invalid_argument("growth threshold must be >= 0");
    }
}

std::vector<TimeWindow> window_schedule(const ExportConfig& cfg) {
    validate(cfg);
    std::vector<TimeWindow> out;
    out.reserve(static_cast<std::size_t>(cfg.max_iterations) + 1);
    double len = cfg.initial_window_s;
    for (int i = 0; i <= cfg.max_iterations; ++i) {
        out.push_back(TimeWindow{cfg.anchor_time, len});
        len *= 2.0;
    }
    return out;
}

namespace {

std::int64_t count_in_window(std::span<const FlowRecord> flows,
                             const TimeWindow& w) {
    auto cmp = [](const FlowRecord& r, double t) {
        return static_cast<double>(r.timestamp) < t;
    };
    auto first = std::lower_bound(flows.begin(), flows.end(), w.start, cmp);
    auto last = std::lower_bound(first, flows.end(), w.end(), cmp);
    return static_cast<std::int64_t>(last - first);
}

} // namespace

ExportOutcome export_fingerprint(std::span<const FlowRecord> device_flows,
                                 const std::string& device_id,
                                 const ExportConfig& cfg) {
    validate(cfg);

    std::int64_t n_ref = 0;
    std::optional<ServiceVector> r_ref;
    std::optional<double> last_sim;

    // The anchor window seeds the reference; iterations are the doubling
    // steps after it, so an exhausted search reports max_iterations.
    for (const TimeWindow& w : window_schedule(cfg)) {
        std::int64_t n = count_in_window(device_flows, w);

        // Skip the recompute while the window's flow count has not grown
        // enough over the reference; doubling continues regardless.
        double grown = static_cast<double>(n - n_ref);
        if (grown > cfg.growth_threshold * static_cast<double>(n_ref)) {
            auto obs = slice_window(device_flows, w);
            ServiceVector r = repr_g(obs, w, cfg.g);
            if (r_ref && l1_norm(*r_ref) > 0.0) {
                double sim = cosine_similarity(*r_ref, r);
                last_sim = sim;
                if (sim > cfg.similarity_threshold) {
                    Fingerprint fp;
                    fp.device_id = device_id;
                    fp.vector = std::move(r);
                    fp.config = cfg;
                    return fp;
                }
            }
            r_ref = std::move(r);
            n_ref = n;
        }
    }
    return DidNotConverge{cfg.max_iterations, last_sim};
}

ExportRunResult export_all(const DeviceFlows& flows, const ExportConfig& cfg) {
    ExportRunResult out;
    for (const auto& [device_id, recs] : flows) {
        ExportOutcome outcome = export_fingerprint(recs, device_id, cfg);
        if (auto* fp = std::get_if<Fingerprint>(&outcome)) {
            out.fingerprints.push_back(std::move(*fp));
        } else {
            out.failures.emplace(device_id, std::get<DidNotConverge>(outcome));
        }
    }
    return out;
}

} // namespace svcfp
