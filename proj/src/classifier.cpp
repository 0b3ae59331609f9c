// classifier.cpp - pool matching, volume tie-breaks, drift augmentation,
// similarity calibration for open-set rejection
#include "svcfp/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace svcfp {

std::vector<std::string> FingerprintPool::device_ids() const {
    std::set<std::string> ids;
    for (const Fingerprint& fp : fingerprints) ids.insert(fp.device_id);
    return {ids.begin(), ids.end()};
}

std::vector<const Fingerprint*> FingerprintPool::device_fingerprints(
    const std::string& id) const {
    std::vector<const Fingerprint*> out;
    for (const Fingerprint& fp : fingerprints) {
        if (fp.device_id == id) out.push_back(&fp);
    }
    return out;
}

ConflictResolution resolve_conflict(const ServiceVector& observed,
                                    const TimeWindow& window,
                                    std::span<const Fingerprint* const> candidates,
                                    Granularity g) {
    if (candidates.empty()) {
        throw std::invalid_argument("conflict resolution needs candidates");
    }
    ConflictResolution res;
    res.scores.reserve(candidates.size());
    double obs_mass = l1_norm(observed);
    if (!(obs_mass > 0.0)) {
        throw std::invalid_argument("conflict resolution needs a nonzero window vector");
    }

    for (const Fingerprint* fp : candidates) {
        double fp_duration = fp->converged_window().duration;
        double alpha = window.duration / fp_duration;
        // The fingerprint's mass projected onto the window's length; each
        // entry stays bounded by the sub-window count it could occupy.
        double scaled = 0.0;
        for (const auto& [idx, val] : fp->vector.entries) {
            double v = val * alpha;
            if (!g.is_infinite()) {
                v = std::min(v, static_cast<double>(g.value()));
            }
            scaled += v;
        }
        double score = std::numeric_limits<double>::infinity();
        if (scaled > 0.0) {
            double l = std::log(obs_mass / scaled);
            score = l * l;
        }
        res.scores.push_back(score);
    }

    res.winner_index = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        double s = res.scores[i];
        double w = res.scores[res.winner_index];
        if (s < w) {
            res.winner_index = i;
        } else if (s == w) {
            const Fingerprint* a = candidates[i];
            const Fingerprint* b = candidates[res.winner_index];
            if (a->device_id < b->device_id ||
                (a->device_id == b->device_id &&
                 a->variant_index < b->variant_index)) {
                res.winner_index = i;
            }
        }
    }
    return res;
}

std::optional<Prediction> classify_closed(std::span<const FlowRecord> device_flows,
                                          const TimeWindow& window,
                                          const FingerprintPool& pool,
                                          const ClassifyOptions& opts) {
    if (pool.fingerprints.empty()) return std::nullopt;
    auto obs = slice_window(device_flows, window);
    if (obs.empty()) return std::nullopt;

    ServiceVector r = repr_g(obs, window, pool.g());

    std::vector<double> sims(pool.fingerprints.size(), 0.0);
    double best = -1.0;
    for (std::size_t i = 0; i < pool.fingerprints.size(); ++i) {
        sims[i] = cosine_similarity(pool.fingerprints[i].vector, r);
        best = std::max(best, sims[i]);
    }

    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        if (sims[i] >= best - opts.tie_tolerance) cand.push_back(i);
    }

    std::set<std::string_view> cand_devices;
    for (std::size_t i : cand) {
        cand_devices.insert(pool.fingerprints[i].device_id);
    }

    Prediction p;
    if (cand_devices.size() == 1) {
        // Variants of one device may tie with themselves; that is not a
        // conflict, the best-scoring variant speaks for the device.
        std::size_t w = cand.front();
        for (std::size_t i : cand) {
            if (sims[i] > sims[w]) w = i;
        }
        p.device_id = pool.fingerprints[w].device_id;
        p.similarity = sims[w];
        return p;
    }

    p.conflict = true;
    if (!opts.use_volume_tiebreak) {
        std::string_view dev = *cand_devices.begin();
        p.device_id = std::string(dev);
        for (std::size_t i : cand) {
            if (pool.fingerprints[i].device_id == dev) {
                p.similarity = std::max(p.similarity, sims[i]);
            }
        }
        return p;
    }

    std::vector<const Fingerprint*> ptrs;
    ptrs.reserve(cand.size());
    for (std::size_t i : cand) ptrs.push_back(&pool.fingerprints[i]);
    ConflictResolution res = resolve_conflict(r, window, ptrs, pool.g());
    std::size_t w = cand[res.winner_index];
    p.device_id = pool.fingerprints[w].device_id;
    p.similarity = sims[w];
    p.volume_score = res.scores[res.winner_index];
    return p;
}

int augment_pool(FingerprintPool& pool, const DeviceFlows& devices,
                 double training_end, int monitor_window_days) {
    if (monitor_window_days <= 0) {
        throw std::invalid_argument("monitor window must be positive");
    }
    int added_total = 0;
    double len = monitor_window_days * kSecondsPerDay;
    std::vector<Fingerprint> added;

    for (const std::string& id : pool.device_ids()) {
        auto flows_it = devices.find(id);
        if (flows_it == devices.end()) continue;
        std::span<const FlowRecord> flows(flows_it->second);

        // Clip what the exporter may see: nothing at or past training_end.
        auto clip_end = std::lower_bound(
            flows.begin(), flows.end(), training_end,
            [](const FlowRecord& rec, double t) {
                return static_cast<double>(rec.timestamp) < t;
            });
        auto train_flows = flows.first(static_cast<std::size_t>(clip_end - flows.begin()));

        std::vector<Fingerprint> variants;
        for (const Fingerprint* fp : pool.device_fingerprints(id)) {
            variants.push_back(*fp);
        }
        // Monitoring always walks forward from where the device's first
        // export settled; windows already covered by later variants simply
        // score high and pass.
        const Fingerprint* initial = &variants.front();
        for (const Fingerprint& fp : variants) {
            if (fp.variant_index < initial->variant_index) initial = &fp;
        }
        double pos = initial->converged_window().end();

        while (pos + len <= training_end) {
            TimeWindow w{pos, len};
            auto obs = slice_window(train_flows, w);
            if (obs.empty()) {
                pos = w.end();
                continue;
            }
            ServiceVector r = repr_g(obs, w, pool.g());
            double sim = 0.0;
            for (const Fingerprint& fp : variants) {
                sim = std::max(sim, cosine_similarity(fp.vector, r));
            }
            if (sim >= pool.theta()) {
                pos = w.end();
                continue;
            }
            // Usage drifted away from every variant: restart the export at
            // the window that broke.
            ExportConfig cfg = pool.config;
            cfg.anchor_time = w.start;
            ExportOutcome outcome = export_fingerprint(train_flows, id, cfg);
            if (auto* fp = std::get_if<Fingerprint>(&outcome)) {
                fp->variant_index = static_cast<int>(variants.size());
                pos = fp->converged_window().end();
                variants.push_back(*fp);
                added.push_back(std::move(*fp));
                ++added_total;
            } else {
                pos = w.end();
            }
        }
    }

    for (Fingerprint& fp : added) pool.fingerprints.push_back(std::move(fp));
    std::sort(pool.fingerprints.begin(), pool.fingerprints.end(),
              [](const Fingerprint& a, const Fingerprint& b) {
                  if (a.device_id != b.device_id) return a.device_id < b.device_id;
                  return a.variant_index < b.variant_index;
              });
    return added_total;
}

void calibrate_unknown_threshold(FingerprintPool& pool, const DeviceFlows& devices,
                                 int window_count, int window_days,
                                 double data_end) {
    if (window_count < 0 || window_days <= 0) {
        throw std::invalid_argument("calibration window parameters out of range");
    }
    pool.calibration.clear();
    double len = window_days * kSecondsPerDay;

    for (const std::string& id : pool.device_ids()) {
        CalibrationStats stats;
        auto flows_it = devices.find(id);
        auto variants = pool.device_fingerprints(id);
        if (flows_it == devices.end() || variants.empty()) {
            pool.calibration.emplace(id, stats);
            continue;
        }
        std::span<const FlowRecord> flows(flows_it->second);

        // The walk starts where the device's first export was anchored.
        double anchor = variants.front()->config.anchor_time;
        for (const Fingerprint* fp : variants) {
            if (fp->variant_index == 0) anchor = fp->config.anchor_time;
        }

        std::vector<double> sims;
        for (int k = 0; k < window_count; ++k) {
            TimeWindow w{anchor + k * len, len};
            if (w.end() > data_end) break;
            auto obs = slice_window(flows, w);
            if (obs.empty()) {
                ++stats.zero_windows;
                continue;
            }
            ServiceVector r = repr_g(obs, w, pool.g());
            double sim = 0.0;
            for (const Fingerprint* fp : variants) {
                sim = std::max(sim, cosine_similarity(fp->vector, r));
            }
            sims.push_back(sim);
        }

        stats.windows_used = static_cast<int>(sims.size());
        stats.usable = sims.size() >= 2;
        if (stats.usable) {
            double sum = 0.0;
            for (double s : sims) sum += s;
            stats.mu = sum / static_cast<double>(sims.size());
            double sq = 0.0;
            for (double s : sims) sq += (s - stats.mu) * (s - stats.mu);
            stats.sigma = std::sqrt(sq / static_cast<double>(sims.size() - 1));
        }
        pool.calibration.emplace(id, stats);
    }
}

std::optional<Prediction> classify_open(std::span<const FlowRecord> device_flows,
                                        const TimeWindow& window,
                                        const FingerprintPool& pool,
                                        const ClassifyOptions& opts) {
    auto p = classify_closed(device_flows, window, pool, opts);
    if (!p) return p;
    auto cal = pool.calibration.find(p->device_id);
    if (cal != pool.calibration.end() && cal->second.usable &&
        p->similarity < cal->second.mu - 3.0 * cal->second.sigma) {
        p->device_id = kUnknownLabel;
    }
    return p;
}

} // namespace svcfp
